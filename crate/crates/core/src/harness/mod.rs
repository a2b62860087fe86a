//! Configuration, experiments, sweeps and artifacts.

mod config;
mod experiment;
pub mod serde_inf;
mod sweep;

pub use config::{
    load_instance, AlgorithmSpec, AuditMethod, AuditSpec, ExperimentConfig, InstanceSpec, Seeds,
};
pub use experiment::{
    build_strategy, execute, run_experiment, write_trace_csv, AuditSummary, Experiment, Summary,
    TRACE_HEADER,
};
pub use sweep::{sweep, write_sweep_csv, Axis, SweepRow, SWEEP_HEADER};
