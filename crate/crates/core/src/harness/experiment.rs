//! End-to-end experiment runs and their artifacts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{AlgorithmSpec, AuditMethod, ExperimentConfig};
use crate::algos::{
    build_schedule, run_algorithm, PhaseSchedule, ProblemInstance, RunTrace, ScheduledStrategy,
};
use crate::audit::{bic_margins_exact_with, bic_margins_mc, BICReport, ExactConfig, Method};
use crate::error::{Error, Result};
use crate::params::{floor_for, prior_params, LayoutParams, PriorParams};
use crate::rng::replica_seed;

pub const TRACE_HEADER: [&str; 6] = ["t", "phase", "label", "action", "arm", "reward"];

/// Audit outcome recorded in the summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub method: Method,
    pub samples: u64,
    pub min_margin: f64,
    /// `(t, k, j)` of the smallest margin, 1-based.
    pub worst: Option<(usize, usize, usize)>,
    pub floor: f64,
    pub passed: bool,
}

/// Aggregates written to `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: String,
    pub config_sha256: String,
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub replicas: u64,
    pub k: usize,
    pub n_used: Option<usize>,
    pub schedule_rounds: u64,
    pub total_rounds: usize,
    /// Smallest pull count of each arm over all runs.
    pub min_pulls: Vec<usize>,
    pub mean_pulls: Vec<f64>,
    /// Runs in which every arm has at least `n_used` pulls.
    pub runs_meeting_n: u64,
    /// Mean of `sum_t (mu_best - mu_{A_t})` over runs.
    pub mean_regret: f64,
    pub regret_se: f64,
    pub audit: Option<AuditSummary>,
}

/// Everything an experiment produces, before it is written.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub params: Option<PriorParams>,
    pub params_error: Option<String>,
    pub schedule: PhaseSchedule,
    pub strategy: ScheduledStrategy,
    pub traces: Vec<RunTrace>,
    pub report: Option<BICReport>,
    pub summary: Summary,
}

/// Build the strategy of a config: the schedule (if any), followed by Thompson
/// sampling up to the horizon.
pub fn build_strategy(
    cfg: &ExperimentConfig,
    inst: &ProblemInstance,
    params: Option<&PriorParams>,
) -> Result<(ScheduledStrategy, Option<usize>)> {
    let k = inst.k();
    let (schedule, n_used) = match cfg.algorithm.scheduled() {
        Some(alg) => {
            let params = params.ok_or_else(|| {
                Error::Config("parameters unavailable for a scheduled algorithm".into())
            })?;
            let layout = LayoutParams::from_params(params)?;
            let n = cfg.n.unwrap_or(1).max(floor_for(&layout, alg)).max(1);
            (build_schedule(inst, params, n, alg)?, Some(n))
        }
        None if cfg.algorithm == AlgorithmSpec::RoundRobin => {
            let n = cfg.n.unwrap_or(1);
            (PhaseSchedule::round_robin(k, n)?, Some(n))
        }
        None => (PhaseSchedule::empty(k), None),
    };
    let horizon = cfg.horizon.unwrap_or(schedule.total_rounds as usize);
    Ok((ScheduledStrategy::warm_start(schedule, horizon)?, n_used))
}

fn audit(
    cfg: &ExperimentConfig,
    inst: &ProblemInstance,
    strategy: &ScheduledStrategy,
) -> Result<Option<BICReport>> {
    let a = &cfg.audit;
    let exact = || -> Result<BICReport> {
        Ok(bic_margins_exact_with(inst, strategy, &ExactConfig { cap: a.cap }, None)?.report)
    };
    let mc = || bic_margins_mc(inst, strategy, a.replicas, cfg.seeds.master);
    Ok(match a.method {
        AuditMethod::None => None,
        AuditMethod::Exact => Some(exact()?),
        AuditMethod::Mc => Some(mc()?),
        AuditMethod::Auto => match exact() {
            Err(Error::EnumerationTooLarge(_)) => Some(mc()?),
            r => Some(r?),
        },
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Compute parameters, build and run the strategy, and audit it.
pub fn execute(cfg: &ExperimentConfig) -> Result<Experiment> {
    cfg.validate()?;
    let inst = cfg.build_instance()?;
    let (params, params_error) = match prior_params(&inst, &cfg.constants) {
        Ok(p) => (Some(p), None),
        Err(e) if cfg.algorithm.scheduled().is_none() => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let (strategy, n_used) = build_strategy(cfg, &inst, params.as_ref())?;
    let master = cfg.seeds.master;
    let traces: Vec<RunTrace> = (0..cfg.seeds.replicas)
        .into_par_iter()
        .map(|r| run_algorithm(&inst, &strategy, replica_seed(master, r)))
        .collect::<Result<_>>()?;
    let report = audit(cfg, &inst, &strategy)?;
    let k = inst.k();
    let runs = traces.len() as f64;
    let min_pulls = (0..k)
        .map(|i| traces.iter().map(|t| t.pulls[i]).min().unwrap_or(0))
        .collect();
    let mean_pulls = (0..k)
        .map(|i| traces.iter().map(|t| t.pulls[i] as f64).sum::<f64>() / runs)
        .collect();
    let need = n_used.unwrap_or(0);
    let runs_meeting_n = traces
        .iter()
        .filter(|t| t.pulls.iter().all(|&p| p >= need))
        .count() as u64;
    let mean_regret = traces.iter().map(|t| t.regret).sum::<f64>() / runs;
    let var = if traces.len() > 1 {
        traces
            .iter()
            .map(|t| (t.regret - mean_regret).powi(2))
            .sum::<f64>()
            / (runs - 1.0)
    } else {
        0.0
    };
    let audit = report.as_ref().map(|r| {
        let z = (r.method == Method::Mc).then_some(cfg.audit.z);
        let worst = r
            .worst()
            .map(|(p, k, j, _)| (r.phase_starts[p] + 1, k + 1, j + 1));
        AuditSummary {
            method: r.method,
            samples: r.samples,
            min_margin: r.min_margin(),
            worst,
            floor: cfg.audit.floor,
            passed: r.passes(cfg.audit.floor, z),
        }
    });
    let config_json = serde_json::to_vec(cfg)?;
    let summary = Summary {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256_hex(&config_json),
        config: cfg.clone(),
        master_seed: master,
        replicas: cfg.seeds.replicas,
        k,
        n_used,
        schedule_rounds: strategy.schedule.total_rounds,
        total_rounds: strategy.schedule.total_rounds as usize + strategy.thompson,
        min_pulls,
        mean_pulls,
        runs_meeting_n,
        mean_regret,
        regret_se: (var / runs).sqrt(),
        audit,
    };
    Ok(Experiment {
        params,
        params_error,
        schedule: strategy.schedule.clone(),
        strategy,
        traces,
        report,
        summary,
    })
}

pub fn write_trace_csv<W: Write>(trace: &RunTrace, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for r in trace.rounds() {
        out.write_record([
            (r.t + 1).to_string(),
            (r.phase + 1).to_string(),
            r.label,
            r.action.as_str().to_string(),
            (r.arm + 1).to_string(),
            u8::from(r.reward).to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("trace", e))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_artifacts(exp: &Experiment, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("traces")).map_err(|e| Error::io(dir, e))?;
    match &exp.params {
        Some(p) => write_json(&dir.join("params.json"), p)?,
        None => write_json(
            &dir.join("params.json"),
            &serde_json::json!({ "error": exp.params_error }),
        )?,
    }
    write_json(&dir.join("schedule.json"), &exp.schedule)?;
    for (r, t) in exp
        .traces
        .iter()
        .take(exp.summary.config.trace_limit)
        .enumerate()
    {
        let path = dir.join("traces").join(format!("run_{r:05}.csv"));
        let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_trace_csv(t, std::io::BufWriter::new(f))?;
    }
    let path = dir.join("bic_report.csv");
    let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    match &exp.report {
        Some(r) => r.write_csv(std::io::BufWriter::new(f))?,
        None => {
            let mut w = csv::Writer::from_writer(f);
            w.write_record(["t", "k", "j", "margin", "se"])?;
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
    }
    write_json(&dir.join("summary.json"), &exp.summary)
}

/// Run an experiment and write `params.json`, `schedule.json`, `traces/*.csv`,
/// `bic_report.csv` and `summary.json` into `out` (or the configured directory).
/// Artifacts are staged next to the target and moved into place only on success.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Summary> {
    let dir: PathBuf = match (out, &cfg.out) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => cfg.base_dir.join(o),
        (None, None) => return Err(Error::Config("no output directory".into())),
    };
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let stage = dir.with_file_name(format!(".{name}.partial"));
    let result = execute(cfg).map_err(|e| context(cfg, e)).and_then(|exp| {
        if stage.exists() {
            fs::remove_dir_all(&stage).map_err(|e| Error::io(&stage, e))?;
        }
        write_artifacts(&exp, &stage)?;
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::rename(&stage, &dir).map_err(|e| Error::io(&dir, e))?;
        Ok(exp.summary)
    });
    if result.is_err() && stage.exists() {
        let _ = fs::remove_dir_all(&stage);
    }
    result
}

fn context(cfg: &ExperimentConfig, e: Error) -> Error {
    match e {
        Error::InvalidPrior(m) => {
            Error::InvalidPrior(format!("{m} (config in {})", cfg.base_dir.display()))
        }
        Error::Config(m) => Error::Config(format!("{m} (config in {})", cfg.base_dir.display())),
        other => other,
    }
}
