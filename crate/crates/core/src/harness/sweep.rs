//! One-axis parameter sweeps.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, InstanceSpec};
use crate::error::{Error, Result};
use crate::params::{
    classify_easy_hard, lower_bound_with, prior_params, upper_bound_rounds, Algorithm, LayoutParams,
};

pub const SWEEP_HEADER: [&str; 14] = [
    "axis",
    "value",
    "k",
    "n",
    "rounds_budget",
    "main_lb",
    "n_boot",
    "p_boot",
    "g_pad",
    "n_pad",
    "n_ts",
    "easy",
    "hard",
    "error",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    K,
    M,
    N,
    Sigma,
    Delta,
}

impl std::str::FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "K" | "k" => Ok(Axis::K),
            "M" | "m" => Ok(Axis::M),
            "N" | "n" => Ok(Axis::N),
            "sigma" => Ok(Axis::Sigma),
            "delta" => Ok(Axis::Delta),
            _ => Err(Error::InvalidArgument(format!("unknown sweep axis {s}"))),
        }
    }
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::K => "K",
            Axis::M => "M",
            Axis::N => "N",
            Axis::Sigma => "sigma",
            Axis::Delta => "delta",
        }
    }
}

/// One sweep cell. Failures are recorded in `error`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub k: Option<usize>,
    pub n: Option<usize>,
    pub rounds_budget: Option<u64>,
    pub main_lb: Option<f64>,
    pub n_boot: Option<usize>,
    pub p_boot: Option<f64>,
    pub g_pad: Option<f64>,
    pub n_pad: Option<usize>,
    pub n_ts: Option<usize>,
    pub easy: Option<bool>,
    pub hard: Option<bool>,
    pub error: Option<String>,
}

/// Classification margin used when the axis is not `delta`.
const DEFAULT_DELTA: f64 = 0.1;

fn cell(template: &ExperimentConfig, axis: Axis, value: f64) -> Result<SweepRow> {
    let mut cfg = template.clone();
    let mut delta = DEFAULT_DELTA;
    let as_count = |v: f64| -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::InvalidArgument(format!(
                "{} needs whole values, got {v}",
                axis.name()
            )))
        }
    };
    match axis {
        Axis::K => match &mut cfg.instance {
            InstanceSpec::Iid { k, .. }
            | InstanceSpec::Cycle { k, .. }
            | InstanceSpec::Hard { k, .. } => *k = as_count(value)?,
            _ => {
                return Err(Error::Config(
                    "axis K needs an iid, cycle or hard instance".into(),
                ))
            }
        },
        Axis::M => match &mut cfg.instance {
            InstanceSpec::BetaPair { m } => *m = value,
            _ => return Err(Error::Config("axis M needs a beta-pair instance".into())),
        },
        Axis::Sigma => match &mut cfg.instance {
            InstanceSpec::Gaussian { sigma, .. } => *sigma = value,
            _ => return Err(Error::Config("axis sigma needs a gaussian instance".into())),
        },
        Axis::N => cfg.n = Some(as_count(value)?),
        Axis::Delta => delta = value,
    }
    let inst = cfg.build_instance()?;
    let k = inst.k();
    let class = classify_easy_hard(&cfg.instance.collection(&cfg.base_dir)?, delta)?;
    let mut row = SweepRow {
        value,
        k: Some(k),
        easy: Some(class.easy),
        hard: Some(class.hard),
        ..Default::default()
    };
    let lb = lower_bound_with(&inst, &cfg.constants)?;
    row.main_lb = Some(lb.main_lb);
    let p = prior_params(&inst, &cfg.constants)?;
    row.n_boot = p.n_boot;
    row.p_boot = p.p_boot;
    row.g_pad = Some(p.g_pad);
    row.n_pad = Some(p.n_pad);
    row.n_ts = Some(p.n_ts);
    let alg = cfg.algorithm.scheduled().unwrap_or(Algorithm::Alg1);
    let layout = LayoutParams::from_params(&p)?;
    let n = cfg
        .n
        .unwrap_or(1)
        .max(crate::params::floor_for(&layout, alg));
    row.n = Some(n);
    row.rounds_budget = Some(upper_bound_rounds(&p, k, n, alg)?);
    Ok(row)
}

/// Evaluate the template at every value of `axis`; cells run in parallel and a failing
/// cell keeps whatever it computed before the failure.
pub fn sweep(template: &ExperimentConfig, axis: Axis, values: &[f64]) -> Vec<SweepRow> {
    values
        .par_iter()
        .map(|&v| match cell(template, axis, v) {
            Ok(r) => r,
            Err(e) => partial_row(template, axis, v, e),
        })
        .collect()
}

fn partial_row(template: &ExperimentConfig, axis: Axis, value: f64, e: Error) -> SweepRow {
    let mut row = SweepRow {
        value,
        error: Some(e.to_string()),
        ..Default::default()
    };
    let mut cfg = template.clone();
    if axis == Axis::K {
        if let InstanceSpec::Iid { k, .. }
        | InstanceSpec::Cycle { k, .. }
        | InstanceSpec::Hard { k, .. } = &mut cfg.instance
        {
            *k = value as usize;
        }
    }
    if let Ok(inst) = cfg.build_instance() {
        row.k = Some(inst.k());
        if let Ok(lb) = lower_bound_with(&inst, &cfg.constants) {
            row.main_lb = Some(lb.main_lb);
        }
    }
    row
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_sweep_csv<W: Write>(axis: Axis, rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SWEEP_HEADER)?;
    for r in rows {
        out.write_record([
            axis.name().to_string(),
            r.value.to_string(),
            opt(&r.k),
            opt(&r.n),
            opt(&r.rounds_budget),
            opt(&r.main_lb),
            opt(&r.n_boot),
            opt(&r.p_boot),
            opt(&r.g_pad),
            opt(&r.n_pad),
            opt(&r.n_ts),
            opt(&r.easy),
            opt(&r.hard),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("sweep", e))?;
    Ok(())
}
