//! Incentive audits: exact and Monte Carlo BIC margins, explorability and tail checks.

mod chernoff;
mod exact;
mod explore;
mod partial;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use chernoff::{chernoff_tail_check, TailRow};
pub use exact::{
    bic_margins_exact, bic_margins_exact_with, combine_cases, enumerate_fixed_means, ExactConfig,
    ExactOutcome, MeansCase, ProbeValue, Split,
};
pub use explore::{explorable_set, ArmVerdict, ExplorabilityReport, Reason, Verdict};
pub use partial::{
    kbic_alpha, submartingale_step, DegenStrategy, GreedyCompletion, HiddenExploration,
    MartingaleStep,
};

use crate::algos::{simulate, ProblemInstance, Strategy};
use crate::error::{Error, Result};
use crate::rng::replica_seed;

/// Acceptance floor absorbing float accumulation.
pub const MARGIN_FLOOR: f64 = -1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Mc,
}

/// Per-phase margins `E[(mu_k - mu_j) 1{A_t = k}]`. Every round of a phase plays the
/// same arm, so all rounds of a phase share one margin matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BICReport {
    pub method: Method,
    pub k: usize,
    pub horizon: usize,
    /// Replica count (0 for exact reports).
    pub samples: u64,
    /// First round of each phase, plus the horizon.
    pub phase_starts: Vec<usize>,
    /// `margins[phase][k][j]`.
    pub margins: Vec<Vec<Vec<f64>>>,
    pub se: Option<Vec<Vec<Vec<f64>>>>,
}

/// One CSV line of a report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarginRow {
    pub t: usize,
    pub k: usize,
    pub j: usize,
    pub margin: f64,
    pub se: Option<f64>,
}

impl BICReport {
    pub fn phase_of(&self, t: usize) -> Option<usize> {
        if t >= self.horizon {
            return None;
        }
        Some(self.phase_starts.partition_point(|&s| s <= t) - 1)
    }

    /// Margin of pair `(k, j)` at round `t` (0-based).
    pub fn margin_at(&self, t: usize, k: usize, j: usize) -> Option<f64> {
        self.phase_of(t).map(|p| self.margins[p][k][j])
    }

    pub fn se_at(&self, t: usize, k: usize, j: usize) -> Option<f64> {
        let p = self.phase_of(t)?;
        self.se.as_ref().map(|s| s[p][k][j])
    }

    /// Per-round rows over ordered pairs `k != j`; rounds and arms are 1-based.
    pub fn rows(&self) -> impl Iterator<Item = MarginRow> + '_ {
        (0..self.margins.len()).flat_map(move |p| {
            (self.phase_starts[p]..self.phase_starts[p + 1]).flat_map(move |t| {
                (0..self.k).flat_map(move |k| {
                    (0..self.k)
                        .filter(move |&j| j != k)
                        .map(move |j| MarginRow {
                            t: t + 1,
                            k: k + 1,
                            j: j + 1,
                            margin: self.margins[p][k][j],
                            se: self.se.as_ref().map(|s| s[p][k][j]),
                        })
                })
            })
        })
    }

    /// Smallest margin over phases and pairs `k != j`, with its phase and pair.
    pub fn worst(&self) -> Option<(usize, usize, usize, f64)> {
        let mut out: Option<(usize, usize, usize, f64)> = None;
        for (p, m) in self.margins.iter().enumerate() {
            for k in 0..self.k {
                for j in (0..self.k).filter(|&j| j != k) {
                    if out.is_none_or(|o| m[k][j] < o.3) {
                        out = Some((p, k, j, m[k][j]));
                    }
                }
            }
        }
        out
    }

    pub fn min_margin(&self) -> f64 {
        self.worst().map_or(0.0, |w| w.3)
    }

    /// Every margin is at least `floor`, or at least `-z` standard errors when errors are present.
    pub fn passes(&self, floor: f64, z: Option<f64>) -> bool {
        self.margins.iter().enumerate().all(|(p, m)| {
            (0..self.k).all(|k| {
                (0..self.k).filter(|&j| j != k).all(|j| {
                    let tol = match (z, &self.se) {
                        (Some(z), Some(se)) => (-z * se[p][k][j]).min(floor),
                        _ => floor,
                    };
                    m[k][j] >= tol
                })
            })
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "k", "j", "margin", "se"])?;
        for r in self.rows() {
            let se = r.se.map(|s| format!("{s:e}")).unwrap_or_default();
            out.write_record([
                r.t.to_string(),
                r.k.to_string(),
                r.j.to_string(),
                format!("{:e}", r.margin),
                se,
            ])?;
        }
        out.flush().map_err(|e| Error::io("bic report", e))?;
        Ok(())
    }
}

const REPLICA_CHUNK: u64 = 1024;

/// Monte Carlo estimate of the margins over `replicas` seeded runs. Replica `r` runs
/// with seed `replica_seed(master_seed, r)`.
pub fn bic_margins_mc<S: Strategy>(
    inst: &ProblemInstance,
    strategy: &S,
    replicas: u64,
    master_seed: u64,
) -> Result<BICReport> {
    if replicas < 100 {
        return Err(Error::InvalidArgument(format!(
            "need at least 100 replicas, got {replicas}"
        )));
    }
    let k = inst.k();
    let phases = strategy.phase_count();
    let zero = || vec![vec![vec![0.0; k]; k]; phases];
    let chunks: Vec<u64> = (0..replicas.div_ceil(REPLICA_CHUNK)).collect();
    let parts: Vec<Result<(Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>)>> = chunks
        .par_iter()
        .map(|&c| {
            let mut sum = zero();
            let mut sq = zero();
            let lo = c * REPLICA_CHUNK;
            let hi = (lo + REPLICA_CHUNK).min(replicas);
            let mut arms = vec![0usize; phases];
            for r in lo..hi {
                let (means, _, _) =
                    simulate(inst, strategy, replica_seed(master_seed, r), |p, ch, _| {
                        arms[p] = ch.arm
                    })?;
                for (p, &a) in arms.iter().enumerate() {
                    for j in 0..k {
                        let d = means[a] - means[j];
                        sum[p][a][j] += d;
                        sq[p][a][j] += d * d;
                    }
                }
            }
            Ok((sum, sq))
        })
        .collect();
    let mut sum = zero();
    let mut sq = zero();
    for part in parts {
        let (s, q) = part?;
        for p in 0..phases {
            for a in 0..k {
                for j in 0..k {
                    sum[p][a][j] += s[p][a][j];
                    sq[p][a][j] += q[p][a][j];
                }
            }
        }
    }
    let n = replicas as f64;
    let mut se = zero();
    for p in 0..phases {
        for a in 0..k {
            for j in 0..k {
                let mean = sum[p][a][j] / n;
                let var = ((sq[p][a][j] / n - mean * mean) * n / (n - 1.0)).max(0.0);
                sum[p][a][j] = mean;
                se[p][a][j] = (var / n).sqrt();
            }
        }
    }
    Ok(BICReport {
        method: Method::Mc,
        k,
        horizon: strategy.horizon(),
        samples: replicas,
        phase_starts: strategy.phase_starts(),
        margins: sum,
        se: Some(se),
    })
}
