//! Exact enumeration of a strategy's joint law of decisions and observations.

use std::collections::HashMap;
use std::hash::BuildHasherDefault;

use rayon::prelude::*;

use super::{BICReport, Method};
use crate::algos::{ArmData, Dataset, ProblemInstance, Strategy};
use crate::error::{Error, Result};
use crate::priors::ArmPrior;

type Hasher = BuildHasherDefault<std::collections::hash_map::DefaultHasher>;
type Map<K> = HashMap<K, f64, Hasher>;

const CHUNK: usize = 2048;

/// Limits of the exact engine.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactConfig {
    /// Largest number of live weighted states.
    pub cap: usize,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig { cap: 10_000_000 }
    }
}

/// Observed exploration probability at a probe.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeValue {
    pub phase: usize,
    pub arm: usize,
    pub recorded: f64,
    pub observed: f64,
}

/// Everything the exact engine measures.
#[derive(Clone, Debug)]
pub struct ExactOutcome {
    pub report: BICReport,
    /// Margins restricted to the states satisfying the split predicate.
    pub split: Option<Vec<Vec<Vec<f64>>>>,
    pub probes: Vec<ProbeValue>,
    /// Smallest final pull count of each arm over reachable states.
    pub min_pulls: Vec<usize>,
    /// Violated pull requirements.
    pub violations: Vec<String>,
    pub max_states: usize,
}

/// Exact outcome for one assignment of the true means.
#[derive(Clone, Debug)]
pub struct MeansCase {
    pub means: Vec<f64>,
    pub prob: f64,
    pub outcome: ExactOutcome,
}

/// Predicate on `(phase, data)` splitting the enumeration into two disjoint events.
pub type Split<'a> = &'a (dyn Fn(usize, &Dataset) -> bool + Sync);

/// Exact per-round margins `E[(mu_k - mu_j) 1{A_t = k}]`, branching on each reward
/// with its posterior predictive probability.
pub fn bic_margins_exact<S: Strategy>(inst: &ProblemInstance, strategy: &S) -> Result<BICReport> {
    Ok(enumerate(inst, strategy, &ExactConfig::default(), None, None)?.report)
}

/// [`bic_margins_exact`] with explicit limits and an optional split predicate.
pub fn bic_margins_exact_with<S: Strategy>(
    inst: &ProblemInstance,
    strategy: &S,
    cfg: &ExactConfig,
    split: Option<Split<'_>>,
) -> Result<ExactOutcome> {
    enumerate(inst, strategy, cfg, None, split)
}

/// Enumerate every assignment of the true means (finite-support priors only), running
/// the engine with rewards drawn at those means.
pub fn enumerate_fixed_means<S: Strategy>(
    inst: &ProblemInstance,
    strategy: &S,
    cfg: &ExactConfig,
) -> Result<Vec<MeansCase>> {
    let supports: Vec<&Vec<(f64, f64)>> = inst
        .arms()
        .iter()
        .map(|a| match a {
            ArmPrior::Atoms { support } => Ok(support),
            ArmPrior::Beta { .. } => Err(Error::InvalidPrior(
                "fixed-mean enumeration needs finite-support priors".into(),
            )),
        })
        .collect::<Result<_>>()?;
    let mut cases = Vec::new();
    let mut err = None;
    crate::game::for_each_product(&supports, |m, p| {
        if err.is_some() {
            return;
        }
        match enumerate(inst, strategy, cfg, Some(m), None) {
            Ok(outcome) => cases.push(MeansCase {
                means: m.to_vec(),
                prob: p,
                outcome,
            }),
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(cases),
    }
}

/// Prior-weighted sum of per-means margins.
pub fn combine_cases(cases: &[MeansCase]) -> Option<BICReport> {
    let first = cases.first()?;
    let mut report = first.outcome.report.clone();
    for phase in report.margins.iter_mut() {
        for row in phase.iter_mut() {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    for c in cases {
        for (acc, m) in report.margins.iter_mut().zip(&c.outcome.report.margins) {
            for (ra, rm) in acc.iter_mut().zip(m) {
                for (a, v) in ra.iter_mut().zip(rm) {
                    *a += c.prob * v;
                }
            }
        }
    }
    Some(report)
}

fn zero_margins(k: usize) -> Vec<Vec<f64>> {
    vec![vec![0.0; k]; k]
}

fn add_into(acc: &mut [Vec<f64>], m: &[Vec<f64>]) {
    for (a, b) in acc.iter_mut().zip(m) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
}

/// Outcomes of `len` pulls of one arm: each stored outcome is branched with probability
/// `prob(data)`; pulls beyond `cap` are recorded without outcome.
fn extend_arm(
    arm: &ArmData,
    len: usize,
    cap: Option<usize>,
    breaks: &[usize],
    prob: impl Fn(&ArmData) -> f64,
) -> Vec<(ArmData, f64)> {
    let mut cur: Vec<(ArmData, f64)> = vec![(arm.clone(), 1.0)];
    let mut done: Vec<(ArmData, f64)> = Vec::new();
    for step in 0..len {
        let mut next: Map<ArmData> = Map::default();
        for (a, w) in cur {
            let room = a.pulls() == a.stored() && cap.is_none_or(|c| a.stored() < c);
            if !room {
                let mut a = a;
                a.push_unobserved(len - step);
                done.push((a, w));
                continue;
            }
            let q = prob(&a);
            for (r, pr) in [(true, q), (false, 1.0 - q)] {
                if pr > 0.0 {
                    let mut b = a.clone();
                    b.push(r);
                    b.canonicalize(breaks);
                    *next.entry(b).or_insert(0.0) += w * pr;
                }
            }
        }
        cur = next.into_iter().collect();
    }
    cur.extend(done);
    cur
}

fn enumerate<S: Strategy>(
    inst: &ProblemInstance,
    strategy: &S,
    cfg: &ExactConfig,
    fixed: Option<&[f64]>,
    split: Option<Split<'_>>,
) -> Result<ExactOutcome> {
    let k = inst.k();
    if strategy.k() != k {
        return Err(Error::InvalidArgument(format!(
            "strategy has {} arms, instance {k}",
            strategy.k()
        )));
    }
    let phases = strategy.phase_count();
    let cap = strategy.depth();
    let breaks = strategy.breakpoints();
    let probes = strategy.probes();
    let checks = strategy.pull_checks();
    let mut states: Map<(S::Mem, Dataset)> = Map::default();
    states.insert((strategy.initial(), Dataset::empty(k)), 1.0);
    let mut margins = Vec::with_capacity(phases);
    let mut split_margins = split.map(|_| Vec::with_capacity(phases));
    let mut probe_values = Vec::new();
    let mut violations = Vec::new();
    let mut max_states = 1;
    let value = |data: &Dataset| -> Vec<f64> {
        match fixed {
            Some(m) => m.to_vec(),
            None => (0..k)
                .map(|i| {
                    let (n, s) = data.prefix(i, None);
                    inst.arm(i).posterior_mean_or_prior(n, s)
                })
                .collect(),
        }
    };
    let inspect = |p: usize,
                   states: &Map<(S::Mem, Dataset)>,
                   probe_values: &mut Vec<ProbeValue>,
                   violations: &mut Vec<String>| {
        let total: f64 = states.values().sum();
        for pr in probes.iter().filter(|pr| pr.phase == p) {
            let hit: f64 = states
                .iter()
                .filter(|(key, _)| strategy.explored(&key.0))
                .map(|(_, w)| w)
                .sum();
            probe_values.push(ProbeValue {
                phase: p,
                arm: pr.arm,
                recorded: pr.p,
                observed: hit / total,
            });
        }
        for c in checks.iter().filter(|c| c.phase == p) {
            for (key, _) in states.iter() {
                if let Some(&i) = c.arms.iter().find(|&&i| key.1.pulls(i) < c.pulls) {
                    violations.push(format!(
                        "phase {p}: arm {} has {} < {} pulls",
                        i + 1,
                        key.1.pulls(i),
                        c.pulls
                    ));
                    break;
                }
            }
        }
    };
    for p in 0..phases {
        inspect(p, &states, &mut probe_values, &mut violations);
        let len = strategy.phase_len(p);
        let items: Vec<((S::Mem, Dataset), f64)> = states.into_iter().collect();
        type Part<M> = (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<((M, Dataset), f64)>);
        let parts: Vec<Result<Part<S::Mem>>> = items
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut m = zero_margins(k);
                let mut ms = zero_margins(k);
                let mut out = Vec::new();
                for ((mem, data), w) in chunk {
                    let v = value(data);
                    let inside = split.is_some_and(|f| f(p, data));
                    for c in strategy.decide(inst, p, mem, data)? {
                        let wc = w * c.prob;
                        if wc == 0.0 {
                            continue;
                        }
                        for i in 0..k {
                            let d = wc * (v[c.arm] - v[i]);
                            m[c.arm][i] += d;
                            if inside {
                                ms[c.arm][i] += d;
                            }
                        }
                        let prob = |a: &ArmData| match fixed {
                            Some(mu) => mu[c.arm],
                            None => {
                                let (n, s) = a.prefix(None);
                                inst.arm(c.arm).posterior_mean_or_prior(n, s)
                            }
                        };
                        for (a, q) in extend_arm(&data.arms[c.arm], len, cap, &breaks, prob) {
                            let mut d2 = data.clone();
                            d2.arms[c.arm] = a;
                            out.push(((c.mem.clone(), d2), wc * q));
                        }
                    }
                }
                Ok((m, ms, out))
            })
            .collect();
        let mut next: Map<(S::Mem, Dataset)> = Map::default();
        let mut m = zero_margins(k);
        let mut ms = zero_margins(k);
        for part in parts {
            let (pm, pms, out) = part?;
            add_into(&mut m, &pm);
            add_into(&mut ms, &pms);
            for (key, w) in out {
                *next.entry(key).or_insert(0.0) += w;
            }
            if next.len() > cfg.cap {
                return Err(Error::EnumerationTooLarge(format!(
                    "more than {} states at phase {p}; use bic_margins_mc",
                    cfg.cap
                )));
            }
        }
        max_states = max_states.max(next.len());
        margins.push(m);
        if let Some(sm) = split_margins.as_mut() {
            sm.push(ms);
        }
        states = next;
    }
    inspect(phases, &states, &mut probe_values, &mut violations);
    let min_pulls = (0..k)
        .map(|i| states.keys().map(|key| key.1.pulls(i)).min().unwrap_or(0))
        .collect::<Vec<_>>();
    let need = strategy.final_pulls();
    if let Some(i) = min_pulls.iter().position(|&n| n < need) {
        violations.push(format!(
            "end: arm {} has {} < {need} pulls",
            i + 1,
            min_pulls[i]
        ));
    }
    let report = BICReport {
        method: Method::Exact,
        k,
        horizon: strategy.horizon(),
        samples: 0,
        phase_starts: strategy.phase_starts(),
        margins,
        se: None,
    };
    Ok(ExactOutcome {
        report,
        split: split_margins,
        probes: probe_values,
        min_pulls,
        violations,
        max_states,
    })
}
