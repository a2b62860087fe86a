//! Explorability of arms with independent priors.

use serde::{Deserialize, Serialize};

use crate::algos::ProblemInstance;
use crate::priors::ArmPrior;

const EQ_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    Explorable,
    Dominated,
    NonDominantEdge,
    SupportDegenerateEdge,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Verdict {
    Explorable,
    NotExplorable,
    /// Explorable exactly on the named event.
    OnEvent {
        event: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmVerdict {
    /// 1-based arm index.
    pub arm: usize,
    /// Explored with positive probability by some BIC algorithm.
    pub explorable: bool,
    pub reason: Reason,
    pub verdict: Verdict,
    pub prior_mean: f64,
    pub support_inf: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplorabilityReport {
    pub arms: Vec<ArmVerdict>,
    /// `m_i`, the infimum of each support.
    pub m: Vec<f64>,
    /// `n_j = max_{i <= j} m_i`.
    pub n: Vec<f64>,
    /// 1-based index of the first arm with prior mean at most `n` of its predecessors.
    pub first_failing: Option<usize>,
}

impl ExplorabilityReport {
    pub fn explorable_arms(&self) -> Vec<usize> {
        self.arms
            .iter()
            .filter(|a| a.explorable)
            .map(|a| a.arm)
            .collect()
    }
}

fn support_inf(p: &ArmPrior) -> f64 {
    match p {
        ArmPrior::Beta { .. } => 0.0,
        ArmPrior::Atoms { support } => support.iter().map(|a| a.0).fold(f64::INFINITY, f64::min),
    }
}

fn within_two_points(p: &ArmPrior, lo: f64) -> bool {
    match p {
        ArmPrior::Beta { .. } => false,
        ArmPrior::Atoms { support } => support
            .iter()
            .all(|&(v, _)| (v - lo).abs() <= EQ_TOL || (v - 1.0).abs() <= EQ_TOL),
    }
}

fn is_constant(p: &ArmPrior) -> bool {
    matches!(p, ArmPrior::Atoms { support } if support.len() == 1)
}

/// Classify every arm of an instance with independent priors sorted by prior mean.
pub fn explorable_set(inst: &ProblemInstance) -> ExplorabilityReport {
    let k = inst.k();
    let m: Vec<f64> = inst.arms().iter().map(support_inf).collect();
    let mut n = Vec::with_capacity(k);
    let mut run = f64::NEG_INFINITY;
    for &v in &m {
        run = run.max(v);
        n.push(run);
    }
    let means = inst.means();
    let first_failing = (1..k).find(|&i| means[i] <= n[i - 1] + EQ_TOL);
    let verdict = |i: usize, explorable: bool, reason: Reason, verdict: Verdict| ArmVerdict {
        arm: i + 1,
        explorable,
        reason,
        verdict,
        prior_mean: means[i],
        support_inf: m[i],
    };
    let mut arms = Vec::with_capacity(k);
    let stop = first_failing.unwrap_or(k);
    for i in 0..stop {
        arms.push(verdict(i, true, Reason::Explorable, Verdict::Explorable));
    }
    if let Some(f) = first_failing {
        let nj = n[f - 1];
        let s: Vec<usize> = (0..f).filter(|&i| (m[i] - nj).abs() <= EQ_TOL).collect();
        let degenerate = s.iter().all(|&i| within_two_points(inst.arm(i), m[i]));
        for i in f..k {
            let a = if (means[i] - nj).abs() > EQ_TOL {
                verdict(i, false, Reason::Dominated, Verdict::NotExplorable)
            } else if !degenerate {
                verdict(i, false, Reason::NonDominantEdge, Verdict::NotExplorable)
            } else if is_constant(inst.arm(i)) {
                let names: Vec<String> =
                    s.iter().map(|&i| format!("mu_{} = {nj}", i + 1)).collect();
                verdict(
                    i,
                    true,
                    Reason::SupportDegenerateEdge,
                    Verdict::OnEvent {
                        event: names.join(" and "),
                    },
                )
            } else {
                verdict(i, true, Reason::SupportDegenerateEdge, Verdict::Explorable)
            };
            arms.push(a);
        }
    }
    ExplorabilityReport {
        arms,
        m,
        n,
        first_failing: first_failing.map(|f| f + 1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atoms(s: &[(f64, f64)]) -> ArmPrior {
        ArmPrior::atoms(s.to_vec()).unwrap()
    }

    #[test]
    fn beta_arms_are_all_explorable() {
        let inst = ProblemInstance::new(vec![
            ArmPrior::beta(3.0, 1.0).unwrap(),
            ArmPrior::beta(1.0, 4.0).unwrap(),
        ])
        .unwrap();
        let r = explorable_set(&inst);
        assert_eq!(r.explorable_arms(), vec![1, 2]);
        assert_eq!(r.first_failing, None);
    }

    #[test]
    fn two_point_edge_is_conditional() {
        let inst =
            ProblemInstance::new(vec![atoms(&[(0.3, 0.5), (1.0, 0.5)]), atoms(&[(0.3, 1.0)])])
                .unwrap();
        let r = explorable_set(&inst);
        assert_eq!(r.arms[1].reason, Reason::SupportDegenerateEdge);
        assert!(matches!(r.arms[1].verdict, Verdict::OnEvent { .. }));
    }

    #[test]
    fn edge_without_degenerate_support_is_not_explorable() {
        let inst = ProblemInstance::new(vec![
            atoms(&[(0.3, 0.5), (0.9, 0.5)]),
            atoms(&[(0.2, 0.5), (0.4, 0.5)]),
        ])
        .unwrap();
        let r = explorable_set(&inst);
        assert_eq!(r.arms[1].reason, Reason::NonDominantEdge);
        assert!(!r.arms[1].explorable);
    }
}
