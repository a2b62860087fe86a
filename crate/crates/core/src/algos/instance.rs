use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::ArmPrior;

/// Tolerance for the non-increasing prior-mean ordering.
const ORDER_TOL: f64 = 1e-12;

/// K independent Bernoulli arms, indexed by non-increasing prior mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance")]
pub struct ProblemInstance {
    arms: Vec<ArmPrior>,
}

#[derive(Deserialize)]
struct RawInstance {
    arms: Vec<ArmPrior>,
}

impl TryFrom<RawInstance> for ProblemInstance {
    type Error = Error;
    fn try_from(raw: RawInstance) -> Result<Self> {
        ProblemInstance::new(raw.arms)
    }
}

impl ProblemInstance {
    /// Validates that prior means are non-increasing in the arm index.
    pub fn new(arms: Vec<ArmPrior>) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::InvalidInstance("need at least one arm".into()));
        }
        for (i, w) in arms.windows(2).enumerate() {
            if w[1].mean() > w[0].mean() + ORDER_TOL {
                return Err(Error::InvalidInstance(format!(
                    "prior means must be non-increasing: arm {} has mean {} < arm {} mean {}",
                    i + 1,
                    w[0].mean(),
                    i + 2,
                    w[1].mean()
                )));
            }
        }
        Ok(ProblemInstance { arms })
    }

    /// Sorts arms by non-increasing prior mean (stable) before validating.
    pub fn sorted(mut arms: Vec<ArmPrior>) -> Result<Self> {
        arms.sort_by(|a, b| b.mean().total_cmp(&a.mean()));
        ProblemInstance::new(arms)
    }

    /// `k` copies of one prior.
    pub fn iid(prior: ArmPrior, k: usize) -> Result<Self> {
        ProblemInstance::new(vec![prior; k])
    }

    pub fn k(&self) -> usize {
        self.arms.len()
    }

    pub fn arms(&self) -> &[ArmPrior] {
        &self.arms
    }

    pub fn arm(&self, i: usize) -> &ArmPrior {
        &self.arms[i]
    }

    pub fn means(&self) -> Vec<f64> {
        self.arms.iter().map(|a| a.mean()).collect()
    }

    pub fn all_finite_support(&self) -> bool {
        self.arms.iter().all(|a| !a.is_beta())
    }

    /// `Pr[ZEROS_{j, n0}]`: the first `n0` samples of every arm before `j` (0-based) are zero.
    pub fn zeros_probability(&self, j: usize, n0: usize) -> f64 {
        self.arms[..j]
            .iter()
            .map(|a| a.ln_zeros_probability(n0))
            .sum::<f64>()
            .exp()
    }
}

/// One arm's observed rewards, kept as running success counts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ArmData {
    /// `cum[t]` = successes among the first `t` stored samples; `cum[0] = 0`.
    cum: Vec<u32>,
    /// Pulls beyond the stored prefix, whose outcomes are not kept.
    #[serde(default, skip_serializing_if = "is_zero")]
    extra: u32,
}

fn is_zero(x: &u32) -> bool {
    *x == 0
}

impl ArmData {
    pub fn pulls(&self) -> usize {
        self.stored() + self.extra as usize
    }

    /// Samples whose outcomes are kept.
    pub fn stored(&self) -> usize {
        self.cum.len().saturating_sub(1)
    }

    pub fn successes(&self) -> usize {
        self.cum.last().copied().unwrap_or(0) as usize
    }

    /// `(n, s)` over the first `min(depth, pulls)` samples, limited to the stored prefix.
    pub fn prefix(&self, depth: Option<usize>) -> (usize, usize) {
        let n = depth.map_or(self.stored(), |d| d.min(self.stored()));
        (
            n,
            if self.cum.is_empty() {
                0
            } else {
                self.cum[n] as usize
            },
        )
    }

    /// True when the first `n0` samples exist and are all zero.
    pub fn leading_zeros(&self, n0: usize) -> bool {
        self.stored() >= n0 && (n0 == 0 || self.cum[n0] == 0)
    }

    /// Record a pull whose outcome is not kept.
    pub fn push_unobserved(&mut self, count: usize) {
        self.extra += count as u32;
    }

    /// Reorder outcomes inside each segment between consecutive `breaks` (and after
    /// the last one) so that successes come first: the counts at every break and the
    /// total are preserved.
    pub fn canonicalize(&mut self, breaks: &[usize]) {
        let n = self.stored();
        if n == 0 {
            return;
        }
        let mut start = 0;
        for end in breaks
            .iter()
            .copied()
            .filter(|&b| b > 0 && b < n)
            .chain(std::iter::once(n))
        {
            if end <= start {
                continue;
            }
            let base = self.cum[start];
            let ones = self.cum[end] - base;
            for t in start + 1..=end {
                self.cum[t] = base + ones.min((t - start) as u32);
            }
            start = end;
        }
    }

    pub fn push(&mut self, reward: bool) {
        assert_eq!(self.extra, 0, "outcome stored after unobserved pulls");
        if self.cum.is_empty() {
            self.cum.push(0);
        }
        let last = self.cum[self.cum.len() - 1];
        self.cum.push(last + reward as u32);
    }

    /// Ordered outcome list.
    pub fn outcomes(&self) -> Vec<bool> {
        self.cum.windows(2).map(|w| w[1] > w[0]).collect()
    }
}

/// Per-arm data observed so far.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub arms: Vec<ArmData>,
}

impl Dataset {
    pub fn empty(k: usize) -> Self {
        Dataset {
            arms: vec![ArmData::default(); k],
        }
    }

    /// Build from explicit outcome lists.
    pub fn from_outcomes(lists: &[Vec<bool>]) -> Self {
        let mut d = Dataset::empty(lists.len());
        for (i, l) in lists.iter().enumerate() {
            for &r in l {
                d.push(i, r);
            }
        }
        d
    }

    pub fn k(&self) -> usize {
        self.arms.len()
    }

    pub fn pulls(&self, i: usize) -> usize {
        self.arms[i].pulls()
    }

    pub fn successes(&self, i: usize) -> usize {
        self.arms[i].successes()
    }

    pub fn prefix(&self, i: usize, depth: Option<usize>) -> (usize, usize) {
        self.arms[i].prefix(depth)
    }

    pub fn push(&mut self, i: usize, reward: bool) {
        self.arms[i].push(reward);
    }

    /// `ZEROS_{j, n0}`: every arm before `j` (0-based) has at least `n0` samples, the first `n0` all zero.
    pub fn zeros_event(&self, j: usize, n0: usize) -> bool {
        self.arms[..j].iter().all(|a| a.leading_zeros(n0))
    }
}
