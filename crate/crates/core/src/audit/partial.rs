//! Partial strategies and their completions, the three-round two-arm strategy, and the
//! one-step drift of `E[mu_i] Pr[A* = j]`.

use super::BICReport;
use crate::algos::{
    exploit_step, thompson_law, Action, Choice, Dataset, Predraw, Probe, ProblemInstance,
    PullCheck, Strategy,
};
use crate::error::{Error, Result};
use crate::priors::ArmPrior;
use crate::rng::StreamRng;

/// `min_{j != k} E[(mu_k - mu_j) 1{A_t = k}]` at `phase`.
pub fn kbic_alpha(report: &BICReport, phase: usize, k: usize) -> f64 {
    (0..report.k)
        .filter(|&j| j != k)
        .map(|j| report.margins[phase][k][j])
        .fold(f64::INFINITY, f64::min)
}

/// A strategy followed by `extra` single-round greedy phases on all data.
#[derive(Clone, Debug)]
pub struct GreedyCompletion<S> {
    pub base: S,
    pub extra: usize,
}

impl<S: Strategy> Strategy for GreedyCompletion<S> {
    type Mem = S::Mem;

    fn k(&self) -> usize {
        self.base.k()
    }
    fn phase_count(&self) -> usize {
        self.base.phase_count() + self.extra
    }
    fn phase_len(&self, p: usize) -> usize {
        if p < self.base.phase_count() {
            self.base.phase_len(p)
        } else {
            1
        }
    }
    fn phase_label(&self, p: usize) -> String {
        if p < self.base.phase_count() {
            self.base.phase_label(p)
        } else {
            format!("greedy {}", p - self.base.phase_count() + 1)
        }
    }
    fn depth(&self) -> Option<usize> {
        if self.extra > 0 {
            None
        } else {
            self.base.depth()
        }
    }
    fn breakpoints(&self) -> Vec<usize> {
        self.base.breakpoints()
    }
    fn initial(&self) -> S::Mem {
        self.base.initial()
    }
    fn setup(&self, mem: S::Mem, rng: &mut StreamRng) -> S::Mem {
        self.base.setup(mem, rng)
    }
    fn decide(
        &self,
        inst: &ProblemInstance,
        p: usize,
        mem: &S::Mem,
        data: &Dataset,
    ) -> Result<Vec<Choice<S::Mem>>> {
        if p < self.base.phase_count() {
            return self.base.decide(inst, p, mem, data);
        }
        Ok(vec![Choice {
            arm: exploit_step(inst, data, None),
            mem: mem.clone(),
            prob: 1.0,
            action: Action::Exploit,
        }])
    }
    fn probes(&self) -> Vec<Probe> {
        self.base.probes()
    }
    fn explored(&self, mem: &S::Mem) -> bool {
        self.base.explored(mem)
    }
    fn pull_checks(&self) -> Vec<PullCheck> {
        self.base.pull_checks()
    }
    fn final_pulls(&self) -> usize {
        self.base.final_pulls()
    }
    fn predraw(&self, mem: &S::Mem) -> Option<Predraw> {
        self.base.predraw(mem)
    }
}

/// The first `phase + 1` phases of a strategy, where phase `phase` plays `arm` with
/// probability `alpha / 2` instead of the base decision. The base memory advances as if
/// the base decision had been played.
#[derive(Clone, Debug)]
pub struct HiddenExploration<S> {
    pub base: S,
    pub phase: usize,
    pub arm: usize,
    pub alpha: f64,
}

impl<S: Strategy> HiddenExploration<S> {
    pub fn new(base: S, phase: usize, arm: usize, alpha: f64) -> Result<Self> {
        if phase >= base.phase_count() || arm >= base.k() || !(0.0..=2.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!(
                "bad hidden exploration (phase {phase}, arm {arm}, alpha {alpha})"
            )));
        }
        Ok(HiddenExploration {
            base,
            phase,
            arm,
            alpha,
        })
    }
}

impl<S: Strategy> Strategy for HiddenExploration<S> {
    type Mem = S::Mem;

    fn k(&self) -> usize {
        self.base.k()
    }
    fn phase_count(&self) -> usize {
        self.phase + 1
    }
    fn phase_len(&self, p: usize) -> usize {
        self.base.phase_len(p)
    }
    fn phase_label(&self, p: usize) -> String {
        self.base.phase_label(p)
    }
    fn depth(&self) -> Option<usize> {
        self.base.depth()
    }
    fn breakpoints(&self) -> Vec<usize> {
        self.base.breakpoints()
    }
    fn initial(&self) -> S::Mem {
        self.base.initial()
    }
    fn setup(&self, mem: S::Mem, rng: &mut StreamRng) -> S::Mem {
        self.base.setup(mem, rng)
    }
    fn decide(
        &self,
        inst: &ProblemInstance,
        p: usize,
        mem: &S::Mem,
        data: &Dataset,
    ) -> Result<Vec<Choice<S::Mem>>> {
        let base = self.base.decide(inst, p, mem, data)?;
        if p != self.phase {
            return Ok(base);
        }
        let h = self.alpha / 2.0;
        let mut out = Vec::with_capacity(2 * base.len());
        for c in base {
            out.push(Choice {
                arm: self.arm,
                mem: c.mem.clone(),
                prob: h * c.prob,
                action: Action::Explore,
            });
            out.push(Choice {
                prob: (1.0 - h) * c.prob,
                ..c
            });
        }
        Ok(out)
    }
}

/// Three single-round phases on two arms: play arm 1; then, after a zero, play arm 2
/// twice; after a one, play arm 2 in exactly one of the two remaining rounds, chosen
/// by a fair coin.
#[derive(Clone, Copy, Debug, Default)]
pub struct DegenStrategy;

impl DegenStrategy {
    /// Arm 1 is `1/2 +- eps` with a fair sign, arm 2 is `1/2 - eps^2 / 10`.
    pub fn instance(eps: f64) -> Result<ProblemInstance> {
        ProblemInstance::new(vec![
            ArmPrior::coin(0.5 - eps, 0.5 + eps)?,
            ArmPrior::point(0.5 - eps * eps / 10.0)?,
        ])
    }
}

impl Strategy for DegenStrategy {
    /// Arm played in the second round, once drawn.
    type Mem = Option<usize>;

    fn k(&self) -> usize {
        2
    }
    fn phase_count(&self) -> usize {
        3
    }
    fn phase_len(&self, _p: usize) -> usize {
        1
    }
    fn phase_label(&self, p: usize) -> String {
        format!("round {}", p + 1)
    }
    fn initial(&self) -> Option<usize> {
        None
    }
    fn decide(
        &self,
        _inst: &ProblemInstance,
        p: usize,
        mem: &Option<usize>,
        data: &Dataset,
    ) -> Result<Vec<Choice<Option<usize>>>> {
        let one = |arm: usize, mem: Option<usize>, prob: f64| Choice {
            arm,
            mem,
            prob,
            action: Action::Custom,
        };
        if p == 0 {
            return Ok(vec![one(0, None, 1.0)]);
        }
        let first_one = data.arms[0].outcomes().first().copied().unwrap_or(false);
        Ok(match (p, first_one, *mem) {
            (_, false, _) => vec![one(1, None, 1.0)],
            (1, true, _) => vec![one(1, Some(1), 0.5), one(0, Some(0), 0.5)],
            (_, true, Some(a)) => vec![one(1 - a, Some(a), 1.0)],
            (_, true, None) => {
                return Err(Error::Invariant(
                    "third round without a second-round draw".into(),
                ))
            }
        })
    }
    fn final_pulls(&self) -> usize {
        1
    }
}

/// `H = E[mu_i | data] Pr[A* = j | data]` before and, in expectation, after one more pull.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MartingaleStep {
    pub now: f64,
    pub next: f64,
}

/// Drift of `H` when arm `pull` is sampled once more.
pub fn submartingale_step(
    inst: &ProblemInstance,
    data: &Dataset,
    i: usize,
    j: usize,
    pull: usize,
) -> Result<MartingaleStep> {
    let h = |d: &Dataset| -> Result<f64> {
        let (n, s) = d.prefix(i, None);
        Ok(inst.arm(i).posterior_mean_or_prior(n, s) * thompson_law(inst, d)?[j])
    };
    let now = h(data)?;
    let (n, s) = data.prefix(pull, None);
    let q = inst.arm(pull).posterior_mean_or_prior(n, s);
    let mut next = 0.0;
    for (r, pr) in [(true, q), (false, 1.0 - q)] {
        if pr > 0.0 {
            let mut d = data.clone();
            d.push(pull, r);
            next += pr * h(&d)?;
        }
    }
    Ok(MartingaleStep { now, next })
}
