//! Bandit algorithms and the scheduled exploration algorithms.

mod instance;
mod run;
mod schedule;

use std::fmt::Debug;
use std::hash::Hash;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use instance::{ArmData, Dataset, ProblemInstance};
pub(crate) use run::simulate;
pub use run::{run_algorithm, PhaseRecord, RoundRecord, RunTrace};
pub use schedule::{
    build_schedule, build_schedule_with, Mem, Phase, PhaseKind, PhaseSchedule, PolicyRef, Predraw,
    Probe, PullCheck, ScheduleConfig, ScheduledStrategy, SlotTarget,
};

use crate::error::Result;
use crate::game::MEAN_TOL;
use crate::priors::prob_best;
use crate::rng::StreamRng;

/// Min-index argmax of the posterior means given the first `depth` samples of each arm
/// (all samples when `None`).
pub fn exploit_step(inst: &ProblemInstance, data: &Dataset, depth: Option<usize>) -> usize {
    let mut best = 0;
    let mut bv = f64::NEG_INFINITY;
    for i in 0..inst.k() {
        let (n, s) = data.prefix(i, depth);
        let m = inst.arm(i).posterior_mean_or_prior(n, s);
        if m > bv + MEAN_TOL {
            bv = m;
            best = i;
        }
    }
    best
}

/// One Thompson draw: a posterior sample per arm, min-index argmax.
pub fn thompson_step<R: Rng + ?Sized>(
    inst: &ProblemInstance,
    data: &Dataset,
    rng: &mut R,
) -> usize {
    let mut best = 0;
    let mut bv = f64::NEG_INFINITY;
    for i in 0..inst.k() {
        let (n, s) = data.prefix(i, None);
        let v = inst.arm(i).sample_posterior(n, s, rng);
        if v > bv {
            bv = v;
            best = i;
        }
    }
    best
}

/// `Pr[A* = i | data]` with the min-index tie-break.
pub fn thompson_law(inst: &ProblemInstance, data: &Dataset) -> Result<Vec<f64>> {
    let post: Vec<_> = (0..inst.k())
        .map(|i| {
            let (n, s) = data.prefix(i, None);
            inst.arm(i).posterior_update(n, s)
        })
        .collect::<Result<_>>()?;
    Ok(prob_best(&post))
}

/// The kind of behavior behind a recommendation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Explore,
    Exploit,
    Padded,
    Thompson,
    Custom,
}

impl Action {
    pub fn as_str(&self) -> &'static str {
        match self {
            Action::Explore => "explore",
            Action::Exploit => "exploit",
            Action::Padded => "padded",
            Action::Thompson => "thompson",
            Action::Custom => "custom",
        }
    }
}

/// One branch of a phase decision: play `arm` for the whole phase.
#[derive(Clone, Debug, PartialEq)]
pub struct Choice<M> {
    pub arm: usize,
    pub mem: M,
    pub prob: f64,
    pub action: Action,
}

/// A recommendation algorithm laid out as phases, each playing one arm for a fixed
/// number of rounds. Decisions are exposed as explicit distributions so that the
/// audit engines can enumerate them.
pub trait Strategy: Sync {
    type Mem: Clone + Eq + Hash + Debug + Send + Sync;

    fn k(&self) -> usize;
    fn phase_count(&self) -> usize;
    fn phase_len(&self, p: usize) -> usize;
    fn phase_label(&self, p: usize) -> String;

    /// Largest number of samples per arm ever read (`None` when unbounded).
    fn depth(&self) -> Option<usize> {
        None
    }

    /// Prefix lengths the strategy reads, besides full counts.
    fn breakpoints(&self) -> Vec<usize> {
        Vec::new()
    }

    fn initial(&self) -> Self::Mem;

    /// Setup draws of one simulated run.
    fn setup(&self, mem: Self::Mem, _rng: &mut StreamRng) -> Self::Mem {
        mem
    }

    /// Branches of the decision at the start of phase `p`.
    fn decide(
        &self,
        inst: &ProblemInstance,
        p: usize,
        mem: &Self::Mem,
        data: &Dataset,
    ) -> Result<Vec<Choice<Self::Mem>>>;

    fn sample(
        &self,
        inst: &ProblemInstance,
        p: usize,
        mem: &Self::Mem,
        data: &Dataset,
        rng: &mut StreamRng,
    ) -> Result<Choice<Self::Mem>> {
        let mut choices = self.decide(inst, p, mem, data)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let last = choices.len() - 1;
        for (i, c) in choices.iter().enumerate() {
            acc += c.prob;
            if u < acc || i == last {
                let mut c = choices.swap_remove(i);
                c.prob = 1.0;
                return Ok(c);
            }
        }
        unreachable!("empty decision")
    }

    /// Checkpoints of the exploration-probability bookkeeping.
    fn probes(&self) -> Vec<Probe> {
        Vec::new()
    }

    fn explored(&self, _mem: &Self::Mem) -> bool {
        false
    }

    /// Per-arm pull requirements at phase starts.
    fn pull_checks(&self) -> Vec<PullCheck> {
        Vec::new()
    }

    /// Pulls every arm must have when the strategy ends.
    fn final_pulls(&self) -> usize {
        0
    }

    /// Setup draws recorded in a trace.
    fn predraw(&self, _mem: &Self::Mem) -> Option<Predraw> {
        None
    }

    fn horizon(&self) -> usize {
        (0..self.phase_count()).map(|p| self.phase_len(p)).sum()
    }

    /// First round (0-based) of each phase, plus the horizon.
    fn phase_starts(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.phase_count() + 1);
        let mut t = 0;
        for p in 0..self.phase_count() {
            out.push(t);
            t += self.phase_len(p);
        }
        out.push(t);
        out
    }
}
