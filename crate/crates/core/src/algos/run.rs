//! Simulated execution of a strategy against means drawn from the prior.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::schedule::{Predraw, ScheduledStrategy};
use super::{Action, Choice, Dataset, ProblemInstance, Strategy};
use crate::error::{Error, Result};
use crate::rng::{self, stream};

/// One phase of an executed run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: usize,
    pub label: String,
    pub action: Action,
    pub arm: usize,
    pub start: usize,
    pub rewards: Vec<bool>,
}

/// One round of an executed run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub phase: usize,
    pub label: String,
    pub action: Action,
    pub arm: usize,
    pub reward: bool,
}

/// One executed trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub seed: u64,
    pub means: Vec<f64>,
    /// Min-index best arm under the drawn means.
    pub best_arm: usize,
    pub phases: Vec<PhaseRecord>,
    pub pulls: Vec<usize>,
    /// `sum_t (mu_best - mu_{A_t})`.
    pub regret: f64,
    pub predraw: Option<Predraw>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.phases.iter().map(|p| p.rewards.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rounds(&self) -> impl Iterator<Item = RoundRecord> + '_ {
        self.phases.iter().flat_map(|p| {
            p.rewards
                .iter()
                .enumerate()
                .map(move |(i, &r)| RoundRecord {
                    t: p.start + i,
                    phase: p.phase,
                    label: p.label.clone(),
                    action: p.action,
                    arm: p.arm,
                    reward: r,
                })
        })
    }
}

/// Draw the means, then execute every phase with the per-phase decision and reward
/// streams of `seed`. Errors if a pull requirement of the strategy is violated.
pub fn run_algorithm<S: Strategy>(
    inst: &ProblemInstance,
    strategy: &S,
    seed: u64,
) -> Result<RunTrace> {
    let starts = strategy.phase_starts();
    let mut phases = Vec::with_capacity(strategy.phase_count());
    let (means, data, mem) = simulate(inst, strategy, seed, |p, c, rewards| {
        phases.push(PhaseRecord {
            phase: p,
            label: strategy.phase_label(p),
            action: c.action,
            arm: c.arm,
            start: starts[p],
            rewards: rewards.to_vec(),
        });
    })?;
    let best_arm = best_of(&means);
    let regret = phases
        .iter()
        .map(|ph| ph.rewards.len() as f64 * (means[best_arm] - means[ph.arm]))
        .sum();
    let pulls = (0..inst.k()).map(|i| data.pulls(i)).collect();
    let predraw = strategy.predraw(&mem);
    Ok(RunTrace {
        seed,
        means,
        best_arm,
        phases,
        pulls,
        regret,
        predraw,
    })
}

/// Min-index argmax.
pub(crate) fn best_of(means: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..means.len() {
        if means[i] > means[best] {
            best = i;
        }
    }
    best
}

/// Execute one seeded run, calling `visit(phase, choice, rewards)` after every phase.
/// Returns the drawn means, the final data and the final memory.
pub(crate) fn simulate<S: Strategy>(
    inst: &ProblemInstance,
    strategy: &S,
    seed: u64,
    mut visit: impl FnMut(usize, &Choice<S::Mem>, &[bool]),
) -> Result<(Vec<f64>, Dataset, S::Mem)> {
    let k = inst.k();
    if strategy.k() != k {
        return Err(Error::InvalidArgument(format!(
            "strategy has {} arms, instance {k}",
            strategy.k()
        )));
    }
    let mut mrng = stream(seed, rng::MEANS);
    let means: Vec<f64> = inst.arms().iter().map(|a| a.sample(&mut mrng)).collect();
    let mut mem = strategy.setup(strategy.initial(), &mut stream(seed, rng::SETUP));
    let mut data = Dataset::empty(k);
    let checks = strategy.pull_checks();
    let mut rewards = Vec::new();
    for p in 0..strategy.phase_count() {
        check_pulls(&checks, p, &data)?;
        let c = strategy.sample(inst, p, &mem, &data, &mut stream(seed, rng::decisions(p)))?;
        let len = strategy.phase_len(p);
        let mut rrng = stream(seed, rng::rewards(p));
        rewards.clear();
        rewards.extend((0..len).map(|_| rrng.random::<f64>() < means[c.arm]));
        for &r in &rewards {
            data.push(c.arm, r);
        }
        visit(p, &c, &rewards);
        mem = c.mem;
    }
    check_pulls(&checks, strategy.phase_count(), &data)?;
    let need = strategy.final_pulls();
    if let Some(i) = (0..k).find(|&i| data.pulls(i) < need) {
        return Err(Error::Invariant(format!(
            "arm {} has {} pulls, fewer than {need}",
            i + 1,
            data.pulls(i)
        )));
    }
    Ok((means, data, mem))
}

fn check_pulls(checks: &[super::PullCheck], p: usize, data: &Dataset) -> Result<()> {
    for c in checks.iter().filter(|c| c.phase == p) {
        if let Some(&i) = c.arms.iter().find(|&&i| data.pulls(i) < c.pulls) {
            return Err(Error::Invariant(format!(
                "arm {} has {} pulls at phase {p}, fewer than {}",
                i + 1,
                data.pulls(i),
                c.pulls
            )));
        }
    }
    Ok(())
}

impl ScheduledStrategy {
    /// Convenience wrapper of [`run_algorithm`].
    pub fn run(&self, inst: &ProblemInstance, seed: u64) -> Result<RunTrace> {
        run_algorithm(inst, self, seed)
    }
}
