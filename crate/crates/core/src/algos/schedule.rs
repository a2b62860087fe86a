//! Phase layouts of the scheduled exploration algorithms.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    exploit_step, thompson_law, thompson_step, Action, Choice, Dataset, ProblemInstance, Strategy,
};
use crate::error::{Error, Result};
use crate::game::{
    audit_policy, easy_policy_unchecked, suitable_policy, transform_policy, Fallback, GameConfig,
    PaddedPolicy,
};
use crate::params::{
    floor_for, growth_sequence, layout_rounds, Algorithm, LayoutParams, PriorParams,
};
use crate::rng::StreamRng;

/// Where a slot phase's exploration goes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotTarget {
    Arm(usize),
    /// The arm at position `g` of the random permutation.
    Theta(usize),
}

/// Padded policy used by a phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyRef {
    Fixed(usize),
    /// The policy of the randomly chosen arm `j0`.
    ByJ0,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseKind {
    Explore {
        arm: usize,
    },
    /// Largest posterior mean on the first `depth` samples (all when absent).
    Exploit {
        depth: Option<usize>,
    },
    Padded {
        policy: usize,
    },
    /// Explore with probability `p`; otherwise the padded transformed policy on
    /// `ZEROS_{arm, n0}`, else exploit at `depth`. Resets the exploration flag.
    Boot {
        arm: usize,
        p: f64,
        n0: usize,
        zeros_policy: usize,
        depth: usize,
    },
    /// Padded when already explored; otherwise explore with probability `explore`,
    /// else exploit at `depth`. `p` is the exploration probability at the loop head.
    Grow {
        arm: usize,
        p: f64,
        explore: f64,
        policy: usize,
        depth: usize,
    },
    /// Phase `slot` of `of`; exactly one uniformly chosen slot of the group explores.
    Slot {
        target: SlotTarget,
        slot: usize,
        of: usize,
        group: usize,
        policy: PolicyRef,
    },
    /// Draw `j0`; explore it on `ZEROS_{j0, n0}`, else exploit at `depth`.
    EasyZeros {
        n0: usize,
        depth: usize,
    },
    /// Explore `j0` with probability `p[j0]`; else padded if explored, else exploit.
    EasyCoin {
        p: Vec<f64>,
        depth: usize,
    },
    /// Growth iteration `iteration` for the chosen `j0`.
    EasyGrow {
        iteration: usize,
        explore: Vec<f64>,
        depth: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub kind: PhaseKind,
    pub len: usize,
    /// Arm whose loop the phase belongs to.
    pub block: usize,
}

/// `Pr[explored | mu] = p` at the start of `phase`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub phase: usize,
    pub arm: usize,
    pub p: f64,
}

/// Every arm in `arms` has at least `pulls` samples at the start of `phase`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullCheck {
    pub phase: usize,
    pub arms: Vec<usize>,
    pub pulls: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Algorithm(Algorithm),
    RoundRobin,
    Empty,
}

/// The deterministic phase layout of an algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    pub kind: ScheduleKind,
    pub k: usize,
    pub n: usize,
    /// Layout inputs actually used (with the effective padding).
    pub layout: Option<LayoutParams>,
    pub phases: Vec<Phase>,
    pub policies: Vec<PaddedPolicy>,
    pub total_rounds: u64,
    pub probes: Vec<Probe>,
    pub checks: Vec<PullCheck>,
    pub final_pulls: usize,
    /// Deepest prefix read (`None` when some decision reads all data).
    pub max_depth: Option<usize>,
    pub breakpoints: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub game: GameConfig,
    /// Largest outcome space enumerated when auditing policies.
    pub audit_cap: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            game: GameConfig::default(),
            audit_cap: 2_000_000,
        }
    }
}

impl PhaseSchedule {
    /// No phases.
    pub fn empty(k: usize) -> Self {
        PhaseSchedule {
            kind: ScheduleKind::Empty,
            k,
            n: 0,
            layout: None,
            phases: Vec::new(),
            policies: Vec::new(),
            total_rounds: 0,
            probes: Vec::new(),
            checks: Vec::new(),
            final_pulls: 0,
            max_depth: Some(0),
            breakpoints: Vec::new(),
        }
    }

    /// Arm 1 for `n` rounds, then arm 2 for `n` rounds, and so on.
    pub fn round_robin(k: usize, n: usize) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::InvalidArgument(
                "round robin needs K >= 1 and N >= 1".into(),
            ));
        }
        let phases = (0..k)
            .map(|a| Phase {
                kind: PhaseKind::Explore { arm: a },
                len: n,
                block: a,
            })
            .collect();
        Ok(PhaseSchedule {
            kind: ScheduleKind::RoundRobin,
            k,
            n,
            layout: None,
            phases,
            policies: Vec::new(),
            total_rounds: (k * n) as u64,
            probes: Vec::new(),
            checks: Vec::new(),
            final_pulls: n,
            max_depth: Some(0),
            breakpoints: Vec::new(),
        })
    }

    fn finish(&mut self) {
        let mut reads: Vec<Option<usize>> = Vec::new();
        let policy_reads = |p: &PaddedPolicy, out: &mut Vec<Option<usize>>| {
            out.extend(p.depths.iter().map(|&d| Some(d)));
            if p.fallback == Fallback::AllData {
                out.push(None);
            }
        };
        for ph in &self.phases {
            match &ph.kind {
                PhaseKind::Explore { .. } => {}
                PhaseKind::Exploit { depth } => reads.push(*depth),
                PhaseKind::Padded { policy } => policy_reads(&self.policies[*policy], &mut reads),
                PhaseKind::Boot {
                    n0,
                    zeros_policy,
                    depth,
                    ..
                } => {
                    reads.push(Some(*n0));
                    reads.push(Some(*depth));
                    policy_reads(&self.policies[*zeros_policy], &mut reads);
                }
                PhaseKind::Grow { policy, depth, .. } => {
                    reads.push(Some(*depth));
                    policy_reads(&self.policies[*policy], &mut reads);
                }
                PhaseKind::Slot { policy, .. } => match policy {
                    PolicyRef::Fixed(i) => policy_reads(&self.policies[*i], &mut reads),
                    PolicyRef::ByJ0 => {
                        for p in &self.policies {
                            policy_reads(p, &mut reads);
                        }
                    }
                },
                PhaseKind::EasyZeros { n0, depth } => {
                    reads.push(Some(*n0));
                    reads.push(Some(*depth));
                }
                PhaseKind::EasyCoin { depth, .. } | PhaseKind::EasyGrow { depth, .. } => {
                    reads.push(Some(*depth));
                    for p in &self.policies {
                        policy_reads(p, &mut reads);
                    }
                }
            }
        }
        self.max_depth = if reads.iter().any(|r| r.is_none()) {
            None
        } else {
            Some(reads.iter().flatten().copied().max().unwrap_or(0))
        };
        let mut b: Vec<usize> = reads.into_iter().flatten().filter(|&d| d > 0).collect();
        b.sort_unstable();
        b.dedup();
        self.breakpoints = b;
        self.total_rounds = self.phases.iter().map(|p| p.len as u64).sum();
    }
}

/// Build the phase layout of `algorithm` from the instance parameters.
pub fn build_schedule(
    inst: &ProblemInstance,
    params: &PriorParams,
    n: usize,
    algorithm: Algorithm,
) -> Result<PhaseSchedule> {
    let layout = LayoutParams::from_params(params)?;
    build_schedule_with(inst, &layout, n, algorithm, &ScheduleConfig::default())
}

fn explore_probability(p: f64, lambda: f64) -> f64 {
    if p * (1.0 + lambda) >= 1.0 {
        1.0
    } else {
        (p * lambda / (1.0 - p)).min(1.0)
    }
}

fn positive_padding(arm: usize, lambda: f64) -> Result<()> {
    if lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::PolicyConstruction(format!(
            "no positive padding for arm {} (got {lambda})",
            arm + 1
        )))
    }
}

/// Padded policy for `j` at `depth`, its ZEROS transform, and the smallest padding of either.
fn padded_pair(
    inst: &ProblemInstance,
    j: usize,
    depth: usize,
    n0: usize,
    cfg: &ScheduleConfig,
) -> Result<(PaddedPolicy, PaddedPolicy, f64)> {
    let base = suitable_policy(inst, j, depth, &cfg.game)?;
    let mut lambda = base.meta.lambda.unwrap_or(f64::INFINITY);
    let mut zeros = transform_policy(inst, &base, n0)?;
    if zeros.outcome_count() <= cfg.audit_cap {
        let a = audit_policy(inst, &zeros, Some(n0), cfg.audit_cap)?;
        zeros.meta.lambda = Some(a.lambda);
        lambda = lambda.min(a.lambda);
    }
    positive_padding(j, lambda)?;
    Ok((base, zeros, lambda))
}

/// [`build_schedule`] with explicit layout inputs. The padding used by the layout is
/// the smallest of `layout.lambda` and the audited paddings of the policies built.
pub fn build_schedule_with(
    inst: &ProblemInstance,
    layout: &LayoutParams,
    n: usize,
    algorithm: Algorithm,
    cfg: &ScheduleConfig,
) -> Result<PhaseSchedule> {
    let k = inst.k();
    if layout.zeros_prob.len() < k {
        return Err(Error::InvalidArgument(
            "zeros probabilities missing for some arms".into(),
        ));
    }
    let floor = floor_for(layout, algorithm);
    if n < floor.max(1) {
        return Err(Error::BelowFloor(format!(
            "N = {n} is below the floor {} of {algorithm:?}",
            floor.max(1)
        )));
    }
    if !(layout.lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "padding must be positive, got {}",
            layout.lambda
        )));
    }
    let mut s = PhaseSchedule::empty(k);
    s.kind = ScheduleKind::Algorithm(algorithm);
    s.n = n;
    s.final_pulls = n;
    let n0 = layout.n0;
    let n_pad = layout.n_pad;
    match algorithm {
        Algorithm::Alg1 | Algorithm::Alg2 => {
            let (len, depth, first) = match algorithm {
                Algorithm::Alg1 => (n, n, n),
                _ => (n_pad, n_pad, n.max(n0).max(n_pad)),
            };
            let mut lambda = layout.lambda;
            let mut pairs = Vec::new();
            for j in 1..k {
                let (base, zeros, l) = padded_pair(inst, j, depth, n0, cfg)?;
                lambda = lambda.min(l);
                pairs.push((base, zeros));
            }
            let eff = LayoutParams {
                lambda,
                ..layout.clone()
            };
            s.phases.push(Phase {
                kind: PhaseKind::Explore { arm: 0 },
                len: first,
                block: 0,
            });
            for (j, (base, zeros)) in (1..k).zip(pairs) {
                let pi = s.policies.len();
                s.policies.push(base);
                s.policies.push(zeros);
                s.checks.push(PullCheck {
                    phase: s.phases.len(),
                    arms: (0..j).collect(),
                    pulls: first,
                });
                s.phases.push(Phase {
                    kind: PhaseKind::Exploit { depth: Some(n0) },
                    len,
                    block: j,
                });
                let p0 = eff.initial_probability(j);
                s.phases.push(Phase {
                    kind: PhaseKind::Boot {
                        arm: j,
                        p: p0,
                        n0,
                        zeros_policy: pi + 1,
                        depth: n,
                    },
                    len,
                    block: j,
                });
                let seq = growth_sequence(p0, lambda)?;
                for &p in &seq {
                    s.probes.push(Probe {
                        phase: s.phases.len(),
                        arm: j,
                        p,
                    });
                    s.phases.push(Phase {
                        kind: PhaseKind::Grow {
                            arm: j,
                            p,
                            explore: explore_probability(p, lambda),
                            policy: pi,
                            depth,
                        },
                        len,
                        block: j,
                    });
                }
                s.probes.push(Probe {
                    phase: s.phases.len(),
                    arm: j,
                    p: 1.0,
                });
                if algorithm == Algorithm::Alg2 {
                    let of = eff.n_lambda();
                    for slot in 0..of {
                        s.phases.push(Phase {
                            kind: PhaseKind::Slot {
                                target: SlotTarget::Arm(j),
                                slot,
                                of,
                                group: j,
                                policy: PolicyRef::Fixed(pi),
                            },
                            len: first,
                            block: j,
                        });
                    }
                }
            }
            s.checks.push(PullCheck {
                phase: s.phases.len(),
                arms: (0..k).collect(),
                pulls: first,
            });
            s.layout = Some(eff);
        }
        Algorithm::Alg3 => {
            let mut lambda = layout.lambda;
            for j in 0..k {
                let mut p = easy_policy_unchecked(inst, j, n_pad);
                let a = audit_policy(inst, &p, None, cfg.audit_cap)?;
                p.meta.lambda = Some(a.lambda);
                p.fallback = Fallback::AllData;
                lambda = lambda.min(a.lambda);
                s.policies.push(p);
            }
            positive_padding(k - 1, lambda)?;
            let eff = LayoutParams {
                lambda,
                ..layout.clone()
            };
            for j in 0..k {
                s.phases.push(Phase {
                    kind: PhaseKind::Exploit { depth: Some(n0) },
                    len: n0,
                    block: j,
                });
            }
            s.phases.push(Phase {
                kind: PhaseKind::EasyZeros { n0, depth: n0 },
                len: n_pad,
                block: 0,
            });
            let z: Vec<f64> = (0..k).map(|j| eff.zeros_prob[j]).collect();
            let coin: Vec<f64> = z
                .iter()
                .map(|&zj| lambda * zj / (1.0 + lambda * zj))
                .collect();
            s.phases.push(Phase {
                kind: PhaseKind::EasyCoin {
                    p: coin,
                    depth: n_pad,
                },
                len: n_pad,
                block: 0,
            });
            let seqs: Vec<Vec<f64>> = z
                .iter()
                .map(|&zj| growth_sequence(zj, lambda))
                .collect::<Result<_>>()?;
            let iters = seqs.iter().map(|v| v.len()).max().unwrap_or(0);
            for it in 0..iters {
                let explore = seqs
                    .iter()
                    .map(|v| v.get(it).map_or(1.0, |&p| explore_probability(p, lambda)))
                    .collect();
                s.phases.push(Phase {
                    kind: PhaseKind::EasyGrow {
                        iteration: it,
                        explore,
                        depth: n_pad,
                    },
                    len: n_pad,
                    block: 0,
                });
            }
            let of = eff.n_lambda();
            for g in 0..k {
                for slot in 0..of {
                    s.phases.push(Phase {
                        kind: PhaseKind::Slot {
                            target: SlotTarget::Theta(g),
                            slot,
                            of,
                            group: g,
                            policy: PolicyRef::ByJ0,
                        },
                        len: n,
                        block: g,
                    });
                }
            }
            s.checks.push(PullCheck {
                phase: s.phases.len(),
                arms: (0..k).collect(),
                pulls: n,
            });
            s.layout = Some(eff);
        }
    }
    s.finish();
    let expected = layout_rounds(s.layout.as_ref().expect("layout set"), k, n, algorithm)?;
    if expected != s.total_rounds {
        return Err(Error::Invariant(format!(
            "layout has {} rounds, budget {expected}",
            s.total_rounds
        )));
    }
    Ok(s)
}

/// Setup draws of one run of the easy-instance or post-processing layouts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Predraw {
    pub j0: Option<usize>,
    /// Random permutation of the arms.
    pub theta: Vec<usize>,
    /// Chosen slot per group.
    pub slots: Vec<usize>,
}

/// Decision memory of a scheduled run.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Mem {
    pub explored: bool,
    pub slot_used: bool,
    pub j0: Option<usize>,
    /// Arms already assigned by the permutation (enumeration only).
    pub theta_used: u64,
    pub pre: Option<Arc<Predraw>>,
}

/// A schedule optionally followed by Thompson sampling.
#[derive(Clone, Debug)]
pub struct ScheduledStrategy {
    pub schedule: PhaseSchedule,
    /// Thompson rounds after the schedule.
    pub thompson: usize,
}

impl ScheduledStrategy {
    pub fn new(schedule: PhaseSchedule) -> Self {
        ScheduledStrategy {
            schedule,
            thompson: 0,
        }
    }

    /// Thompson sampling alone for `horizon` rounds.
    pub fn thompson(k: usize, horizon: usize) -> Self {
        ScheduledStrategy {
            schedule: PhaseSchedule::empty(k),
            thompson: horizon,
        }
    }

    /// `schedule`, then Thompson sampling up to `horizon` total rounds.
    pub fn warm_start(schedule: PhaseSchedule, horizon: usize) -> Result<Self> {
        let t0 = schedule.total_rounds as usize;
        if horizon < t0 {
            return Err(Error::InvalidArgument(format!(
                "horizon {horizon} is shorter than the schedule ({t0})"
            )));
        }
        Ok(ScheduledStrategy {
            schedule,
            thompson: horizon - t0,
        })
    }

    fn policy(&self, r: PolicyRef, mem: &Mem) -> &PaddedPolicy {
        match r {
            PolicyRef::Fixed(i) => &self.schedule.policies[i],
            PolicyRef::ByJ0 => &self.schedule.policies[mem.j0.expect("j0 drawn before use")],
        }
    }
}

fn one(arm: usize, mem: Mem, prob: f64, action: Action) -> Choice<Mem> {
    Choice {
        arm,
        mem,
        prob,
        action,
    }
}

fn padded(
    inst: &ProblemInstance,
    pol: &PaddedPolicy,
    data: &Dataset,
    mem: &Mem,
    scale: f64,
) -> Result<Vec<Choice<Mem>>> {
    Ok(pol
        .decide(inst, data)?
        .into_iter()
        .map(|(a, p)| one(a, mem.clone(), p * scale, Action::Padded))
        .collect())
}

fn push_nonzero(out: &mut Vec<Choice<Mem>>, c: Choice<Mem>) {
    if c.prob > 0.0 {
        out.push(c);
    }
}

impl Strategy for ScheduledStrategy {
    type Mem = Mem;

    fn k(&self) -> usize {
        self.schedule.k
    }

    fn phase_count(&self) -> usize {
        self.schedule.phases.len() + self.thompson
    }

    fn phase_len(&self, p: usize) -> usize {
        self.schedule.phases.get(p).map_or(1, |ph| ph.len)
    }

    fn phase_label(&self, p: usize) -> String {
        let Some(ph) = self.schedule.phases.get(p) else {
            return "thompson".into();
        };
        match &ph.kind {
            PhaseKind::Explore { arm } => format!("explore[{}]", arm + 1),
            PhaseKind::Exploit { .. } => format!("exploit[{}]", ph.block + 1),
            PhaseKind::Padded { .. } => format!("padded[{}]", ph.block + 1),
            PhaseKind::Boot { arm, .. } => format!("boot[{}]", arm + 1),
            PhaseKind::Grow { arm, .. } => format!("grow[{}]", arm + 1),
            PhaseKind::Slot { group, slot, .. } => format!("slot[{}]#{}", group + 1, slot + 1),
            PhaseKind::EasyZeros { .. } => "easy_zeros".into(),
            PhaseKind::EasyCoin { .. } => "easy_coin".into(),
            PhaseKind::EasyGrow { iteration, .. } => format!("easy_grow#{}", iteration + 1),
        }
    }

    fn depth(&self) -> Option<usize> {
        if self.thompson > 0 {
            None
        } else {
            self.schedule.max_depth
        }
    }

    fn breakpoints(&self) -> Vec<usize> {
        self.schedule.breakpoints.clone()
    }

    fn initial(&self) -> Mem {
        Mem::default()
    }

    fn setup(&self, mut mem: Mem, rng: &mut StreamRng) -> Mem {
        let k = self.schedule.k;
        let easy = self.schedule.kind == ScheduleKind::Algorithm(Algorithm::Alg3);
        let has_slots = self
            .schedule
            .phases
            .iter()
            .any(|p| matches!(p.kind, PhaseKind::Slot { .. }));
        if !easy && !has_slots {
            return mem;
        }
        let j0 = if easy {
            Some(rng.random_range(0..k))
        } else {
            None
        };
        let mut theta: Vec<usize> = (0..k).collect();
        if easy {
            theta.shuffle(rng);
        }
        let mut slots = vec![0; k];
        for ph in &self.schedule.phases {
            if let PhaseKind::Slot {
                group, slot: 0, of, ..
            } = ph.kind
            {
                slots[group] = rng.random_range(0..of);
            }
        }
        mem.j0 = j0;
        mem.pre = Some(Arc::new(Predraw { j0, theta, slots }));
        mem
    }

    fn decide(
        &self,
        inst: &ProblemInstance,
        p: usize,
        mem: &Mem,
        data: &Dataset,
    ) -> Result<Vec<Choice<Mem>>> {
        let Some(ph) = self.schedule.phases.get(p) else {
            let law = thompson_law(inst, data)?;
            return Ok(law
                .into_iter()
                .enumerate()
                .filter(|a| a.1 > 0.0)
                .map(|(a, q)| one(a, mem.clone(), q, Action::Thompson))
                .collect());
        };
        let mut out = Vec::new();
        match &ph.kind {
            PhaseKind::Explore { arm } => out.push(one(*arm, mem.clone(), 1.0, Action::Explore)),
            PhaseKind::Exploit { depth } => out.push(one(
                exploit_step(inst, data, *depth),
                mem.clone(),
                1.0,
                Action::Exploit,
            )),
            PhaseKind::Padded { policy } => {
                out = padded(inst, &self.schedule.policies[*policy], data, mem, 1.0)?
            }
            PhaseKind::Boot {
                arm,
                p,
                n0,
                zeros_policy,
                depth,
            } => {
                let fresh = Mem {
                    explored: false,
                    ..mem.clone()
                };
                push_nonzero(
                    &mut out,
                    one(
                        *arm,
                        Mem {
                            explored: true,
                            ..fresh.clone()
                        },
                        *p,
                        Action::Explore,
                    ),
                );
                let rest = 1.0 - p;
                let pol = &self.schedule.policies[*zeros_policy];
                if data.zeros_event(*arm, *n0) && data.pulls(*arm) >= pol.depths[*arm] {
                    out.extend(padded(inst, pol, data, &fresh, rest)?);
                } else {
                    push_nonzero(
                        &mut out,
                        one(
                            exploit_step(inst, data, Some(*depth)),
                            fresh,
                            rest,
                            Action::Exploit,
                        ),
                    );
                }
            }
            PhaseKind::Grow {
                arm,
                explore,
                policy,
                depth,
                ..
            } => {
                if mem.explored {
                    out = padded(inst, &self.schedule.policies[*policy], data, mem, 1.0)?;
                } else {
                    self.explore_or_exploit(&mut out, inst, data, mem, *arm, *explore, *depth);
                }
            }
            PhaseKind::Slot {
                target,
                slot,
                of,
                group,
                policy,
            } => {
                let used = *slot > 0 && mem.slot_used;
                let h = match &mem.pre {
                    Some(pre) => {
                        if pre.slots[*group] == *slot {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    None if used => 0.0,
                    None => 1.0 / (of - slot) as f64,
                };
                let base = Mem {
                    slot_used: used,
                    ..mem.clone()
                };
                if h > 0.0 {
                    let marked = Mem {
                        slot_used: true,
                        ..base.clone()
                    };
                    match (target, &mem.pre) {
                        (SlotTarget::Arm(a), _) => out.push(one(*a, marked, h, Action::Explore)),
                        (SlotTarget::Theta(g), Some(pre)) => {
                            out.push(one(pre.theta[*g], marked, h, Action::Explore))
                        }
                        (SlotTarget::Theta(_), None) => {
                            let free: Vec<usize> = (0..self.schedule.k)
                                .filter(|a| mem.theta_used >> a & 1 == 0)
                                .collect();
                            for &a in &free {
                                let m = Mem {
                                    theta_used: marked.theta_used | 1 << a,
                                    ..marked.clone()
                                };
                                out.push(one(a, m, h / free.len() as f64, Action::Explore));
                            }
                        }
                    }
                }
                if h < 1.0 {
                    out.extend(padded(
                        inst,
                        self.policy(*policy, mem),
                        data,
                        &base,
                        1.0 - h,
                    )?);
                }
            }
            PhaseKind::EasyZeros { n0, depth } => {
                let k = self.schedule.k;
                let cands: Vec<(usize, f64)> = match mem.j0 {
                    Some(j) => vec![(j, 1.0)],
                    None => (0..k).map(|j| (j, 1.0 / k as f64)).collect(),
                };
                for (j0, w) in cands {
                    let m = Mem {
                        j0: Some(j0),
                        explored: false,
                        ..mem.clone()
                    };
                    if data.zeros_event(j0, *n0) {
                        out.push(one(
                            j0,
                            Mem {
                                explored: true,
                                ..m
                            },
                            w,
                            Action::Explore,
                        ));
                    } else {
                        out.push(one(
                            exploit_step(inst, data, Some(*depth)),
                            m,
                            w,
                            Action::Exploit,
                        ));
                    }
                }
            }
            PhaseKind::EasyCoin { p, depth } => {
                let j0 = mem.j0.expect("j0 drawn before the coin");
                push_nonzero(
                    &mut out,
                    one(
                        j0,
                        Mem {
                            explored: true,
                            ..mem.clone()
                        },
                        p[j0],
                        Action::Explore,
                    ),
                );
                let rest = 1.0 - p[j0];
                if mem.explored {
                    out.extend(padded(inst, &self.schedule.policies[j0], data, mem, rest)?);
                } else {
                    push_nonzero(
                        &mut out,
                        one(
                            exploit_step(inst, data, Some(*depth)),
                            mem.clone(),
                            rest,
                            Action::Exploit,
                        ),
                    );
                }
            }
            PhaseKind::EasyGrow { explore, depth, .. } => {
                let j0 = mem.j0.expect("j0 drawn before the loop");
                if mem.explored {
                    out = padded(inst, &self.schedule.policies[j0], data, mem, 1.0)?;
                } else {
                    self.explore_or_exploit(&mut out, inst, data, mem, j0, explore[j0], *depth);
                }
            }
        }
        Ok(out)
    }

    fn sample(
        &self,
        inst: &ProblemInstance,
        p: usize,
        mem: &Mem,
        data: &Dataset,
        rng: &mut StreamRng,
    ) -> Result<Choice<Mem>> {
        if p >= self.schedule.phases.len() {
            return Ok(one(
                thompson_step(inst, data, rng),
                mem.clone(),
                1.0,
                Action::Thompson,
            ));
        }
        let mut choices = self.decide(inst, p, mem, data)?;
        if choices.len() == 1 {
            let mut c = choices.pop().expect("one choice");
            c.prob = 1.0;
            return Ok(c);
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let last = choices.len() - 1;
        for i in 0..choices.len() {
            acc += choices[i].prob;
            if u < acc || i == last {
                let mut c = choices.swap_remove(i);
                c.prob = 1.0;
                return Ok(c);
            }
        }
        unreachable!("empty decision")
    }

    fn probes(&self) -> Vec<Probe> {
        self.schedule.probes.clone()
    }

    fn explored(&self, mem: &Mem) -> bool {
        mem.explored
    }

    fn pull_checks(&self) -> Vec<PullCheck> {
        self.schedule.checks.clone()
    }

    fn final_pulls(&self) -> usize {
        self.schedule.final_pulls
    }

    fn predraw(&self, mem: &Mem) -> Option<Predraw> {
        mem.pre.as_ref().map(|p| (**p).clone())
    }
}

impl ScheduledStrategy {
    #[allow(clippy::too_many_arguments)]
    fn explore_or_exploit(
        &self,
        out: &mut Vec<Choice<Mem>>,
        inst: &ProblemInstance,
        data: &Dataset,
        mem: &Mem,
        arm: usize,
        explore: f64,
        depth: usize,
    ) {
        push_nonzero(
            out,
            one(
                arm,
                Mem {
                    explored: true,
                    ..mem.clone()
                },
                explore,
                Action::Explore,
            ),
        );
        push_nonzero(
            out,
            one(
                exploit_step(inst, data, Some(depth)),
                mem.clone(),
                1.0 - explore,
                Action::Exploit,
            ),
        );
    }
}
