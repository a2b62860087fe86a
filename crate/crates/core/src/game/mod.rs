//! Padded BIC policies: the recommendation game, comparison rules, the efficient
//! Beta construction, the ZEROS transform and the easy-instance exploit policy.

mod lp;
mod policy;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use lp::{Cmp, Lp, LpSolution};
pub use policy::{
    audit_policy, informed_exploit, mean_comparison_padding, Fallback, OutcomeSpace, PaddedPolicy,
    PolicyAudit, PolicyMeta, Rule, MEAN_TOL,
};

use crate::algos::ProblemInstance;
use crate::error::{Error, Result};
use crate::params::classify_easy_hard;
use crate::priors::{dominance_and_coupling, positive_part, ArmPrior, GapTerm, MERGE_TOL};
pub(crate) use policy::for_each_product;

/// How tie outcomes `m_j = m_q*` are resolved in the game policy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// Recommend on ties as much as the agent's best responses allow.
    #[default]
    MaxExploration,
    /// Never recommend on ties.
    Abstain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GameConfig {
    /// Largest enumerated outcome space.
    pub outcome_cap: usize,
    /// Largest number of distinct posterior-mean vectors in the LP.
    pub class_cap: usize,
    pub ties: TieRule,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            outcome_cap: 2_000_000,
            class_cap: 65_536,
            ties: TieRule::MaxExploration,
        }
    }
}

/// Solution of the `(j, N)`-recommendation game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSolution {
    pub value: f64,
    /// Agent's minimax mixture over arms `< j`.
    pub q_star: Vec<f64>,
    pub policy: PaddedPolicy,
}

fn check_arm(inst: &ProblemInstance, j: usize) -> Result<()> {
    if j == 0 || j >= inst.k() {
        return Err(Error::InvalidArgument(format!(
            "arm index {} must be in 2..={}",
            j + 1,
            inst.k()
        )));
    }
    Ok(())
}

fn check_simplex(q: &[f64], len: usize) -> Result<()> {
    if q.len() != len {
        return Err(Error::InvalidArgument(format!(
            "{} weights, expected {len}",
            q.len()
        )));
    }
    if q.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument("weights must be nonnegative".into()));
    }
    let s: f64 = q.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("weights sum to {s}")));
    }
    Ok(())
}

fn mean_law(inst: &ProblemInstance, i: usize, n: usize) -> Result<Vec<(f64, f64)>> {
    let c = inst.arm(i).count_law(n, 0)?;
    Ok(c.means
        .iter()
        .copied()
        .zip(c.probs.iter().copied())
        .filter(|a| a.1 > 0.0)
        .collect())
}

/// `E[(m_j - m_q)_+]` over the first `n` samples of arms `0..=j`, with `m_i` the
/// posterior means: the best response value of the planner against `q`.
pub fn game_value_for_q(inst: &ProblemInstance, j: usize, n: usize, q: &[f64]) -> Result<f64> {
    check_arm(inst, j)?;
    check_simplex(q, j)?;
    let target = GapTerm::new(mean_law(inst, j, n)?, 1.0);
    let terms: Vec<GapTerm> = (0..j)
        .map(|i| Ok(GapTerm::new(mean_law(inst, i, n)?, q[i])))
        .collect::<Result<_>>()?;
    Ok(positive_part(&target, &terms)?.value)
}

fn class_key(means: &[f64]) -> Vec<i64> {
    means.iter().map(|m| (m * 1e11).round() as i64).collect()
}

/// Solve `max_pi min_{i<j} E[(mu_j - mu_i) 1{pi = j}]` over `(j, N)`-informed policies
/// reading `n` samples of every arm `0..=j`.
pub fn solve_recommendation_game(
    inst: &ProblemInstance,
    j: usize,
    n: usize,
    cfg: &GameConfig,
) -> Result<GameSolution> {
    check_arm(inst, j)?;
    solve_game_with_depths(inst, j, &vec![n; j + 1], cfg)
}

/// [`solve_recommendation_game`] with per-arm read depths.
pub fn solve_game_with_depths(
    inst: &ProblemInstance,
    j: usize,
    depths: &[usize],
    cfg: &GameConfig,
) -> Result<GameSolution> {
    check_arm(inst, j)?;
    let space = OutcomeSpace::new(inst, j, depths, None)?;
    if space.size() > cfg.outcome_cap {
        return Err(Error::OutcomeSpaceTooLarge(format!(
            "{} outcomes for arm {} exceed the cap {}; use empirical_comparison_policy",
            space.size(),
            j + 1,
            cfg.outcome_cap
        )));
    }
    // Group outcomes by their vector of posterior means.
    let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut class_means: Vec<Vec<f64>> = Vec::new();
    let mut class_prob: Vec<f64> = Vec::new();
    let mut tuple_class: Vec<(usize, usize)> = Vec::new();
    let mut too_many = false;
    space.for_each(|c, idx, p| {
        if too_many {
            return;
        }
        let m: Vec<f64> = (0..=j).map(|i| space.truth[i][c[i]]).collect();
        let key = class_key(&m);
        let id = *index.entry(key).or_insert_with(|| {
            class_means.push(m);
            class_prob.push(0.0);
            class_means.len() - 1
        });
        class_prob[id] += p;
        tuple_class.push((idx, id));
        if class_means.len() > cfg.class_cap {
            too_many = true;
        }
    });
    if too_many {
        return Err(Error::OutcomeSpaceTooLarge(format!(
            "more than {} mean classes",
            cfg.class_cap
        )));
    }
    let nc = class_means.len();
    // a[i][c] = P_c (m_j - m_i)(c)
    let a: Vec<Vec<f64>> = (0..j)
        .map(|i| {
            (0..nc)
                .map(|c| class_prob[c] * (class_means[c][j] - class_means[c][i]))
                .collect()
        })
        .collect();
    // Variables: x_0..x_{nc-1} in [0,1], v >= 0 last.
    let mut obj = vec![0.0; nc + 1];
    obj[nc] = 1.0;
    let mut upper = vec![1.0; nc + 1];
    upper[nc] = f64::INFINITY;
    let mut main = Lp::new(obj, upper);
    for row in &a {
        let mut coefs: Vec<f64> = row.iter().map(|v| -v).collect();
        coefs.push(1.0);
        main.row(coefs, Cmp::Le, 0.0);
    }
    let sol = main
        .solve()?
        .ok_or_else(|| Error::Invariant("recommendation game LP infeasible".into()))?;
    let value = sol.x[nc];
    let ysum: f64 = sol.duals.iter().map(|y| y.max(0.0)).sum();
    let q_star: Vec<f64> = if ysum > 1e-15 {
        sol.duals.iter().map(|y| y.max(0.0) / ysum).collect()
    } else {
        vec![1.0 / j as f64; j]
    };
    let gap: Vec<f64> = (0..nc)
        .map(|c| class_means[c][j] - (0..j).map(|i| q_star[i] * class_means[c][i]).sum::<f64>())
        .collect();
    let mut x: Vec<f64> = gap
        .iter()
        .map(|&g| if g > MEAN_TOL { 1.0 } else { 0.0 })
        .collect();
    let ties: Vec<usize> = (0..nc).filter(|&c| gap[c].abs() <= MEAN_TOL).collect();
    if !ties.is_empty() && cfg.ties == TieRule::MaxExploration {
        let tx = resolve_ties(&a, &class_means, &class_prob, &x, &ties, j, value)?
            .unwrap_or_else(|| ties.iter().map(|&c| sol.x[c]).collect());
        for (&c, v) in ties.iter().zip(tx) {
            x[c] = v.clamp(0.0, 1.0);
        }
    }
    let mut probs = vec![0.0; space.size()];
    // Unreachable tuples follow the sign rule under q*.
    let st = policy::strides(depths);
    for (idx, slot) in probs.iter_mut().enumerate() {
        let m: Vec<f64> = (0..=j)
            .map(|i| {
                inst.arm(i)
                    .posterior_mean_or_prior(depths[i], (idx / st[i]) % (depths[i] + 1))
            })
            .collect();
        let g = m[j] - (0..j).map(|i| q_star[i] * m[i]).sum::<f64>();
        *slot = if g > MEAN_TOL || (g.abs() <= MEAN_TOL && cfg.ties == TieRule::MaxExploration) {
            1.0
        } else {
            0.0
        };
    }
    for &(idx, c) in &tuple_class {
        probs[idx] = x[c];
    }
    let mut meta = PolicyMeta::new("game_lp");
    meta.q_star = q_star.clone();
    meta.value = Some(value);
    let mut policy = PaddedPolicy {
        arm: j,
        depths: depths.to_vec(),
        rule: Rule::Table { probs },
        fallback: Fallback::Informed,
        meta,
    };
    let audit = audit_policy(inst, &policy, None, cfg.outcome_cap)?;
    policy.meta.lambda = Some(audit.lambda);
    Ok(GameSolution {
        value,
        q_star,
        policy,
    })
}

/// Maximize the tie-class recommendation mass keeping every agent response at the
/// game value, with monotone tie decisions when feasible.
fn resolve_ties(
    a: &[Vec<f64>],
    means: &[Vec<f64>],
    prob: &[f64],
    x: &[f64],
    ties: &[usize],
    j: usize,
    value: f64,
) -> Result<Option<Vec<f64>>> {
    let nt = ties.len();
    let build = |monotone: bool| -> Lp {
        let mut lp = Lp::new(ties.iter().map(|&c| prob[c]).collect(), vec![1.0; nt]);
        for row in a {
            let base: f64 = row.iter().zip(x).map(|(r, v)| r * v).sum();
            lp.row(
                ties.iter().map(|&c| row[c]).collect(),
                Cmp::Ge,
                value - base - 1e-12,
            );
        }
        if monotone && nt <= 400 {
            for (u, &cu) in ties.iter().enumerate() {
                for (w, &cw) in ties.iter().enumerate() {
                    if u != w && dominated_by(&means[cu], &means[cw], j) {
                        let mut coefs = vec![0.0; nt];
                        coefs[u] = 1.0;
                        coefs[w] = -1.0;
                        lp.row(coefs, Cmp::Le, 0.0);
                    }
                }
            }
        }
        lp
    };
    if let Some(s) = build(true).solve()? {
        return Ok(Some(s.x));
    }
    Ok(build(false).solve()?.map(|s| s.x))
}

/// Class `u` is dominated by `w`: `w` is at least as favorable to arm `j`.
fn dominated_by(u: &[f64], w: &[f64], j: usize) -> bool {
    w[j] >= u[j] - MEAN_TOL && (0..j).all(|i| w[i] <= u[i] + MEAN_TOL) && u != w
}

/// Recommend `j` iff its empirical mean beats the `q`-mixture of empirical means (strict).
pub fn empirical_comparison_policy(
    inst: &ProblemInstance,
    j: usize,
    n: usize,
    q: &[f64],
) -> Result<PaddedPolicy> {
    check_arm(inst, j)?;
    check_simplex(q, j)?;
    if n == 0 {
        return Err(Error::InvalidArgument(
            "empirical comparison needs N >= 1".into(),
        ));
    }
    let mut meta = PolicyMeta::new("empirical_comparison");
    meta.q_star = q.to_vec();
    Ok(PaddedPolicy {
        arm: j,
        depths: vec![n; j + 1],
        rule: Rule::Comparison {
            q: q.to_vec(),
            strict: true,
        },
        fallback: Fallback::Informed,
        meta,
    })
}

/// Recommend `j` iff its posterior mean beats the `q`-mixture of posterior means (strict).
pub fn mean_comparison_policy(
    inst: &ProblemInstance,
    j: usize,
    n: usize,
    q: &[f64],
) -> Result<PaddedPolicy> {
    check_arm(inst, j)?;
    check_simplex(q, j)?;
    let mut meta = PolicyMeta::new("mean_comparison");
    meta.q_star = q.to_vec();
    let mut policy = PaddedPolicy {
        arm: j,
        depths: vec![n; j + 1],
        rule: Rule::MeanComparison {
            q: q.to_vec(),
            strict: true,
        },
        fallback: Fallback::Informed,
        meta,
    };
    let pad = mean_comparison_padding(inst, &policy)?;
    policy.meta.lambda = Some(pad.iter().copied().fold(f64::INFINITY, f64::min));
    Ok(policy)
}

/// Efficient policy for Beta priors with parameters in `[1, M]`: couples each posterior-mean
/// law with the worst case (`Beta(M,1)` for arms `< j`, `Beta(1,M)` for `j`) and compares
/// the fake means against their uniform average.
pub fn beta_efficient_policy(
    inst: &ProblemInstance,
    j: usize,
    n: usize,
    m: f64,
) -> Result<PaddedPolicy> {
    check_arm(inst, j)?;
    if !(m >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "M must be at least 1, got {m}"
        )));
    }
    for i in 0..=j {
        match inst.arm(i) {
            ArmPrior::Beta { a, b }
                if *a >= 1.0 - 1e-12 && *b >= 1.0 - 1e-12 && *a <= m + 1e-12 && *b <= m + 1e-12 => {
            }
            other => {
                return Err(Error::InvalidPrior(format!(
                    "arm {} prior {other} is not Beta with parameters in [1, {m}]",
                    i + 1
                )))
            }
        }
    }
    let hi = ArmPrior::beta(m, 1.0)?;
    let lo = ArmPrior::beta(1.0, m)?;
    let mut fakes = Vec::with_capacity(j + 1);
    for i in 0..=j {
        let actual = inst.arm(i).count_law(n, 0)?;
        let worst = if i < j { &hi } else { &lo }.count_law(n, 0)?;
        let (am, wm) = (actual.mean_dist(Some(i)), worst.mean_dist(None));
        let (dom, coupling) = if i < j {
            dominance_and_coupling(&wm, &am)
        } else {
            dominance_and_coupling(&am, &wm)
        };
        let coupling = match (dom, coupling) {
            (true, Some(c)) => c,
            _ => {
                return Err(Error::PolicyConstruction(format!(
                    "arm {} is not dominated by the worst case",
                    i + 1
                )))
            }
        };
        let per_count: Vec<Vec<(f64, f64)>> = actual
            .means
            .iter()
            .map(|&v| {
                if i < j {
                    coupling.given_dominated(v)
                } else {
                    coupling.given_dominant(v)
                }
            })
            .collect();
        fakes.push(per_count);
    }
    let mut meta = PolicyMeta::new("beta_efficient");
    meta.q_star = vec![1.0 / j as f64; j];
    Ok(PaddedPolicy {
        arm: j,
        depths: vec![n; j + 1],
        rule: Rule::FakeAverage { fakes },
        fallback: Fallback::Informed,
        meta,
    })
}

/// Policy for use under `ZEROS_{j, n0}`: the counts of each arm `i < j` are replaced by
/// fake counts whose posterior means dominate the observed ones and follow the
/// unconditional law, and the base rule is applied to the fake data.
pub fn transform_policy(
    inst: &ProblemInstance,
    base: &PaddedPolicy,
    n0: usize,
) -> Result<PaddedPolicy> {
    let j = base.arm;
    let mut maps = Vec::with_capacity(j);
    for i in 0..j {
        let d = base.depths[i];
        let uncond = inst.arm(i).count_law(d, 0)?;
        let cond = inst.arm(i).count_law(d, n0)?;
        if d == 0 || n0 == 0 {
            maps.push((0..=d).map(|s| vec![(s, 1.0)]).collect());
            continue;
        }
        let (dom, coupling) =
            dominance_and_coupling(&uncond.mean_dist(Some(i)), &cond.mean_dist(Some(i)));
        let coupling = match (dom, coupling) {
            (true, Some(c)) => c,
            _ => {
                return Err(Error::PolicyConstruction(format!(
                    "ZEROS law of arm {} is not dominated",
                    i + 1
                )))
            }
        };
        let per_count: Vec<Vec<(usize, f64)>> = (0..=d)
            .map(|s| {
                if cond.probs[s] <= 0.0 {
                    return vec![(s, 1.0)];
                }
                let mut out = Vec::new();
                for (v, pv) in coupling.given_dominated(cond.means[s]) {
                    let ids: Vec<usize> = (0..=d)
                        .filter(|&t| {
                            uncond.probs[t] > 0.0 && (uncond.means[t] - v).abs() <= MERGE_TOL
                        })
                        .collect();
                    let tot: f64 = ids.iter().map(|&t| uncond.probs[t]).sum();
                    for t in ids {
                        out.push((t, pv * uncond.probs[t] / tot));
                    }
                }
                out
            })
            .collect();
        maps.push(per_count);
    }
    let mut meta = base.meta.clone();
    meta.method = format!("transform({})", base.meta.method);
    meta.lambda = None;
    Ok(PaddedPolicy {
        arm: j,
        depths: base.depths.clone(),
        rule: Rule::Transformed {
            base: Box::new(base.rule.clone()),
            n0,
            maps,
        },
        fallback: Fallback::Informed,
        meta,
    })
}

/// Exploit on `n_pad` samples of arm `j` alone: recommend `j` iff its posterior mean is
/// at least the largest prior mean of the earlier arms. Requires a `delta`-easy,
/// `delta`-non-dominant instance.
pub fn easy_exploit_policy(
    inst: &ProblemInstance,
    j: usize,
    n_pad: usize,
    delta: f64,
) -> Result<PaddedPolicy> {
    if j >= inst.k() {
        return Err(Error::InvalidArgument(format!(
            "arm {} out of range",
            j + 1
        )));
    }
    let c = classify_easy_hard(inst.arms(), delta)?;
    if !c.easy || !c.non_dominant {
        return Err(Error::InvalidInstance(format!(
            "instance is not {delta}-easy and {delta}-non-dominant"
        )));
    }
    Ok(easy_policy_unchecked(inst, j, n_pad))
}

pub(crate) fn easy_policy_unchecked(
    inst: &ProblemInstance,
    j: usize,
    n_pad: usize,
) -> PaddedPolicy {
    let threshold = (0..j)
        .map(|i| inst.arm(i).mean())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut depths = vec![0; j + 1];
    depths[j] = n_pad;
    PaddedPolicy {
        arm: j,
        depths,
        rule: Rule::OwnPosterior { threshold },
        fallback: Fallback::Informed,
        meta: PolicyMeta::new("easy_exploit"),
    }
}

/// Outcome-space size beyond which [`suitable_policy`] stops solving the game exactly.
pub const LP_OUTCOME_LIMIT: usize = 200_000;

/// A padded BIC policy for arm `j` reading `n` samples: the game policy when the
/// outcome space is small, else a strict posterior-mean comparison against the
/// mixture minimizing the expected positive gap.
pub fn suitable_policy(
    inst: &ProblemInstance,
    j: usize,
    n: usize,
    cfg: &GameConfig,
) -> Result<PaddedPolicy> {
    check_arm(inst, j)?;
    let size = (n + 1).checked_pow(j as u32 + 1).unwrap_or(usize::MAX);
    if size <= LP_OUTCOME_LIMIT.min(cfg.outcome_cap) {
        match solve_recommendation_game(inst, j, n, cfg) {
            Ok(s) => return Ok(s.policy),
            Err(Error::OutcomeSpaceTooLarge(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let laws: Vec<Vec<(f64, f64)>> = (0..=j)
        .map(|i| mean_law(inst, i, n))
        .collect::<Result<_>>()?;
    let q = crate::params::minimize_over_mixtures(inst.arms(), &laws, j, 2000)?;
    mean_comparison_policy(inst, j, n, &q)
}
