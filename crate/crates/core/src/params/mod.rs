//! Prior-dependent constants: warm-start sample size, padding, bootstrap depth,
//! the incentive lower bound, easy/hard classification and exact round budgets.

mod opt;

use serde::{Deserialize, Serialize};

use crate::algos::ProblemInstance;
use crate::error::{Error, Result};
use crate::priors::{expected_positive_gap_with, prob_best, ArmPrior, DEFAULT_GRID};

/// Tunable constants used when computing [`PriorParams`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamConfig {
    pub c_ts: f64,
    pub c_pad: f64,
    /// Cells used to discretize Beta priors.
    pub grid: usize,
    /// Largest bootstrap depth searched.
    pub n_cap: usize,
    /// Projected-subgradient iterations per minimization.
    pub iters: usize,
    /// Replaces `g_pad / 10` when set.
    pub lambda: Option<f64>,
}

impl Default for ParamConfig {
    fn default() -> Self {
        ParamConfig {
            c_ts: 1.0,
            c_pad: 1.0,
            grid: DEFAULT_GRID,
            n_cap: 1_000_000,
            iters: 2000,
            lambda: None,
        }
    }
}

/// Warm-start constants for Thompson sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsParams {
    pub eps_ts: f64,
    pub delta_ts: f64,
    pub n_ts: usize,
    /// Ordered pair `(i, j)` attaining `eps_ts`.
    pub eps_pair: (usize, usize),
    /// Arm attaining `delta_ts`.
    pub delta_arm: usize,
}

/// Padding constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PadParams {
    pub g_pad: f64,
    pub n_pad: usize,
    pub lambda: f64,
    /// Arm attaining the minimum.
    pub arm: usize,
    /// Minimizing mixture over the arms before `arm`.
    pub weights: Vec<f64>,
}

/// Bootstrap constants. `None` means infinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootParams {
    pub n_boot: Option<usize>,
    pub p_boot: Option<f64>,
}

/// Every prior-dependent constant of an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorParams {
    pub eps_ts: f64,
    pub delta_ts: f64,
    pub n_ts: usize,
    pub g_pad: f64,
    pub n_pad: usize,
    pub lambda: f64,
    /// `None` when no bootstrap depth up to the cap works.
    pub n_boot: Option<usize>,
    pub p_boot: Option<f64>,
    pub c_ts: f64,
    pub c_pad: f64,
    /// `Pr[ZEROS_{j, n_boot}]` for every arm `j` (the first entry is 1).
    pub zeros_prob: Vec<f64>,
    pub provenance: ParamProvenance,
}

/// Where the minima and maxima were attained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamProvenance {
    pub eps_pair: (usize, usize),
    pub delta_arm: usize,
    pub g_pad_arm: usize,
    pub g_pad_weights: Vec<f64>,
}

/// Warm-start constants: `eps_ts` is the smallest expected positive gap over ordered
/// pairs, `delta_ts` the smallest probability of being the best arm.
pub fn ts_warmstart_params(inst: &ProblemInstance, c_ts: f64) -> Result<TsParams> {
    ts_warmstart_params_with(inst, c_ts, DEFAULT_GRID)
}

pub fn ts_warmstart_params_with(
    inst: &ProblemInstance,
    c_ts: f64,
    grid: usize,
) -> Result<TsParams> {
    check_constant("c_ts", c_ts)?;
    let arms = inst.arms();
    let k = arms.len();
    let mut eps = 1.0;
    let mut pair = (0, 0);
    let mut seen: Vec<(&ArmPrior, &ArmPrior, f64)> = Vec::new();
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let g = match seen.iter().find(|s| s.0 == &arms[i] && s.1 == &arms[j]) {
                Some(s) => s.2,
                None => {
                    let g = expected_positive_gap_with(&arms[i], &arms[j..=j], &[1.0], grid)?;
                    seen.push((&arms[i], &arms[j], g));
                    g
                }
            };
            if g < eps {
                eps = g;
                pair = (i, j);
            }
        }
    }
    let best = prob_best(arms);
    let (delta_arm, delta) =
        best.iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, p)| if p < acc.1 { (i, p) } else { acc },
            );
    if eps <= 0.0 {
        return Err(Error::NotExplorable(format!(
            "arms {} and {} have no positive gap",
            pair.0 + 1,
            pair.1 + 1
        )));
    }
    if delta <= 0.0 {
        return Err(Error::NotExplorable(format!(
            "arm {} is never the best arm",
            delta_arm + 1
        )));
    }
    let n_ts = ceil_count(c_ts * eps.powi(-2) * (1.0 / delta).ln());
    Ok(TsParams {
        eps_ts: eps,
        delta_ts: delta,
        n_ts,
        eps_pair: pair,
        delta_arm,
    })
}

/// Padding constants: `g_pad` is the smallest expected advantage of an arm over any
/// mixture of the arms before it.
pub fn padded_params(inst: &ProblemInstance, c_pad: f64) -> Result<PadParams> {
    padded_params_with(inst, c_pad, &ParamConfig::default())
}

pub fn padded_params_with(
    inst: &ProblemInstance,
    c_pad: f64,
    cfg: &ParamConfig,
) -> Result<PadParams> {
    check_constant("c_pad", c_pad)?;
    let k = inst.k();
    if k < 2 {
        return Err(Error::InvalidInstance(
            "padding needs at least two arms".into(),
        ));
    }
    let laws: Vec<Vec<(f64, f64)>> = inst.arms().iter().map(|a| a.discretize(cfg.grid)).collect();
    let mut best: Option<PadParams> = None;
    for j in 1..k {
        let idx: Vec<usize> = (0..j).collect();
        let classes = opt::classes(inst.arms(), &idx, &laws);
        let r = opt::minimize_gap(&laws[j], &classes, cfg.iters)?;
        let weights = spread(&classes, &r.weights, j);
        if best.as_ref().is_none_or(|b| r.value < b.g_pad) {
            best = Some(PadParams {
                g_pad: r.value,
                n_pad: 0,
                lambda: 0.0,
                arm: j,
                weights,
            });
        }
    }
    let mut p = best.expect("k >= 2");
    if p.g_pad <= 0.0 {
        return Err(Error::NotExplorable(format!(
            "arm {} is not explorable (zero padding)",
            p.arm + 1
        )));
    }
    p.g_pad = p.g_pad.min(1.0);
    p.n_pad = ceil_count(c_pad * p.g_pad.powi(-2) * (1.0 / p.g_pad).ln());
    p.lambda = cfg.lambda.unwrap_or(p.g_pad / 10.0);
    Ok(p)
}

/// Smallest bootstrap depth `N0 <= n_cap` after which every arm beats each earlier arm
/// in conditional expectation given `N0` leading zeros of the earlier arms.
fn spread(classes: &[opt::Class], class_weights: &[f64], len: usize) -> Vec<f64> {
    let mut weights = vec![0.0; len];
    for (c, &w) in classes.iter().zip(class_weights) {
        for &m in &c.members {
            weights[m] = w / c.members.len() as f64;
        }
    }
    weights
}

/// Mixture `q` over arms `< j` minimizing `E[(X_j - sum_i q_i X_i)_+]` for the given
/// per-arm laws (indexed by arm).
pub fn minimize_over_mixtures(
    arms: &[ArmPrior],
    laws: &[Vec<(f64, f64)>],
    j: usize,
    iters: usize,
) -> Result<Vec<f64>> {
    if j == 0 || j >= arms.len() || laws.len() <= j {
        return Err(Error::InvalidArgument(format!(
            "arm index {} out of range",
            j + 1
        )));
    }
    let idx: Vec<usize> = (0..j).collect();
    let classes = opt::classes(arms, &idx, laws);
    let r = opt::minimize_gap(&laws[j], &classes, iters)?;
    Ok(spread(&classes, &r.weights, j))
}

pub fn bootstrap_params(inst: &ProblemInstance, n_cap: usize) -> BootParams {
    let k = inst.k();
    let means = inst.means();
    let ok = |n0: usize| -> bool {
        (1..k).all(|j| {
            (0..j).all(|i| match inst.arm(i).posterior_mean(n0, 0) {
                Some(m) => means[j] - m > 1e-12,
                None => false,
            })
        })
    };
    if k == 1 {
        return BootParams {
            n_boot: Some(1),
            p_boot: Some(1.0),
        };
    }
    if n_cap == 0 || !ok(n_cap) {
        return BootParams {
            n_boot: None,
            p_boot: None,
        };
    }
    let (mut lo, mut hi) = (1usize, n_cap);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    BootParams {
        n_boot: Some(lo),
        p_boot: Some(inst.zeros_probability(k - 1, lo)),
    }
}

/// All constants of an instance.
pub fn prior_params(inst: &ProblemInstance, cfg: &ParamConfig) -> Result<PriorParams> {
    let ts = ts_warmstart_params_with(inst, cfg.c_ts, cfg.grid)?;
    let (pad, boot) = if inst.k() >= 2 {
        (
            padded_params_with(inst, cfg.c_pad, cfg)?,
            bootstrap_params(inst, cfg.n_cap),
        )
    } else {
        let lambda = cfg.lambda.unwrap_or(0.1);
        (
            PadParams {
                g_pad: 1.0,
                n_pad: 1,
                lambda,
                arm: 0,
                weights: vec![],
            },
            BootParams {
                n_boot: Some(1),
                p_boot: Some(1.0),
            },
        )
    };
    let zeros_prob = match boot.n_boot {
        Some(n0) => (0..inst.k())
            .map(|j| inst.zeros_probability(j, n0))
            .collect(),
        None => (0..inst.k())
            .map(|j| if j == 0 { 1.0 } else { 0.0 })
            .collect(),
    };
    Ok(PriorParams {
        eps_ts: ts.eps_ts,
        delta_ts: ts.delta_ts,
        n_ts: ts.n_ts,
        g_pad: pad.g_pad,
        n_pad: pad.n_pad,
        lambda: pad.lambda,
        n_boot: boot.n_boot,
        p_boot: boot.p_boot,
        c_ts: cfg.c_ts,
        c_pad: cfg.c_pad,
        zeros_prob,
        provenance: ParamProvenance {
            eps_pair: ts.eps_pair,
            delta_arm: ts.delta_arm,
            g_pad_arm: pad.arm,
            g_pad_weights: pad.weights,
        },
    })
}

fn ceil_count(x: f64) -> usize {
    if !x.is_finite() {
        return usize::MAX;
    }
    (x.ceil().max(1.0)) as usize
}

fn check_constant(name: &str, c: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "{name} must be positive, got {c}"
        )));
    }
    Ok(())
}

/// Lower bound on the rounds any BIC algorithm needs to sample every arm once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    /// `max(K, n_boot, ratio)`; infinite values serialize as `"inf"`.
    #[serde(with = "crate::harness::serde_inf")]
    pub main_lb: f64,
    pub witness_arm: usize,
    pub witness_weights: Vec<f64>,
    pub components: LowerBoundComponents,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundComponents {
    pub k: usize,
    #[serde(with = "crate::harness::serde_inf")]
    pub n_boot: f64,
    #[serde(with = "crate::harness::serde_inf")]
    pub ratio: f64,
}

/// The lower bound `max(K, n_boot, max_{j,q} E[(mu_j - mu_q)_-] / E[(mu_j - mu_q)_+])`
/// with `q` ranging over all mixtures of the K arms. A `0/0` ratio counts as zero.
pub fn lower_bound(inst: &ProblemInstance) -> Result<LowerBoundReport> {
    lower_bound_with(inst, &ParamConfig::default())
}

pub fn lower_bound_with(inst: &ProblemInstance, cfg: &ParamConfig) -> Result<LowerBoundReport> {
    let k = inst.k();
    let laws: Vec<Vec<(f64, f64)>> = inst.arms().iter().map(|a| a.discretize(cfg.grid)).collect();
    let mut ratio = 0.0;
    let mut witness_arm = 0;
    let mut witness_weights = vec![0.0; k];
    witness_weights[0] = 1.0;
    let mut done: Vec<usize> = Vec::new();
    for j in 0..k {
        // Arms with the same prior give the same ratio.
        if done.iter().any(|&d| inst.arm(d) == inst.arm(j)) {
            continue;
        }
        done.push(j);
        let idx: Vec<usize> = (0..k).filter(|&i| i != j).collect();
        let classes = opt::classes(inst.arms(), &idx, &laws);
        let r = opt::maximize_ratio(&laws[j], inst.arm(j).mean(), &classes, cfg.iters)?;
        if r.ratio > ratio {
            ratio = r.ratio;
            witness_arm = j;
            let mut w = vec![0.0; k];
            w[j] = r.self_weight;
            for (c, &wc) in classes.iter().zip(&r.weights) {
                for &m in &c.members {
                    w[m] = wc / c.members.len() as f64;
                }
            }
            witness_weights = w;
        }
    }
    let boot = bootstrap_params(inst, cfg.n_cap);
    let n_boot = boot.n_boot.map_or(f64::INFINITY, |n| n as f64);
    let main_lb = (k as f64).max(n_boot).max(ratio);
    Ok(LowerBoundReport {
        main_lb,
        witness_arm,
        witness_weights,
        components: LowerBoundComponents { k, n_boot, ratio },
    })
}

/// Evaluate `E[(mu_j - mu_q)_-] / E[(mu_j - mu_q)_+]` at a given mixture `q` over all arms.
pub fn incentive_ratio(inst: &ProblemInstance, j: usize, q: &[f64]) -> Result<f64> {
    let k = inst.k();
    if q.len() != k {
        return Err(Error::InvalidArgument(format!(
            "{} weights for {k} arms",
            q.len()
        )));
    }
    let others: Vec<ArmPrior> = (0..k)
        .filter(|&i| i != j)
        .map(|i| inst.arm(i).clone())
        .collect();
    let rest: f64 = 1.0 - q[j];
    let plus = if rest <= 0.0 {
        0.0
    } else {
        let w: Vec<f64> = (0..k).filter(|&i| i != j).map(|i| q[i] / rest).collect();
        rest * expected_positive_gap_with(inst.arm(j), &others, &w, DEFAULT_GRID)?
    };
    let numer: f64 = (0..k).map(|i| q[i] * inst.arm(i).mean()).sum::<f64>() - inst.arm(j).mean();
    Ok(if plus <= 1e-300 {
        if numer > 1e-15 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        1.0 + numer / plus
    })
}

/// Easy/hard classification of a prior collection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub easy: bool,
    pub hard: bool,
    pub non_dominant: bool,
}

/// `easy`: every prior exceeds the largest prior mean by more than `delta` in expectation.
/// `hard`: some prior puts no mass at or above the largest prior mean minus `delta`.
/// `non_dominant`: `E[(mean(P) - mu')_+] >= delta` for every ordered pair `(P, P')`.
pub fn classify_easy_hard(collection: &[ArmPrior], delta: f64) -> Result<Classification> {
    if collection.is_empty() {
        return Err(Error::InvalidArgument("empty collection".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must be in (0,1), got {delta}"
        )));
    }
    let phi = collection
        .iter()
        .map(|p| p.mean())
        .fold(f64::NEG_INFINITY, f64::max);
    let easy = collection
        .iter()
        .map(|p| p.upper_partial_mean(phi))
        .fold(f64::INFINITY, f64::min)
        > delta;
    let hard = collection
        .iter()
        .any(|p| p.tail_at_least(phi - delta) <= 0.0);
    let non_dominant = collection.iter().all(|p| {
        collection
            .iter()
            .all(|other| lower_partial_mean(other, p.mean()) >= delta - 1e-12)
    });
    Ok(Classification {
        easy,
        hard,
        non_dominant,
    })
}

/// `E[(c - mu)_+]`.
fn lower_partial_mean(p: &ArmPrior, c: f64) -> f64 {
    p.upper_partial_mean(c) - (p.mean() - c)
}

/// The three scheduled exploration algorithms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    Alg1,
    Alg2,
    Alg3,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "alg1" | "1" => Ok(Algorithm::Alg1),
            "alg2" | "2" => Ok(Algorithm::Alg2),
            "alg3" | "3" => Ok(Algorithm::Alg3),
            _ => Err(Error::InvalidArgument(format!("unknown algorithm {s}"))),
        }
    }
}

/// Inputs of the phase layout of the scheduled algorithms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutParams {
    pub lambda: f64,
    /// Bootstrap depth `N0`.
    pub n0: usize,
    pub n_pad: usize,
    /// `Pr[ZEROS_{j, N0}]` per arm.
    pub zeros_prob: Vec<f64>,
}

impl LayoutParams {
    pub fn from_params(p: &PriorParams) -> Result<Self> {
        let n0 = p
            .n_boot
            .ok_or_else(|| Error::BelowFloor("bootstrap depth is infinite".into()))?;
        Ok(LayoutParams {
            lambda: p.lambda,
            n0,
            n_pad: p.n_pad,
            zeros_prob: p.zeros_prob.clone(),
        })
    }

    /// Starting exploration probability `q / (1 + q)` with `q = lambda * Pr[ZEROS]`.
    pub fn initial_probability(&self, j: usize) -> f64 {
        let q = self.lambda * self.zeros_prob[j];
        q / (1.0 + q)
    }

    /// `1 + ceil(1 / lambda)`.
    pub fn n_lambda(&self) -> usize {
        1 + (1.0 / self.lambda).ceil() as usize
    }
}

/// Successive exploration probabilities `p, min(1, p(1+lambda)), ...` while below one;
/// the length of the returned list is the number of growth iterations.
pub fn growth_sequence(p: f64, lambda: f64) -> Result<Vec<f64>> {
    if !(p > 0.0) || !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "growth needs p > 0 and lambda > 0 (p = {p}, lambda = {lambda})"
        )));
    }
    let mut out = Vec::new();
    let mut p = p.min(1.0);
    while p < 1.0 {
        out.push(p);
        p = (p * (1.0 + lambda)).min(1.0);
        if out.len() > 100_000_000 {
            return Err(Error::InvalidArgument(
                "growth loop does not terminate".into(),
            ));
        }
    }
    Ok(out)
}

/// Smallest `n >= 0` with `p (1 + lambda)^n >= 1`, evaluated by the same floating-point
/// recursion the schedules use.
pub fn growth_iterations(p: f64, lambda: f64) -> Result<usize> {
    Ok(growth_sequence(p, lambda)?.len())
}

/// Minimum `N` accepted by each algorithm.
pub fn floor_for(layout: &LayoutParams, algorithm: Algorithm) -> usize {
    match algorithm {
        Algorithm::Alg1 => layout.n0.max(layout.n_pad),
        Algorithm::Alg2 => layout.n_pad,
        Algorithm::Alg3 => layout.n0.max(layout.n_pad),
    }
}

/// Exact number of rounds of an algorithm's phase layout.
pub fn rounds_budget(
    params: &PriorParams,
    k: usize,
    n: usize,
    algorithm: Algorithm,
) -> Result<u64> {
    let layout = LayoutParams::from_params(params)?;
    let floor = floor_for(&layout, algorithm);
    if n < floor {
        return Err(Error::BelowFloor(format!(
            "N = {n} is below the floor {floor} of {algorithm:?}"
        )));
    }
    layout_rounds(&layout, k, n, algorithm)
}

/// Round budget with `N` raised to the algorithm's floor when smaller.
pub fn upper_bound_rounds(
    params: &PriorParams,
    k: usize,
    n: usize,
    algorithm: Algorithm,
) -> Result<u64> {
    let layout = LayoutParams::from_params(params)?;
    layout_rounds(&layout, k, n.max(floor_for(&layout, algorithm)), algorithm)
}

/// Exact number of rounds for explicit layout inputs (no floor check).
pub fn layout_rounds(
    layout: &LayoutParams,
    k: usize,
    n: usize,
    algorithm: Algorithm,
) -> Result<u64> {
    if layout.zeros_prob.len() < k {
        return Err(Error::InvalidArgument(
            "zeros probabilities missing for some arms".into(),
        ));
    }
    let n = n as u128;
    let n_pad = layout.n_pad as u128;
    let total: u128 = match algorithm {
        Algorithm::Alg1 => {
            let mut total = n;
            for j in 1..k {
                total += n
                    * (2 + growth_iterations(layout.initial_probability(j), layout.lambda)?
                        as u128);
            }
            total
        }
        Algorithm::Alg2 => {
            let l = n.max(layout.n0 as u128).max(n_pad);
            let n_lambda = layout.n_lambda() as u128;
            let mut total = l;
            for j in 1..k {
                let iters =
                    growth_iterations(layout.initial_probability(j), layout.lambda)? as u128;
                total += (2 + iters) * n_pad + n_lambda * l;
            }
            total
        }
        Algorithm::Alg3 => {
            let iters = alg3_iterations(layout, k)? as u128;
            let n_lambda = layout.n_lambda() as u128;
            k as u128 * layout.n0 as u128 + 2 * n_pad + iters * n_pad + k as u128 * n_lambda * n
        }
    };
    u64::try_from(total)
        .map_err(|_| Error::InvalidArgument(format!("round budget {total} exceeds 64 bits")))
}

/// Growth iterations of the easy-instance algorithm: the longest loop over the
/// possible choices of the randomly chosen arm.
pub fn alg3_iterations(layout: &LayoutParams, k: usize) -> Result<usize> {
    let mut m = 0;
    for j in 0..k {
        m = m.max(growth_iterations(layout.zeros_prob[j], layout.lambda)?);
    }
    Ok(m)
}
