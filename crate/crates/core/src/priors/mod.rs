//! Arm priors, Bernoulli posteriors, posterior-mean laws, dominance and monotone couplings.
//!
//! Beta priors use conjugate Beta-Binomial arithmetic. Every other prior is a finite set
//! of atoms on `[0, 1]`. Laws over posterior means ([`MeanDist`]) are sorted, merged at
//! `1e-12` and always sum to one.

mod gap;

pub use gap::{positive_part, positive_part_above, GapEval, GapTerm};

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF};
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};
use crate::num::{bernoulli_loglik, canonical_law, integrate, ln_choose, log_sum_exp};

/// Values closer than this are treated as one atom.
pub const MERGE_TOL: f64 = 1e-12;
/// Tolerance on probability sums.
pub const SUM_TOL: f64 = 1e-12;
/// Default number of cells used to discretize a Beta prior.
pub const DEFAULT_GRID: usize = 512;

/// Prior over an arm's mean reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", try_from = "RawPrior", into = "RawPrior")]
pub enum ArmPrior {
    Beta { a: f64, b: f64 },
    Atoms { support: Vec<(f64, f64)> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum RawPrior {
    Beta { a: f64, b: f64 },
    Atoms { support: Vec<(f64, f64)> },
}

impl TryFrom<RawPrior> for ArmPrior {
    type Error = Error;
    fn try_from(raw: RawPrior) -> Result<Self> {
        match raw {
            RawPrior::Beta { a, b } => ArmPrior::beta(a, b),
            RawPrior::Atoms { support } => ArmPrior::atoms(support),
        }
    }
}

impl From<ArmPrior> for RawPrior {
    fn from(p: ArmPrior) -> Self {
        match p {
            ArmPrior::Beta { a, b } => RawPrior::Beta { a, b },
            ArmPrior::Atoms { support } => RawPrior::Atoms { support },
        }
    }
}

/// Mean, variance and support bounds of a prior.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PriorMoments {
    pub mean: f64,
    pub variance: f64,
    pub support_inf: f64,
    pub support_sup: f64,
}

impl ArmPrior {
    /// Beta(a, b) with `a, b > 0`.
    pub fn beta(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidPrior(format!(
                "Beta parameters must be positive, got ({a}, {b})"
            )));
        }
        Ok(ArmPrior::Beta { a, b })
    }

    /// Finite-support prior. Atoms are sorted, values within `1e-12` merged and
    /// zero-mass atoms dropped.
    pub fn atoms(support: Vec<(f64, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidPrior("empty support".into()));
        }
        for &(v, p) in &support {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::InvalidPrior(format!("atom value {v} outside [0,1]")));
            }
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::InvalidPrior(format!(
                    "atom probability {p} outside [0,1]"
                )));
            }
        }
        let total: f64 = support.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidPrior(format!(
                "atom probabilities sum to {total}"
            )));
        }
        let law = canonical_law(support, MERGE_TOL);
        let total: f64 = law.iter().map(|a| a.1).sum();
        let support = law.into_iter().map(|(v, p)| (v, p / total)).collect();
        Ok(ArmPrior::Atoms { support })
    }

    /// Point mass at `v`.
    pub fn point(v: f64) -> Result<Self> {
        ArmPrior::atoms(vec![(v, 1.0)])
    }

    /// Two atoms with equal mass.
    pub fn coin(lo: f64, hi: f64) -> Result<Self> {
        ArmPrior::atoms(vec![(lo, 0.5), (hi, 0.5)])
    }

    pub fn is_beta(&self) -> bool {
        matches!(self, ArmPrior::Beta { .. })
    }

    /// Prior mean.
    pub fn mean(&self) -> f64 {
        match self {
            ArmPrior::Beta { a, b } => a / (a + b),
            ArmPrior::Atoms { support } => support.iter().map(|(v, p)| v * p).sum(),
        }
    }

    /// Prior strength `a + b` for Beta priors.
    pub fn strength(&self) -> Option<f64> {
        match self {
            ArmPrior::Beta { a, b } => Some(a + b),
            ArmPrior::Atoms { .. } => None,
        }
    }

    pub fn moments(&self) -> PriorMoments {
        prior_moments(self)
    }

    /// `Pr[mu <= x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            ArmPrior::Beta { a, b } => {
                if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    beta_dist(*a, *b).cdf(x)
                }
            }
            ArmPrior::Atoms { support } => support
                .iter()
                .filter(|a| a.0 <= x + MERGE_TOL)
                .map(|a| a.1)
                .sum(),
        }
    }

    /// `Pr[mu < x]`.
    pub fn cdf_below(&self, x: f64) -> f64 {
        match self {
            ArmPrior::Beta { .. } => self.cdf(x),
            ArmPrior::Atoms { support } => support
                .iter()
                .filter(|a| a.0 < x - MERGE_TOL)
                .map(|a| a.1)
                .sum(),
        }
    }

    /// `E[(mu - c)_+]`.
    pub fn upper_partial_mean(&self, c: f64) -> f64 {
        match self {
            ArmPrior::Beta { .. } => {
                if c >= 1.0 {
                    return 0.0;
                }
                let lo = c.max(0.0);
                (lo - c) + integrate(|x| 1.0 - self.cdf(x), lo, 1.0, &[], 64)
            }
            ArmPrior::Atoms { support } => support.iter().map(|(v, p)| p * (v - c).max(0.0)).sum(),
        }
    }

    /// `Pr[mu >= x]`.
    pub fn tail_at_least(&self, x: f64) -> f64 {
        1.0 - self.cdf_below(x)
    }

    /// Bayesian update on `n` Bernoulli samples with `s` successes.
    pub fn posterior_update(&self, n: usize, s: usize) -> Result<ArmPrior> {
        posterior_update(self, n, s)
    }

    /// Posterior mean after `n` samples with `s` successes, or `None` when the data has
    /// zero likelihood.
    pub fn posterior_mean(&self, n: usize, s: usize) -> Option<f64> {
        assert!(s <= n);
        match self {
            ArmPrior::Beta { a, b } => Some((a + s as f64) / (a + b + n as f64)),
            ArmPrior::Atoms { support } => {
                let logs: Vec<f64> = support
                    .iter()
                    .map(|&(v, p)| p.ln() + bernoulli_loglik(v, s, n - s))
                    .collect();
                let z = log_sum_exp(&logs);
                if z == f64::NEG_INFINITY {
                    return None;
                }
                Some(
                    support
                        .iter()
                        .zip(&logs)
                        .map(|(&(v, _), &l)| v * (l - z).exp())
                        .sum(),
                )
            }
        }
    }

    /// Posterior mean with the convention that zero-likelihood data keeps the prior mean.
    pub fn posterior_mean_or_prior(&self, n: usize, s: usize) -> f64 {
        self.posterior_mean(n, s).unwrap_or_else(|| self.mean())
    }

    /// `E[(1 - mu)^n]`: probability that the first `n` samples are all zero.
    pub fn zeros_probability(&self, n: usize) -> f64 {
        self.ln_zeros_probability(n).exp()
    }

    pub fn ln_zeros_probability(&self, n: usize) -> f64 {
        match self {
            ArmPrior::Beta { a, b } if n <= 100_000 => (0..n)
                .map(|m| ((b + m as f64) / (a + b + m as f64)).ln())
                .sum(),
            ArmPrior::Beta { a, b } => ln_beta(*a, b + n as f64) - ln_beta(*a, *b),
            ArmPrior::Atoms { support } => {
                let logs: Vec<f64> = support
                    .iter()
                    .map(|&(v, p)| p.ln() + bernoulli_loglik(v, 0, n))
                    .collect();
                log_sum_exp(&logs)
            }
        }
    }

    /// Law of the success count among `n` samples, given that the first `zeros`
    /// of them (capped at `n`) are zero, together with the posterior mean at each count.
    pub fn count_law(&self, n: usize, zeros: usize) -> Result<CountLaw> {
        let z = zeros.min(n);
        let m = n - z;
        let mut logp = vec![f64::NEG_INFINITY; n + 1];
        match self {
            ArmPrior::Beta { a, b } => {
                let b2 = b + z as f64;
                let base = ln_beta(*a, b2);
                for (s, lp) in logp.iter_mut().enumerate().take(m + 1) {
                    *lp = ln_choose(m, s) + ln_beta(a + s as f64, b2 + (m - s) as f64) - base;
                }
            }
            ArmPrior::Atoms { support } => {
                let post: Vec<f64> = support
                    .iter()
                    .map(|&(v, p)| p.ln() + bernoulli_loglik(v, 0, z))
                    .collect();
                let zn = log_sum_exp(&post);
                if zn == f64::NEG_INFINITY {
                    return Err(Error::ImpossibleObservation(format!(
                        "{z} leading zeros have probability 0"
                    )));
                }
                for (s, lp) in logp.iter_mut().enumerate().take(m + 1) {
                    let terms: Vec<f64> = support
                        .iter()
                        .zip(&post)
                        .map(|(&(v, _), &w)| {
                            w - zn + ln_choose(m, s) + bernoulli_loglik(v, s, m - s)
                        })
                        .collect();
                    *lp = log_sum_exp(&terms);
                }
            }
        }
        let zl = log_sum_exp(&logp);
        let probs: Vec<f64> = logp.iter().map(|&l| (l - zl).exp()).collect();
        let means = (0..=n)
            .map(|s| self.posterior_mean_or_prior(n, s))
            .collect();
        Ok(CountLaw {
            n,
            zeros: z,
            probs,
            means,
        })
    }

    /// Draw a mean from the prior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ArmPrior::Beta { a, b } => {
                use rand_distr::Distribution;
                rand_distr::Beta::new(*a, *b)
                    .expect("validated parameters")
                    .sample(rng)
            }
            ArmPrior::Atoms { support } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(v, p) in support {
                    acc += p;
                    if u < acc {
                        return v;
                    }
                }
                support[support.len() - 1].0
            }
        }
    }

    /// Draw a mean from the posterior after `n` samples with `s` successes.
    pub fn sample_posterior<R: Rng + ?Sized>(&self, n: usize, s: usize, rng: &mut R) -> f64 {
        match self {
            ArmPrior::Beta { a, b } => ArmPrior::Beta {
                a: a + s as f64,
                b: b + (n - s) as f64,
            }
            .sample(rng),
            ArmPrior::Atoms { .. } => match self.posterior_update(n, s) {
                Ok(post) => post.sample(rng),
                Err(_) => self.sample(rng),
            },
        }
    }

    /// Discrete law used for expectations: atoms as given, Beta priors as `grid`
    /// equispaced cells at their midpoints carrying the exact cell mass.
    pub fn discretize(&self, grid: usize) -> Vec<(f64, f64)> {
        match self {
            ArmPrior::Atoms { support } => support.clone(),
            ArmPrior::Beta { a, b } => {
                let d = beta_dist(*a, *b);
                let g = grid.max(1);
                let mut prev = 0.0;
                let mut out = Vec::with_capacity(g);
                for i in 0..g {
                    let hi = if i + 1 == g {
                        1.0
                    } else {
                        d.cdf((i + 1) as f64 / g as f64)
                    };
                    out.push(((i as f64 + 0.5) / g as f64, (hi - prev).max(0.0)));
                    prev = hi;
                }
                let total: f64 = out.iter().map(|a| a.1).sum();
                out.into_iter()
                    .filter(|a| a.1 > 0.0)
                    .map(|(v, p)| (v, p / total))
                    .collect()
            }
        }
    }

    /// Density for Beta priors.
    pub(crate) fn beta_pdf(&self, x: f64) -> f64 {
        match self {
            ArmPrior::Beta { a, b } => beta_dist(*a, *b).pdf(x),
            ArmPrior::Atoms { .. } => 0.0,
        }
    }

    /// Atom values, empty for Beta priors.
    pub fn atom_values(&self) -> Vec<f64> {
        match self {
            ArmPrior::Atoms { support } => support.iter().map(|a| a.0).collect(),
            ArmPrior::Beta { .. } => Vec::new(),
        }
    }
}

impl fmt::Display for ArmPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArmPrior::Beta { a, b } => write!(f, "Beta({a}, {b})"),
            ArmPrior::Atoms { support } => {
                write!(f, "{{")?;
                for (i, (v, p)) in support.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}:{p}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

fn beta_dist(a: f64, b: f64) -> statrs::distribution::Beta {
    statrs::distribution::Beta::new(a, b).expect("validated parameters")
}

/// Law of the success count with the posterior mean at each count.
#[derive(Clone, Debug, PartialEq)]
pub struct CountLaw {
    pub n: usize,
    pub zeros: usize,
    /// `probs[s]` = Pr[s successes among the `n` samples].
    pub probs: Vec<f64>,
    /// `means[s]` = E[mu | s successes among `n`].
    pub means: Vec<f64>,
}

impl CountLaw {
    pub fn mean_dist(&self, arm: Option<usize>) -> MeanDist {
        let pairs = self
            .means
            .iter()
            .copied()
            .zip(self.probs.iter().copied())
            .collect();
        MeanDist::from_pairs(
            pairs,
            Provenance {
                arm,
                n: self.n,
                zeros: (self.zeros > 0).then_some(self.zeros),
            },
        )
    }
}

/// Moments of a prior.
pub fn prior_moments(p: &ArmPrior) -> PriorMoments {
    match p {
        ArmPrior::Beta { a, b } => {
            let s = a + b;
            PriorMoments {
                mean: a / s,
                variance: a * b / (s * s * (s + 1.0)),
                support_inf: 0.0,
                support_sup: 1.0,
            }
        }
        ArmPrior::Atoms { support } => {
            let mean: f64 = support.iter().map(|(v, q)| v * q).sum();
            let variance = support
                .iter()
                .map(|(v, q)| q * (v - mean) * (v - mean))
                .sum();
            PriorMoments {
                mean,
                variance,
                support_inf: support[0].0,
                support_sup: support[support.len() - 1].0,
            }
        }
    }
}

/// Bayesian update of `p` on `n` samples with `s` successes.
pub fn posterior_update(p: &ArmPrior, n: usize, s: usize) -> Result<ArmPrior> {
    if s > n {
        return Err(Error::InvalidArgument(format!(
            "{s} successes out of {n} samples"
        )));
    }
    match p {
        ArmPrior::Beta { a, b } => Ok(ArmPrior::Beta {
            a: a + s as f64,
            b: b + (n - s) as f64,
        }),
        ArmPrior::Atoms { support } => {
            let logs: Vec<f64> = support
                .iter()
                .map(|&(v, q)| q.ln() + bernoulli_loglik(v, s, n - s))
                .collect();
            let z = log_sum_exp(&logs);
            if z == f64::NEG_INFINITY {
                return Err(Error::ImpossibleObservation(format!(
                    "{s} of {n} successes under {p}"
                )));
            }
            let pairs = support
                .iter()
                .zip(&logs)
                .map(|(&(v, _), &l)| (v, (l - z).exp()))
                .collect();
            let law = canonical_law(pairs, MERGE_TOL);
            let total: f64 = law.iter().map(|a| a.1).sum();
            Ok(ArmPrior::Atoms {
                support: law.into_iter().map(|(v, q)| (v, q / total)).collect(),
            })
        }
    }
}

/// Where a [`MeanDist`] came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub arm: Option<usize>,
    pub n: usize,
    pub zeros: Option<usize>,
}

/// Law of a posterior mean: sorted `(value, probability)` atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanDist {
    pub atoms: Vec<(f64, f64)>,
    pub provenance: Provenance,
}

impl MeanDist {
    /// Canonicalize arbitrary pairs: sort, merge within `1e-12`, drop zero masses, renormalize.
    pub fn from_pairs(pairs: Vec<(f64, f64)>, provenance: Provenance) -> Self {
        let law = canonical_law(pairs, MERGE_TOL);
        let total: f64 = law.iter().map(|a| a.1).sum();
        let atoms = law.into_iter().map(|(v, p)| (v, p / total)).collect();
        MeanDist { atoms, provenance }
    }

    pub fn point(v: f64) -> Self {
        MeanDist {
            atoms: vec![(v, 1.0)],
            provenance: Provenance::default(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(v, p)| v * p).sum()
    }

    /// `Pr[X <= x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.0 <= x + MERGE_TOL)
            .map(|a| a.1)
            .sum()
    }

    /// Index of the atom equal to `v` (within `1e-12`).
    pub fn index_of(&self, v: f64) -> Option<usize> {
        self.atoms.iter().position(|a| (a.0 - v).abs() <= MERGE_TOL)
    }
}

/// `(posterior mean, probability)` law of E[mu | first N samples]; the first
/// `zeros_prefix` samples (capped at `n`) are conditioned to be zero. When
/// `zeros_prefix > n` the law is that of E[mu | n zero samples], a point mass.
pub fn posterior_mean_dist(p: &ArmPrior, n: usize, zeros_prefix: usize) -> Result<MeanDist> {
    Ok(p.count_law(n, zeros_prefix)?.mean_dist(None))
}

/// Joint law of a dominant and a dominated posterior mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    /// `(dominant value, dominated value, joint probability)`.
    pub triples: Vec<(f64, f64, f64)>,
}

impl Coupling {
    /// Law of the dominant partner given the dominated draw `y`.
    pub fn given_dominated(&self, y: f64) -> Vec<(f64, f64)> {
        self.conditional(|t| (t.1 - y).abs() <= MERGE_TOL, |t| t.0)
    }

    /// Law of the dominated partner given the dominant draw `x`.
    pub fn given_dominant(&self, x: f64) -> Vec<(f64, f64)> {
        self.conditional(|t| (t.0 - x).abs() <= MERGE_TOL, |t| t.1)
    }

    fn conditional(
        &self,
        keep: impl Fn(&(f64, f64, f64)) -> bool,
        pick: impl Fn(&(f64, f64, f64)) -> f64,
    ) -> Vec<(f64, f64)> {
        let pairs: Vec<(f64, f64)> = self
            .triples
            .iter()
            .filter(|t| keep(t))
            .map(|t| (pick(t), t.2))
            .collect();
        let total: f64 = pairs.iter().map(|a| a.1).sum();
        if total <= 0.0 {
            return Vec::new();
        }
        canonical_law(
            pairs.into_iter().map(|(v, p)| (v, p / total)).collect(),
            MERGE_TOL,
        )
    }

    pub fn dominant_marginal(&self) -> Vec<(f64, f64)> {
        canonical_law(self.triples.iter().map(|t| (t.0, t.2)).collect(), MERGE_TOL)
    }

    pub fn dominated_marginal(&self) -> Vec<(f64, f64)> {
        canonical_law(self.triples.iter().map(|t| (t.1, t.2)).collect(), MERGE_TOL)
    }
}

/// First-order stochastic dominance: `F_hi <= F_lo` everywhere (within `1e-12`).
pub fn stochastically_dominates(hi: &MeanDist, lo: &MeanDist) -> bool {
    let mut xs: Vec<f64> = hi.atoms.iter().chain(&lo.atoms).map(|a| a.0).collect();
    xs.sort_by(|a, b| a.total_cmp(b));
    let (mut fh, mut fl) = (0.0, 0.0);
    let (mut i, mut j) = (0, 0);
    for x in xs {
        while i < hi.atoms.len() && hi.atoms[i].0 <= x {
            fh += hi.atoms[i].1;
            i += 1;
        }
        while j < lo.atoms.len() && lo.atoms[j].0 <= x {
            fl += lo.atoms[j].1;
            j += 1;
        }
        if fh > fl + SUM_TOL {
            return false;
        }
    }
    true
}

/// Dominance test plus the canonical inverse-CDF coupling when `hi` dominates `lo`.
pub fn dominance_and_coupling(hi: &MeanDist, lo: &MeanDist) -> (bool, Option<Coupling>) {
    if !stochastically_dominates(hi, lo) {
        return (false, None);
    }
    let cum = |law: &[(f64, f64)]| -> Vec<f64> {
        let mut acc = 0.0;
        let mut out: Vec<f64> = law
            .iter()
            .map(|a| {
                acc += a.1;
                acc
            })
            .collect();
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
        out
    };
    let ch = cum(&hi.atoms);
    let cl = cum(&lo.atoms);
    let mut cuts: Vec<f64> = ch.iter().chain(&cl).copied().collect();
    cuts.sort_by(|a, b| a.total_cmp(b));
    let mut triples: Vec<(f64, f64, f64)> = Vec::new();
    let mut prev = 0.0;
    for c in cuts {
        if c <= prev {
            continue;
        }
        let mid = 0.5 * (prev + c);
        let i = ch.iter().position(|&x| x > mid).unwrap_or(ch.len() - 1);
        let j = cl.iter().position(|&x| x > mid).unwrap_or(cl.len() - 1);
        let (x, y) = (hi.atoms[i].0, lo.atoms[j].0);
        match triples.last_mut() {
            Some(t) if t.0 == x && t.1 == y => t.2 += c - prev,
            _ => triples.push((x, y, c - prev)),
        }
        prev = c;
    }
    // A dominated cell whose partner falls below it only through rounding is clamped.
    for t in &mut triples {
        if t.0 < t.1 {
            debug_assert!(t.1 - t.0 < 1e-9);
            t.1 = t.0;
        }
    }
    (true, Some(Coupling { triples }))
}

/// `E[(mu_j - mu_q)_+]` with `mu_q = sum_i q_i mu_i` over independent arms.
pub fn expected_positive_gap(j_prior: &ArmPrior, others: &[ArmPrior], q: &[f64]) -> Result<f64> {
    expected_positive_gap_with(j_prior, others, q, DEFAULT_GRID)
}

/// [`expected_positive_gap`] with an explicit Beta discretization grid.
pub fn expected_positive_gap_with(
    j_prior: &ArmPrior,
    others: &[ArmPrior],
    q: &[f64],
    grid: usize,
) -> Result<f64> {
    if q.len() != others.len() {
        return Err(Error::InvalidArgument(format!(
            "{} weights for {} arms",
            q.len(),
            others.len()
        )));
    }
    if q.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::InvalidArgument("negative weight".into()));
    }
    let total: f64 = q.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("weights sum to {total}")));
    }
    let mut groups: Vec<(&ArmPrior, f64, usize)> = Vec::new();
    for (p, &w) in others.iter().zip(q) {
        if w == 0.0 {
            continue;
        }
        match groups.iter_mut().find(|g| g.0 == p && g.1 == w) {
            Some(g) => g.2 += 1,
            None => groups.push((p, w, 1)),
        }
    }
    let terms: Vec<GapTerm> = groups
        .iter()
        .map(|&(p, w, n)| GapTerm::average(&p.discretize(grid), n, w * n as f64))
        .collect();
    let target = GapTerm::new(j_prior.discretize(grid), 1.0);
    Ok(positive_part(&target, &terms)?.value)
}

/// Truncated Gaussian on `[0, 1]` as a finite-support prior on `grid_points`
/// equispaced cell midpoints, weights proportional to the density at each midpoint.
pub fn discretize_truncated_gaussian(nu: f64, sigma: f64, grid_points: usize) -> Result<ArmPrior> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if grid_points < 2 {
        return Err(Error::InvalidArgument("need at least 2 grid points".into()));
    }
    let g = grid_points as f64;
    let logs: Vec<f64> = (0..grid_points)
        .map(|i| {
            let x = (i as f64 + 0.5) / g;
            -((x - nu) * (x - nu)) / (2.0 * sigma * sigma)
        })
        .collect();
    let z = log_sum_exp(&logs);
    let support = logs
        .iter()
        .enumerate()
        .map(|(i, &l)| ((i as f64 + 0.5) / g, (l - z).exp()))
        .collect();
    let law: Vec<(f64, f64)> = canonical_law(support, MERGE_TOL);
    let total: f64 = law.iter().map(|a| a.1).sum();
    Ok(ArmPrior::Atoms {
        support: law.into_iter().map(|(v, p)| (v, p / total)).collect(),
    })
}

/// `Pr[A* = i]` for independent arms, ties broken toward the smallest index.
/// Exact for atoms; Beta arms are integrated by composite Gauss-Legendre.
pub fn prob_best(arms: &[ArmPrior]) -> Vec<f64> {
    let k = arms.len();
    let breaks: Vec<f64> = arms.iter().flat_map(|a| a.atom_values()).collect();
    (0..k)
        .map(|i| match &arms[i] {
            ArmPrior::Atoms { support } => support
                .iter()
                .map(|&(v, p)| {
                    let mut w = p;
                    for (kk, other) in arms.iter().enumerate() {
                        if kk < i {
                            w *= other.cdf_below(v);
                        } else if kk > i {
                            w *= other.cdf(v);
                        }
                    }
                    w
                })
                .sum(),
            beta => integrate(
                |x| {
                    let mut w = beta.beta_pdf(x);
                    for (kk, other) in arms.iter().enumerate() {
                        if kk != i {
                            w *= other.cdf(x);
                        }
                    }
                    w
                },
                0.0,
                1.0,
                &breaks,
                64,
            ),
        })
        .collect()
}
