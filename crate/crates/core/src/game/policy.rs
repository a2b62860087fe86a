//! Padded recommendation policies and their exact audits.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::algos::{exploit_step, Dataset, ProblemInstance};
use crate::error::{Error, Result};
use crate::priors::{positive_part_above, CountLaw, GapTerm};

/// Tolerance used when comparing posterior means.
pub const MEAN_TOL: f64 = 1e-12;

/// A `(j, N)`-informed randomized rule deciding whether to recommend arm `j`,
/// with an exploit fallback on abstention.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaddedPolicy {
    /// Recommended arm `j` (0-based).
    pub arm: usize,
    /// Samples read from each arm `0..=j`; zero means the arm is not read.
    pub depths: Vec<usize>,
    pub rule: Rule,
    pub fallback: Fallback,
    pub meta: PolicyMeta,
}

/// What an abstaining policy recommends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// Largest posterior mean given the data the policy reads (prior means elsewhere).
    Informed,
    /// Largest posterior mean given all available data.
    AllData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyMeta {
    pub method: String,
    /// Audited padding `min_{i<j} E[(mu_j - mu_i) 1{pi = j}]`.
    pub lambda: Option<f64>,
    pub q_star: Vec<f64>,
    /// Game value when the policy comes from the recommendation game.
    pub value: Option<f64>,
}

impl PolicyMeta {
    pub fn new(method: &str) -> Self {
        PolicyMeta {
            method: method.into(),
            lambda: None,
            q_star: Vec::new(),
            value: None,
        }
    }
}

/// Probability of recommending arm `j` as a function of the success counts read.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rule {
    /// Full table over the count tuples, mixed radix with arm 0 fastest.
    Table { probs: Vec<f64> },
    /// `s_j / N_j` against `sum_i q_i s_i / N_i`.
    Comparison { q: Vec<f64>, strict: bool },
    /// Posterior mean of `j` against the `q`-mixture of posterior means.
    MeanComparison { q: Vec<f64>, strict: bool },
    /// Posterior mean of `j` at least `threshold`.
    OwnPosterior { threshold: f64 },
    /// Fake means drawn per arm and count; recommend iff the fake mean of `j` is at
    /// least the average fake mean of the other arms.
    FakeAverage { fakes: Vec<Vec<Vec<(f64, f64)>>> },
    /// Base rule applied to fake counts of arms `< j` drawn per observed count.
    Transformed {
        base: Box<Rule>,
        n0: usize,
        maps: Vec<Vec<Vec<(usize, f64)>>>,
    },
}

impl PaddedPolicy {
    pub fn outcome_count(&self) -> usize {
        self.depths
            .iter()
            .fold(1usize, |acc, &d| acc.saturating_mul(d + 1))
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.depths)
    }

    /// `Pr[pi = j | counts]`.
    pub fn rec_prob(&self, inst: &ProblemInstance, counts: &[usize]) -> f64 {
        rule_prob(&self.rule, self.arm, &self.depths, inst, counts)
    }

    /// Counts read from `data`; errors if some arm has fewer samples than its depth.
    pub fn read_counts(&self, data: &Dataset) -> Result<Vec<usize>> {
        (0..=self.arm)
            .map(|i| {
                let d = self.depths[i];
                if data.pulls(i) < d {
                    return Err(Error::Invariant(format!(
                        "policy for arm {} reads {d} samples of arm {} but only {} exist",
                        self.arm + 1,
                        i + 1,
                        data.pulls(i)
                    )));
                }
                Ok(data.prefix(i, Some(d)).1)
            })
            .collect()
    }

    /// Recommendation law given the running dataset.
    pub fn decide(&self, inst: &ProblemInstance, data: &Dataset) -> Result<Vec<(usize, f64)>> {
        let counts = self.read_counts(data)?;
        let r = self.rec_prob(inst, &counts);
        let f = match self.fallback {
            Fallback::Informed => informed_exploit(inst, self.arm, &self.depths, &counts),
            Fallback::AllData => exploit_step(inst, data, None),
        };
        Ok(merge_choice(self.arm, r, f))
    }
}

pub(crate) fn merge_choice(j: usize, r: f64, f: usize) -> Vec<(usize, f64)> {
    if f == j || r >= 1.0 {
        vec![(j, 1.0)]
    } else if r <= 0.0 {
        vec![(f, 1.0)]
    } else {
        vec![(j, r), (f, 1.0 - r)]
    }
}

pub(crate) fn strides(depths: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(depths.len());
    let mut acc = 1usize;
    for &d in depths {
        s.push(acc);
        acc = acc.saturating_mul(d + 1);
    }
    s
}

/// Largest mean among arms `0..=j` read at `depths` and the prior means of later arms.
pub fn informed_exploit(
    inst: &ProblemInstance,
    j: usize,
    depths: &[usize],
    counts: &[usize],
) -> usize {
    let mut best = 0;
    let mut bv = f64::NEG_INFINITY;
    for k in 0..inst.k() {
        let m = if k <= j {
            inst.arm(k).posterior_mean_or_prior(depths[k], counts[k])
        } else {
            inst.arm(k).mean()
        };
        if m > bv + MEAN_TOL {
            bv = m;
            best = k;
        }
    }
    best
}

fn rule_prob(
    rule: &Rule,
    j: usize,
    depths: &[usize],
    inst: &ProblemInstance,
    counts: &[usize],
) -> f64 {
    match rule {
        Rule::Table { probs } => {
            let st = strides(depths);
            let idx: usize = counts.iter().zip(&st).map(|(c, s)| c * s).sum();
            probs[idx]
        }
        Rule::Comparison { q, strict } => {
            let emp = |i: usize| {
                if depths[i] == 0 {
                    0.0
                } else {
                    counts[i] as f64 / depths[i] as f64
                }
            };
            let rhs: f64 = q.iter().enumerate().map(|(i, w)| w * emp(i)).sum();
            compare(emp(j) - rhs, *strict)
        }
        Rule::MeanComparison { q, strict } => {
            let m = |i: usize| inst.arm(i).posterior_mean_or_prior(depths[i], counts[i]);
            let rhs: f64 = q.iter().enumerate().map(|(i, w)| w * m(i)).sum();
            compare(m(j) - rhs, *strict)
        }
        Rule::OwnPosterior { threshold } => compare(
            inst.arm(j).posterior_mean_or_prior(depths[j], counts[j]) - threshold,
            false,
        ),
        Rule::FakeAverage { fakes } => {
            let laws: Vec<&Vec<(f64, f64)>> = (0..=j).map(|i| &fakes[i][counts[i]]).collect();
            let mut total = 0.0;
            let w = if j == 0 { 0.0 } else { 1.0 / j as f64 };
            for_each_product(&laws[..j], |vals, p| {
                let avg: f64 = vals.iter().sum::<f64>() * w;
                for &(x, px) in laws[j] {
                    if x - avg >= -MEAN_TOL {
                        total += p * px;
                    }
                }
            });
            total
        }
        Rule::Transformed { base, maps, .. } => {
            let laws: Vec<Vec<(f64, f64)>> = (0..j)
                .map(|i| {
                    maps[i][counts[i]]
                        .iter()
                        .map(|&(s, p)| (s as f64, p))
                        .collect()
                })
                .collect();
            let refs: Vec<&Vec<(f64, f64)>> = laws.iter().collect();
            let mut fake = counts.to_vec();
            let mut total = 0.0;
            for_each_product(&refs, |vals, p| {
                for (i, v) in vals.iter().enumerate() {
                    fake[i] = *v as usize;
                }
                total += p * rule_prob(base, j, depths, inst, &fake);
            });
            total
        }
    }
}

fn compare(diff: f64, strict: bool) -> f64 {
    let yes = if strict {
        diff > MEAN_TOL
    } else {
        diff >= -MEAN_TOL
    };
    if yes {
        1.0
    } else {
        0.0
    }
}

/// Call `f(values, prob)` over the product of independent discrete laws.
pub(crate) fn for_each_product(laws: &[&Vec<(f64, f64)>], mut f: impl FnMut(&[f64], f64)) {
    if laws.iter().any(|l| l.is_empty()) {
        return;
    }
    let n = laws.len();
    let mut idx = vec![0usize; n];
    let mut vals = vec![0.0; n];
    loop {
        let mut p = 1.0;
        for i in 0..n {
            let (v, q) = laws[i][idx[i]];
            vals[i] = v;
            p *= q;
        }
        if p > 0.0 {
            f(&vals, p);
        }
        let mut h = 0;
        while h < n {
            idx[h] += 1;
            if idx[h] < laws[h].len() {
                break;
            }
            idx[h] = 0;
            h += 1;
        }
        if h == n {
            return;
        }
    }
}

/// Joint law of the counts an informed policy reads, optionally under `ZEROS_{j, n0}`.
pub struct OutcomeSpace {
    pub j: usize,
    pub depths: Vec<usize>,
    pub laws: Vec<CountLaw>,
    /// Conditional mean of each arm given the counts read (and the conditioning event).
    pub truth: Vec<Vec<f64>>,
    pub zeros: Option<usize>,
}

impl OutcomeSpace {
    pub fn new(
        inst: &ProblemInstance,
        j: usize,
        depths: &[usize],
        zeros: Option<usize>,
    ) -> Result<Self> {
        if depths.len() != j + 1 || j >= inst.k() {
            return Err(Error::InvalidArgument(format!(
                "{} depths for arm {}",
                depths.len(),
                j + 1
            )));
        }
        let mut laws = Vec::with_capacity(j + 1);
        let mut truth = Vec::with_capacity(j + 1);
        for (i, &d) in depths.iter().enumerate() {
            let z = if i < j { zeros.unwrap_or(0) } else { 0 };
            let law = inst.arm(i).count_law(d, z)?;
            let eff = d.max(z);
            truth.push(
                (0..=d)
                    .map(|s| inst.arm(i).posterior_mean_or_prior(eff, s))
                    .collect(),
            );
            laws.push(law);
        }
        Ok(OutcomeSpace {
            j,
            depths: depths.to_vec(),
            laws,
            truth,
            zeros,
        })
    }

    pub fn size(&self) -> usize {
        self.depths
            .iter()
            .fold(1usize, |acc, &d| acc.saturating_mul(d + 1))
    }

    fn check_cap(&self, cap: usize) -> Result<()> {
        if self.size() > cap {
            return Err(Error::OutcomeSpaceTooLarge(format!(
                "{} outcomes exceed the cap {cap}",
                self.size()
            )));
        }
        Ok(())
    }

    /// Call `f(counts, flat index, prob)` for every tuple of positive probability.
    pub fn for_each(&self, mut f: impl FnMut(&[usize], usize, f64)) {
        let n = self.depths.len();
        let st = strides(&self.depths);
        let mut c = vec![0usize; n];
        loop {
            let mut p = 1.0;
            for i in 0..n {
                p *= self.laws[i].probs[c[i]];
            }
            if p > 0.0 {
                let idx = c.iter().zip(&st).map(|(a, b)| a * b).sum();
                f(&c, idx, p);
            }
            let mut h = 0;
            while h < n {
                c[h] += 1;
                if c[h] <= self.depths[h] {
                    break;
                }
                c[h] = 0;
                h += 1;
            }
            if h == n {
                return;
            }
        }
    }
}

/// Exact incentive audit of a policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyAudit {
    /// `E[(mu_j - mu_i) 1{pi = j}]` for `i < j`.
    pub padding: Vec<f64>,
    /// Smallest padding (`+inf` for the first arm).
    #[serde(with = "crate::harness::serde_inf")]
    pub lambda: f64,
    /// `E[(mu_j - mu_i) 1{pi = j}]` for `i > j`.
    pub higher: Vec<f64>,
    /// `bic[l][i] = E[(mu_l - mu_i) 1{A = l}]` for the policy with its fallback.
    pub bic: Vec<Vec<f64>>,
    pub min_bic: f64,
    pub rec_prob: f64,
    pub zeros: Option<usize>,
    /// Recommendation probability non-decreasing in `s_j` and non-increasing in `s_i`.
    pub monotone: bool,
}

impl PolicyAudit {
    /// Padded and BIC checks at tolerance `tol`, against padding `lambda`.
    pub fn passes(&self, lambda: f64, tol: f64) -> bool {
        self.padding.iter().all(|&p| p >= lambda - tol)
            && self.higher.iter().all(|&p| p >= -tol)
            && self.min_bic >= -tol
    }
}

/// Audit a policy by exact enumeration of the counts it reads. With `zeros = Some(n0)`
/// every expectation is conditional on `ZEROS_{j, n0}`.
pub fn audit_policy(
    inst: &ProblemInstance,
    policy: &PaddedPolicy,
    zeros: Option<usize>,
    cap: usize,
) -> Result<PolicyAudit> {
    let j = policy.arm;
    let k = inst.k();
    let space = OutcomeSpace::new(inst, j, &policy.depths, zeros)?;
    space.check_cap(cap)?;
    let prior: Vec<f64> = inst.means();
    let mut padding = vec![0.0; j];
    let mut higher = vec![0.0; k - j - 1];
    let mut bic = vec![vec![0.0; k]; k];
    let mut rec = 0.0;
    let mut m = prior.clone();
    let mut table: HashMap<usize, f64> = HashMap::new();
    space.for_each(|c, idx, p| {
        for i in 0..=j {
            m[i] = space.truth[i][c[i]];
        }
        let r = policy.rec_prob(inst, c);
        if zeros.is_none() {
            table.insert(idx, r);
        }
        let f = informed_exploit(inst, j, &policy.depths, c);
        rec += p * r;
        for i in 0..j {
            padding[i] += p * r * (m[j] - m[i]);
        }
        for i in j + 1..k {
            higher[i - j - 1] += p * r * (m[j] - m[i]);
        }
        for (l, pl) in merge_choice(j, r, f) {
            for i in 0..k {
                bic[l][i] += p * pl * (m[l] - m[i]);
            }
        }
    });
    let monotone = zeros.is_some() || is_monotone(&policy.depths, j, &table);
    let lambda = padding.iter().copied().fold(f64::INFINITY, f64::min);
    let min_bic = bic.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    Ok(PolicyAudit {
        padding,
        lambda,
        higher,
        bic,
        min_bic,
        rec_prob: rec,
        zeros,
        monotone,
    })
}

fn is_monotone(depths: &[usize], j: usize, table: &HashMap<usize, f64>) -> bool {
    let st = strides(depths);
    let n = depths.len();
    let total = st[n - 1] * (depths[n - 1] + 1);
    for idx in 0..total {
        let Some(&r) = table.get(&idx) else { continue };
        for i in 0..n {
            let c = (idx / st[i]) % (depths[i] + 1);
            if c == depths[i] {
                continue;
            }
            let Some(&r2) = table.get(&(idx + st[i])) else {
                continue;
            };
            let ok = if i == j {
                r2 >= r - 1e-9
            } else {
                r2 <= r + 1e-9
            };
            if !ok {
                return false;
            }
        }
    }
    true
}

/// Exact padding of a strict mean-comparison policy over arbitrarily large spaces,
/// through the positive-part engine.
pub fn mean_comparison_padding(inst: &ProblemInstance, policy: &PaddedPolicy) -> Result<Vec<f64>> {
    let Rule::MeanComparison { q, strict: true } = &policy.rule else {
        return Err(Error::InvalidArgument(
            "needs a strict mean-comparison rule".into(),
        ));
    };
    let j = policy.arm;
    let law = |i: usize| -> Result<Vec<(f64, f64)>> {
        let c = inst.arm(i).count_law(policy.depths[i], 0)?;
        Ok(c.means
            .iter()
            .copied()
            .zip(c.probs.iter().copied())
            .filter(|a| a.1 > 0.0)
            .collect())
    };
    let target = GapTerm::new(law(j)?, 1.0);
    let terms: Vec<GapTerm> = (0..j)
        .map(|i| Ok(GapTerm::new(law(i)?, q[i])))
        .collect::<Result<_>>()?;
    let e = positive_part_above(&target, &terms, MEAN_TOL)?;
    Ok((0..j)
        .map(|i| e.target_moment - e.term_moments[i])
        .collect())
}
