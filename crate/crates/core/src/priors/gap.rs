//! Exact evaluation of `E[(c X - sum_k w_k Y_k)_+]` for independent discrete laws.

use crate::error::{Error, Result};
use crate::num::average_law;

use super::MERGE_TOL;

/// Cap on the enumerated product of all but the last term.
const ENUM_CAP: usize = 50_000_000;

/// A discrete law entering a positive-part expectation with a coefficient.
#[derive(Clone, Debug)]
pub struct GapTerm {
    pub law: Vec<(f64, f64)>,
    pub coef: f64,
}

impl GapTerm {
    pub fn new(law: Vec<(f64, f64)>, coef: f64) -> Self {
        GapTerm { law, coef }
    }

    /// Average of `n` i.i.d. copies of `law` with coefficient `coef`.
    pub fn average(law: &[(f64, f64)], n: usize, coef: f64) -> Self {
        GapTerm {
            law: average_law(law, n, MERGE_TOL),
            coef,
        }
    }
}

/// Value of `E[Z_+]` with `Z = c X - sum_k w_k Y_k` and the pieces of its subgradient.
#[derive(Clone, Debug, PartialEq)]
pub struct GapEval {
    pub value: f64,
    /// `E[X 1{Z > 0}]`.
    pub target_moment: f64,
    /// `E[Y_k 1{Z > 0}]` per term; for a zero-weight term `Y_k` is independent of
    /// `Z` and the moment is `E[Y_k] Pr[Z > 0]`.
    pub term_moments: Vec<f64>,
    /// `Pr[Z > 0]`.
    pub prob: f64,
}

/// Evaluate `E[(c X - sum_k w_k Y_k)_+]` for the target `X` and subtracted `terms`.
pub fn positive_part(target: &GapTerm, terms: &[GapTerm]) -> Result<GapEval> {
    positive_part_above(target, terms, 0.0)
}

/// [`positive_part`] restricted to the event `Z > tol`.
pub fn positive_part_above(target: &GapTerm, terms: &[GapTerm], tol: f64) -> Result<GapEval> {
    let active: Vec<usize> = (0..terms.len()).filter(|&k| terms[k].coef > 0.0).collect();
    let mut term_moments = vec![0.0; terms.len()];
    let c = target.coef;
    let Some((&last, head)) = active.split_last() else {
        let mut value = 0.0;
        let mut tm = 0.0;
        let mut pr = 0.0;
        for &(x, p) in &target.law {
            if c * x > tol {
                value += p * c * x;
                tm += p * x;
                pr += p;
            }
        }
        fill_inactive(terms, &mut term_moments, pr);
        return Ok(GapEval {
            value,
            target_moment: tm,
            term_moments,
            prob: pr,
        });
    };
    let size = head.iter().fold(target.law.len(), |acc, &k| {
        acc.saturating_mul(terms[k].law.len())
    });
    if size > ENUM_CAP {
        return Err(Error::EnumerationTooLarge(format!("{size} joint outcomes")));
    }
    let last_term = &terms[last];
    let w = last_term.coef;
    let ys: Vec<f64> = last_term.law.iter().map(|a| a.0).collect();
    let mut cum_p = Vec::with_capacity(ys.len() + 1);
    let mut cum_y = Vec::with_capacity(ys.len() + 1);
    cum_p.push(0.0);
    cum_y.push(0.0);
    for &(y, p) in &last_term.law {
        cum_p.push(cum_p[cum_p.len() - 1] + p);
        cum_y.push(cum_y[cum_y.len() - 1] + p * y);
    }
    let mut value = 0.0;
    let mut target_moment = 0.0;
    let mut pr = 0.0;
    let mut vals = vec![0.0; head.len()];
    let mut idx = vec![0usize; head.len()];
    for &(x, px) in &target.law {
        idx.iter_mut().for_each(|i| *i = 0);
        loop {
            let mut prob = px;
            let mut z = c * x;
            for (h, &k) in head.iter().enumerate() {
                let (y, p) = terms[k].law[idx[h]];
                vals[h] = y;
                prob *= p;
                z -= terms[k].coef * y;
            }
            if prob > 0.0 {
                let thr = z / w;
                // Count of last-term atoms strictly below the threshold.
                let n = ys.partition_point(|&y| y < thr && z - w * y > tol);
                let (pb, yb) = (cum_p[n], cum_y[n]);
                if pb > 0.0 {
                    value += prob * (z * pb - w * yb);
                    pr += prob * pb;
                    target_moment += prob * x * pb;
                    for (h, &k) in head.iter().enumerate() {
                        term_moments[k] += prob * vals[h] * pb;
                    }
                    term_moments[last] += prob * yb;
                }
            }
            let mut h = 0;
            while h < head.len() {
                idx[h] += 1;
                if idx[h] < terms[head[h]].law.len() {
                    break;
                }
                idx[h] = 0;
                h += 1;
            }
            if h == head.len() {
                break;
            }
        }
    }
    fill_inactive(terms, &mut term_moments, pr);
    Ok(GapEval {
        value: value.max(0.0),
        target_moment,
        term_moments,
        prob: pr,
    })
}

fn fill_inactive(terms: &[GapTerm], moments: &mut [f64], prob: f64) {
    for (t, m) in terms.iter().zip(moments.iter_mut()) {
        if t.coef <= 0.0 {
            *m = prob * t.law.iter().map(|(y, p)| y * p).sum::<f64>();
        }
    }
}
