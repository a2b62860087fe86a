//! Minimization and ratio maximization of `E[(mu_j - mu_q)_+]` over mixtures `q`.
//!
//! Arms sharing a prior are pooled into classes; the objectives are symmetric in the
//! members of a class and convex (resp. quasi-concave for the ratio), so an optimum
//! spreads each class weight uniformly over its members.

use crate::error::Result;
use crate::num::project_simplex;
use crate::priors::{positive_part, ArmPrior, GapEval, GapTerm};

/// Arms with a common prior, pooled.
pub(crate) struct Class {
    pub members: Vec<usize>,
    /// Law of the members' average.
    pub avg: Vec<(f64, f64)>,
    pub mean: f64,
}

/// Group `indices` by identical prior.
pub(crate) fn classes(
    arms: &[ArmPrior],
    indices: &[usize],
    laws: &[Vec<(f64, f64)>],
) -> Vec<Class> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in indices {
        match groups.iter_mut().find(|g| arms[g[0]] == arms[i]) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups
        .into_iter()
        .map(|members| {
            let avg = GapTerm::average(&laws[members[0]], members.len(), 1.0).law;
            let mean = arms[members[0]].mean();
            Class { members, avg, mean }
        })
        .collect()
}

fn eval(target: &[(f64, f64)], self_weight: f64, classes: &[Class], w: &[f64]) -> Result<GapEval> {
    let t = GapTerm::new(target.to_vec(), 1.0 - self_weight);
    let terms: Vec<GapTerm> = classes
        .iter()
        .zip(w)
        .map(|(c, &wc)| GapTerm::new(c.avg.clone(), wc))
        .collect();
    positive_part(&t, &terms)
}

/// Minimizer of a convex gap over class weights.
pub(crate) struct MinResult {
    pub value: f64,
    pub weights: Vec<f64>,
}

fn w_start(classes: &[Class], total: usize) -> Vec<f64> {
    classes
        .iter()
        .map(|c| c.members.len() as f64 / total as f64)
        .collect()
}

/// Minimize `E[(X - sum_c w_c A_c)_+]` over the class simplex by projected subgradient
/// with normalized steps.
pub(crate) fn minimize_gap(
    target: &[(f64, f64)],
    classes: &[Class],
    iters: usize,
) -> Result<MinResult> {
    let m = classes.len();
    let total: usize = classes.iter().map(|c| c.members.len()).sum();
    let w = w_start(classes, total);
    let mut best = MinResult {
        value: eval(target, 0.0, classes, &w)?.value,
        weights: w,
    };
    if m == 1 {
        return Ok(best);
    }
    for c in 0..m {
        let mut v = vec![0.0; m];
        v[c] = 1.0;
        let e = eval(target, 0.0, classes, &v)?.value;
        if e < best.value {
            best = MinResult {
                value: e,
                weights: v,
            };
        }
    }
    // Restarts from the best iterate with shrinking step scales.
    for scale in [1.0, 0.1, 0.01, 0.001] {
        let mut w = best.weights.clone();
        if scale == 1.0 {
            w = w_start(classes, total);
        }
        for t in 1..=iters {
            let e = eval(target, 0.0, classes, &w)?;
            if e.value < best.value {
                best = MinResult {
                    value: e.value,
                    weights: w.clone(),
                };
            }
            let mean_g = e.term_moments.iter().sum::<f64>() / m as f64;
            let d: Vec<f64> = e.term_moments.iter().map(|g| g - mean_g).collect();
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-15 {
                break;
            }
            let step = scale / ((t as f64).sqrt() * norm);
            let moved: Vec<f64> = w.iter().zip(&d).map(|(&wc, &g)| wc + step * g).collect();
            w = project_simplex(&moved);
        }
        let e = eval(target, 0.0, classes, &w)?.value;
        if e < best.value {
            best = MinResult {
                value: e,
                weights: w,
            };
        }
    }
    Ok(best)
}

/// Maximizer of the incentive-cost ratio for one target arm.
pub(crate) struct RatioResult {
    /// `E[(mu_j - mu_q)_-] / E[(mu_j - mu_q)_+]`, possibly infinite.
    pub ratio: f64,
    pub self_weight: f64,
    pub weights: Vec<f64>,
}

/// Maximize `E[Delta_-] / E[Delta_+]` with `Delta = (1 - w_s) X - sum_c w_c A_c` over
/// `(w_s, w)` on the simplex, by Dinkelbach iterations whose concave subproblems are
/// solved with projected subgradient ascent.
pub(crate) fn maximize_ratio(
    target: &[(f64, f64)],
    target_mean: f64,
    classes: &[Class],
    iters: usize,
) -> Result<RatioResult> {
    let m = classes.len();
    // Coordinates: 0 = the target arm itself, 1..=m = classes.
    let numer = |v: &[f64]| -> f64 {
        classes
            .iter()
            .zip(&v[1..])
            .map(|(c, &wc)| wc * c.mean)
            .sum::<f64>()
            - (1.0 - v[0]) * target_mean
    };
    let evaluate = |v: &[f64]| -> Result<(f64, f64, GapEval)> {
        let e = eval(target, v[0], classes, &v[1..])?;
        let n = numer(v);
        let d = e.value;
        let r = if d <= 1e-300 {
            if n > 1e-15 {
                f64::INFINITY
            } else {
                0.0
            }
        } else {
            1.0 + n / d
        };
        Ok((r, n, e))
    };
    let mut best = RatioResult {
        ratio: 0.0,
        self_weight: 1.0,
        weights: vec![0.0; m],
    };
    let mut best_v: Vec<f64> = {
        let mut v = vec![0.0; m + 1];
        v[0] = 1.0;
        v
    };
    let consider = |v: &[f64], r: f64, best: &mut RatioResult, best_v: &mut Vec<f64>| {
        if r > best.ratio {
            *best = RatioResult {
                ratio: r,
                self_weight: v[0],
                weights: v[1..].to_vec(),
            };
            *best_v = v.to_vec();
        }
    };
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    for c in 0..m {
        let mut v = vec![0.0; m + 1];
        v[c + 1] = 1.0;
        candidates.push(v);
    }
    let total: usize = classes.iter().map(|c| c.members.len()).sum();
    let mut uniform = vec![0.0; m + 1];
    for (c, cl) in classes.iter().enumerate() {
        uniform[c + 1] = cl.members.len() as f64 / total.max(1) as f64;
    }
    candidates.push(uniform);
    for v in &candidates {
        let (r, _, _) = evaluate(v)?;
        consider(v, r, &mut best, &mut best_v);
        if r.is_infinite() {
            return Ok(best);
        }
    }
    if m == 0 {
        return Ok(best);
    }
    let max_numer = classes
        .iter()
        .map(|c| c.mean - target_mean)
        .fold(0.0, f64::max);
    if max_numer <= 1e-15 {
        return Ok(best);
    }
    let mut t = (best.ratio - 1.0).max(0.0);
    for _round in 0..50 {
        let mut v = best_v.clone();
        if v[0] >= 1.0 {
            v = candidates[candidates.len() - 1].clone();
        }
        let scale = 1.0 + t.abs();
        for it in 1..=iters {
            let (r, _, e) = evaluate(&v)?;
            consider(&v, r, &mut best, &mut best_v);
            if r.is_infinite() {
                return Ok(best);
            }
            // Ascent direction of numer(v) - t * E[Delta_+].
            let mut g = vec![0.0; m + 1];
            g[0] = target_mean + t * e.target_moment;
            for c in 0..m {
                g[c + 1] = classes[c].mean + t * e.term_moments[c];
            }
            let step = 1.0 / ((it as f64).sqrt() * scale);
            let moved: Vec<f64> = v.iter().zip(&g).map(|(&x, &gi)| x + step * gi).collect();
            v = project_simplex(&moved);
        }
        let t_new = (best.ratio - 1.0).max(0.0);
        if t_new - t < 1e-10 {
            break;
        }
        t = t_new;
    }
    Ok(best)
}
