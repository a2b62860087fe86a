//! Small numerical helpers: quadrature, log-space sums, simplex projection.

use std::sync::OnceLock;

/// Nodes and weights of the 20-point Gauss-Legendre rule on [-1, 1].
fn gauss_legendre_20() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(20))
}

/// Gauss-Legendre nodes/weights on [-1, 1] via Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss-Legendre integral of `f` over `[a, b]`, split at `breaks`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], panels: usize) -> f64 {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup();
    let rule = gauss_legendre_20();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let h = (hi - lo) / panels as f64;
        for p in 0..panels {
            let l = lo + h * p as f64;
            let mid = l + 0.5 * h;
            let half = 0.5 * h;
            for &(x, wt) in rule {
                total += wt * half * f(mid + half * x);
            }
        }
    }
    total
}

/// `ln(sum exp(x_i))`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// `s * ln(v) + f * ln(1 - v)` with the conventions `0 * ln 0 = 0`.
pub fn bernoulli_loglik(v: f64, s: usize, f: usize) -> f64 {
    let a = if s == 0 { 0.0 } else { s as f64 * v.ln() };
    let b = if f == 0 {
        0.0
    } else {
        f as f64 * (1.0 - v).ln()
    };
    a + b
}

/// `ln C(n, k)`.
pub fn ln_choose(n: usize, k: usize) -> f64 {
    use statrs::function::gamma::ln_gamma;
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i as f64 + 1.0);
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Clamp tiny floating noise in a probability.
pub fn clamp01(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// Merge a list of (value, prob) pairs into a sorted law, merging values within `tol`
/// and dropping zero masses.
pub fn canonical_law(mut pairs: Vec<(f64, f64)>, tol: f64) -> Vec<(f64, f64)> {
    pairs.retain(|&(_, p)| p > 0.0);
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
    for (v, p) in pairs {
        match out.last_mut() {
            Some(last) if (v - last.0).abs() <= tol => last.1 += p,
            _ => out.push((v, p)),
        }
    }
    out
}

/// Detect an arithmetic-progression support: returns `(origin, step)` when every
/// value equals `origin + k * step` for an integer `k`.
pub fn lattice_of(values: &[f64]) -> Option<(f64, f64)> {
    if values.len() < 2 {
        return values.first().map(|&v| (v, 1.0));
    }
    let origin = values[0];
    let step = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    if !(step > 1e-12) {
        return None;
    }
    for &v in values {
        let k = (v - origin) / step;
        if (k - k.round()).abs() > 1e-7 {
            return None;
        }
    }
    Some((origin, step))
}

/// Law of the average of `n` i.i.d. copies of `law`.
pub fn average_law(law: &[(f64, f64)], n: usize, tol: f64) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    if n == 1 || law.len() == 1 {
        return law.to_vec();
    }
    let values: Vec<f64> = law.iter().map(|a| a.0).collect();
    if let Some((origin, step)) =
        lattice_of(&values).filter(|&(o, h)| (values[values.len() - 1] - o) / h < 100_000.0)
    {
        let idx: Vec<usize> = values
            .iter()
            .map(|&v| ((v - origin) / step).round() as usize)
            .collect();
        let width = idx.last().copied().unwrap_or(0) + 1;
        let mut base = vec![0.0; width];
        for (i, &(_, p)) in idx.iter().zip(law) {
            base[*i] += p;
        }
        let mut acc = base.clone();
        for _ in 1..n {
            let mut next = vec![0.0; acc.len() + width - 1];
            for (a, &pa) in acc.iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                for (b, &pb) in base.iter().enumerate() {
                    next[a + b] += pa * pb;
                }
            }
            acc = next;
        }
        let nf = n as f64;
        let pairs = acc
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, &p)| ((nf * origin + k as f64 * step) / nf, p))
            .collect();
        return canonical_law(pairs, tol);
    }
    let mut acc: Vec<(f64, f64)> = law.to_vec();
    for _ in 1..n {
        let mut next = Vec::with_capacity(acc.len() * law.len());
        for &(a, pa) in &acc {
            for &(b, pb) in law {
                next.push((a + b, pa * pb));
            }
        }
        acc = canonical_law(next, tol);
    }
    let nf = n as f64;
    acc.into_iter().map(|(v, p)| (v / nf, p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let v = integrate(|x| x * x * x * x, 0.0, 1.0, &[], 1);
        assert!((v - 0.2).abs() < 1e-14);
    }

    #[test]
    fn simplex_projection_lands_on_simplex() {
        let p = project_simplex(&[0.9, 0.8, -0.3]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
        assert!((p[0] - 0.55).abs() < 1e-12 && (p[1] - 0.45).abs() < 1e-12);
    }

    #[test]
    fn average_law_of_coins() {
        let law = vec![(0.0, 0.5), (1.0, 0.5)];
        let avg = average_law(&law, 3, 1e-12);
        let expect = [
            (0.0, 0.125),
            (1.0 / 3.0, 0.375),
            (2.0 / 3.0, 0.375),
            (1.0, 0.125),
        ];
        assert_eq!(avg.len(), 4);
        for (a, e) in avg.iter().zip(expect) {
            assert!((a.0 - e.0).abs() < 1e-12 && (a.1 - e.1).abs() < 1e-12);
        }
    }

    #[test]
    fn average_law_without_lattice() {
        let law = vec![(0.1, 0.5), (0.35, 0.25), (0.9, 0.25)];
        let avg = average_law(&law, 2, 1e-12);
        let mean: f64 = avg.iter().map(|(v, p)| v * p).sum();
        let base: f64 = law.iter().map(|(v, p)| v * p).sum();
        assert!((mean - base).abs() < 1e-12);
        assert!((avg.iter().map(|a| a.1).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
