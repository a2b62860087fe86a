//! Concentration of posterior samples and posterior means around the true mean.

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::ArmPrior;
use crate::rng::{replica_seed, stream};

const CHUNK: u64 = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub r: f64,
    /// Empirical `Pr[|mu_hat - mu| >= r eps]` for a posterior sample `mu_hat`.
    pub sample_tail: f64,
    /// Empirical `Pr[|E[mu | data] - mu| >= r eps]`.
    pub mean_tail: f64,
    /// `C exp(-r^2 / C)`.
    pub bound: f64,
}

/// Draw `mu` from the prior, `n` Bernoulli samples, then a posterior sample and the
/// posterior mean; tabulate the tails at `r * n^{-1/2}` for each `r` of the grid.
pub fn chernoff_tail_check(
    prior: &ArmPrior,
    n: usize,
    r_grid: &[f64],
    replicas: u64,
    seed: u64,
    c: f64,
) -> Result<Vec<TailRow>> {
    if n == 0 || replicas == 0 {
        return Err(Error::InvalidArgument(
            "need n >= 1 and at least one replica".into(),
        ));
    }
    let eps = (n as f64).powf(-0.5);
    let chunks: Vec<u64> = (0..replicas.div_ceil(CHUNK)).collect();
    let counts: Vec<(Vec<u64>, Vec<u64>)> = chunks
        .par_iter()
        .map(|&ch| {
            let mut rng = stream(replica_seed(seed, ch), 0);
            let mut hs = vec![0u64; r_grid.len()];
            let mut hm = vec![0u64; r_grid.len()];
            let lo = ch * CHUNK;
            for _ in lo..(lo + CHUNK).min(replicas) {
                let mu = prior.sample(&mut rng);
                let s = Binomial::new(n as u64, mu)
                    .expect("mean in [0, 1]")
                    .sample(&mut rng) as usize;
                let ds = (prior.sample_posterior(n, s, &mut rng) - mu).abs();
                let dm = (prior.posterior_mean_or_prior(n, s) - mu).abs();
                for (i, &r) in r_grid.iter().enumerate() {
                    let x = r * eps;
                    hs[i] += u64::from(ds >= x);
                    hm[i] += u64::from(dm >= x);
                }
            }
            (hs, hm)
        })
        .collect();
    let mut hs = vec![0u64; r_grid.len()];
    let mut hm = vec![0u64; r_grid.len()];
    for (a, b) in counts {
        for i in 0..r_grid.len() {
            hs[i] += a[i];
            hm[i] += b[i];
        }
    }
    let total = replicas as f64;
    Ok(r_grid
        .iter()
        .enumerate()
        .map(|(i, &r)| TailRow {
            r,
            sample_tail: hs[i] as f64 / total,
            mean_tail: hm[i] as f64 / total,
            bound: c * (-r * r / c).exp(),
        })
        .collect())
}
