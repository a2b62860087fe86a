use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use bicx::priors::*;

fn atoms(s: &[(f64, f64)]) -> ArmPrior {
    ArmPrior::atoms(s.to_vec()).unwrap()
}

fn beta(a: f64, b: f64) -> ArmPrior {
    ArmPrior::beta(a, b).unwrap()
}

fn law(d: &MeanDist) -> Vec<(f64, f64)> {
    d.atoms.clone()
}

#[test]
fn moments_examples() {
    assert_abs_diff_eq!(prior_moments(&beta(2.0, 3.0)).mean, 0.4, epsilon = 1e-15);
    let m = prior_moments(&atoms(&[(0.4, 0.5), (0.8, 0.5)]));
    assert_abs_diff_eq!(m.mean, 0.6, epsilon = 1e-12);
    assert_abs_diff_eq!(m.variance, 0.04, epsilon = 1e-12);
    let b = prior_moments(&beta(2.0, 3.0));
    // a b / ((a + b)^2 (a + b + 1))
    assert_abs_diff_eq!(b.variance, 6.0 / 150.0, epsilon = 1e-12);
    assert_eq!((b.support_inf, b.support_sup), (0.0, 1.0));
}

#[test]
fn posterior_update_examples() {
    assert_eq!(
        posterior_update(&beta(1.0, 1.0), 1, 1).unwrap(),
        beta(2.0, 1.0)
    );
    assert_eq!(
        posterior_update(&atoms(&[(0.0, 0.5), (1.0, 0.5)]), 1, 1).unwrap(),
        atoms(&[(1.0, 1.0)])
    );
    let p = posterior_update(&atoms(&[(0.25, 0.5), (0.75, 0.5)]), 2, 2).unwrap();
    let ArmPrior::Atoms { support } = p else {
        panic!("atoms expected")
    };
    assert_abs_diff_eq!(support[0].1, 0.1, epsilon = 1e-12);
    assert_abs_diff_eq!(support[1].1, 0.9, epsilon = 1e-12);
}

#[test]
fn posterior_update_errors() {
    assert!(posterior_update(&beta(1.0, 1.0), 1, 2).is_err());
    assert!(matches!(
        posterior_update(&atoms(&[(0.0, 1.0)]), 1, 1),
        Err(bicx::Error::ImpossibleObservation(_))
    ));
}

#[test]
fn posterior_mean_dist_examples() {
    let d = posterior_mean_dist(&beta(1.0, 1.0), 2, 0).unwrap();
    assert_eq!(d.atoms.len(), 3);
    for (v, (x, p)) in [0.25, 0.5, 0.75].iter().zip(&d.atoms) {
        assert_abs_diff_eq!(x, v, epsilon = 1e-12);
        assert_abs_diff_eq!(*p, 1.0 / 3.0, epsilon = 1e-12);
    }
    let d = posterior_mean_dist(&atoms(&[(0.2, 0.3), (0.7, 0.7)]), 0, 0).unwrap();
    assert_eq!(d.atoms.len(), 1);
    assert_abs_diff_eq!(d.atoms[0].0, 0.55, epsilon = 1e-12);
    let d = posterior_mean_dist(&beta(1.0, 1.0), 1, 1).unwrap();
    assert_eq!(d.atoms.len(), 1);
    assert_abs_diff_eq!(d.atoms[0].0, 1.0 / 3.0, epsilon = 1e-12);
    assert_eq!(d.provenance.zeros, Some(1));
}

#[test]
fn zeros_beyond_the_sample_count_condition_all_samples() {
    let d = posterior_mean_dist(&beta(1.0, 1.0), 2, 5).unwrap();
    assert_eq!(d.atoms.len(), 1);
    assert_abs_diff_eq!(d.atoms[0].0, 0.25, epsilon = 1e-12);
}

#[test]
fn impossible_zeros_conditioning() {
    assert!(posterior_mean_dist(&atoms(&[(1.0, 1.0)]), 2, 1).is_err());
}

#[test]
fn coupling_examples() {
    let same = posterior_mean_dist(&beta(2.0, 1.0), 3, 0).unwrap();
    let (dom, c) = dominance_and_coupling(&same, &same);
    assert!(dom);
    assert!(c.unwrap().triples.iter().all(|t| (t.0 - t.1).abs() < 1e-12));

    let (dom, c) = dominance_and_coupling(&MeanDist::point(1.0), &MeanDist::point(0.0));
    assert!(dom);
    assert_eq!(c.unwrap().triples, vec![(1.0, 0.0, 1.0)]);

    let hi = MeanDist::from_pairs(vec![(0.3, 0.5), (0.9, 0.5)], Provenance::default());
    let lo = MeanDist::from_pairs(vec![(0.1, 0.5), (0.9, 0.5)], Provenance::default());
    let (dom, c) = dominance_and_coupling(&hi, &lo);
    assert!(dom);
    let t = c.unwrap().triples;
    assert_eq!(t.len(), 2);
    assert_abs_diff_eq!(t[0].0, 0.3);
    assert_abs_diff_eq!(t[0].1, 0.1);
    assert_abs_diff_eq!(t[0].2, 0.5);
    assert_abs_diff_eq!(t[1].0, 0.9);
    assert_abs_diff_eq!(t[1].1, 0.9);

    let (dom, c) = dominance_and_coupling(&lo, &hi);
    assert!(!dom);
    assert!(c.is_none());
}

#[test]
fn coupling_conditional_resampling() {
    // Beta(1,1), one sample: zeros law {1/3} against the unconditional {1/3, 2/3}.
    let uncond = posterior_mean_dist(&beta(1.0, 1.0), 1, 0).unwrap();
    let cond = posterior_mean_dist(&beta(1.0, 1.0), 1, 1).unwrap();
    let (_, c) = dominance_and_coupling(&uncond, &cond);
    let given = c.unwrap().given_dominated(1.0 / 3.0);
    assert_eq!(given.len(), 2);
    assert_abs_diff_eq!(given[0].0, 1.0 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(given[0].1, 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(given[1].0, 2.0 / 3.0, epsilon = 1e-12);
}

#[test]
fn positive_gap_examples() {
    let u = beta(1.0, 1.0);
    let g = expected_positive_gap(&u, &[u.clone()], &[1.0]).unwrap();
    assert_abs_diff_eq!(g, 1.0 / 6.0, epsilon = 1e-5);
    let h = atoms(&[(0.5, 1.0)]);
    assert_eq!(
        expected_positive_gap(&h, &[h.clone()], &[1.0]).unwrap(),
        0.0
    );
    let j = atoms(&[(0.5, 0.5), (1.0, 0.5)]);
    let g = expected_positive_gap(&j, &[atoms(&[(0.9, 1.0)])], &[1.0]).unwrap();
    assert_abs_diff_eq!(g, 0.05, epsilon = 1e-12);
    assert!(expected_positive_gap(&j, &[u.clone()], &[-1.0]).is_err());
    assert!(expected_positive_gap(&j, &[u.clone(), u], &[0.5, 0.6]).is_err());
}

#[test]
fn gap_of_uniform_pair_by_monte_carlo() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let n = 400_000;
    let s: f64 = (0..n)
        .map(|_| {
            let (x, y): (f64, f64) = (rng.random(), rng.random());
            (y - x).max(0.0)
        })
        .sum();
    let u = beta(1.0, 1.0);
    let g = expected_positive_gap(&u, &[u.clone()], &[1.0]).unwrap();
    assert!((s / n as f64 - g).abs() < 2e-3);
}

#[test]
fn truncated_gaussian_examples() {
    let flat = discretize_truncated_gaussian(0.5, 1e6, 3).unwrap();
    let ArmPrior::Atoms { support } = &flat else {
        panic!()
    };
    for &(_, p) in support {
        assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-6);
    }
    assert_abs_diff_eq!(
        discretize_truncated_gaussian(0.5, 0.1, 101).unwrap().mean(),
        0.5,
        epsilon = 1e-3
    );
    assert!(discretize_truncated_gaussian(0.9, 0.1, 201).unwrap().mean() < 0.9);
    assert!(discretize_truncated_gaussian(0.5, 0.0, 11).is_err());
}

#[test]
fn serialized_form() {
    let p: ArmPrior = serde_json::from_str(r#"{"kind":"beta","a":2,"b":3}"#).unwrap();
    assert_eq!(p, beta(2.0, 3.0));
    let q: ArmPrior =
        serde_json::from_str(r#"{"kind":"atoms","support":[[0.8,0.5],[0.2,0.5]]}"#).unwrap();
    assert_eq!(q, atoms(&[(0.2, 0.5), (0.8, 0.5)]));
    assert!(serde_json::from_str::<ArmPrior>(r#"{"kind":"beta","a":0,"b":3}"#).is_err());
    assert!(serde_json::from_str::<ArmPrior>(r#"{"kind":"atoms","support":[[0.2,0.5]]}"#).is_err());
}

#[test]
fn mlr_chain_for_beta() {
    for (a, b) in [(1.0, 1.0), (2.0, 5.0), (0.5, 3.0)] {
        let p = beta(a, b);
        for n in 1..=4 {
            let up = posterior_mean_dist(&posterior_update(&p, 1, 1).unwrap(), n, 0).unwrap();
            let mid = posterior_mean_dist(&p, n, 0).unwrap();
            let down = posterior_mean_dist(&p, n, 1).unwrap();
            assert!(dominance_and_coupling(&up, &mid).0, "Beta({a},{b}) N={n}");
            assert!(dominance_and_coupling(&mid, &down).0, "Beta({a},{b}) N={n}");
        }
    }
}

#[test]
fn strongest_beta_dominates_its_family() {
    for m in 1..=4 {
        let mf = m as f64;
        for n in 1..=4 {
            let top = posterior_mean_dist(&beta(mf, 1.0), n, 0).unwrap();
            let bottom = posterior_mean_dist(&beta(1.0, mf), n, 0).unwrap();
            for a in 1..=m {
                for b in 1..=m {
                    let d = posterior_mean_dist(&beta(a as f64, b as f64), n, 0).unwrap();
                    assert!(
                        stochastically_dominates(&top, &d),
                        "M={m} N={n} Beta({a},{b})"
                    );
                    assert!(
                        stochastically_dominates(&d, &bottom),
                        "M={m} N={n} Beta({a},{b})"
                    );
                }
            }
        }
    }
}

#[test]
fn close_to_expectation() {
    let corpus = [
        atoms(&[(0.2, 0.5), (0.8, 0.5)]),
        atoms(&[(0.0, 0.9), (1.0, 0.1)]),
        atoms(&[(0.1, 0.2), (0.4, 0.3), (0.95, 0.5)]),
        atoms(&[(0.6, 1.0)]),
    ];
    for p in &corpus {
        for eps in [0.1, 0.5] {
            assert!(
                p.cdf(p.mean() + eps) >= eps / (1.0 + eps) - 1e-12,
                "{p} eps={eps}"
            );
        }
    }
}

#[test]
fn prob_best_uses_min_index_ties() {
    let p = atoms(&[(0.3, 0.5), (0.7, 0.5)]);
    let pb = prob_best(&[p.clone(), p.clone()]);
    assert_abs_diff_eq!(pb[0], 0.75, epsilon = 1e-12);
    assert_abs_diff_eq!(pb[1], 0.25, epsilon = 1e-12);
    let u = beta(1.0, 1.0);
    for v in prob_best(&[u.clone(), u.clone(), u]) {
        assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-3);
    }
}

fn arb_atoms() -> impl Strategy<Value = ArmPrior> {
    prop::collection::vec((0.0f64..=1.0, 0.05f64..1.0), 1..5).prop_filter_map("degenerate", |raw| {
        let tot: f64 = raw.iter().map(|a| a.1).sum();
        ArmPrior::atoms(raw.into_iter().map(|(v, p)| (v, p / tot)).collect()).ok()
    })
}

fn arb_beta() -> impl Strategy<Value = ArmPrior> {
    (0.3f64..6.0, 0.3f64..6.0).prop_map(|(a, b)| ArmPrior::beta(a, b).unwrap())
}

fn arb_prior() -> impl Strategy<Value = ArmPrior> {
    prop_oneof![arb_atoms(), arb_beta()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn mean_dists_are_canonical(p in arb_prior(), n in 0usize..7, z in 0usize..4) {
        if let Ok(d) = posterior_mean_dist(&p, n, z) {
            let total: f64 = d.atoms.iter().map(|a| a.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(d.atoms.windows(2).all(|w| w[0].0 < w[1].0));
            prop_assert!(d.atoms.iter().all(|a| (0.0..=1.0).contains(&a.0) && a.1 > 0.0));
        }
    }

    #[test]
    fn posterior_means_average_to_the_prior_mean(p in arb_prior(), n in 0usize..8) {
        let d = posterior_mean_dist(&p, n, 0).unwrap();
        prop_assert!((d.mean() - p.mean()).abs() < 1e-12);
    }

    #[test]
    fn zeros_conditioning_is_dominated(p in arb_prior(), n in 1usize..6, z in 1usize..6) {
        prop_assume!(z <= n);
        if let Ok(cond) = posterior_mean_dist(&p, n, z) {
            let uncond = posterior_mean_dist(&p, n, 0).unwrap();
            let (dom, c) = dominance_and_coupling(&uncond, &cond);
            prop_assert!(dom);
            let c = c.unwrap();
            prop_assert!(c.triples.iter().all(|t| t.0 >= t.1 - 1e-12));
            let same = |a: &[(f64, f64)], b: &[(f64, f64)]| {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x.0 - y.0).abs() < 1e-12 && (x.1 - y.1).abs() < 1e-12)
            };
            prop_assert!(same(&c.dominant_marginal(), &law(&uncond)));
            prop_assert!(same(&c.dominated_marginal(), &law(&cond)));
        }
    }

    #[test]
    fn dominance_matches_the_cdf_definition(a in arb_atoms(), b in arb_atoms()) {
        let da = posterior_mean_dist(&a, 0, 0).unwrap();
        let db = posterior_mean_dist(&b, 0, 0).unwrap();
        let ma = MeanDist::from_pairs(a.atom_values().into_iter().zip(atom_probs(&a)).collect(), Provenance::default());
        let mb = MeanDist::from_pairs(b.atom_values().into_iter().zip(atom_probs(&b)).collect(), Provenance::default());
        let grid: Vec<f64> = ma.atoms.iter().chain(&mb.atoms).map(|x| x.0).collect();
        let by_cdf = grid.iter().all(|&x| ma.cdf(x) <= mb.cdf(x) + 1e-12);
        prop_assert_eq!(stochastically_dominates(&ma, &mb), by_cdf);
        prop_assert_eq!(dominance_and_coupling(&ma, &mb).1.is_some(), by_cdf);
        // Point laws at the prior means are ordered like the means.
        prop_assert_eq!(stochastically_dominates(&da, &db), a.mean() >= b.mean() - 1e-12);
    }

    #[test]
    fn positive_gap_is_nonnegative_and_bounded(j in arb_atoms(), i in arb_atoms()) {
        let g = expected_positive_gap(&j, &[i.clone()], &[1.0]).unwrap();
        let back = expected_positive_gap(&i, &[j.clone()], &[1.0]).unwrap();
        prop_assert!(g >= 0.0 && g <= 1.0);
        // E[(x - y)_+] - E[(y - x)_+] = E[x - y].
        prop_assert!((g - back - (j.mean() - i.mean())).abs() < 1e-12);
    }

    #[test]
    fn beta_update_is_conjugate(a in 0.3f64..5.0, b in 0.3f64..5.0, n in 0usize..10, s in 0usize..10) {
        prop_assume!(s <= n);
        let p = posterior_update(&beta(a, b), n, s).unwrap();
        prop_assert_eq!(p, beta(a + s as f64, b + (n - s) as f64));
    }
}

fn atom_probs(p: &ArmPrior) -> Vec<f64> {
    match p {
        ArmPrior::Atoms { support } => support.iter().map(|a| a.1).collect(),
        ArmPrior::Beta { .. } => unreachable!(),
    }
}
