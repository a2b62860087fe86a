use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use bicx::algos::ProblemInstance;
use bicx::game::*;
use bicx::priors::ArmPrior;

const CAP: usize = 1 << 20;

fn atoms(s: &[(f64, f64)]) -> ArmPrior {
    ArmPrior::atoms(s.to_vec()).unwrap()
}

fn beta(a: f64, b: f64) -> ArmPrior {
    ArmPrior::beta(a, b).unwrap()
}

fn uniform_pair() -> ProblemInstance {
    ProblemInstance::iid(beta(1.0, 1.0), 2).unwrap()
}

/// Every count tuple of a policy, arm 0 fastest.
fn tuples(depths: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &d in depths {
        out = out
            .into_iter()
            .flat_map(|t| (0..=d).map(move |s| [t.clone(), vec![s]].concat()))
            .collect();
    }
    out
}

fn table(inst: &ProblemInstance, p: &PaddedPolicy) -> Vec<f64> {
    tuples(&p.depths)
        .iter()
        .map(|c| p.rec_prob(inst, c))
        .collect()
}

#[test]
fn value_of_identical_point_masses_is_zero() {
    let inst = ProblemInstance::iid(ArmPrior::point(0.4).unwrap(), 3).unwrap();
    for n in 0..3 {
        assert_abs_diff_eq!(
            game_value_for_q(&inst, 2, n, &[0.3, 0.7]).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }
}

#[test]
fn value_without_data_is_the_prior_gap() {
    let inst = ProblemInstance::new(vec![
        beta(3.0, 2.0),
        atoms(&[(0.2, 0.5), (0.9, 0.5)]),
        atoms(&[(0.3, 0.5), (0.8, 0.5)]),
    ])
    .unwrap();
    let q = [0.25, 0.75];
    let expect = (0.55 - 0.25 * 0.6 - 0.75 * 0.55f64).max(0.0);
    assert_abs_diff_eq!(
        game_value_for_q(&inst, 2, 0, &[0.0, 1.0]).unwrap(),
        0.0,
        epsilon = 1e-12
    );
    assert_abs_diff_eq!(
        game_value_for_q(&inst, 2, 0, &q).unwrap(),
        expect,
        epsilon = 1e-12
    );
}

#[test]
fn game_value_rejects_weights_off_the_simplex() {
    let inst = uniform_pair();
    assert!(game_value_for_q(&inst, 1, 1, &[0.5]).is_err());
    assert!(game_value_for_q(&inst, 1, 1, &[1.5]).is_err());
    assert!(game_value_for_q(&inst, 1, 1, &[0.5, 0.5]).is_err());
}

#[test]
fn uniform_pair_policy_recommends_only_on_a_lone_success() {
    let inst = uniform_pair();
    let s = solve_recommendation_game(&inst, 1, 1, &GameConfig::default()).unwrap();
    assert_abs_diff_eq!(s.value, 1.0 / 12.0, epsilon = 1e-12);
    assert_abs_diff_eq!(s.policy.rec_prob(&inst, &[0, 1]), 1.0);
    assert_abs_diff_eq!(s.policy.rec_prob(&inst, &[1, 0]), 0.0);
    let a = audit_policy(&inst, &s.policy, None, CAP).unwrap();
    assert!(a.passes(s.value, 1e-9));
}

#[test]
fn lp_value_is_consistent_with_its_witness() {
    let inst = ProblemInstance::new(vec![
        atoms(&[(0.2, 0.5), (0.8, 0.5)]),
        atoms(&[(0.1, 0.4), (0.7, 0.6)]),
        atoms(&[(0.3, 0.5), (0.6, 0.5)]),
    ])
    .unwrap();
    for n in 1..=3 {
        let s = solve_recommendation_game(&inst, 2, n, &GameConfig::default()).unwrap();
        let v = game_value_for_q(&inst, 2, n, &s.q_star).unwrap();
        assert_abs_diff_eq!(s.value, v, epsilon = 1e-9);
    }
}

#[test]
fn stronger_prior_of_the_target_does_not_lower_the_value() {
    let weak = ProblemInstance::new(vec![beta(3.0, 1.0), beta(1.0, 1.0)]).unwrap();
    let strong = ProblemInstance::new(vec![beta(3.0, 1.0), beta(2.0, 1.0)]).unwrap();
    for n in 1..=4 {
        let a = solve_recommendation_game(&weak, 1, n, &GameConfig::default())
            .unwrap()
            .value;
        let b = solve_recommendation_game(&strong, 1, n, &GameConfig::default())
            .unwrap()
            .value;
        assert!(b >= a - 1e-12, "N={n}: {b} < {a}");
    }
}

#[test]
fn oversized_games_are_refused() {
    let inst = ProblemInstance::iid(beta(1.0, 1.0), 4).unwrap();
    let cfg = GameConfig {
        outcome_cap: 100,
        ..GameConfig::default()
    };
    assert!(matches!(
        solve_recommendation_game(&inst, 3, 5, &cfg),
        Err(bicx::Error::OutcomeSpaceTooLarge(_))
    ));
}

#[test]
fn empirical_comparison_examples() {
    let inst = uniform_pair();
    let p = empirical_comparison_policy(&inst, 1, 3, &[1.0]).unwrap();
    for s in 0..=3 {
        assert_eq!(p.rec_prob(&inst, &[s, s]), 0.0);
    }
    assert_eq!(p.rec_prob(&inst, &[0, 3]), 1.0);
    assert!(empirical_comparison_policy(&inst, 1, 0, &[1.0]).is_err());
}

#[test]
fn empirical_comparison_meets_a_tenth_of_the_gap() {
    let inst = uniform_pair();
    let pad = bicx::params::padded_params(&inst, 1.0).unwrap();
    let p = empirical_comparison_policy(&inst, 1, pad.n_pad, &[1.0]).unwrap();
    let a = audit_policy(&inst, &p, None, CAP).unwrap();
    assert!(a.lambda >= 1.0 / 60.0);
    assert!(a.passes(pad.lambda, 1e-9));
}

#[test]
fn beta_efficient_on_the_worst_case_compares_posterior_means() {
    let m = 3.0;
    let inst = ProblemInstance::new(vec![beta(m, 1.0), beta(1.0, m)]).unwrap();
    let p = beta_efficient_policy(&inst, 1, 3, m).unwrap();
    for c in tuples(&p.depths) {
        let mi = (m + c[0] as f64) / (m + 1.0 + 3.0);
        let mj = (1.0 + c[1] as f64) / (m + 1.0 + 3.0);
        let expect = if mj >= mi - 1e-12 { 1.0 } else { 0.0 };
        assert_abs_diff_eq!(p.rec_prob(&inst, &c), expect, epsilon = 1e-12);
    }
}

#[test]
fn beta_efficient_with_unit_strength_is_the_empirical_comparison() {
    let inst = ProblemInstance::iid(beta(1.0, 1.0), 3).unwrap();
    let p = beta_efficient_policy(&inst, 2, 2, 1.0).unwrap();
    let e = empirical_comparison_policy(&inst, 2, 2, &[0.5, 0.5]).unwrap();
    let (tp, te) = (table(&inst, &p), table(&inst, &e));
    // The efficient policy recommends on ties, the comparison abstains; elsewhere they agree.
    for (c, (a, b)) in tuples(&p.depths).iter().zip(tp.iter().zip(&te)) {
        if 2 * c[2] != c[0] + c[1] {
            assert_eq!(a, b, "counts {c:?}");
        }
    }
}

#[test]
fn beta_efficient_rejects_out_of_range_priors() {
    let inst = ProblemInstance::new(vec![beta(4.0, 1.0), beta(1.0, 1.0)]).unwrap();
    assert!(beta_efficient_policy(&inst, 1, 2, 2.0).is_err());
    let inst = ProblemInstance::new(vec![atoms(&[(0.5, 1.0)]), beta(1.0, 1.0)]).unwrap();
    assert!(beta_efficient_policy(&inst, 1, 2, 2.0).is_err());
}

#[test]
fn beta_efficient_padding_beats_the_worst_case() {
    let worst = ProblemInstance::new(vec![beta(2.0, 1.0), beta(1.0, 2.0)]).unwrap();
    let lw = audit_policy(
        &worst,
        &beta_efficient_policy(&worst, 1, 2, 2.0).unwrap(),
        None,
        CAP,
    )
    .unwrap()
    .lambda;
    assert!(lw > 0.0);
    for (a1, b1, a2, b2) in [
        (1.0, 1.0, 1.0, 1.0),
        (2.0, 2.0, 1.0, 2.0),
        (1.5, 1.0, 1.2, 2.0),
    ] {
        let inst = ProblemInstance::new(vec![beta(a1, b1), beta(a2, b2)]).unwrap();
        let a = audit_policy(
            &inst,
            &beta_efficient_policy(&inst, 1, 2, 2.0).unwrap(),
            None,
            CAP,
        )
        .unwrap();
        assert!(
            a.passes(lw, 1e-9),
            "Beta({a1},{b1}) vs Beta({a2},{b2}): {a:?}"
        );
    }
}

#[test]
fn transform_identities() {
    let inst = ProblemInstance::new(vec![beta(2.0, 1.0), beta(1.0, 1.0)]).unwrap();
    let base = solve_recommendation_game(&inst, 1, 2, &GameConfig::default())
        .unwrap()
        .policy;
    let t = transform_policy(&inst, &base, 0).unwrap();
    assert_eq!(table(&inst, &t), table(&inst, &base));

    let inst = ProblemInstance::iid(ArmPrior::point(0.0).unwrap(), 2).unwrap();
    let base = solve_recommendation_game(&inst, 1, 2, &GameConfig::default())
        .unwrap()
        .policy;
    let t = transform_policy(&inst, &base, 2).unwrap();
    assert_eq!(table(&inst, &t), table(&inst, &base));
}

#[test]
fn transform_resamples_the_zeros_law() {
    let inst = uniform_pair();
    let base = empirical_comparison_policy(&inst, 1, 1, &[1.0]).unwrap();
    let t = transform_policy(&inst, &base, 1).unwrap();
    // Observed s_1 = 0 under ZEROS becomes a fake count of 0 or 1 with probability 1/2 each.
    assert_abs_diff_eq!(t.rec_prob(&inst, &[0, 1]), 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(t.rec_prob(&inst, &[0, 0]), 0.0, epsilon = 1e-12);
}

#[test]
fn transform_needs_a_possible_zeros_event() {
    let inst = ProblemInstance::new(vec![
        atoms(&[(1.0, 1.0)]),
        atoms(&[(0.3, 0.5), (0.99, 0.5)]),
    ])
    .unwrap();
    let base = empirical_comparison_policy(&inst, 1, 1, &[1.0]).unwrap();
    let r = transform_policy(&inst, &base, 1).and_then(|t| audit_policy(&inst, &t, Some(1), CAP));
    assert!(
        matches!(r, Err(bicx::Error::ImpossibleObservation(_))),
        "{r:?}"
    );
}

#[test]
fn transform_keeps_the_conditional_padding() {
    let inst = ProblemInstance::new(vec![beta(2.0, 1.0), beta(1.0, 1.0), beta(1.0, 2.0)]).unwrap();
    for j in 1..3 {
        for n in 1..=2 {
            let s = solve_recommendation_game(&inst, j, n, &GameConfig::default()).unwrap();
            for n0 in 1..=n {
                let t = transform_policy(&inst, &s.policy, n0).unwrap();
                let a = audit_policy(&inst, &t, Some(n0), CAP).unwrap();
                assert!(a.passes(s.value, 1e-9), "j={j} N={n} N0={n0}: {a:?}");
            }
        }
    }
}

#[test]
fn easy_exploit_rejects_instances_that_are_not_easy() {
    let inst = ProblemInstance::new(vec![
        ArmPrior::point(0.9).unwrap(),
        ArmPrior::point(0.5).unwrap(),
    ])
    .unwrap();
    assert!(easy_exploit_policy(&inst, 1, 4, 0.1).is_err());
}

#[test]
fn easy_exploit_extremes() {
    let inst = uniform_pair();
    let p = easy_exploit_policy(&inst, 1, 10, 0.1).unwrap();
    assert_eq!(p.rec_prob(&inst, &[0, 10]), 1.0);
    assert_eq!(p.rec_prob(&inst, &[0, 0]), 0.0);
    let a = audit_policy(&inst, &p, None, CAP).unwrap();
    assert!(a.passes(0.1 / 10.0, 1e-9), "{a:?}");
}

#[test]
fn policies_serialize_with_their_rule() {
    let inst = uniform_pair();
    let s = solve_recommendation_game(&inst, 1, 1, &GameConfig::default()).unwrap();
    let text = serde_json::to_string(&s).unwrap();
    let back: GameSolution = serde_json::from_str(&text).unwrap();
    assert_eq!(back, s);
    assert!(text.contains("\"kind\":\"table\""));
}

fn arb_atoms() -> impl Strategy<Value = ArmPrior> {
    ((0.0f64..0.5), (0.5f64..1.0), (0.1f64..0.9)).prop_map(|(lo, hi, w)| {
        let r = |x: f64| (x * 100.0).round() / 100.0;
        ArmPrior::atoms(vec![(r(lo), w), (r(hi).max(r(lo) + 0.01), 1.0 - w)]).unwrap()
    })
}

fn arb_instance() -> impl Strategy<Value = ProblemInstance> {
    prop::collection::vec(
        prop_oneof![
            arb_atoms(),
            (1.0f64..3.0, 1.0f64..3.0).prop_map(|(a, b)| beta(a, b))
        ],
        2..=3,
    )
    .prop_map(|arms| ProblemInstance::sorted(arms).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn game_policies_are_monotone_padded_and_bic(inst in arb_instance(), n in 1usize..=3) {
        let j = inst.k() - 1;
        prop_assume!((n + 1).pow(j as u32 + 1) <= 64);
        let s = solve_recommendation_game(&inst, j, n, &GameConfig::default()).unwrap();
        let a = audit_policy(&inst, &s.policy, None, CAP).unwrap();
        prop_assert!(a.monotone);
        prop_assert!(a.passes(s.value, 1e-9), "{:?}", a);
    }

    #[test]
    fn middle_arm_policies_are_bic_for_higher_arms(inst in arb_instance(), n in 1usize..=2) {
        prop_assume!(inst.k() == 3);
        let s = solve_recommendation_game(&inst, 1, n, &GameConfig::default()).unwrap();
        let a = audit_policy(&inst, &s.policy, None, CAP).unwrap();
        prop_assert!(a.higher.iter().all(|&h| h >= -1e-9), "{:?}", a.higher);
    }

    #[test]
    fn game_value_is_convex_in_q(inst in arb_instance(), n in 0usize..=2, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        prop_assume!(inst.k() == 3);
        let f = |t: f64| game_value_for_q(&inst, 2, n, &[t, 1.0 - t]).unwrap();
        let mid = f(0.5 * (x + y));
        prop_assert!(mid <= 0.5 * (f(x) + f(y)) + 1e-12);
    }
}

#[test]
fn tie_rules_on_the_uniform_pair() {
    let inst = uniform_pair();
    let s = solve_recommendation_game(&inst, 1, 1, &GameConfig::default()).unwrap();
    assert_abs_diff_eq!(s.policy.rec_prob(&inst, &[0, 0]), 1.0);
    assert_abs_diff_eq!(s.policy.rec_prob(&inst, &[1, 1]), 1.0);
    let cfg = GameConfig {
        ties: TieRule::Abstain,
        ..GameConfig::default()
    };
    let s = solve_recommendation_game(&inst, 1, 1, &cfg).unwrap();
    assert_abs_diff_eq!(s.value, 1.0 / 12.0, epsilon = 1e-12);
    for (c, p) in [([0, 0], 0.0), ([1, 1], 0.0), ([0, 1], 1.0), ([1, 0], 0.0)] {
        assert_abs_diff_eq!(s.policy.rec_prob(&inst, &c), p);
    }
}
