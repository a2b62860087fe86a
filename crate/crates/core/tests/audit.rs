use approx::assert_abs_diff_eq;

use bicx::algos::{
    build_schedule_with, thompson_law, Dataset, ProblemInstance, ScheduleConfig, ScheduledStrategy,
};
use bicx::audit::*;
use bicx::params::{prior_params, Algorithm, LayoutParams, ParamConfig};
use bicx::priors::ArmPrior;

fn atoms(s: &[(f64, f64)]) -> ArmPrior {
    ArmPrior::atoms(s.to_vec()).unwrap()
}

fn two_atom_pair() -> ProblemInstance {
    ProblemInstance::new(vec![
        atoms(&[(0.2, 0.5), (0.8, 0.5)]),
        atoms(&[(0.3, 0.5), (0.6, 0.5)]),
    ])
    .unwrap()
}

fn equal_means() -> ProblemInstance {
    ProblemInstance::new(vec![
        atoms(&[(0.2, 0.5), (0.8, 0.5)]),
        atoms(&[(0.3, 0.5), (0.7, 0.5)]),
    ])
    .unwrap()
}

fn tiny_layout(inst: &ProblemInstance) -> LayoutParams {
    let p = prior_params(inst, &ParamConfig::default()).unwrap();
    let zeros_prob = (0..inst.k())
        .map(|j| inst.zeros_probability(j, 1))
        .collect();
    LayoutParams {
        lambda: p.lambda,
        n0: 1,
        n_pad: 1,
        zeros_prob,
    }
}

fn exact(inst: &ProblemInstance, s: &impl bicx::algos::Strategy) -> BICReport {
    bic_margins_exact_with(inst, s, &ExactConfig::default(), None)
        .unwrap()
        .report
}

#[test]
fn alg1_tiny_is_bic() {
    let inst = two_atom_pair();
    let layout = tiny_layout(&inst);
    let s = build_schedule_with(
        &inst,
        &layout,
        1,
        Algorithm::Alg1,
        &ScheduleConfig::default(),
    )
    .unwrap();
    let strat = ScheduledStrategy::new(s);
    let out = bic_margins_exact_with(&inst, &strat, &ExactConfig::default(), None).unwrap();
    assert!(out.report.passes(MARGIN_FLOOR, None));
    assert!(out.violations.is_empty());
    assert!(out.min_pulls.iter().all(|&p| p >= 1));
}

#[test]
fn degenerate_three_rounds() {
    let inst = DegenStrategy::instance(0.2).unwrap();
    let out = bic_margins_exact_with(&inst, &DegenStrategy, &ExactConfig::default(), None).unwrap();
    assert!(out.report.passes(MARGIN_FLOOR, None));
    assert_eq!(out.min_pulls, vec![1, 1]);
}

#[test]
fn thompson_first_round_margins() {
    for inst in [two_atom_pair(), equal_means()] {
        let r = exact(&inst, &ScheduledStrategy::thompson(2, 1));
        let law = thompson_law(&inst, &Dataset::empty(2)).unwrap();
        let m = inst.means();
        for k in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(r.margins[0][k][j], law[k] * (m[k] - m[j]), epsilon = 1e-12);
            }
        }
    }
    let r = exact(&equal_means(), &ScheduledStrategy::thompson(2, 1));
    assert!(r.margins[0].iter().flatten().all(|&x| x.abs() < 1e-12));
}

#[test]
fn exact_margins_are_reproducible() {
    let inst = two_atom_pair();
    let a = exact(&inst, &ScheduledStrategy::thompson(2, 4));
    let b = exact(&inst, &ScheduledStrategy::thompson(2, 4));
    assert_eq!(a.margins, b.margins);
}

#[test]
fn mc_agrees_with_exact() {
    let inst = two_atom_pair();
    let strat = ScheduledStrategy::thompson(2, 3);
    let ex = exact(&inst, &strat);
    let mc = bic_margins_mc(&inst, &strat, 100_000, 7).unwrap();
    let se = mc.se.as_ref().unwrap();
    for p in 0..3 {
        for k in 0..2 {
            for j in 0..2 {
                let d = (mc.margins[p][k][j] - ex.margins[p][k][j]).abs();
                if se[p][k][j] == 0.0 {
                    assert!(d < 1e-12, "phase {p} ({k},{j}): {d}");
                } else {
                    assert!(
                        d <= 4.0 * se[p][k][j],
                        "phase {p} ({k},{j}): {d} vs se {}",
                        se[p][k][j]
                    );
                }
            }
        }
    }
}

#[test]
fn mc_reports_are_deterministic() {
    let inst = two_atom_pair();
    let strat = ScheduledStrategy::thompson(2, 3);
    let a = bic_margins_mc(&inst, &strat, 5000, 3).unwrap();
    let b = bic_margins_mc(&inst, &strat, 5000, 3).unwrap();
    assert_eq!(a.margins, b.margins);
    assert_eq!(a.se, b.se);
}

#[test]
fn doubling_replicas_shrinks_the_error() {
    let inst = two_atom_pair();
    let strat = ScheduledStrategy::thompson(2, 2);
    let a = bic_margins_mc(&inst, &strat, 20_000, 1).unwrap();
    let b = bic_margins_mc(&inst, &strat, 40_000, 2).unwrap();
    let (sa, sb) = (a.se.unwrap(), b.se.unwrap());
    let ratios: Vec<f64> = sa
        .iter()
        .flatten()
        .flatten()
        .zip(sb.iter().flatten().flatten())
        .filter(|(x, _)| **x > 0.0)
        .map(|(x, y)| y / x)
        .collect();
    assert!(!ratios.is_empty());
    for r in ratios {
        assert!((r * 2f64.sqrt() - 1.0).abs() < 0.2, "ratio {r}");
    }
}

#[test]
fn point_masses_have_zero_margins() {
    let inst = ProblemInstance::iid(ArmPrior::point(0.5).unwrap(), 2).unwrap();
    let r = bic_margins_mc(&inst, &ScheduledStrategy::thompson(2, 3), 100, 0).unwrap();
    assert!(r.margins.iter().flatten().flatten().all(|&x| x == 0.0));
    assert!(r.se.unwrap().iter().flatten().flatten().all(|&x| x == 0.0));
}

#[test]
fn mc_needs_enough_replicas() {
    let inst = two_atom_pair();
    assert!(matches!(
        bic_margins_mc(&inst, &ScheduledStrategy::thompson(2, 2), 99, 0),
        Err(bicx::Error::InvalidArgument(_))
    ));
}

#[test]
fn enumeration_cap_is_enforced() {
    let inst = two_atom_pair();
    let r = bic_margins_exact_with(
        &inst,
        &ScheduledStrategy::thompson(2, 6),
        &ExactConfig { cap: 10 },
        None,
    );
    assert!(matches!(r, Err(bicx::Error::EnumerationTooLarge(_))));
}

#[test]
fn margins_add_over_a_partition() {
    let inst = two_atom_pair();
    let strat = ScheduledStrategy::thompson(2, 4);
    let cfg = ExactConfig::default();
    let ev = |_p: usize, d: &Dataset| d.successes(0) + d.pulls(1) % 2 > 0;
    let not_ev = |p: usize, d: &Dataset| !ev(p, d);
    let a = bic_margins_exact_with(&inst, &strat, &cfg, Some(&ev)).unwrap();
    let b = bic_margins_exact_with(&inst, &strat, &cfg, Some(&not_ev)).unwrap();
    let (sa, sb) = (a.split.unwrap(), b.split.unwrap());
    let mut nontrivial = false;
    for p in 0..4 {
        for k in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(
                    sa[p][k][j] + sb[p][k][j],
                    a.report.margins[p][k][j],
                    epsilon = 1e-12
                );
                nontrivial |= sa[p][k][j].abs() > 1e-6 && sb[p][k][j].abs() > 1e-6;
            }
        }
    }
    assert!(nontrivial);
}

#[test]
fn greedy_completion_keeps_margins() {
    for inst in [
        two_atom_pair(),
        equal_means(),
        DegenStrategy::instance(0.2).unwrap(),
    ] {
        let base = ScheduledStrategy::thompson(2, 2);
        let r0 = exact(&inst, &base);
        let r = exact(&inst, &GreedyCompletion { base, extra: 3 });
        assert_eq!(r.margins.len(), 5);
        for p in 0..2 {
            assert_eq!(r.margins[p], r0.margins[p]);
        }
        for p in 2..5 {
            for k in 0..2 {
                for j in 0..2 {
                    let prev = r.margins[p - 1][k][j];
                    assert!(
                        r.margins[p][k][j] >= prev.min(0.0) + MARGIN_FLOOR,
                        "phase {p} ({k},{j})"
                    );
                }
            }
        }
    }
    let inst = DegenStrategy::instance(0.2).unwrap();
    let r = exact(
        &inst,
        &GreedyCompletion {
            base: DegenStrategy,
            extra: 2,
        },
    );
    assert!(r.passes(MARGIN_FLOOR, None));
}

#[test]
fn hidden_exploration_stays_bic() {
    let base = ScheduledStrategy::thompson(2, 3);
    let mut checked = 0;
    for inst in [two_atom_pair(), equal_means()] {
        let r = exact(&inst, &base);
        for p in 0..3 {
            let bic = r.margins[p].iter().flatten().all(|&x| x >= MARGIN_FLOOR);
            for k in 0..2 {
                let alpha = kbic_alpha(&r, p, k);
                assert_abs_diff_eq!(alpha, r.margins[p][k][1 - k], epsilon = 0.0);
                if !bic || alpha <= 1e-12 {
                    continue;
                }
                let h = HiddenExploration::new(base.clone(), p, k, alpha).unwrap();
                let rh = exact(&inst, &h);
                assert_eq!(rh.margins.len(), p + 1);
                assert!(
                    rh.margins[p].iter().flatten().all(|&x| x >= MARGIN_FLOOR),
                    "phase {p} arm {k}: {:?}",
                    rh.margins[p]
                );
                checked += 1;
            }
        }
    }
    assert!(checked >= 2);
    assert!(HiddenExploration::new(base.clone(), 3, 0, 0.1).is_err());
    assert!(HiddenExploration::new(base, 0, 2, 0.1).is_err());
}

#[test]
fn chernoff_trivial_rows() {
    let rows = chernoff_tail_check(
        &ArmPrior::beta(1.0, 1.0).unwrap(),
        10,
        &[0.0],
        1000,
        0,
        20.0,
    )
    .unwrap();
    assert_eq!(rows[0].sample_tail, 1.0);
    assert_eq!(rows[0].mean_tail, 1.0);
    assert!(rows[0].bound >= 1.0);
    let rows = chernoff_tail_check(
        &ArmPrior::point(0.3).unwrap(),
        10,
        &[0.5, 1.0, 2.0],
        1000,
        0,
        20.0,
    )
    .unwrap();
    assert!(rows
        .iter()
        .all(|r| r.sample_tail == 0.0 && r.mean_tail == 0.0));
    assert!(chernoff_tail_check(&ArmPrior::point(0.3).unwrap(), 0, &[1.0], 1000, 0, 20.0).is_err());
}

#[test]
fn explorability_of_full_support_arms() {
    let inst = ProblemInstance::new(vec![
        ArmPrior::beta(3.0, 1.0).unwrap(),
        ArmPrior::beta(1.0, 1.0).unwrap(),
        ArmPrior::beta(1.0, 4.0).unwrap(),
    ])
    .unwrap();
    let r = explorable_set(&inst);
    assert_eq!(r.explorable_arms(), vec![1, 2, 3]);
    assert!(r.first_failing.is_none());
}

#[test]
fn csv_rows_are_one_based() {
    let inst = two_atom_pair();
    let r = exact(&inst, &ScheduledStrategy::thompson(2, 2));
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,k,j,margin,se"));
    let first = lines.next().unwrap();
    assert!(first.starts_with("1,1,2,"), "{first}");
    assert_eq!(text.lines().count(), 1 + 2 * 2);
}
