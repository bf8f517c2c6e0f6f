use calx_core::curves::*;
use calx_core::equilibria::{equilibria_mech, jacobian_mech};
use calx_core::model::*;
use nalgebra::Matrix3;
use proptest::prelude::*;

fn hill(alpha: f64, second: bool) -> ModelParams {
    let law = if second {
        StressLaw::hill2(alpha)
    } else {
        StressLaw::hill1(alpha)
    };
    ModelParams::mech(0.0, 0.0, law)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    // the Hopf point must be an equilibrium with a conjugate pair on the imaginary axis
    #[test]
    fn hopf_points_have_imaginary_pair(u in 0.0f64..1.0, alpha in 0.5f64..100.0, second: bool) {
        let p = hill(alpha, second);
        let curve = hopf_curve(&p, &default_c_grid()).unwrap();
        prop_assume!(!curve.samples.is_empty());
        let s = curve.samples[((curve.samples.len() - 1) as f64 * u) as usize];
        let c = s.c;
        if let Some((mu, lambda)) = hopf_point(&p, c) {
            let q = ModelParams { mu, lambda, ..p };
            let j = jacobian_mech(&q, State3::new(c, q.stress.eval(c), q.h_inf(c)));
            let m = Matrix3::from_fn(|r, k| j[r][k]);
            let eig = m.complex_eigenvalues();
            let (tr, det, _) = invariants_at(&p, c, mu, lambda);
            prop_assume!(det > 1e-8);
            let pair = eig.iter().filter(|z| z.im.abs() > 1e-9).count();
            prop_assert_eq!(pair, 2);
            prop_assert!(eig.iter().filter(|z| z.im.abs() > 1e-9).all(|z| z.re.abs() < 1e-7 * (1.0 + m.abs().max())));
            prop_assert!(tr.abs() < 1e-9);
        }
    }

    #[test]
    fn fold_points_are_double_roots(u in 0.0f64..1.0, alpha in 0.5f64..100.0) {
        let p = hill(alpha, false);
        let curve = fold_curve(&p, &default_c_grid()).unwrap();
        prop_assume!(!curve.samples.is_empty());
        let c = curve.samples[((curve.samples.len() - 1) as f64 * u) as usize].c;
        if let Some((mu, lambda)) = fold_point(&p, c) {
            let (_, det, _) = invariants_at(&p, c, mu, lambda);
            prop_assert!(det.abs() < 1e-8 * (1.0 + mu * p.k1));
            // c is a steady state of the parameters it generates
            let q = ModelParams { mu, lambda, ..p };
            let eqs = equilibria_mech(&q);
            prop_assert!(eqs.iter().any(|e| (e.c_star - c).abs() < 1e-3 * (1.0 + c)));
        }
    }

    #[test]
    fn discriminant_points_vanish(c in 1e-3f64..30.0, alpha in 0.5f64..100.0, second: bool) {
        let p = hill(alpha, second);
        if let Some(pts) = discr_points(&p, c) {
            for (mu, lambda) in pts {
                if mu.is_finite() && lambda.is_finite() && mu > 0.0 {
                    let (tr, det, discr) = invariants_at(&p, c, mu, lambda);
                    prop_assert!(discr.abs() < 1e-8 * (1.0 + tr * tr + det.abs()));
                }
            }
        }
    }

    #[test]
    fn hopf_mu_independent_of_stress(c in 1e-3f64..30.0, a1 in 0.5f64..100.0, a2 in 0.5f64..100.0) {
        prop_assert_eq!(hopf_mu(&hill(a1, false), c), hopf_mu(&hill(a2, true), c));
    }
}

#[test]
fn mu_min_is_shared_by_both_laws() {
    let g = default_c_grid();
    for p in [hill(10.0, false), hill(1.0, true), hill(100.0, false)] {
        let (_, mu_min) = hopf_mu_min(&p, &g).unwrap();
        assert!((mu_min - 0.20328).abs() < 1e-4, "{mu_min}");
    }
}

#[test]
fn hopf_maximum_to_four_places() {
    let e = hopf_extremals(&hill(10.0, false), &default_c_grid()).unwrap();
    assert!((e.lambda_max - 1.68632).abs() < 1e-4);
    assert!((e.mu_at_max - 0.20735).abs() < 1e-4);
    assert!(e.lambda_at_mu_min < e.lambda_max);
}

#[test]
fn fold_intercepts_recover_planar_folds() {
    let g = default_c_grid();
    let p = hill(10.0, false);
    let mut mus: Vec<f64> = (0..2)
        .flat_map(|b| lambda_zero_intercepts(&p, CurveKind::Fold, b, &g).unwrap())
        .map(|x| x.1)
        .collect();
    mus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    mus.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    assert_eq!(mus.len(), 2, "{mus:?}");
    assert!((mus[0] - 0.28814).abs() < 1e-4);
    assert!((mus[1] - 0.28925).abs() < 1e-4);
}

#[test]
fn discriminant_intercepts_recover_planar_events() {
    let g = default_c_grid();
    let p = hill(10.0, false);
    let mut mus: Vec<f64> = (0..2)
        .flat_map(|b| lambda_zero_intercepts(&p, CurveKind::Discriminant, b, &g).unwrap())
        .map(|x| x.1)
        .filter(|mu| (0.0..0.6).contains(mu))
        .collect();
    mus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(mus.len(), 3, "{mus:?}");
    for (got, want) in mus.iter().zip([0.27828, 0.28924, 0.28950]) {
        assert!((got - want).abs() < 1e-4, "{got} vs {want}");
    }
}

#[test]
fn fold_branches_merge() {
    let p = hill(10.0, false);
    let fine: Vec<f64> = (0..20_000).map(|i| 0.2 + i as f64 * 1e-5).collect();
    let curve = fold_curve(&p, &fine).unwrap();
    let m = fold_merge(&p, &default_c_grid()).unwrap();
    // one arm on each side of the merge point, each reaching lambda = 0
    let left: Vec<_> = curve.samples.iter().filter(|s| s.c < m.c).collect();
    let right: Vec<_> = curve.samples.iter().filter(|s| s.c > m.c).collect();
    assert!(!left.is_empty() && !right.is_empty());
    let floor = |v: &[&CurveSample]| v.iter().map(|s| s.lambda).fold(f64::INFINITY, f64::min);
    assert!(floor(&left) < 1e-2, "{}", floor(&left));
    assert!(floor(&right) < 1e-2, "{}", floor(&right));
    assert!(curve.samples.iter().all(|s| s.lambda <= m.lambda + 1e-9));
}

#[test]
fn lambda_max_has_positive_asymptote() {
    let v = lambda_max_vs_alpha(&hill(10.0, false), StressKind::Hill1, &[1e3, 1e4]).unwrap();
    assert!(v[0].lambda_max > 0.0 && v[1].lambda_max > 0.0);
    assert!((v[0].lambda_max - v[1].lambda_max).abs() < 0.01 * v[1].lambda_max);
}

#[test]
fn hill1_cusp_near_two() {
    let a = find_cusp(&hill(10.0, false), StressKind::Hill1, 1.5, 3.0)
        .unwrap()
        .unwrap();
    assert!((a - 2.0).abs() < 0.05, "{a}");
    assert_eq!(
        hopf_morphology(&hill(10.0, false), StressKind::Hill1, 2.5).unwrap(),
        Morphology::Simple
    );
    assert_eq!(
        hopf_morphology(&hill(10.0, false), StressKind::Hill1, 1.5).unwrap(),
        Morphology::BowTie
    );
}

#[test]
fn hill2_small_gain_is_bow_tie() {
    assert_eq!(
        hopf_morphology(&hill(1.0, true), StressKind::Hill2, 1.0).unwrap(),
        Morphology::BowTie
    );
}

#[test]
fn curves_are_sampled_in_order() {
    let g = default_c_grid();
    let h = hopf_curve(&hill(10.0, false), &g).unwrap();
    assert!(h.samples.windows(2).all(|w| w[0].c < w[1].c));
    assert!(h.samples.iter().all(|s| s.mu.is_finite() && s.lambda.is_finite()));
    assert_eq!(h.samples.len() + h.discarded + h.skipped, g.len());
}
