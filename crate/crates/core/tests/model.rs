use calx_core::error::Error;
use calx_core::model::*;
use proptest::prelude::*;

fn stress() -> impl Strategy<Value = StressLaw> {
    (
        prop_oneof![Just(StressKind::Hill1), Just(StressKind::Hill2)],
        0.1f64..200.0,
    )
        .prop_map(|(kind, alpha)| StressLaw::new(kind, alpha))
}

proptest! {
    #[test]
    fn stress_is_bounded_and_nondecreasing(law in stress(), c in 0.0f64..1e3, dc in 0.0f64..10.0) {
        let (t0, t1) = (law.eval(c), law.eval(c + dc));
        prop_assert!((0.0..1.0).contains(&t0));
        prop_assert!(t1 >= t0);
        prop_assert!(law.deriv(c) >= 0.0);
    }

    #[test]
    fn stress_saturates(law in stress()) {
        prop_assert_eq!(law.eval(0.0), 0.0);
        prop_assert!((law.eval(1e9) - law.saturation()).abs() < 1e-6);
    }

    #[test]
    fn zero_coupling_reduces_to_planar_model(
        mu in 0.0f64..1.0, law in stress(), c in 0.0f64..20.0, theta in -2.0f64..2.0, h in 0.0f64..1.0,
    ) {
        let p = ModelParams::mech(mu, 0.0, law);
        let (dc, dtheta, dh) = rhs_mech(&p, State3::new(c, theta, h));
        let (ac, ah) = rhs_atri(&p, State2::new(c, h));
        prop_assert_eq!(dc, ac);
        prop_assert_eq!(dh, ah);
        prop_assert_eq!(dtheta, -theta + law.eval(c));
    }

    #[test]
    fn inactivation_target_in_unit_interval(c in 0.0f64..1e4) {
        let h = ModelParams::default().h_inf(c);
        prop_assert!(h > 0.0 && h <= 1.0);
    }

    #[test]
    fn stretch_term_is_linear_in_theta(lambda in 0.0f64..5.0, c in 0.0f64..5.0, theta in -1.0f64..1.0) {
        let p = ModelParams::mech(0.3, lambda, StressLaw::hill1(10.0));
        let (d0, _, _) = rhs_mech(&p, State3::new(c, 0.0, 0.5));
        let (d1, _, _) = rhs_mech(&p, State3::new(c, theta, 0.5));
        prop_assert!((d1 - d0 - lambda * theta).abs() < 1e-12 * (1.0 + d0.abs()));
    }
}

#[test]
fn default_dimensional_set_reduces_to_compiled_defaults() {
    let p = nondimensionalize(&DimensionalParams::default()).unwrap();
    let d = ModelParams::default();
    assert!((p.k1 - d.k1).abs() < 1e-12);
    assert!((p.gamma - d.gamma).abs() < 1e-12);
    assert!((p.k - d.k).abs() < 1e-12);
    assert_eq!(p.k2, 1.0);
    assert!((p.k1 - 46.285714).abs() < 1e-6);
    assert!((p.gamma - 5.714286).abs() < 1e-6);
}

#[test]
fn origin_is_fixed_only_for_zero_inactivation() {
    let p = ModelParams::atri(0.7);
    assert_eq!(rhs_atri(&p, State2::new(0.0, 0.0)), (0.0, 1.0));
    let q = ModelParams::mech(0.3, 1.0, StressLaw::hill1(10.0));
    assert_eq!(rhs_mech(&q, State3::new(0.0, 0.0, 0.0)), (0.0, 0.0, 1.0));
}

#[test]
fn validation_rejects_super_unit_basal_fraction() {
    let p = ModelParams {
        b: 2.0,
        ..Default::default()
    };
    assert!(matches!(p.validate(), Err(Error::InvalidParameter { name: "b", .. })));
    assert!(ModelParams::default().validate().is_ok());
}

#[test]
fn json_round_trip() {
    let p = ModelParams::mech(0.4, 1.2, StressLaw::hill2(3.0));
    let s = serde_json::to_string(&p).unwrap();
    assert_eq!(ModelParams::from_json(&s).unwrap(), p);
}

#[test]
fn poisson_ratio_near_half_is_singular() {
    for nu in [0.5, 0.5 - 1e-18, 0.7] {
        assert!(viscoelastic_reduction(1.0, 1.0, 1.0, nu, 1.0).is_err(), "nu = {nu}");
    }
    assert!(viscoelastic_reduction(1.0, 1.0, 1.0, 0.499, 1.0).is_ok());
}
