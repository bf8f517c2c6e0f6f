use calx_core::equilibria::equilibria_atri;
use calx_core::integrator::*;
use calx_core::model::*;
use proptest::prelude::*;

fn oscillator() -> FnSystem<impl Fn(f64, &[f64], &mut [f64])> {
    FnSystem {
        dim: 2,
        f: |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        },
    }
}

fn fixed(h: f64) -> IntegratorConfig {
    IntegratorConfig {
        fixed_step: Some(h),
        max_step: h,
        ..Default::default()
    }
}

fn oscillator_error(cfg: &IntegratorConfig) -> f64 {
    let (t, _) = solve(&oscillator(), 0.0, &[1.0, 0.0], 10.0, cfg, None).unwrap();
    let y = t.last_state();
    (y[0] - 10f64.cos()).abs().max((y[1] + 10f64.sin()).abs())
}

#[test]
fn fixed_step_converges_at_fifth_order() {
    let hs = [0.2, 0.1, 0.05];
    let errs: Vec<f64> = hs.iter().map(|&h| oscillator_error(&fixed(h))).collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((4.5..5.6).contains(&order), "observed order {order} from {errs:?}");
    }
}

#[test]
fn adaptive_error_follows_tolerance() {
    let mut prev = f64::INFINITY;
    for tol in [1e-5, 1e-7, 1e-9] {
        let cfg = IntegratorConfig {
            rel_tol: tol,
            abs_tol: tol,
            max_step: 1.0,
            ..Default::default()
        };
        let e = oscillator_error(&cfg);
        assert!(e < 100.0 * tol, "tol {tol}: error {e}");
        assert!(e < prev);
        prev = e;
    }
}

#[test]
fn blow_up_is_reported() {
    let sys = FnSystem {
        dim: 1,
        f: |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0],
    };
    assert!(solve(&sys, 0.0, &[1.0], 2.0, &IntegratorConfig::default(), None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn inactivation_stays_in_unit_interval(mu in 0.0f64..0.6, c0 in 0.0f64..3.0, h0 in 0.0f64..1.0) {
        let cfg = IntegratorConfig { t_end: 60.0, ..Default::default() };
        let t = integrate(&Model::Atri(ModelParams::atri(mu)), &[c0, h0], &cfg).unwrap();
        for i in 0..t.len() {
            let s = t.state(i);
            prop_assert!(s[0] >= -1e-9, "c = {}", s[0]);
            prop_assert!((-1e-9..=1.0 + 1e-9).contains(&s[1]), "h = {}", s[1]);
        }
    }
}

#[test]
fn period_is_insensitive_to_tolerance() {
    let m = Model::Atri(ModelParams::atri(0.3));
    let periods: Vec<f64> = [1e-6, 1e-8, 1e-10]
        .iter()
        .map(|&tol| {
            measure_cycle(&m, &[0.4, 0.5], &IntegratorConfig::default().with_rel_tol(tol))
                .unwrap()
                .period
        })
        .collect();
    for p in &periods {
        assert!((p - periods[2]).abs() < 1e-4 * periods[2], "{periods:?}");
    }
}

#[test]
fn runs_are_bitwise_reproducible() {
    let m = Model::Mech(ModelParams::mech(0.3, 1.0, StressLaw::hill1(10.0)));
    let cfg = IntegratorConfig {
        t_end: 50.0,
        ..Default::default()
    };
    let a = integrate(&m, &[0.4, 0.0, 0.5], &cfg).unwrap();
    let b = integrate(&m, &[0.4, 0.0, 0.5], &cfg).unwrap();
    assert_eq!(a, b);
    let grid = [0.28, 0.3, 0.32];
    let s1 = sweep(&m, SweepParam::Mu, &grid, &[0.4, 0.0, 0.5], &cfg, true).unwrap();
    let s2 = sweep(&m, SweepParam::Mu, &grid, &[0.4, 0.0, 0.5], &cfg, true).unwrap();
    assert_eq!(s1, s2);
}

#[test]
fn subthreshold_run_settles() {
    let p = ModelParams::atri(0.27);
    let eq = equilibria_atri(&p);
    assert_eq!(eq.len(), 1);
    let cfg = IntegratorConfig {
        t_end: 200.0,
        ..Default::default()
    };
    let t = integrate(&Model::Atri(p), &[0.4, 0.5], &cfg).unwrap();
    let y = t.last_state();
    assert!((y[0] - eq[0].c_star).hypot(y[1] - eq[0].h_star) < 1e-4);
}

#[test]
fn excitable_excursion_before_settling() {
    let p = ModelParams::atri(0.27);
    let c_star = equilibria_atri(&p)[0].c_star;
    let cfg = IntegratorConfig {
        t_end: 200.0,
        ..Default::default()
    };
    let t = integrate(&Model::Atri(p), &[1.0, 1.0], &cfg).unwrap();
    let c = t.component(0);
    let peak = c.iter().cloned().fold(0.0, f64::max);
    assert!(peak > 5.0 * c_star && peak > 1.0, "peak {peak}, c* {c_star}");
    assert!((c[c.len() - 1] - c_star).abs() < 1e-4);
    let s = measure_cycle(&Model::Atri(p), &[1.0, 1.0], &cfg).unwrap();
    assert!(!s.oscillating);
}

#[test]
fn relaxation_cycles() {
    let s = measure_cycle(
        &Model::Atri(ModelParams::atri(0.3)),
        &[0.4, 0.5],
        &IntegratorConfig::default(),
    )
    .unwrap();
    assert!(s.oscillating && s.period_spread < 0.01);
    let vdp = Model::VanDerPol { epsilon: 0.025 };
    let cfg = IntegratorConfig {
        t_end: 1000.0,
        ..Default::default()
    };
    assert!(measure_cycle(&vdp, &[2.0, 0.0], &cfg).unwrap().oscillating);
}

#[test]
fn high_ip3_damps_every_start() {
    let m = Model::Atri(ModelParams::atri(0.55));
    for init in [[0.0, 0.0], [0.4, 0.5], [1.0, 1.0], [3.0, 0.2], [0.1, 0.9]] {
        let s = measure_cycle(&m, &init, &IntegratorConfig::default()).unwrap();
        assert!(!s.oscillating, "{init:?}: {:?}", s.status);
    }
}

#[test]
fn coexisting_cycle_and_steady_state() {
    let p = ModelParams::atri(0.5);
    let eq = equilibria_atri(&p);
    assert_eq!(eq.len(), 1);
    assert!(eq[0].klass.is_stable());
    let m = Model::Atri(p);
    let cfg = IntegratorConfig::default();
    assert!(measure_cycle(&m, &[0.4, 0.5], &cfg).unwrap().oscillating);
    let near = [eq[0].c_star * 0.97, eq[0].h_star];
    let s = measure_cycle(&m, &near, &cfg).unwrap();
    assert!(!s.oscillating && s.converged, "{:?}", s.status);
}

#[test]
fn low_ip3_sweep_is_quiet() {
    let grid: Vec<f64> = (0..=10).map(|i| 0.02 * i as f64).collect();
    let pts = sweep(
        &Model::Atri(ModelParams::default()),
        SweepParam::Mu,
        &grid,
        &[0.4, 0.5],
        &IntegratorConfig::default(),
        false,
    )
    .unwrap();
    assert!(pts.iter().all(|p| !p.fixed_oscillating()));
}

#[test]
fn coupling_opens_window_at_low_ip3() {
    let m = Model::Mech(ModelParams::mech(0.25, 0.0, StressLaw::hill1(10.0)));
    let grid: Vec<f64> = (0..=20).map(|i| 0.1 * i as f64).collect();
    let pts = sweep(
        &m,
        SweepParam::Lambda,
        &grid,
        &[0.4, 0.0, 0.5],
        &IntegratorConfig::default(),
        false,
    )
    .unwrap();
    let osc: Vec<bool> = pts.iter().map(|p| p.fixed_oscillating()).collect();
    assert!(!osc[0] && !osc[osc.len() - 1], "{osc:?}");
    assert!(osc.iter().any(|&o| o), "{osc:?}");
}

#[test]
fn strong_coupling_narrows_window() {
    let grid: Vec<f64> = (0..=80).map(|i| 0.15 + 0.005 * i as f64).collect();
    let window = |lambda: f64| {
        let m = Model::Mech(ModelParams::mech(0.3, lambda, StressLaw::hill1(10.0)));
        frequency_window(
            &m,
            SweepParam::Mu,
            &grid,
            &[0.4, 0.0, 0.5],
            &IntegratorConfig::default(),
            10,
        )
        .unwrap()
        .unwrap()
    };
    let (w0, w1) = (window(0.0), window(1.5));
    assert!(w1.hi - w1.lo < 0.5 * (w0.hi - w0.lo));
    assert!(w1.hi < w0.hi);
}

#[test]
fn frequency_drops_toward_onset() {
    let grid: Vec<f64> = (0..=20).map(|i| 0.2887 + 0.003 * i as f64).collect();
    let prof = frequency_profile(
        &Model::Atri(ModelParams::default()),
        SweepParam::Mu,
        &grid,
        &[0.4, 0.5],
        &IntegratorConfig::default(),
    )
    .unwrap();
    assert!(prof.len() > 10);
    assert!(prof[0].1 < 0.75 * prof[prof.len() - 1].1, "{prof:?}");
}
