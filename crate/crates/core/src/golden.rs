//! Reference checks shared by the acceptance test target and `calx verify`.
//!
//! Each check recomputes a landmark of the models from scratch and compares
//! it with a pinned value at a pinned tolerance. A check passes only if every
//! comparison holds and it finishes within its time budget.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::curves::{
    default_c_grid, find_cusp, fold_merge, hopf_extremals, hopf_morphology, lambda_max_vs_alpha,
    lambda_zero_intercepts, CurveKind, Morphology,
};
use crate::equilibria::{equilibria_mech, jacobian_mech, ladder_atri, nullcline_max, Stability};
use crate::gspt::{break_curve_3d, compose_atri, params_at_epsilon, transition_layer_2d, turning_margin};
use crate::integrator::{
    frequency_profile, frequency_window, hysteresis, measure_cycle, IntegratorConfig, Model, SweepParam,
};
use crate::model::{ModelParams, State3, StressKind, StressLaw};
use crate::roots::{halton, lin_grid, log_grid};

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Outcome of one reference check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub id: &'static str,
    pub title: &'static str,
    pub passed: bool,
    pub within_budget: bool,
    pub elapsed_s: f64,
    pub budget_s: f64,
    pub details: Vec<String>,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:<4} {} ({:.2} s / {:.0} s){}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed_s,
            self.budget_s,
            if self.within_budget { "" } else { " over budget" }
        )
    }
}

/// Collects comparisons for one check.
#[derive(Debug, Default)]
pub struct Report {
    ok: bool,
    details: Vec<String>,
}

impl Report {
    fn new() -> Self {
        Self {
            ok: true,
            details: Vec::new(),
        }
    }

    fn near(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        let pass = (got - want).abs() <= tol;
        self.ok &= pass;
        self.details.push(format!(
            "{} {what}: {got:.6} vs {want} (tol {tol:e})",
            if pass { "ok  " } else { "MISS" }
        ));
    }

    fn holds(&mut self, what: &str, pass: bool, info: String) {
        self.ok &= pass;
        self.details
            .push(format!("{} {what}: {info}", if pass { "ok  " } else { "MISS" }));
    }

    fn fail(&mut self, what: &str, err: impl std::fmt::Display) {
        self.ok = false;
        self.details.push(format!("MISS {what}: error {err}"));
    }
}

pub struct Check {
    pub id: &'static str,
    pub title: &'static str,
    pub budget_s: f64,
    run: fn(&mut Report),
}

impl Check {
    pub fn run(&self) -> CheckResult {
        let start = Instant::now();
        let mut r = Report::new();
        (self.run)(&mut r);
        let elapsed = start.elapsed();
        let within_budget = elapsed <= Duration::from_secs_f64(self.budget_s);
        CheckResult {
            id: self.id,
            title: self.title,
            passed: r.ok && within_budget,
            within_budget,
            elapsed_s: elapsed.as_secs_f64(),
            budget_s: self.budget_s,
            details: r.details,
        }
    }
}

fn hill1_10() -> ModelParams {
    ModelParams::mech(0.0, 0.0, StressLaw::hill1(10.0))
}

fn check_ladder(r: &mut Report) {
    let expected = [0.27828, 0.28814, 0.28900, 0.28924, 0.28925, 0.28950, 0.49500];
    match ladder_atri(&ModelParams::default(), 0.0, 0.6, 1e-6) {
        Ok(l) => {
            r.holds(
                "event count",
                l.events.len() == expected.len(),
                format!("{} events", l.events.len()),
            );
            for (e, want) in l.events.iter().zip(expected) {
                r.near(&format!("{} event", e.kind.label()), e.mu, want, 1e-4);
            }
        }
        Err(e) => r.fail("ladder", e),
    }
}

fn check_nullcline_max(r: &mut Report) {
    let mus = [0.1, 0.2, 0.3, 0.5, 1.0];
    let maxima: Vec<_> = mus
        .iter()
        .filter_map(|&mu| nullcline_max(&ModelParams::atri(mu)).ok())
        .collect();
    if maxima.len() != mus.len() {
        return r.fail("nullcline maximum", "undefined");
    }
    r.near("c_M", maxima[0].c_m, 0.169, 1e-3);
    r.near("mu h_M", mus[0] * maxima[0].h_m, 0.279, 2e-3);
    let spread = maxima.iter().map(|m| (m.c_m - maxima[0].c_m).abs()).fold(0.0, f64::max);
    let mh_spread = mus
        .iter()
        .zip(&maxima)
        .map(|(mu, m)| (mu * m.h_m - mus[0] * maxima[0].h_m).abs())
        .fold(0.0, f64::max);
    r.holds(
        "c_M independent of mu",
        spread < 1e-12,
        format!("spread {spread:e} over {mus:?}"),
    );
    r.holds(
        "mu h_M independent of mu",
        mh_spread < 1e-12,
        format!("spread {mh_spread:e}"),
    );
}

fn check_hopf(r: &mut Report) {
    let p = hill1_10();
    let g = default_c_grid();
    match lambda_zero_intercepts(&p, CurveKind::Hopf, 0, &g) {
        Ok(mut xs) => {
            xs.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
            r.holds("two intercepts", xs.len() == 2, format!("{}", xs.len()));
            for ((_, mu), want) in xs.iter().zip([0.28900, 0.49500]) {
                r.near("lambda=0 intercept", *mu, want, 1e-3);
            }
        }
        Err(e) => return r.fail("intercepts", e),
    }
    match hopf_extremals(&p, &g) {
        Ok(e) => {
            r.near("lambda_max", e.lambda_max, 1.68632, 1e-3);
            r.near("mu at lambda_max", e.mu_at_max, 0.20735, 1e-3);
            r.near("mu_min", e.mu_min, 0.20328, 1e-3);
            r.near("lambda at mu_min", e.lambda_at_mu_min, 1.63989, 1e-3);
        }
        Err(e) => r.fail("extremals", e),
    }
}

fn check_fold_merge(r: &mut Report) {
    match fold_merge(&hill1_10(), &default_c_grid()) {
        Ok(m) => r.near("branch merge lambda", m.lambda, 0.83, 0.05),
        Err(e) => r.fail("fold merge", e),
    }
}

fn check_lambda_max_alpha(r: &mut Report) {
    match lambda_max_vs_alpha(&hill1_10(), StressKind::Hill1, &[1.0, 2.0, 10.0, 100.0]) {
        Ok(v) => {
            let ls: Vec<f64> = v.iter().map(|s| s.lambda_max).collect();
            r.holds(
                "strictly decreasing",
                ls.windows(2).all(|w| w[1] < w[0]),
                format!("{:?}", ls.iter().map(|l| format!("{l:.4}")).collect::<Vec<_>>()),
            );
            r.holds("positive at alpha=100", ls[3] > 0.0, format!("{:.4}", ls[3]));
        }
        Err(e) => r.fail("lambda_max(alpha)", e),
    }
}

fn morphology_for(r: &mut Report, kind: StressKind) {
    let p = hill1_10();
    for (alpha, want) in [(10.0, Morphology::Simple), (1.0, Morphology::BowTie)] {
        match hopf_morphology(&p, kind, alpha) {
            Ok(m) => r.holds(
                &format!("alpha={alpha}"),
                m == want,
                format!("{m:?}, expected {want:?}"),
            ),
            Err(e) => r.fail(&format!("alpha={alpha}"), e),
        }
    }
    match find_cusp(&p, kind, 1.5, 3.0) {
        Ok(Some(a)) => r.holds("cusp in [1.5, 3]", true, format!("alpha = {a:.5}")),
        Ok(None) => {
            let wide = find_cusp(&p, kind, 0.5, 100.0).ok().flatten();
            r.holds(
                "cusp in [1.5, 3]",
                false,
                format!(
                    "none; nearest cusp at alpha = {}",
                    wide.map_or("none".into(), |a| format!("{a:.5}"))
                ),
            )
        }
        Err(e) => r.fail("cusp search", e),
    }
}

fn check_morphology_hill1(r: &mut Report) {
    morphology_for(r, StressKind::Hill1);
}

fn check_morphology_hill2(r: &mut Report) {
    morphology_for(r, StressKind::Hill2);
}

fn sim_cfg() -> IntegratorConfig {
    IntegratorConfig::default()
}

fn check_hysteresis(r: &mut Report) {
    let grid = lin_grid(0.28, 0.52, 49);
    match hysteresis(
        &Model::Atri(ModelParams::default()),
        SweepParam::Mu,
        &grid,
        &[0.4, 0.5],
        &sim_cfg(),
        10,
    ) {
        Ok(h) => {
            r.near("oscillation onset", h.onset.unwrap_or(f64::NAN), 0.2890, 2e-3);
            r.near("stable-cycle fold", h.cycle_fold.unwrap_or(f64::NAN), 0.5106, 5e-3);
            r.holds("bistable window", h.bistable.is_some(), format!("{:?}", h.bistable));
        }
        Err(e) => r.fail("hysteresis sweep", e),
    }
}

fn check_bistability_two_starts(r: &mut Report) {
    let m = Model::Atri(ModelParams::atri(0.5));
    for (init, want) in [([0.4, 0.5], true), ([0.0, 0.0], false)] {
        match measure_cycle(&m, &init, &sim_cfg()) {
            Ok(s) => r.holds(
                &format!("mu=0.5 init {init:?}"),
                s.oscillating == want,
                format!(
                    "{:?} (expected oscillating = {want}), c in [{:.3}, {:.3}]",
                    s.status, s.c_min, s.c_max
                ),
            ),
            Err(e) => r.fail("cycle", e),
        }
    }
}

fn check_suppression(r: &mut Report) {
    for (lambda, want) in [(0.0, true), (1.0, true), (3.0, false)] {
        let m = Model::Mech(ModelParams::mech(0.2894, lambda, StressLaw::hill1(10.0)));
        match measure_cycle(&m, &[0.4, 0.0, 0.5], &sim_cfg()) {
            Ok(s) => r.holds(
                &format!("lambda={lambda}"),
                s.oscillating == want,
                format!("{:?}, period {:.3}", s.status, s.period),
            ),
            Err(e) => r.fail("cycle", e),
        }
    }
}

fn check_gspt_2d(r: &mut Report) {
    let mut turning = Vec::new();
    let mut back = Vec::new();
    for mu in [0.3, 0.4, 0.5] {
        let p = ModelParams::atri(mu);
        let layer = nullcline_max(&p).and_then(|m| transition_layer_2d(&p, m.h_m, 1.0 / p.k1));
        match layer {
            Ok(l) => {
                turning.push(l.t_turning.unwrap());
                back.push(l.t_back.unwrap());
            }
            Err(e) => return r.fail("layer", e),
        }
    }
    r.near("t_TURNING", turning[0], 0.82, 1e-2);
    let spread = |v: &[f64]| v.iter().map(|x| (x - v[0]).abs()).fold(0.0, f64::max);
    r.holds(
        "t_TURNING constant in mu",
        spread(&turning) < 1e-9,
        format!("spread {:e}", spread(&turning)),
    );
    r.holds(
        "t_BACK constant in mu",
        spread(&back) < 1e-9,
        format!("t_BACK {:.6}, spread {:e}", back[0], spread(&back)),
    );
}

fn check_gspt_3d_turning(r: &mut Report) {
    let p = ModelParams::mech(0.3, 1.0, StressLaw::hill1(10.0));
    let grid = log_grid(1e-4, 50.0, 2000);
    for (k, want_positive) in [(1.0 / 7.0, true), (1.5, false)] {
        let q = ModelParams { k, ..p };
        if let Err(e) = break_curve_3d(&q, &grid) {
            return r.fail("break curve", e);
        }
        let margins: Vec<f64> = grid.iter().map(|&c| turning_margin(&q, c)).collect();
        let ok = margins.iter().all(|&m| (m > 0.0) == want_positive);
        let lo = margins.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = margins.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        r.holds(
            &format!(
                "K={k:.4} turning {}",
                if want_positive { "everywhere" } else { "nowhere" }
            ),
            ok,
            format!("margin in [{lo:.3e}, {hi:.3e}]"),
        );
    }
}

fn check_residuals(r: &mut Report) {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for i in 1..=1000u64 {
        let mu = 0.6 * halton(i, 2);
        let lambda = 3.0 * halton(i, 3);
        let alpha = 0.5 + 50.0 * halton(i, 5);
        let stress = if i % 2 == 0 {
            StressLaw::hill1(alpha)
        } else {
            StressLaw::hill2(alpha)
        };
        for e in equilibria_mech(&ModelParams::mech(mu, lambda, stress)) {
            worst = worst.max(e.residual);
            count += 1;
        }
    }
    r.holds(
        "max residual < 1e-9",
        worst < 1e-9,
        format!("{worst:.2e} over {count} equilibria"),
    );
}

fn check_minus_one_eigenvalue(r: &mut Report) {
    let mut worst: f64 = 0.0;
    for i in 1..=1000u64 {
        let mu = 0.6 * halton(i, 2);
        let lambda = 3.0 * halton(i, 3);
        let alpha = 0.5 + 50.0 * halton(i, 5);
        let stress = if i % 2 == 0 {
            StressLaw::hill1(alpha)
        } else {
            StressLaw::hill2(alpha)
        };
        let p = ModelParams::mech(mu, lambda, stress);
        for e in equilibria_mech(&p) {
            let mut j = jacobian_mech(&p, State3::new(e.c_star, e.theta_star.unwrap(), e.h_star));
            for (k, row) in j.iter_mut().enumerate() {
                row[k] += 1.0;
            }
            let scale = j.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
            worst = worst.max(det3(&j).abs() / scale.powi(2));
        }
    }
    r.holds("det(J + I) = 0", worst < 1e-10, format!("max scaled |det| {worst:.2e}"));
}

fn check_mu0(r: &mut Report) {
    let mut bad = 0;
    let mut n = 0;
    for i in 1..=10_000u64 {
        let lambda = 10.0 * halton(i, 2);
        let alpha = 0.1 + 100.0 * halton(i, 3);
        let stress = if i % 2 == 0 {
            StressLaw::hill1(alpha)
        } else {
            StressLaw::hill2(alpha)
        };
        for e in equilibria_mech(&ModelParams::mech(0.0, lambda, stress)) {
            n += 1;
            if !(e.trace < 0.0 && e.discr > 0.0)
                || matches!(e.klass, Stability::StableSpiral | Stability::UnstableSpiral)
            {
                bad += 1;
            }
        }
    }
    r.holds(
        "Tr < 0 and Discr > 0",
        bad == 0,
        format!("{bad} violations in {n} equilibria"),
    );
}

fn check_composite_convergence(r: &mut Report) {
    let p = ModelParams::atri(0.3);
    let cfg = IntegratorConfig {
        max_step: 0.01,
        t_end: 100.0,
        ..Default::default()
    };
    let mut period_err = Vec::new();
    let mut peak_err = Vec::new();
    for eps in [0.02, 0.01, 0.005] {
        let comp = match compose_atri(&p, eps) {
            Ok(c) => c,
            Err(e) => return r.fail("composite", e),
        };
        let full = match params_at_epsilon(&p, eps).and_then(|q| measure_cycle(&Model::Atri(q), &[0.4, 0.5], &cfg)) {
            Ok(s) if s.oscillating => s,
            Ok(s) => return r.fail("full system", format!("{:?}", s.status)),
            Err(e) => return r.fail("full system", e),
        };
        period_err.push((comp.period - full.period).abs() / full.period);
        peak_err.push((comp.c_max() - full.c_max).abs() / full.c_max);
    }
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ");
    r.holds(
        "period error decreasing",
        period_err.windows(2).all(|w| w[1] < w[0]),
        fmt(&period_err),
    );
    r.holds(
        "peak error decreasing",
        peak_err.windows(2).all(|w| w[1] < w[0]),
        fmt(&peak_err),
    );
}

fn check_frequency_atri(r: &mut Report) {
    let grid = lin_grid(0.30, 0.49, 39);
    match frequency_profile(
        &Model::Atri(ModelParams::default()),
        SweepParam::Mu,
        &grid,
        &[0.4, 0.5],
        &sim_cfg(),
    ) {
        Ok(prof) => {
            r.holds(
                "all points oscillate",
                prof.len() == grid.len(),
                format!("{}/{}", prof.len(), grid.len()),
            );
            r.holds(
                "strictly increasing",
                prof.windows(2).all(|w| w[1].1 > w[0].1),
                format!("{:.4} -> {:.4}", prof[0].1, prof[prof.len() - 1].1),
            );
        }
        Err(e) => r.fail("profile", e),
    }
}

fn check_edge_steepening(r: &mut Report) {
    let grid = lin_grid(0.15, 0.55, 81);
    for lambda in [0.1, 0.5, 1.0] {
        let m = Model::Mech(ModelParams::mech(0.3, lambda, StressLaw::hill1(10.0)));
        match frequency_window(&m, SweepParam::Mu, &grid, &[0.4, 0.0, 0.5], &sim_cfg(), 12) {
            Ok(Some(w)) => r.holds(
                &format!("lambda={lambda}"),
                w.steepening,
                format!(
                    "window [{:.4}, {:.4}], edge slopes {:.2}/{:.2} vs interior {:.2}",
                    w.lo, w.hi, w.left_slope, w.right_slope, w.max_interior_slope
                ),
            ),
            Ok(None) => r.holds(&format!("lambda={lambda}"), false, "no oscillation window".into()),
            Err(e) => r.fail("window", e),
        }
    }
}

/// All checks, in order.
pub fn checks() -> Vec<Check> {
    vec![
        Check {
            id: "1",
            title: "bifurcation ladder of the planar model",
            budget_s: 5.0,
            run: check_ladder,
        },
        Check {
            id: "2",
            title: "calcium nullcline maximum",
            budget_s: 1.0,
            run: check_nullcline_max,
        },
        Check {
            id: "3",
            title: "Hopf curve intercepts and extremals (Hill1, alpha=10)",
            budget_s: 5.0,
            run: check_hopf,
        },
        Check {
            id: "4",
            title: "fold-curve branch merge (Hill1, alpha=10)",
            budget_s: 5.0,
            run: check_fold_merge,
        },
        Check {
            id: "5",
            title: "lambda_max decreasing in alpha (Hill1)",
            budget_s: 10.0,
            run: check_lambda_max_alpha,
        },
        Check {
            id: "6a",
            title: "Hopf curve morphology, Hill1",
            budget_s: 15.0,
            run: check_morphology_hill1,
        },
        Check {
            id: "6b",
            title: "Hopf curve morphology, Hill2",
            budget_s: 15.0,
            run: check_morphology_hill2,
        },
        Check {
            id: "7a",
            title: "hysteresis sweep: onset and stable-cycle fold",
            budget_s: 100.0,
            run: check_hysteresis,
        },
        Check {
            id: "7b",
            title: "bistability at mu=0.5 from (0.4,0.5) and (0,0)",
            budget_s: 20.0,
            run: check_bistability_two_starts,
        },
        Check {
            id: "8",
            title: "mechanical suppression at mu=0.2894",
            budget_s: 30.0,
            run: check_suppression,
        },
        Check {
            id: "9",
            title: "planar transition layer times",
            budget_s: 1.0,
            run: check_gspt_2d,
        },
        Check {
            id: "10",
            title: "turning condition along the break curve",
            budget_s: 5.0,
            run: check_gspt_3d_turning,
        },
        Check {
            id: "11a",
            title: "steady-state residuals (1e3 draws)",
            budget_s: 60.0,
            run: check_residuals,
        },
        Check {
            id: "11b",
            title: "eigenvalue -1 of the 3D Jacobian",
            budget_s: 60.0,
            run: check_minus_one_eigenvalue,
        },
        Check {
            id: "11c",
            title: "no oscillatory equilibria at mu=0 (1e4 draws)",
            budget_s: 120.0,
            run: check_mu0,
        },
        Check {
            id: "11d",
            title: "composite cycle converges to the full system",
            budget_s: 60.0,
            run: check_composite_convergence,
        },
        Check {
            id: "12a",
            title: "frequency increasing on the planar stable branch",
            budget_s: 90.0,
            run: check_frequency_atri,
        },
        Check {
            id: "12b",
            title: "frequency steepening at window edges (mech)",
            budget_s: 90.0,
            run: check_edge_steepening,
        },
    ]
}

/// `"6"` selects `6a` and `6b` but `"1"` does not select `11a`.
fn selects(filter: &str, id: &str) -> bool {
    id.strip_prefix(filter)
        .is_some_and(|rest| rest.chars().all(|ch| ch.is_ascii_alphabetic()))
}

/// Runs the checks selected by `filter` (all when empty).
pub fn run_checks(filter: &[String]) -> Vec<CheckResult> {
    checks()
        .iter()
        .filter(|c| filter.is_empty() || filter.iter().any(|f| selects(f, c.id)))
        .map(Check::run)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_matches_whole_numbers() {
        assert!(selects("6", "6a") && selects("6b", "6b") && selects("11", "11c"));
        assert!(!selects("1", "11a") && !selects("1", "12b") && !selects("6a", "6b"));
    }

    #[test]
    fn ids_are_unique() {
        let ids: Vec<&str> = checks().iter().map(|c| c.id).collect();
        let set: std::collections::BTreeSet<&str> = ids.iter().copied().collect();
        assert_eq!(set.len(), ids.len());
    }
}
