//! Slow-fast decomposition of both models for small `epsilon = 1/K1`.
//!
//! With `g = Gamma/K1` and `Lambda = lambda/K1` held fixed, the calcium
//! equation reads `epsilon dc/dt = F(c, h, theta)` where
//!
//! ```text
//! F = mu h (b + c)/(1 + c) - g c/(K + c) + Lambda theta.
//! ```
//!
//! Its zero set (the slow manifold) is a quadratic in `c`; the smaller
//! nonnegative root is the attracting branch. Relaxation cycles are assembled
//! from a fast approach to that branch (phase I), a slow crawl to the break
//! where both roots merge (phase II) and an analytic large-`c` layer in
//! `c_hat = epsilon c` (phase III).

use serde::Serialize;

use crate::equilibria::{nullcline_max, NullclineMax};
use crate::error::{Error, Result};
use crate::integrator::{solve, FnSystem, IntegratorConfig, Model, Trajectory};
use crate::model::ModelParams;
use crate::roots::{bisect, quadratic_roots};

/// Matching tolerance between consecutive composite segments.
pub const MATCH_TOL: f64 = 1e-3;

/// Parameters of the full system for a different `epsilon`, with `Gamma/K1`
/// and `lambda/K1` held fixed.
pub fn params_at_epsilon(p: &ModelParams, epsilon: f64) -> Result<ModelParams> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            value: epsilon,
            reason: "must be positive",
        });
    }
    let k1 = 1.0 / epsilon;
    Ok(ModelParams {
        k1,
        gamma: p.gamma / p.k1 * k1,
        lambda: p.lambda / p.k1 * k1,
        ..*p
    })
}

/// Fast calcium rate `F(c, h, theta)` scaled by `K1`, i.e. the calcium RHS of
/// the full system at `epsilon = 1/K1`.
pub fn fast_rhs(p: &ModelParams, c: f64, h: f64, theta: f64) -> f64 {
    p.mu * h * p.release(c) - p.pump(c) + p.lambda * theta
}

/// `dF/dc` scaled by `K1`.
pub fn fast_rhs_dc(p: &ModelParams, c: f64, h: f64) -> f64 {
    p.mu * h * p.k1 * (1.0 - p.b) / ((1.0 + c) * (1.0 + c)) - p.gamma * p.k / ((p.k + c) * (p.k + c))
}

/// Coefficients `(A, B, C)` of `A c^2 + B c + C = 0` for the slow manifold.
pub fn slow_manifold_coeffs(p: &ModelParams, h: f64, theta: f64) -> (f64, f64, f64) {
    let m = p.mu * h * p.k1;
    let l = p.lambda * theta;
    (
        m - p.gamma + l,
        m * (p.b + p.k) - p.gamma + l * (1.0 + p.k),
        m * p.b * p.k + l * p.k,
    )
}

/// Discriminant of the slow-manifold quadratic; it vanishes at the break.
pub fn slow_manifold_discriminant(p: &ModelParams, h: f64, theta: f64) -> f64 {
    let (a, b, c) = slow_manifold_coeffs(p, h, theta);
    b * b - 4.0 * a * c
}

/// Branches of the slow manifold at `(h, theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SheetRoots {
    /// Smallest nonnegative root (attracting).
    pub c_minus: Option<f64>,
    /// Second nonnegative root (repelling), when both are nonnegative.
    pub c_plus: Option<f64>,
}

pub fn sheet_roots(p: &ModelParams, h: f64, theta: f64) -> SheetRoots {
    let (a, b, c) = slow_manifold_coeffs(p, h, theta);
    match quadratic_roots(a, b, c) {
        None => SheetRoots {
            c_minus: None,
            c_plus: None,
        },
        Some((r0, r1)) => {
            let nonneg: Vec<f64> = [r0, r1].into_iter().filter(|&r| r >= 0.0).collect();
            let distinct = a.abs() > 1e-14 * (b.abs() + c.abs());
            SheetRoots {
                c_minus: nonneg.first().copied(),
                c_plus: if distinct && nonneg.len() == 2 {
                    Some(nonneg[1])
                } else {
                    None
                },
            }
        }
    }
}

/// The attracting root, continued through the break by the vertex of the
/// quadratic so that the slow RHS stays defined while events are located.
fn c_minus_extended(p: &ModelParams, h: f64, theta: f64) -> f64 {
    match sheet_roots(p, h, theta).c_minus {
        Some(c) => c,
        None => {
            let (a, b, _) = slow_manifold_coeffs(p, h, theta);
            (-b / (2.0 * a)).max(0.0)
        }
    }
}

/// Slow manifold of the two-variable model with its break point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlowManifold2 {
    pub p: ModelParams,
    pub break_point: NullclineMax,
}

impl SlowManifold2 {
    pub fn new(p: &ModelParams) -> Result<Self> {
        let q = p.with_lambda(0.0);
        Ok(Self {
            p: q,
            break_point: nullcline_max(&q)?,
        })
    }

    pub fn c_minus(&self, h: f64) -> Option<f64> {
        sheet_roots(&self.p, h, 0.0).c_minus
    }

    pub fn c_plus(&self, h: f64) -> Option<f64> {
        sheet_roots(&self.p, h, 0.0).c_plus
    }
}

/// Fast subsystem of the two-variable model in fast time `tau = t/epsilon`,
/// `h` frozen.
pub fn fast_flow_2d(
    p: &ModelParams,
    h_frozen: f64,
    c0: f64,
    tau_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let q = p.with_lambda(0.0);
    let g = q.gamma / q.k1;
    let sys = FnSystem {
        dim: 1,
        f: move |_t: f64, y: &[f64], dy: &mut [f64]| {
            let c = y[0];
            dy[0] = q.mu * h_frozen * (q.b + c) / (1.0 + c) - g * c / (q.k + c);
        },
    };
    solve(&sys, 0.0, &[c0], tau_end, cfg, None).map(|r| r.0)
}

/// Fast subsystem of the mechanochemical model, `(h, theta)` frozen.
pub fn fast_flow_3d(
    p: &ModelParams,
    h_frozen: f64,
    theta_frozen: f64,
    c0: f64,
    tau_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let q = *p;
    let sys = FnSystem {
        dim: 1,
        f: move |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = fast_rhs(&q, y[0], h_frozen, theta_frozen) / q.k1,
    };
    solve(&sys, 0.0, &[c0], tau_end, cfg, None).map(|r| r.0)
}

/// Motion along the attracting branch, `c = c_minus`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlowFlow {
    pub times: Vec<f64>,
    pub c: Vec<f64>,
    /// Empty for the two-variable model.
    pub theta: Vec<f64>,
    pub h: Vec<f64>,
    /// Time at which the break was reached, if it was.
    pub break_time: Option<f64>,
}

impl SlowFlow {
    pub fn end(&self) -> (f64, f64, f64) {
        let n = self.times.len() - 1;
        (self.c[n], self.theta.get(n).copied().unwrap_or(0.0), self.h[n])
    }
}

/// Slow flow of the two-variable model from `h0` until the break point or
/// `t_end`.
pub fn slow_flow_2d(p: &ModelParams, h0: f64, t_end: f64, cfg: &IntegratorConfig) -> Result<SlowFlow> {
    let sm = SlowManifold2::new(p)?;
    let q = sm.p;
    if sm.c_minus(h0).is_none() || h0 > sm.break_point.h_m {
        return Err(Error::OutsideBranchDomain {
            h: h0,
            h_break: sm.break_point.h_m,
        });
    }
    let sys = FnSystem {
        dim: 1,
        f: move |_t: f64, y: &[f64], dy: &mut [f64]| {
            let c = c_minus_extended(&q, y[0], 0.0);
            dy[0] = q.h_inf(c) - y[0];
        },
    };
    let event = |_t: f64, y: &[f64]| slow_manifold_discriminant(&q, y[0], 0.0);
    let (traj, hit) = solve(&sys, 0.0, &[h0], t_end, cfg, Some(&event))?;
    let h = traj.component(0);
    let mut c: Vec<f64> = h.iter().map(|&h| c_minus_extended(&q, h, 0.0)).collect();
    if hit.is_some() {
        *c.last_mut().unwrap() = sm.break_point.c_m;
    }
    Ok(SlowFlow {
        times: traj.times,
        c,
        theta: Vec::new(),
        h,
        break_time: hit.map(|e| e.t),
    })
}

/// Break curve of the mechanochemical slow manifold, parametrised by `c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakCurve {
    pub c: Vec<f64>,
    pub theta_f: Vec<f64>,
    pub h_f: Vec<f64>,
}

pub fn break_h(p: &ModelParams, c: f64) -> f64 {
    p.gamma * p.k / (p.mu * p.k1 * (1.0 - p.b)) * (1.0 + c).powi(2) / (p.k + c).powi(2)
}

pub fn break_theta(p: &ModelParams, c: f64) -> f64 {
    p.gamma / p.lambda * (c / (p.k + c) - p.k / (1.0 - p.b) * (1.0 + c) * (p.b + c) / (p.k + c).powi(2))
}

pub fn break_curve_3d(p: &ModelParams, c_grid: &[f64]) -> Result<BreakCurve> {
    if !(p.lambda > 0.0) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: p.lambda,
            reason: "break curve needs lambda > 0",
        });
    }
    if !(p.mu > 0.0) {
        return Err(Error::InvalidParameter {
            name: "mu",
            value: p.mu,
            reason: "break curve needs mu > 0",
        });
    }
    if let Some(&c) = c_grid.iter().find(|&&c| !(c > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "c_grid",
            value: c,
            reason: "break curve is parametrised by c > 0",
        });
    }
    Ok(BreakCurve {
        c: c_grid.to_vec(),
        theta_f: c_grid.iter().map(|&c| break_theta(p, c)).collect(),
        h_f: c_grid.iter().map(|&c| break_h(p, c)).collect(),
    })
}

/// `lambda theta_F - (Gamma - mu K1 h_F)`: positive exactly where
/// trajectories leaving the break curve turn back. It reduces to
/// `Gamma K (1 - K)/(K + c)^2`.
pub fn turning_margin(p: &ModelParams, c: f64) -> f64 {
    p.lambda * break_theta(p, c) - (p.gamma - p.mu * p.k1 * break_h(p, c))
}

/// Slow flow on the attracting sheet of the mechanochemical model, from a
/// state `(c, theta, h)` with `c = c_minus(h, theta)`.
pub fn slow_flow_3d(p: &ModelParams, init: (f64, f64, f64), t_end: f64, cfg: &IntegratorConfig) -> Result<SlowFlow> {
    let (c0, theta0, h0) = init;
    let on_sheet = sheet_roots(p, h0, theta0).c_minus;
    match on_sheet {
        Some(c) if (c - c0).abs() <= 1e-6 * (1.0 + c) && fast_rhs_dc(p, c, h0) < 0.0 => {}
        _ => return Err(Error::OffSheet(fast_rhs(p, c0, h0, theta0))),
    }
    let q = *p;
    let sys = FnSystem {
        dim: 2,
        f: move |_t: f64, y: &[f64], dy: &mut [f64]| {
            let c = c_minus_extended(&q, y[1], y[0]);
            dy[0] = -y[0] + q.stress.eval(c);
            dy[1] = q.h_inf(c) - y[1];
        },
    };
    let event = |_t: f64, y: &[f64]| slow_manifold_discriminant(&q, y[1], y[0]);
    let (traj, hit) = solve(&sys, 0.0, &[theta0, h0], t_end, cfg, Some(&event))?;
    let theta = traj.component(0);
    let h = traj.component(1);
    let c = theta
        .iter()
        .zip(&h)
        .map(|(&th, &h)| c_minus_extended(&q, h, th))
        .collect();
    Ok(SlowFlow {
        times: traj.times,
        c,
        theta,
        h,
        break_time: hit.map(|e| e.t),
    })
}

/// Analytic large-calcium layer leaving the break at `(c_b, theta_b, h_b)`.
///
/// With `u = mu h_b + Lambda theta_b - Lambda T_s` and `v = Lambda T_s - g`:
///
/// ```text
/// c_hat(t) = u (1 - e^-t) + v t,   h_hat = h_b e^-t,
/// theta_hat = T_s + (theta_b - T_s) e^-t.
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Layer {
    pub mu: f64,
    pub g: f64,
    pub big_lambda: f64,
    pub t_s: f64,
    pub c_break: f64,
    pub theta_break: f64,
    pub h_break: f64,
    pub epsilon: f64,
    /// `None` when the trajectory escapes to infinity.
    pub t_turning: Option<f64>,
    pub t_back: Option<f64>,
    /// `c_hat(t_turning)/epsilon`.
    pub c_peak: Option<f64>,
}

impl Layer {
    fn u(&self) -> f64 {
        self.mu * self.h_break + self.big_lambda * (self.theta_break - self.t_s)
    }

    fn v(&self) -> f64 {
        self.big_lambda * self.t_s - self.g
    }

    pub fn c_hat(&self, t: f64) -> f64 {
        self.u() * (1.0 - (-t).exp()) + self.v() * t
    }

    pub fn h_hat(&self, t: f64) -> f64 {
        self.h_break * (-t).exp()
    }

    pub fn theta_hat(&self, t: f64) -> f64 {
        self.t_s + (self.theta_break - self.t_s) * (-t).exp()
    }

    /// `d c_hat/dt = mu h_hat + Lambda theta_hat - g`; zero on the crossing
    /// plane.
    pub fn crossing_plane(&self, t: f64) -> f64 {
        self.mu * self.h_hat(t) + self.big_lambda * self.theta_hat(t) - self.g
    }

    pub fn escaping(&self) -> bool {
        self.t_turning.is_none()
    }
}

fn build_layer(p: &ModelParams, c_b: f64, theta_b: f64, h_b: f64, epsilon: f64) -> Layer {
    let mut layer = Layer {
        mu: p.mu,
        g: p.gamma / p.k1,
        big_lambda: p.lambda / p.k1,
        t_s: p.stress.saturation(),
        c_break: c_b,
        theta_break: theta_b,
        h_break: h_b,
        epsilon,
        t_turning: None,
        t_back: None,
        c_peak: None,
    };
    let (u, v) = (layer.u(), layer.v());
    // turning needs v < 0 and e^t = u/(-v) > 1
    if v < 0.0 && u / -v > 1.0 {
        let t_t = (u / -v).ln();
        let upper = u / -v + 1.0;
        let t_b = bisect(|t| layer.c_hat(t), t_t, upper, 1e-14);
        layer.t_turning = Some(t_t);
        layer.t_back = Some(t_b);
        layer.c_peak = Some(layer.c_hat(t_t) / epsilon);
    }
    layer
}

/// Layer of the two-variable model leaving the break point at `h_m`.
pub fn transition_layer_2d(p: &ModelParams, h_m: f64, epsilon: f64) -> Result<Layer> {
    let q = p.with_lambda(0.0);
    let c_m = nullcline_max(&q)?.c_m;
    let layer = build_layer(&q, c_m, 0.0, h_m, epsilon);
    if layer.escaping() {
        return Err(Error::NoTurning("mu K1 h_M/Gamma <= 1"));
    }
    Ok(layer)
}

/// Layer of the mechanochemical model leaving the break curve at parameter
/// `c`. Escaping trajectories are returned with `t_turning = None`.
pub fn transition_layer_3d(p: &ModelParams, c: f64, epsilon: f64) -> Result<Layer> {
    if !(p.lambda > 0.0) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: p.lambda,
            reason: "the three-variable layer needs lambda > 0",
        });
    }
    Ok(build_layer(p, c, break_theta(p, c), break_h(p, c), epsilon))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Phase {
    FastApproach,
    SlowCrawl,
    Layer,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::FastApproach => "I",
            Phase::SlowCrawl => "II",
            Phase::Layer => "III",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Provenance {
    Analytic,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub phase: Phase,
    pub provenance: Provenance,
    pub times: Vec<f64>,
    pub c: Vec<f64>,
    /// Empty for the two-variable model.
    pub theta: Vec<f64>,
    pub h: Vec<f64>,
}

impl Segment {
    fn start(&self) -> (f64, f64, f64) {
        (self.c[0], self.theta.first().copied().unwrap_or(0.0), self.h[0])
    }

    fn end(&self) -> (f64, f64, f64) {
        let n = self.c.len() - 1;
        (self.c[n], self.theta.get(n).copied().unwrap_or(0.0), self.h[n])
    }
}

/// One leading-order relaxation cycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GsptTrajectory {
    pub segments: Vec<Segment>,
    pub epsilon: f64,
    pub layer: Layer,
    /// Phase II duration + layer duration + epsilon times the fast-phase
    /// duration in fast time.
    pub period: f64,
    /// Largest junction mismatch between consecutive segments (including the
    /// wrap-around).
    pub matching_error: f64,
    /// Return-map iterations used (three-variable model only).
    pub iterations: usize,
}

impl GsptTrajectory {
    /// Largest `c` over the cycle; the layer is placed at
    /// `c = c_break + c_hat/epsilon`.
    pub fn c_max(&self) -> f64 {
        self.segments
            .iter()
            .flat_map(|s| s.c.iter())
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

const LAYER_SAMPLES: usize = 200;
const FAST_TAU_END: f64 = 1e4;
const SLOW_T_END: f64 = 1e3;

fn gspt_cfg() -> IntegratorConfig {
    IntegratorConfig {
        rel_tol: 1e-10,
        abs_tol: 1e-12,
        max_step: 0.05,
        ..Default::default()
    }
}

/// Fast approach at frozen `(h, theta)` from `c0` until within [`MATCH_TOL`]
/// of the attracting branch. Returns the segment in slow time starting at 0.
fn fast_segment(p: &ModelParams, c0: f64, theta: f64, h: f64, epsilon: f64, three_d: bool) -> Result<Segment> {
    let target = sheet_roots(p, h, theta)
        .c_minus
        .ok_or_else(|| Error::NotOscillatory("layer returns where the attracting branch does not exist".into()))?;
    let q = *p;
    let sys = FnSystem {
        dim: 1,
        f: move |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = fast_rhs(&q, y[0], h, theta) / q.k1,
    };
    let event = move |_t: f64, y: &[f64]| (y[0] - target).abs() - 0.5 * MATCH_TOL;
    let (traj, hit) = solve(&sys, 0.0, &[c0], FAST_TAU_END, &gspt_cfg(), Some(&event))?;
    if hit.is_none() {
        return Err(Error::NotOscillatory(
            "fast phase does not reach the attracting branch".into(),
        ));
    }
    let n = traj.len();
    Ok(Segment {
        phase: Phase::FastApproach,
        provenance: Provenance::Numeric,
        times: traj.times.iter().map(|t| epsilon * t).collect(),
        c: traj.component(0),
        theta: if three_d { vec![theta; n] } else { Vec::new() },
        h: vec![h; n],
    })
}

fn layer_segment(layer: &Layer, three_d: bool) -> Segment {
    let t_b = layer.t_back.unwrap();
    let times: Vec<f64> = (0..=LAYER_SAMPLES)
        .map(|i| t_b * i as f64 / LAYER_SAMPLES as f64)
        .collect();
    Segment {
        phase: Phase::Layer,
        provenance: Provenance::Analytic,
        c: times
            .iter()
            .map(|&t| layer.c_break + layer.c_hat(t) / layer.epsilon)
            .collect(),
        theta: if three_d {
            times.iter().map(|&t| layer.theta_hat(t)).collect()
        } else {
            Vec::new()
        },
        h: times.iter().map(|&t| layer.h_hat(t)).collect(),
        times,
    }
}

fn slow_segment(flow: SlowFlow) -> Segment {
    Segment {
        phase: Phase::SlowCrawl,
        provenance: Provenance::Numeric,
        times: flow.times,
        c: flow.c,
        theta: flow.theta,
        h: flow.h,
    }
}

fn junction_gap(a: (f64, f64, f64), b: (f64, f64, f64)) -> f64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs()).max((a.2 - b.2).abs())
}

fn assemble(mut segments: Vec<Segment>, layer: Layer, epsilon: f64, iterations: usize) -> GsptTrajectory {
    let mut offset = 0.0;
    for s in &mut segments {
        let t0 = s.times[0];
        for t in &mut s.times {
            *t = *t - t0 + offset;
        }
        offset = *s.times.last().unwrap();
    }
    let n = segments.len();
    let matching_error = (0..n)
        .map(|i| junction_gap(segments[i].end(), segments[(i + 1) % n].start()))
        .fold(0.0, f64::max);
    GsptTrajectory {
        period: offset,
        segments,
        epsilon,
        layer,
        matching_error,
        iterations,
    }
}

/// Leading-order relaxation cycle of the two-variable model, starting at the
/// layer's return point: phase I, then II, then III.
pub fn compose_atri(p: &ModelParams, epsilon: f64) -> Result<GsptTrajectory> {
    let sm = SlowManifold2::new(p)?;
    let q = sm.p;
    let layer = transition_layer_2d(&q, sm.break_point.h_m, epsilon)?;
    let h_back = layer.h_hat(layer.t_back.unwrap());
    let phase1 = fast_segment(&q, sm.break_point.c_m, 0.0, h_back, epsilon, false)?;
    let phase2 = slow_flow_2d(&q, h_back, SLOW_T_END, &gspt_cfg())?;
    if phase2.break_time.is_none() {
        return Err(Error::NotOscillatory(format!(
            "slow flow from h = {h_back} settles before the break"
        )));
    }
    let phase3 = layer_segment(&layer, false);
    Ok(assemble(vec![phase1, slow_segment(phase2), phase3], layer, epsilon, 1))
}

/// Leading-order relaxation cycle of the mechanochemical model. The return
/// map (break curve -> layer -> fast approach -> slow flow -> break curve) is
/// iterated until the departure point converges; one loop is returned.
pub fn compose_mech(p: &ModelParams, epsilon: f64, init: Option<(f64, f64)>) -> Result<GsptTrajectory> {
    if !(p.lambda > 0.0) {
        return compose_atri(p, epsilon);
    }
    let cfg = gspt_cfg();
    let (mut theta, mut h) = init.unwrap_or((0.5, 0.1));
    let mut c = sheet_roots(p, h, theta)
        .c_minus
        .ok_or(Error::OffSheet(fast_rhs(p, 0.0, h, theta)))?;
    let mut last: Option<(f64, f64)> = None;
    for it in 1..=60 {
        let flow = slow_flow_3d(p, (c, theta, h), SLOW_T_END, &cfg)?;
        if flow.break_time.is_none() {
            return Err(Error::NotOscillatory("slow flow settles before the break curve".into()));
        }
        let (c_b, theta_b, h_b) = flow.end();
        let layer = build_layer(p, c_b, theta_b, h_b, epsilon);
        let t_back = layer
            .t_back
            .ok_or(Error::NoTurning("trajectory escapes after leaving the break curve"))?;
        let (theta_r, h_r) = (layer.theta_hat(t_back), layer.h_hat(t_back));
        let phase1 = fast_segment(p, c_b, theta_r, h_r, epsilon, true)?;
        let converged = last.is_some_and(|(th, hh)| (th - theta_b).abs().max((hh - h_b).abs()) < 1e-9);
        if converged {
            let c_r = sheet_roots(p, h_r, theta_r).c_minus.unwrap();
            let phase2 = slow_segment(slow_flow_3d(p, (c_r, theta_r, h_r), SLOW_T_END, &cfg)?);
            let phase3 = layer_segment(&build_layer(p, c_b, theta_b, h_b, epsilon), true);
            return Ok(assemble(vec![phase1, phase2, phase3], layer, epsilon, it));
        }
        last = Some((theta_b, h_b));
        theta = theta_r;
        h = h_r;
        c = sheet_roots(p, h, theta).c_minus.unwrap();
    }
    Err(Error::NotOscillatory("return map did not converge".into()))
}

/// Composite cycle for either chemical model.
pub fn compose_relaxation_oscillation(model: &Model, epsilon: f64) -> Result<GsptTrajectory> {
    match model {
        Model::Atri(p) => compose_atri(p, epsilon),
        Model::Mech(p) => compose_mech(p, epsilon, None),
        Model::VanDerPol { .. } => Err(Error::InvalidConfig("composite cycles need a chemical model")),
    }
}

/// Largest `|c_full - c_slow|` over phase II when the full system at
/// `epsilon` starts on the attracting branch at `h0`.
pub fn shadowing_error_2d(p: &ModelParams, h0: f64, epsilon: f64) -> Result<f64> {
    let q = params_at_epsilon(&p.with_lambda(0.0), epsilon)?;
    let flow = slow_flow_2d(&q, h0, SLOW_T_END, &gspt_cfg())?;
    let t_end = flow.break_time.unwrap_or(*flow.times.last().unwrap());
    let c0 = flow.c[0];
    let cfg = IntegratorConfig {
        max_step: 0.01,
        ..gspt_cfg()
    };
    let (full, _) = solve(&Model::Atri(q), 0.0, &[c0, h0], t_end, &cfg, None)?;
    Ok(flow
        .times
        .iter()
        .zip(&flow.c)
        .map(|(&t, &c)| (full.interpolate(t)[0] - c).abs())
        .fold(0.0, f64::max))
}

/// Same as [`shadowing_error_2d`] for the sheet of the mechanochemical model.
pub fn shadowing_error_3d(p: &ModelParams, theta0: f64, h0: f64, epsilon: f64) -> Result<f64> {
    let q = params_at_epsilon(p, epsilon)?;
    let c0 = sheet_roots(&q, h0, theta0).c_minus.ok_or(Error::OffSheet(f64::NAN))?;
    let flow = slow_flow_3d(&q, (c0, theta0, h0), SLOW_T_END, &gspt_cfg())?;
    let t_end = flow.break_time.unwrap_or(*flow.times.last().unwrap());
    let cfg = IntegratorConfig {
        max_step: 0.01,
        ..gspt_cfg()
    };
    let (full, _) = solve(&Model::Mech(q), 0.0, &[c0, theta0, h0], t_end, &cfg, None)?;
    Ok(flow
        .times
        .iter()
        .zip(&flow.c)
        .map(|(&t, &c)| (full.interpolate(t)[0] - c).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StressLaw;

    #[test]
    fn sheet_roots_satisfy_quadratic_and_stability_signs() {
        let p = ModelParams::atri(0.3);
        let sm = SlowManifold2::new(&p).unwrap();
        for h in [0.2, 0.5, 0.8, 0.9] {
            let r = sheet_roots(&p, h, 0.0);
            let c = r.c_minus.unwrap();
            assert!(fast_rhs(&p, c, h, 0.0).abs() < 1e-10 * p.k1);
            assert!(fast_rhs_dc(&p, c, h) < 0.0);
            if let Some(cp) = r.c_plus {
                assert!(cp >= c);
                assert!(fast_rhs_dc(&p, cp, h) > 0.0);
            }
        }
        assert!(sm.c_minus(sm.break_point.h_m + 1e-3).is_none());
    }

    #[test]
    fn epsilon_rescaling_keeps_ratios() {
        let p = ModelParams::mech(0.3, 1.0, StressLaw::hill1(10.0));
        let q = params_at_epsilon(&p, 0.01).unwrap();
        assert!((q.gamma / q.k1 - p.gamma / p.k1).abs() < 1e-15);
        assert!((q.lambda / q.k1 - p.lambda / p.k1).abs() < 1e-15);
        assert_eq!(q.k1, 100.0);
        assert!(params_at_epsilon(&p, 0.0).is_err());
    }

    #[test]
    fn slow_flow_rejects_start_above_break() {
        let p = ModelParams::atri(0.3);
        let h_m = SlowManifold2::new(&p).unwrap().break_point.h_m;
        assert!(matches!(
            slow_flow_2d(&p, h_m + 0.01, 10.0, &IntegratorConfig::default()),
            Err(Error::OutsideBranchDomain { .. })
        ));
    }

    #[test]
    fn layer_turns_and_returns() {
        let p = ModelParams::atri(0.3);
        let m = nullcline_max(&p).unwrap();
        let l = transition_layer_2d(&p, m.h_m, 1.0 / p.k1).unwrap();
        let (t_t, t_b) = (l.t_turning.unwrap(), l.t_back.unwrap());
        assert!(t_b > t_t && t_t > 0.0);
        assert!(l.c_hat(t_b).abs() < 1e-12);
        assert!(l.crossing_plane(t_t).abs() < 1e-12);
    }

    #[test]
    fn layer_flags_missing_turn() {
        let p = ModelParams::atri(0.3);
        assert!(matches!(transition_layer_2d(&p, 0.01, 0.02), Err(Error::NoTurning(_))));
    }

    #[test]
    fn off_sheet_start_rejected() {
        let p = ModelParams::mech(0.3, 1.0, StressLaw::hill1(10.0));
        assert!(matches!(
            slow_flow_3d(&p, (5.0, 0.5, 0.1), 10.0, &IntegratorConfig::default()),
            Err(Error::OffSheet(_))
        ));
    }
}
