//! Adaptive Dormand-Prince 5(4) integration, limit-cycle measurement and
//! brute-force parameter sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibria::{equilibria_atri, equilibria_mech, Equilibrium};
use crate::error::{Error, Result};
use crate::model::{rhs_atri, rhs_mech, ModelParams, State2, State3};

/// A first-order autonomous or non-autonomous system `y' = f(t, y)`.
pub trait OdeSystem: Sync {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

/// Closure-backed system.
pub struct FnSystem<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64]) + Sync> OdeSystem for FnSystem<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.f)(t, y, dy)
    }
}

/// Models known to the integrator. State layouts are `(c, h)`,
/// `(c, theta, h)` and `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Atri(ModelParams),
    Mech(ModelParams),
    VanDerPol { epsilon: f64 },
}

impl Model {
    pub fn params(&self) -> Option<&ModelParams> {
        match self {
            Model::Atri(p) | Model::Mech(p) => Some(p),
            Model::VanDerPol { .. } => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Atri(_) => "atri",
            Model::Mech(_) => "mech",
            Model::VanDerPol { .. } => "vdp",
        }
    }

    /// Steady states for the chemical models; empty for Van der Pol.
    pub fn equilibria(&self) -> Vec<Equilibrium> {
        match self {
            Model::Atri(p) => equilibria_atri(p),
            Model::Mech(p) => equilibria_mech(p),
            Model::VanDerPol { .. } => Vec::new(),
        }
    }

    /// State vector of a steady state in this model's layout.
    pub fn equilibrium_state(&self, e: &Equilibrium) -> Vec<f64> {
        match self {
            Model::Mech(_) => vec![e.c_star, e.theta_star.unwrap_or(0.0), e.h_star],
            _ => vec![e.c_star, e.h_star],
        }
    }

    fn map_params(&self, f: impl FnOnce(ModelParams) -> ModelParams) -> Model {
        match *self {
            Model::Atri(p) => Model::Atri(f(p)),
            Model::Mech(p) => Model::Mech(f(p)),
            m @ Model::VanDerPol { .. } => m,
        }
    }
}

impl OdeSystem for Model {
    fn dim(&self) -> usize {
        match self {
            Model::Mech(_) => 3,
            _ => 2,
        }
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        match self {
            Model::Atri(p) => {
                let (a, b) = rhs_atri(p, State2::new(y[0], y[1]));
                dy[0] = a;
                dy[1] = b;
            }
            Model::Mech(p) => {
                let (a, b, c) = rhs_mech(p, State3::new(y[0], y[1], y[2]));
                dy[0] = a;
                dy[1] = b;
                dy[2] = c;
            }
            Model::VanDerPol { epsilon } => {
                let (x, v) = (y[0], y[1]);
                dy[0] = (v + x - x * x * x / 3.0) / epsilon;
                dy[1] = -epsilon * x;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub t_end: f64,
    pub transient_fraction: f64,
    pub max_steps: usize,
    /// Disables error control and uses this constant step.
    pub fixed_step: Option<f64>,
    /// `t_end` is doubled at most this many times while a cycle run is
    /// inconclusive.
    pub max_extensions: u32,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-7,
            abs_tol: 1e-9,
            max_step: 0.1,
            t_end: 400.0,
            transient_fraction: 0.5,
            max_steps: 20_000_000,
            fixed_step: None,
            max_extensions: 2,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive"));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidConfig("max_step must be positive"));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidConfig("t_end must be positive and finite"));
        }
        if !(self.transient_fraction > 0.0 && self.transient_fraction < 1.0) {
            return Err(Error::InvalidConfig("transient_fraction must lie in (0, 1)"));
        }
        if let Some(h) = self.fixed_step {
            if !(h > 0.0) {
                return Err(Error::InvalidConfig("fixed_step must be positive"));
            }
        }
        Ok(())
    }

    pub fn with_t_end(self, t_end: f64) -> Self {
        Self { t_end, ..self }
    }

    pub fn with_rel_tol(self, rel_tol: f64) -> Self {
        Self { rel_tol, ..self }
    }
}

/// Accepted step points with derivatives, stored row-major.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub derivs: Vec<f64>,
    /// Whether [`Trajectory::interpolate`] is available (always true for
    /// solver output).
    pub dense: bool,
}

impl Trajectory {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            dense: true,
            ..Default::default()
        }
    }

    fn push(&mut self, t: f64, y: &[f64], f: &[f64]) {
        self.times.push(t);
        self.states.extend_from_slice(y);
        self.derivs.extend_from_slice(f);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn deriv(&self, i: usize) -> &[f64] {
        &self.derivs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        self.states.iter().skip(k).step_by(self.dim).copied().collect()
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap_or(&f64::NAN)
    }

    /// Cubic Hermite interpolation between step points.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let n = self.len();
        let i = match self.times.partition_point(|&x| x <= t) {
            0 => 0,
            k if k >= n => n.saturating_sub(2),
            k => k - 1,
        };
        let j = (i + 1).min(n - 1);
        if i == j {
            return self.state(i).to_vec();
        }
        hermite(
            self.times[i],
            self.state(i),
            self.deriv(i),
            self.times[j],
            self.state(j),
            self.deriv(j),
            t,
        )
    }

    /// Appends `other`, dropping its first point (which must coincide with
    /// this trajectory's last point).
    fn append(&mut self, other: Trajectory) {
        for i in 1..other.len() {
            self.push(other.times[i], other.state(i), other.deriv(i));
        }
    }
}

fn hermite(t0: f64, y0: &[f64], f0: &[f64], t1: f64, y1: &[f64], f1: &[f64], t: f64) -> Vec<f64> {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    (0..y0.len())
        .map(|k| h00 * y0[k] + h10 * h * f0[k] + h01 * y1[k] + h11 * h * f1[k])
        .collect()
}

/// Terminal event located by [`solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct EventHit {
    pub t: f64,
    pub state: Vec<f64>,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Stepper<'a, S: OdeSystem + ?Sized> {
    sys: &'a S,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
}

impl<'a, S: OdeSystem + ?Sized> Stepper<'a, S> {
    fn new(sys: &'a S) -> Self {
        let n = sys.dim();
        Self {
            sys,
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
        }
    }

    /// One step from `(t, y)` with `k[0] = f(t, y)` already set. Writes the
    /// fifth-order solution to `y_new`, `f(t+h, y_new)` to `k[6]`, and returns
    /// the error estimate vector in `err`.
    fn step(&mut self, t: f64, y: &[f64], h: f64, y_new: &mut [f64], err: &mut [f64]) {
        let n = y.len();
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, a) in A[s].iter().enumerate().take(s) {
                    acc += a * self.k[j][i];
                }
                self.tmp[i] = y[i] + h * acc;
            }
            let (left, right) = self.k.split_at_mut(s);
            let _ = left;
            self.sys.rhs(t + C[s] * h, &self.tmp, &mut right[0]);
        }
        y_new.copy_from_slice(&self.tmp);
        for i in 0..n {
            let mut e = 0.0;
            for (s, es) in E.iter().enumerate() {
                e += es * self.k[s][i];
            }
            err[i] = h * e;
        }
    }
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], cfg: &IntegratorConfig) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..err.len() {
        let sc = cfg.abs_tol + cfg.rel_tol * y0[i].abs().max(y1[i].abs());
        m = m.max((err[i] / sc).abs());
    }
    if m.is_finite() {
        m
    } else {
        f64::INFINITY
    }
}

fn initial_step<S: OdeSystem + ?Sized>(sys: &S, t0: f64, y0: &[f64], f0: &[f64], cfg: &IntegratorConfig) -> f64 {
    let n = y0.len();
    let scale: Vec<f64> = y0.iter().map(|v| cfg.abs_tol + cfg.rel_tol * v.abs()).collect();
    let norm = |v: &[f64]| (v.iter().zip(&scale).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d0 = norm(y0);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = (0..n).map(|i| y0[i] + h0 * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    sys.rhs(t0 + h0, &y1, &mut f1);
    let diff: Vec<f64> = (0..n).map(|i| f1[i] - f0[i]).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(cfg.max_step)
}

/// Event function `g(t, y)`; integration stops where it changes sign.
pub type EventFn<'a> = &'a dyn Fn(f64, &[f64]) -> f64;

/// Integrates `sys` from `(t0, y0)` to `t_end`. With `event`, stops at the
/// first sign change of `event(t, y)` after the start, located by bisection
/// on the dense output to `|dt| < 1e-10`.
pub fn solve<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
    event: Option<EventFn<'_>>,
) -> Result<(Trajectory, Option<EventHit>)> {
    cfg.validate()?;
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y0.len(),
        });
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(t0));
    }
    if !(t_end > t0) {
        return Err(Error::InvalidConfig("t_end must exceed the start time"));
    }

    let mut st = Stepper::new(sys);
    let mut traj = Trajectory::new(n);
    let mut t = t0;
    let mut y = y0.to_vec();
    sys.rhs(t, &y, &mut st.k[0]);
    traj.push(t, &y, &st.k[0]);

    let mut g_prev = event.map(|g| g(t, &y));
    let mut h = match cfg.fixed_step {
        Some(h) => h,
        None => initial_step(sys, t, &y, &st.k[0].clone(), cfg),
    };
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut steps = 0usize;
    let mut rejected_last = false;

    while t < t_end {
        if steps >= cfg.max_steps {
            return Err(Error::MaxSteps(cfg.max_steps));
        }
        steps += 1;
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        st.step(t, &y, h, &mut y_new, &mut err);

        if cfg.fixed_step.is_none() {
            let e = error_norm(&err, &y, &y_new, cfg);
            // NaN from an overflowed stage must reject, not accept
            if !(e <= 1.0) || y_new.iter().any(|v| !v.is_finite()) {
                let fac = if e.is_finite() {
                    (0.9 * e.powf(-0.2)).max(0.2)
                } else {
                    0.2
                };
                h *= fac;
                rejected_last = true;
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::StepUnderflow { t, h });
                }
                continue;
            }
            let mut fac = if e == 0.0 {
                5.0
            } else {
                (0.9 * e.powf(-0.2)).clamp(0.2, 5.0)
            };
            if rejected_last {
                fac = fac.min(1.0);
            }
            rejected_last = false;
            let t_new = if last { t_end } else { t + h };
            accept(&mut traj, &mut st, &mut t, &mut y, &y_new, t_new);
            h = (h * fac).min(cfg.max_step);
        } else {
            if y_new.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(t));
            }
            let t_new = if last { t_end } else { t + h };
            accept(&mut traj, &mut st, &mut t, &mut y, &y_new, t_new);
            h = cfg.fixed_step.unwrap_or(h);
        }

        if let (Some(g), Some(gp)) = (event, g_prev) {
            let gn = g(t, &y);
            if gp != 0.0 && gn.signum() != gp.signum() {
                let hit = locate_event(&traj, g, gp);
                truncate_at(&mut traj, sys, &hit);
                return Ok((traj, Some(hit)));
            }
            g_prev = Some(gn);
        }
    }
    Ok((traj, None))
}

fn accept<S: OdeSystem + ?Sized>(
    traj: &mut Trajectory,
    st: &mut Stepper<'_, S>,
    t: &mut f64,
    y: &mut [f64],
    y_new: &[f64],
    t_new: f64,
) {
    *t = t_new;
    y.copy_from_slice(y_new);
    let f_new = st.k[6].clone();
    st.k[0].copy_from_slice(&f_new);
    traj.push(*t, y, &f_new);
}

fn locate_event(traj: &Trajectory, g: &dyn Fn(f64, &[f64]) -> f64, g_prev: f64) -> EventHit {
    let n = traj.len();
    let (mut a, mut b) = (traj.times[n - 2], traj.times[n - 1]);
    let interp = |t: f64| {
        hermite(
            traj.times[n - 2],
            traj.state(n - 2),
            traj.deriv(n - 2),
            traj.times[n - 1],
            traj.state(n - 1),
            traj.deriv(n - 1),
            t,
        )
    };
    let sa = g_prev.signum();
    while b - a > 1e-10 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m, &interp(m));
        if gm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if gm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    let t = if a == b { a } else { b };
    EventHit { t, state: interp(t) }
}

fn truncate_at<S: OdeSystem + ?Sized>(traj: &mut Trajectory, sys: &S, hit: &EventHit) {
    let n = traj.len();
    traj.times.truncate(n - 1);
    traj.states.truncate((n - 1) * traj.dim);
    traj.derivs.truncate((n - 1) * traj.dim);
    if hit.t > *traj.times.last().unwrap() {
        let mut f = vec![0.0; traj.dim];
        sys.rhs(hit.t, &hit.state, &mut f);
        traj.push(hit.t, &hit.state, &f);
    }
}

/// Integrates a model from `t = 0` to `cfg.t_end`.
pub fn integrate(model: &Model, init: &[f64], cfg: &IntegratorConfig) -> Result<Trajectory> {
    solve(model, 0.0, init, cfg.t_end, cfg, None).map(|(tr, _)| tr)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CycleStatus {
    Oscillating,
    Equilibrium,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleSummary {
    pub status: CycleStatus,
    pub oscillating: bool,
    /// Extremes of component 0 after the transient.
    pub c_min: f64,
    pub c_max: f64,
    /// Mean inter-peak interval (NaN unless oscillating).
    pub period: f64,
    pub frequency: f64,
    pub n_cycles_measured: usize,
    /// Whether the run settled onto a steady state.
    pub converged: bool,
    /// Relative spread `(max - min)/mean` of the inter-peak intervals.
    pub period_spread: f64,
    pub t_end: f64,
    pub final_state: Vec<f64>,
}

/// Minimum oscillation amplitude in component 0.
pub const AMPLITUDE_FLOOR: f64 = 1e-3;
const MIN_PEAKS: usize = 5;
const MAX_PERIOD_SPREAD: f64 = 0.01;
/// Allowed change of the peak height across the window, relative to the
/// amplitude; rejects damped and growing transients.
const MAX_PEAK_DRIFT: f64 = 0.02;
const SETTLED_RHS: f64 = 1e-6;
const SETTLED_DISTANCE: f64 = 1e-4;

/// Interpolated peak times and heights of component `k` at or after `t_from`.
pub fn find_peaks(traj: &Trajectory, k: usize, t_from: f64) -> Vec<(f64, f64)> {
    let mut peaks = Vec::new();
    for i in 1..traj.len().saturating_sub(1) {
        if traj.times[i] < t_from {
            continue;
        }
        let (d0, d1) = (traj.deriv(i)[k], traj.deriv(i + 1)[k]);
        if !(d0 > 0.0 && d1 <= 0.0) {
            continue;
        }
        // the larger of the two samples bracketing the derivative zero is
        // the middle point of the interpolating parabola
        let j = if traj.state(i + 1)[k] > traj.state(i)[k] {
            i + 1
        } else {
            i
        };
        if j == 0 || j + 1 >= traj.len() {
            continue;
        }
        let (t0, t1, t2) = (traj.times[j - 1], traj.times[j], traj.times[j + 1]);
        let (y0, y1, y2) = (traj.state(j - 1)[k], traj.state(j)[k], traj.state(j + 1)[k]);
        peaks.push(parabola_vertex((t0, y0), (t1, y1), (t2, y2)));
    }
    peaks
}

fn parabola_vertex(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> (f64, f64) {
    let (x0, y0) = p0;
    let (x1, y1) = p1;
    let (x2, y2) = p2;
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if a >= 0.0 {
        return p1;
    }
    let b = d01 - a * (x0 + x1);
    let xv = (-b / (2.0 * a)).clamp(x0, x2);
    let yv = y0 + d01 * (xv - x0) + a * (xv - x0) * (xv - x1);
    (xv, yv)
}

/// Classifies the post-transient part of a trajectory. A run has settled when
/// the RHS norm at its end is below 1e-6, or when its peaks shrink
/// monotonically and it ends within 1e-4 of one of `stable_states`.
pub fn analyze_cycle<S: OdeSystem + ?Sized>(
    sys: &S,
    traj: &Trajectory,
    t_from: f64,
    stable_states: &[Vec<f64>],
) -> CycleSummary {
    let c = traj.component(0);
    let (mut c_min, mut c_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &t) in traj.times.iter().enumerate() {
        if t >= t_from {
            c_min = c_min.min(c[i]);
            c_max = c_max.max(c[i]);
        }
    }
    let final_state = traj.last_state().to_vec();
    let mut f = vec![0.0; traj.dim];
    sys.rhs(traj.t_end(), &final_state, &mut f);
    let peaks = find_peaks(traj, 0, t_from);
    let decaying = peaks.windows(2).all(|w| w[1].1 < w[0].1);
    let near_stable = stable_states.iter().any(|e| {
        e.iter()
            .zip(&final_state)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            < SETTLED_DISTANCE
    });
    let settled = f.iter().fold(0.0f64, |m, v| m.max(v.abs())) < SETTLED_RHS || (decaying && near_stable);

    let amplitude = c_max - c_min;
    let intervals: Vec<f64> = peaks.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let (mut period, mut spread) = (f64::NAN, f64::NAN);
    if !intervals.is_empty() {
        let mean = intervals.iter().sum::<f64>() / intervals.len() as f64;
        let lo = intervals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = intervals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        period = mean;
        spread = (hi - lo) / mean;
    }
    let drift = match (peaks.first(), peaks.last()) {
        (Some(a), Some(b)) if amplitude > 0.0 => (b.1 - a.1).abs() / amplitude,
        _ => f64::INFINITY,
    };
    let oscillating = !settled
        && peaks.len() >= MIN_PEAKS
        && amplitude > AMPLITUDE_FLOOR
        && spread < MAX_PERIOD_SPREAD
        && drift < MAX_PEAK_DRIFT;
    let status = if oscillating {
        CycleStatus::Oscillating
    } else if settled {
        CycleStatus::Equilibrium
    } else {
        CycleStatus::Inconclusive
    };
    CycleSummary {
        status,
        oscillating,
        c_min,
        c_max,
        period: if oscillating { period } else { f64::NAN },
        frequency: if oscillating { 1.0 / period } else { f64::NAN },
        n_cycles_measured: if oscillating { intervals.len() } else { 0 },
        converged: settled,
        period_spread: spread,
        t_end: traj.t_end(),
        final_state,
    }
}

/// Integrates, discards the transient and measures the cycle. Inconclusive
/// runs (too few peaks, or a slowly damped or growing transient) are extended
/// by doubling `t_end`.
pub fn measure_cycle(model: &Model, init: &[f64], cfg: &IntegratorConfig) -> Result<CycleSummary> {
    let mut traj = integrate(model, init, cfg)?;
    let stable: Vec<Vec<f64>> = model
        .equilibria()
        .iter()
        .filter(|e| e.klass.is_stable())
        .map(|e| model.equilibrium_state(e))
        .collect();
    let mut t_end = cfg.t_end;
    let mut summary = analyze_cycle(model, &traj, cfg.transient_fraction * t_end, &stable);
    for _ in 0..cfg.max_extensions {
        if summary.status != CycleStatus::Inconclusive {
            break;
        }
        let start = traj.last_state().to_vec();
        let (more, _) = solve(model, t_end, &start, 2.0 * t_end, cfg, None)?;
        traj.append(more);
        t_end *= 2.0;
        summary = analyze_cycle(model, &traj, cfg.transient_fraction * t_end, &stable);
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepParam {
    Mu,
    Lambda,
}

impl SweepParam {
    pub fn apply(self, model: &Model, value: f64) -> Model {
        match self {
            SweepParam::Mu => model.map_params(|p| p.with_mu(value)),
            SweepParam::Lambda => model.map_params(|p| p.with_lambda(value)),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SweepParam::Mu => "mu",
            SweepParam::Lambda => "lambda",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    /// Run from the fixed initial state.
    pub fixed: Result<CycleSummary>,
    /// Run from the final state of the previous grid point.
    pub continued: Option<Result<CycleSummary>>,
    pub equilibria: Vec<Equilibrium>,
}

impl SweepPoint {
    pub fn fixed_oscillating(&self) -> bool {
        matches!(&self.fixed, Ok(s) if s.oscillating)
    }

    pub fn continued_oscillating(&self) -> bool {
        matches!(&self.continued, Some(Ok(s)) if s.oscillating)
    }
}

fn check_monotone(grid: &[f64]) -> Result<()> {
    let up = grid.windows(2).all(|w| w[1] > w[0]);
    let down = grid.windows(2).all(|w| w[1] < w[0]);
    if grid.is_empty() || !(up || down) {
        return Err(Error::NonMonotoneGrid);
    }
    Ok(())
}

/// Cycle measurements along a monotone parameter grid. With `continuation`,
/// each point also starts from the final state of the previous one.
pub fn sweep(
    model: &Model,
    param: SweepParam,
    grid: &[f64],
    init: &[f64],
    cfg: &IntegratorConfig,
    continuation: bool,
) -> Result<Vec<SweepPoint>> {
    check_monotone(grid)?;
    cfg.validate()?;
    if model.params().is_none() {
        return Err(Error::InvalidConfig("sweeps need a chemical model"));
    }
    let fixed: Vec<(Result<CycleSummary>, Vec<Equilibrium>)> = grid
        .par_iter()
        .map(|&v| {
            let m = param.apply(model, v);
            (measure_cycle(&m, init, cfg), m.equilibria())
        })
        .collect();

    let mut continued: Vec<Option<Result<CycleSummary>>> = vec![None; grid.len()];
    if continuation {
        let mut state = init.to_vec();
        for (i, &v) in grid.iter().enumerate() {
            let m = param.apply(model, v);
            let r = measure_cycle(&m, &state, cfg);
            if let Ok(s) = &r {
                state = s.final_state.clone();
            }
            continued[i] = Some(r);
        }
    }

    Ok(grid
        .iter()
        .zip(fixed)
        .zip(continued)
        .map(|((&value, (fixed, equilibria)), continued)| SweepPoint {
            value,
            fixed,
            continued,
            equilibria,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisReport {
    /// First parameter value at which the fixed-init run oscillates.
    pub onset: Option<f64>,
    /// Last parameter value at which the upward continuation oscillates.
    pub cycle_fold: Option<f64>,
    /// First value (from the top) at which the downward continuation, started
    /// at the top steady state, oscillates.
    pub down_onset: Option<f64>,
    /// Interval where the upward branch oscillates and the downward does not.
    pub bistable: Option<(f64, f64)>,
    pub up: Vec<SweepPoint>,
    pub down: Vec<SweepPoint>,
}

/// Upward and downward continuation sweeps over an ascending grid, with
/// onset and cycle-fold positions refined by `refine` bisection steps.
pub fn hysteresis(
    model: &Model,
    param: SweepParam,
    grid: &[f64],
    init: &[f64],
    cfg: &IntegratorConfig,
    refine: usize,
) -> Result<HysteresisReport> {
    if !grid.windows(2).all(|w| w[1] > w[0]) || grid.len() < 2 {
        return Err(Error::NonMonotoneGrid);
    }
    let up = sweep(model, param, grid, init, cfg, true)?;

    let top = param.apply(model, *grid.last().unwrap());
    let down_init = top
        .equilibria()
        .iter()
        .find(|e| e.klass.is_stable())
        .map(|e| {
            let mut s = top.equilibrium_state(e);
            s[0] += 0.01;
            s
        })
        .unwrap_or_else(|| init.to_vec());
    let rev: Vec<f64> = grid.iter().rev().copied().collect();
    let down = sweep(model, param, &rev, &down_init, cfg, true)?;

    let onset = up.iter().position(|p| p.fixed_oscillating()).map(|i| {
        if i == 0 || refine == 0 {
            return up[i].value;
        }
        let (mut lo, mut hi) = (up[i - 1].value, up[i].value);
        for _ in 0..refine {
            let mid = 0.5 * (lo + hi);
            let osc = matches!(measure_cycle(&param.apply(model, mid), init, cfg), Ok(s) if s.oscillating);
            if osc {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    });

    let cycle_fold = up.iter().rposition(|p| p.continued_oscillating()).map(|i| {
        if i + 1 == up.len() || refine == 0 {
            return up[i].value;
        }
        let mut state = match &up[i].continued {
            Some(Ok(s)) => s.final_state.clone(),
            _ => unreachable!(),
        };
        let (mut lo, mut hi) = (up[i].value, up[i + 1].value);
        for _ in 0..refine {
            let mid = 0.5 * (lo + hi);
            match measure_cycle(&param.apply(model, mid), &state, cfg) {
                Ok(s) if s.oscillating => {
                    lo = mid;
                    state = s.final_state;
                }
                _ => hi = mid,
            }
        }
        lo
    });

    let down_onset = down
        .iter()
        .position(|p| p.continued_oscillating())
        .map(|i| down[i].value);
    let bistable = match (cycle_fold, down_onset) {
        (Some(f), Some(d)) if f > d => Some((d, f)),
        (Some(f), None) => Some((grid[0], f)),
        _ => None,
    };
    Ok(HysteresisReport {
        onset,
        cycle_fold,
        down_onset,
        bistable,
        up,
        down,
    })
}

/// `(value, frequency)` for the oscillating points of an upward continuation
/// sweep.
pub fn frequency_profile(
    model: &Model,
    param: SweepParam,
    grid: &[f64],
    init: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<(f64, f64)>> {
    let pts = sweep(model, param, grid, init, cfg, true)?;
    Ok(pts
        .iter()
        .filter_map(|p| match &p.continued {
            Some(Ok(s)) if s.oscillating => Some((p.value, s.frequency)),
            _ => None,
        })
        .collect())
}

/// Fraction of the window width over which edge slopes are measured.
pub const EDGE_FRACTION: f64 = 0.01;

/// Oscillation window of an upward continuation sweep with both edges
/// refined by bisection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyWindow {
    pub lo: f64,
    pub hi: f64,
    /// Oscillating grid points of the continuation, ascending.
    pub profile: Vec<(f64, f64)>,
    /// Secant slope of the frequency over the outermost [`EDGE_FRACTION`] of
    /// the window at each edge.
    pub left_slope: f64,
    pub right_slope: f64,
    /// Largest secant slope between grid points in the middle half.
    pub max_interior_slope: f64,
    /// Both edge slopes exceed five times the interior maximum.
    pub steepening: bool,
}

fn frequency_at(
    model: &Model,
    param: SweepParam,
    v: f64,
    init: &[f64],
    cfg: &IntegratorConfig,
) -> Option<CycleSummary> {
    match measure_cycle(&param.apply(model, v), init, cfg) {
        Ok(s) if s.oscillating => Some(s),
        _ => None,
    }
}

/// Locates the oscillation window along an ascending grid. The left edge is
/// refined from the fixed initial state and the right edge by continuing the
/// cycle, `refine` bisection steps each.
pub fn frequency_window(
    model: &Model,
    param: SweepParam,
    grid: &[f64],
    init: &[f64],
    cfg: &IntegratorConfig,
    refine: usize,
) -> Result<Option<FrequencyWindow>> {
    if grid.len() < 2 || !grid.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::NonMonotoneGrid);
    }
    let pts = sweep(model, param, grid, init, cfg, true)?;
    let osc: Vec<usize> = (0..pts.len()).filter(|&i| pts[i].continued_oscillating()).collect();
    let (Some(&i0), Some(&i1)) = (osc.first(), osc.last()) else {
        return Ok(None);
    };
    let summary = |i: usize| match &pts[i].continued {
        Some(Ok(s)) => s.clone(),
        _ => unreachable!(),
    };
    let profile: Vec<(f64, f64)> = osc.iter().map(|&i| (pts[i].value, summary(i).frequency)).collect();

    let (mut lo, mut lo_freq) = (grid[i0], summary(i0).frequency);
    if i0 > 0 {
        let mut out = grid[i0 - 1];
        for _ in 0..refine {
            let mid = 0.5 * (out + lo);
            match frequency_at(model, param, mid, init, cfg) {
                Some(s) => {
                    lo = mid;
                    lo_freq = s.frequency;
                }
                None => out = mid,
            }
        }
    }
    let (mut hi, mut hi_state) = (grid[i1], summary(i1));
    if i1 + 1 < grid.len() {
        let mut out = grid[i1 + 1];
        for _ in 0..refine {
            let mid = 0.5 * (hi + out);
            match frequency_at(model, param, mid, &hi_state.final_state, cfg) {
                Some(s) => {
                    hi = mid;
                    hi_state = s;
                }
                None => out = mid,
            }
        }
    }

    let width = hi - lo;
    let delta = EDGE_FRACTION * width;
    let left_in = frequency_at(model, param, lo + delta, init, cfg).map_or(f64::NAN, |s| s.frequency);
    let right_in = frequency_at(model, param, hi - delta, &hi_state.final_state, cfg).map_or(f64::NAN, |s| s.frequency);
    let left_slope = ((left_in - lo_freq) / delta).abs();
    let right_slope = ((hi_state.frequency - right_in) / delta).abs();

    let (a, b) = (lo + 0.25 * width, lo + 0.75 * width);
    let max_interior_slope = profile
        .windows(2)
        .filter(|w| w[0].0 >= a && w[1].0 <= b)
        .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
        .fold(0.0, f64::max);
    Ok(Some(FrequencyWindow {
        lo,
        hi,
        profile,
        left_slope,
        right_slope,
        max_interior_slope,
        steepening: left_slope > 5.0 * max_interior_slope && right_slope > 5.0 * max_interior_slope,
    }))
}

/// Least-squares slope of `ln f` against `ln mu` over the first `n` points.
pub fn loglog_slope(profile: &[(f64, f64)], n: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = profile.iter().take(n).map(|&(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}
