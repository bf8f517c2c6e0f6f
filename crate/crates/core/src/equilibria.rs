//! Steady states, linear stability and the one-parameter bifurcation ladder.
//!
//! Steady states of both models satisfy a single scalar equation in `c`,
//!
//! ```text
//! g(c) = mu K1 h(c) (b + c)/(1 + c) - Gamma c/(K + c) + lambda T(c) = 0,
//! h(c) = K2^2/(K2^2 + c^2),   theta = T(c),
//! ```
//!
//! which is solved by scanning a log-spaced grid for sign changes and bisecting
//! each bracket. At any steady state of the three-variable model the Jacobian
//! factorises into the eigenvalue `-1` and a 2x2 block with
//!
//! ```text
//! trace = R1c - 1,   det = -R1c - R1h R3c - lambda T'(c),
//! ```
//!
//! which for `lambda = 0` is exactly the Jacobian of the two-variable model.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{rhs_atri, rhs_mech, ModelParams, State2, State3};
use crate::roots::{bisect, golden_min, log_grid, sign_changes};

/// Maximum RHS norm accepted by [`classify_atri`] / [`classify_mech`].
pub const RESIDUAL_TOL: f64 = 1e-9;

const SCAN_LO: f64 = 1e-8;
const SCAN_HI: f64 = 1e3;
const SCAN_POINTS: usize = 20_000;
/// Roots closer than this are reported as one double (fold) root.
const DOUBLE_ROOT_GAP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stability {
    StableNode,
    StableSpiral,
    UnstableNode,
    UnstableSpiral,
    Saddle,
    Degenerate,
}

impl Stability {
    /// Classification of a planar linearisation from its invariants.
    pub fn from_invariants(trace: f64, det: f64, discr: f64) -> Self {
        const TINY: f64 = 1e-12;
        if det.abs() <= TINY || trace.abs() <= TINY {
            return Stability::Degenerate;
        }
        if det < 0.0 {
            return Stability::Saddle;
        }
        match (trace < 0.0, discr >= 0.0) {
            (true, true) => Stability::StableNode,
            (true, false) => Stability::StableSpiral,
            (false, true) => Stability::UnstableNode,
            (false, false) => Stability::UnstableSpiral,
        }
    }

    pub fn is_stable(self) -> bool {
        matches!(self, Stability::StableNode | Stability::StableSpiral)
    }

    pub fn label(self) -> &'static str {
        match self {
            Stability::StableNode => "stable node",
            Stability::StableSpiral => "stable spiral",
            Stability::UnstableNode => "unstable node",
            Stability::UnstableSpiral => "unstable spiral",
            Stability::Saddle => "saddle",
            Stability::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub c_star: f64,
    pub h_star: f64,
    /// `Some` for the mechanochemical model.
    pub theta_star: Option<f64>,
    pub trace: f64,
    pub det: f64,
    pub discr: f64,
    #[serde(serialize_with = "serialize_complex")]
    pub eigenvalues: Vec<Complex64>,
    pub klass: Stability,
    pub residual: f64,
}

fn serialize_complex<S: serde::Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

/// Partial derivatives entering the reduced 2x2 stability block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockTerms {
    pub r1c: f64,
    pub r1h: f64,
    pub r3c: f64,
    /// `lambda T'(c)`.
    pub stretch: f64,
}

impl BlockTerms {
    pub fn at(p: &ModelParams, c: f64, h: f64) -> Self {
        let r1c = p.mu * h * p.k1 * (1.0 - p.b) / ((1.0 + c) * (1.0 + c)) - p.gamma * p.k / ((p.k + c) * (p.k + c));
        Self {
            r1c,
            r1h: p.mu * p.release(c),
            r3c: p.h_inf_deriv(c),
            stretch: p.lambda * p.stress.deriv(c),
        }
    }

    pub fn trace(&self) -> f64 {
        self.r1c - 1.0
    }

    pub fn det(&self) -> f64 {
        -self.r1c - self.r1h * self.r3c - self.stretch
    }

    pub fn discr(&self) -> f64 {
        let t = self.trace();
        t * t - 4.0 * self.det()
    }

    /// Roots of `w^2 - trace w + det = 0`.
    pub fn eigenvalues(&self) -> [Complex64; 2] {
        let t = self.trace();
        let d = self.discr();
        if d >= 0.0 {
            let s = d.sqrt();
            [Complex64::new(0.5 * (t - s), 0.0), Complex64::new(0.5 * (t + s), 0.0)]
        } else {
            let s = (-d).sqrt();
            [Complex64::new(0.5 * t, -0.5 * s), Complex64::new(0.5 * t, 0.5 * s)]
        }
    }
}

/// Analytic Jacobian of the two-variable model, rows `(c, h)`.
pub fn jacobian_atri(p: &ModelParams, s: State2) -> [[f64; 2]; 2] {
    let t = BlockTerms::at(p, s.c, s.h);
    [[t.r1c, t.r1h], [t.r3c, -1.0]]
}

/// Analytic Jacobian of the mechanochemical model, rows `(c, theta, h)`.
pub fn jacobian_mech(p: &ModelParams, s: State3) -> [[f64; 3]; 3] {
    let t = BlockTerms::at(p, s.c, s.h);
    [
        [t.r1c, p.lambda, t.r1h],
        [p.stress.deriv(s.c), -1.0, 0.0],
        [t.r3c, 0.0, -1.0],
    ]
}

/// Steady-state residual `g(c)` with `h` and `theta` slaved to `c`.
pub fn steady_state_residual(p: &ModelParams, c: f64) -> f64 {
    p.mu * p.k1 * p.h_inf(c) * (p.b + c) / (1.0 + c) - p.gamma * c / (p.k + c) + p.lambda * p.stress.eval(c)
}

/// The `mu` for which `c` is a steady state at the given `lambda`.
pub fn mu_along_equilibria(p: &ModelParams, c: f64) -> f64 {
    (p.pump(c) - p.lambda * p.stress.eval(c)) / (p.k1 * p.h_inf(c) * (p.b + c) / (1.0 + c))
}

/// Classifies a state of the two-variable model. Fails when the state is not
/// a steady state to within [`RESIDUAL_TOL`].
pub fn classify_atri(p: &ModelParams, s: State2) -> Result<Equilibrium> {
    let (dc, dh) = rhs_atri(p, s);
    let residual = dc.abs().max(dh.abs());
    if !(residual < RESIDUAL_TOL) {
        return Err(Error::ResidualTooLarge(residual));
    }
    let atri = p.with_lambda(0.0);
    let t = BlockTerms::at(&atri, s.c, s.h);
    Ok(Equilibrium {
        c_star: s.c,
        h_star: s.h,
        theta_star: None,
        trace: t.trace(),
        det: t.det(),
        discr: t.discr(),
        eigenvalues: t.eigenvalues().to_vec(),
        klass: Stability::from_invariants(t.trace(), t.det(), t.discr()),
        residual,
    })
}

/// Classifies a state of the mechanochemical model; the eigenvalue `-1` is
/// appended to those of the reduced block.
pub fn classify_mech(p: &ModelParams, s: State3) -> Result<Equilibrium> {
    let (dc, dth, dh) = rhs_mech(p, s);
    let residual = dc.abs().max(dth.abs()).max(dh.abs());
    if !(residual < RESIDUAL_TOL) {
        return Err(Error::ResidualTooLarge(residual));
    }
    let t = BlockTerms::at(p, s.c, s.h);
    let mut eigenvalues = t.eigenvalues().to_vec();
    eigenvalues.push(Complex64::new(-1.0, 0.0));
    Ok(Equilibrium {
        c_star: s.c,
        h_star: s.h,
        theta_star: Some(s.theta),
        trace: t.trace(),
        det: t.det(),
        discr: t.discr(),
        eigenvalues,
        klass: Stability::from_invariants(t.trace(), t.det(), t.discr()),
        residual,
    })
}

/// Nonnegative roots of the steady-state equation, ascending, with double
/// roots repeated.
fn steady_state_roots(p: &ModelParams) -> Vec<(f64, bool)> {
    let g = |c: f64| steady_state_residual(p, c);
    let mut roots: Vec<f64> = Vec::new();
    let g0 = g(0.0);
    if g0 == 0.0 {
        roots.push(0.0);
    }

    let mut hi = SCAN_HI;
    while g(hi) > 0.0 && hi < 1e8 {
        hi *= 10.0;
    }
    let grid = log_grid(SCAN_LO, hi, SCAN_POINTS);
    let values: Vec<f64> = grid.iter().map(|&c| g(c)).collect();

    if g0 != 0.0 && values[0] != 0.0 && g0.signum() != values[0].signum() {
        roots.push(bisect(g, 0.0, SCAN_LO, 1e-22));
    }
    for i in sign_changes(&values) {
        roots.push(bisect(g, grid[i], grid[i + 1], 0.0));
    }

    // tangencies that do not change sign between grid nodes
    let scale = p.gamma.max(p.mu * p.k1).max(1.0);
    for i in 1..values.len() - 1 {
        let (a, m, b) = (values[i - 1].abs(), values[i].abs(), values[i + 1].abs());
        if m <= a
            && m <= b
            && values[i - 1].signum() == values[i + 1].signum()
            && values[i].signum() == values[i - 1].signum()
        {
            let x = golden_min(|c| g(c).abs(), grid[i - 1], grid[i + 1], 1e-15);
            if g(x).abs() < 1e-11 * scale {
                roots.push(x);
                roots.push(x);
            }
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut flagged: Vec<(f64, bool)> = roots.iter().map(|&c| (c, false)).collect();
    for i in 1..flagged.len() {
        if (flagged[i].0 - flagged[i - 1].0).abs() <= DOUBLE_ROOT_GAP * (1.0 + flagged[i].0) {
            flagged[i].1 = true;
            flagged[i - 1].1 = true;
        }
    }
    flagged
}

fn make_equilibrium(p: &ModelParams, c: f64, degenerate: bool, with_theta: bool) -> Equilibrium {
    let h = p.h_inf(c);
    let theta = p.stress.eval(c);
    let t = BlockTerms::at(p, c, h);
    let mut eigenvalues = t.eigenvalues().to_vec();
    let residual = if with_theta {
        eigenvalues.push(Complex64::new(-1.0, 0.0));
        let (a, b, d) = rhs_mech(p, State3::new(c, theta, h));
        a.abs().max(b.abs()).max(d.abs())
    } else {
        let (a, b) = rhs_atri(p, State2::new(c, h));
        a.abs().max(b.abs())
    };
    let klass = if degenerate {
        Stability::Degenerate
    } else {
        Stability::from_invariants(t.trace(), t.det(), t.discr())
    };
    Equilibrium {
        c_star: c,
        h_star: h,
        theta_star: with_theta.then_some(theta),
        trace: t.trace(),
        det: t.det(),
        discr: t.discr(),
        eigenvalues,
        klass,
        residual,
    }
}

/// Steady states of the two-variable model. `lambda` and the stress law are
/// ignored.
pub fn equilibria_atri(p: &ModelParams) -> Vec<Equilibrium> {
    let atri = p.with_lambda(0.0);
    steady_state_roots(&atri)
        .into_iter()
        .map(|(c, deg)| make_equilibrium(&atri, c, deg, false))
        .collect()
}

/// Steady states of the mechanochemical model.
pub fn equilibria_mech(p: &ModelParams) -> Vec<Equilibrium> {
    steady_state_roots(p)
        .into_iter()
        .map(|(c, deg)| make_equilibrium(p, c, deg, true))
        .collect()
}

/// Nonzero steady state of the `mu = 0` mechanochemical model with Hill1
/// stress, `c* = (delta - K)/(1 - alpha delta)` with
/// `delta = Gamma/(alpha lambda)`, when it exists.
pub fn second_steady_state_mu0(p: &ModelParams) -> Option<f64> {
    if p.lambda <= 0.0 || p.stress.alpha <= 0.0 {
        return None;
    }
    let delta = p.gamma / (p.stress.alpha * p.lambda);
    let c = (delta - p.k) / (1.0 - p.stress.alpha * delta);
    (c > 0.0 && c.is_finite()).then_some(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    DiscrZero,
    FoldDetZero,
    HopfTrZero,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::DiscrZero => "discr",
            EventKind::FoldDetZero => "fold",
            EventKind::HopfTrZero => "hopf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderEvent {
    pub mu: f64,
    pub kind: EventKind,
    /// Steady-state calcium level at which the event occurs.
    pub branch_c: f64,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationLadder {
    pub events: Vec<LadderEvent>,
}

/// Invariants of the steady state at calcium level `c` of the two-variable
/// model, with `mu` set from the steady-state relation.
fn invariants_along_branch(p: &ModelParams, c: f64) -> (f64, f64, f64, f64) {
    let mu = mu_along_equilibria(p, c);
    let q = p.with_mu(mu);
    let t = BlockTerms::at(&q, c, p.h_inf(c));
    (mu, t.trace(), t.det(), t.discr())
}

/// Locates all sign changes of trace, determinant and discriminant on the
/// steady-state curve of the two-variable model for `mu` in `[mu_lo, mu_hi]`.
///
/// The curve is followed in `c`, along which `mu(c)` is single valued, so the
/// three-root window needs no branch switching.
pub fn ladder_atri(p: &ModelParams, mu_lo: f64, mu_hi: f64, tol: f64) -> Result<BifurcationLadder> {
    if !(tol > 0.0) {
        return Err(Error::InvalidTolerance(tol));
    }
    if !(mu_lo >= 0.0 && mu_hi > mu_lo) {
        return Err(Error::InvalidParameter {
            name: "mu_hi",
            value: mu_hi,
            reason: "need 0 <= mu_lo < mu_hi",
        });
    }
    let atri = p.with_lambda(0.0);
    let grid = log_grid(SCAN_LO, SCAN_HI, SCAN_POINTS);
    let samples: Vec<(f64, f64, f64, f64)> = grid.par_iter().map(|&c| invariants_along_branch(&atri, c)).collect();

    let kinds = [EventKind::HopfTrZero, EventKind::FoldDetZero, EventKind::DiscrZero];
    let pick = |kind: EventKind, s: (f64, f64, f64, f64)| match kind {
        EventKind::HopfTrZero => s.1,
        EventKind::FoldDetZero => s.2,
        EventKind::DiscrZero => s.3,
    };

    let mut events = Vec::new();
    for kind in kinds {
        let values: Vec<f64> = samples.iter().map(|&s| pick(kind, s)).collect();
        for i in sign_changes(&values) {
            let f = |c: f64| pick(kind, invariants_along_branch(&atri, c));
            let (mut a, mut b) = (grid[i], grid[i + 1]);
            let mut fa = f(a);
            // bisect in c until the induced mu bracket is far below tol
            for _ in 0..200 {
                let mu_gap = (mu_along_equilibria(&atri, a) - mu_along_equilibria(&atri, b)).abs();
                let m = 0.5 * (a + b);
                if mu_gap < 1e-3 * tol && (b - a) < 1e-13 * b || m <= a || m >= b {
                    break;
                }
                let fm = f(m);
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if fm.signum() == fa.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            let c = 0.5 * (a + b);
            let mu = mu_along_equilibria(&atri, c);
            if mu < mu_lo || mu > mu_hi {
                continue;
            }
            events.push(LadderEvent {
                mu,
                kind,
                branch_c: c,
                description: describe_event(&atri, kind, c),
            });
        }
    }
    events.sort_by(|a, b| a.mu.partial_cmp(&b.mu).unwrap());
    Ok(BifurcationLadder { events })
}

fn class_at(p: &ModelParams, c: f64) -> Stability {
    let (_, t, d, q) = invariants_along_branch(p, c);
    Stability::from_invariants(t, d, q)
}

fn describe_event(p: &ModelParams, kind: EventKind, c: f64) -> String {
    let delta = 1e-5 * c;
    let left = class_at(p, c - delta);
    let right = class_at(p, c + delta);
    match kind {
        EventKind::FoldDetZero => format!(
            "fold (Det=0): {} and {} branches meet at c = {:.5}",
            left.label(),
            right.label(),
            c
        ),
        _ => {
            let rising = mu_along_equilibria(p, c + delta) > mu_along_equilibria(p, c - delta);
            let (before, after) = if rising { (left, right) } else { (right, left) };
            let what = if kind == EventKind::HopfTrZero {
                "Hopf (Tr=0)"
            } else {
                "Discr=0"
            };
            format!("{what}: {} becomes {} at c = {:.5}", before.label(), after.label(), c)
        }
    }
}

/// Both nullclines of the two-variable model sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Nullclines {
    pub c: Vec<f64>,
    /// `F = 0`: `h = Gamma/(mu K1) c (1 + c)/((K + c)(b + c))`.
    pub h_f: Vec<f64>,
    /// `G = 0`: `h = K2^2/(K2^2 + c^2)`.
    pub h_g: Vec<f64>,
    /// Large-`c` limit `Gamma/(mu K1)` of the `F = 0` curve.
    pub asymptote: f64,
}

pub fn calcium_nullcline(p: &ModelParams, c: f64) -> f64 {
    p.gamma / (p.mu * p.k1) * c * (1.0 + c) / ((p.k + c) * (p.b + c))
}

pub fn nullclines_atri(p: &ModelParams, c_grid: &[f64]) -> Result<Nullclines> {
    if p.mu == 0.0 {
        return Err(Error::NullclineUndefined);
    }
    if let Some(&bad) = c_grid.iter().find(|&&c| !(c >= 0.0)) {
        return Err(Error::InvalidParameter {
            name: "c_grid",
            value: bad,
            reason: "grid must be nonnegative",
        });
    }
    Ok(Nullclines {
        c: c_grid.to_vec(),
        h_f: c_grid.iter().map(|&c| calcium_nullcline(p, c)).collect(),
        h_g: c_grid.iter().map(|&c| p.h_inf(c)).collect(),
        asymptote: p.gamma / (p.mu * p.k1),
    })
}

/// Maximum (break point) of the `F = 0` nullcline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullclineMax {
    pub c_m: f64,
    pub h_m: f64,
}

pub fn nullcline_max(p: &ModelParams) -> Result<NullclineMax> {
    let denom = 1.0 - p.b - p.k;
    if !(denom > 0.0) {
        return Err(Error::NoPositiveMaximum(denom));
    }
    if p.mu == 0.0 {
        return Err(Error::NullclineUndefined);
    }
    let c_m = (p.b * p.k + ((1.0 - p.b) * p.b * (p.k - p.k * p.k)).sqrt()) / denom;
    Ok(NullclineMax {
        c_m,
        h_m: calcium_nullcline(p, c_m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StressLaw;

    #[test]
    fn single_stable_node_below_first_discriminant_event() {
        let eq = equilibria_atri(&ModelParams::atri(0.27));
        assert_eq!(eq.len(), 1);
        assert!(eq[0].klass.is_stable());
        let eq = equilibria_atri(&ModelParams::atri(0.1));
        assert_eq!(eq.len(), 1);
        assert_eq!(eq[0].klass, Stability::StableNode);
    }

    #[test]
    fn three_states_inside_fold_window() {
        let eq = equilibria_atri(&ModelParams::atri(0.289));
        assert_eq!(eq.len(), 3);
        for e in &eq {
            assert!(e.residual < RESIDUAL_TOL);
        }
        assert_eq!(eq[1].klass, Stability::Saddle);
    }

    #[test]
    fn zero_flux_gives_origin() {
        let eq = equilibria_atri(&ModelParams::atri(0.0));
        assert_eq!(eq.len(), 1);
        assert_eq!(eq[0].c_star, 0.0);
        assert_eq!(eq[0].h_star, 1.0);
    }

    #[test]
    fn unstable_spiral_in_oscillatory_window() {
        let eq = equilibria_atri(&ModelParams::atri(0.35));
        assert_eq!(eq.len(), 1);
        assert_eq!(eq[0].klass, Stability::UnstableSpiral);
    }

    #[test]
    fn mech_reduces_to_atri_at_zero_gain() {
        let p = ModelParams::mech(0.289, 0.0, StressLaw::hill1(10.0));
        let a = equilibria_atri(&p);
        let m = equilibria_mech(&p);
        assert_eq!(a.len(), m.len());
        for (x, y) in a.iter().zip(&m) {
            assert_eq!(x.c_star, y.c_star);
            assert_eq!(x.klass, y.klass);
            assert_eq!(y.eigenvalues.len(), 3);
        }
    }

    #[test]
    fn mu0_second_state_window() {
        let p = ModelParams::mech(0.0, 5.0, StressLaw::hill1(10.0));
        let eq = equilibria_mech(&p);
        assert_eq!(eq.len(), 2);
        assert_eq!(eq[0].c_star, 0.0);
        assert_eq!(eq[0].klass, Stability::Saddle);
        let c2 = second_steady_state_mu0(&p).unwrap();
        assert!((c2 - 0.2).abs() < 1e-12);
        assert!((eq[1].c_star - c2).abs() < 1e-10);
        assert_eq!(eq[1].klass, Stability::StableNode);

        let p = p.with_lambda(2.0);
        let eq = equilibria_mech(&p);
        assert_eq!(eq.len(), 1);
        assert_eq!(eq[0].c_star, 0.0);
        assert!(second_steady_state_mu0(&p).is_none());
    }

    #[test]
    fn classify_rejects_non_equilibria() {
        let p = ModelParams::atri(0.3);
        assert!(matches!(
            classify_atri(&p, State2::new(0.4, 0.5)),
            Err(Error::ResidualTooLarge(_))
        ));
        let e = &equilibria_atri(&p)[0];
        let again = classify_atri(&p, State2::new(e.c_star, e.h_star)).unwrap();
        assert_eq!(again.klass, e.klass);
    }

    #[test]
    fn ladder_rejects_bad_tolerance() {
        assert!(matches!(
            ladder_atri(&ModelParams::default(), 0.0, 0.6, 0.0),
            Err(Error::InvalidTolerance(_))
        ));
    }

    #[test]
    fn ladder_subranges() {
        let p = ModelParams::default();
        assert!(ladder_atri(&p, 0.0, 0.2, 1e-5).unwrap().events.is_empty());
        let l = ladder_atri(&p, 0.4, 0.6, 1e-5).unwrap();
        assert_eq!(l.events.len(), 1);
        assert_eq!(l.events[0].kind, EventKind::HopfTrZero);
        assert!((l.events[0].mu - 0.49500).abs() < 1e-4);
        assert!(l.events[0]
            .description
            .contains("unstable spiral becomes stable spiral"));
    }

    #[test]
    fn nullcline_endpoints_and_asymptote() {
        let p = ModelParams::atri(0.3);
        let n = nullclines_atri(&p, &[0.0, 1e7]).unwrap();
        assert_eq!(n.h_f[0], 0.0);
        assert_eq!(n.h_g[0], 1.0);
        assert!((n.h_f[1] - n.asymptote).abs() < 1e-6);
        assert!((n.asymptote - p.gamma / (0.3 * p.k1)).abs() < 1e-15);
        assert!(matches!(
            nullclines_atri(&ModelParams::atri(0.0), &[0.1]),
            Err(Error::NullclineUndefined)
        ));
    }

    #[test]
    fn nullcline_maximum() {
        let m = nullcline_max(&ModelParams::atri(1.0)).unwrap();
        assert!((m.c_m - 0.169).abs() < 1e-3);
        assert!((m.h_m - 0.279).abs() < 2e-3);
        let p = ModelParams::atri(0.3);
        let m3 = nullcline_max(&p).unwrap();
        assert_eq!(m3.c_m, m.c_m);
        let n = nullclines_atri(&p, &[m3.c_m]).unwrap();
        assert!((n.h_f[0] - m3.h_m).abs() < 1e-15);
        assert!((m3.h_m - 0.279 / 0.3).abs() < 2e-3 / 0.3);
        let bad = ModelParams { k: 0.95, ..p };
        assert!(matches!(nullcline_max(&bad), Err(Error::NoPositiveMaximum(_))));
    }

    #[test]
    fn break_point_is_nullcline_maximum() {
        let p = ModelParams::atri(0.4);
        let m = nullcline_max(&p).unwrap();
        for dc in [-1e-3, 1e-3] {
            assert!(calcium_nullcline(&p, m.c_m + dc) < m.h_m);
        }
    }
}
