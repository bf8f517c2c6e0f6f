//! Two-parameter `(mu, lambda)` bifurcation curves in closed parametric form.
//!
//! Every curve is parametrised by the steady-state calcium level `c`. Along
//! the steady-state surface, `lambda T(c) = w(c) - mu a(c)` with
//! `w = Gamma c/(K + c)` and `a = K1 h(c) (b + c)/(1 + c)`. The Hopf condition
//! `R1c = 1` fixes `mu(c)` independently of the stress law. `Det = 0` is linear
//! in `(mu, lambda)`, and `Discr = 0` becomes a quadratic in `mu` once `lambda`
//! is eliminated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibria::BlockTerms;
use crate::error::{Error, Result};
use crate::model::{ModelParams, StressKind, StressLaw};
use crate::roots::{bisect, central_diff, golden_min, log_grid, quadratic_roots, sign_changes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CurveKind {
    Hopf,
    Fold,
    Discriminant,
}

impl CurveKind {
    pub fn label(self) -> &'static str {
        match self {
            CurveKind::Hopf => "hopf",
            CurveKind::Fold => "fold",
            CurveKind::Discriminant => "discr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub c: f64,
    pub mu: f64,
    pub lambda: f64,
    /// Root index for the discriminant curve (0 = smaller `mu`), else 0.
    pub branch: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationCurve {
    pub kind: CurveKind,
    /// Ordered by `(branch, c)`.
    pub samples: Vec<CurveSample>,
    pub stress: StressLaw,
    /// Samples dropped because `mu < 0` or `lambda < 0`.
    pub discarded: usize,
    /// Grid points where the curve is undefined (`T = 0`, singular system or
    /// complex roots).
    pub skipped: usize,
}

/// 2000 log-spaced points on `[1e-4, 50]`.
pub fn default_c_grid() -> Vec<f64> {
    log_grid(1e-4, 50.0, 2000)
}

struct Coefficients {
    /// `K1 h (1-b)/(1+c)^2`, so that `R1c = mu q - s`.
    q: f64,
    /// `Gamma K/(K+c)^2`.
    s: f64,
    /// `R1h R3c / mu`.
    r: f64,
    /// `K1 h (b+c)/(1+c)`.
    a: f64,
    /// `Gamma c/(K+c)`.
    w: f64,
    t: f64,
    dt: f64,
}

impl Coefficients {
    fn at(p: &ModelParams, c: f64) -> Self {
        let h = p.h_inf(c);
        let kc = p.k + c;
        Self {
            q: p.k1 * h * (1.0 - p.b) / ((1.0 + c) * (1.0 + c)),
            s: p.gamma * p.k / (kc * kc),
            r: p.release(c) * p.h_inf_deriv(c),
            a: p.k1 * h * (p.b + c) / (1.0 + c),
            w: p.gamma * c / kc,
            t: p.stress.eval(c),
            dt: p.stress.deriv(c),
        }
    }

    fn lambda_for(&self, mu: f64) -> f64 {
        (self.w - mu * self.a) / self.t
    }
}

/// `mu` on the Hopf curve; independent of the stress law.
pub fn hopf_mu(p: &ModelParams, c: f64) -> f64 {
    let k = Coefficients::at(p, c);
    (1.0 + k.s) / k.q
}

/// `(mu, lambda)` on the Hopf curve, `None` where `T(c) = 0`.
pub fn hopf_point(p: &ModelParams, c: f64) -> Option<(f64, f64)> {
    let k = Coefficients::at(p, c);
    if k.t == 0.0 {
        return None;
    }
    let mu = (1.0 + k.s) / k.q;
    Some((mu, k.lambda_for(mu)))
}

/// `(mu, lambda)` on the fold curve, `None` where the linear system is
/// singular or `T(c) = 0`.
pub fn fold_point(p: &ModelParams, c: f64) -> Option<(f64, f64)> {
    let k = Coefficients::at(p, c);
    let d = (k.q + k.r) * k.t - k.dt * k.a;
    let scale = ((k.q + k.r) * k.t).abs().max((k.dt * k.a).abs());
    if k.t == 0.0 || d.abs() <= 1e-14 * scale || scale == 0.0 {
        return None;
    }
    let mu = (k.s * k.t - k.dt * k.w) / d;
    let lambda = ((k.q + k.r) * k.w - k.a * k.s) / d;
    Some((mu, lambda))
}

/// Both real `(mu, lambda)` roots on the discriminant curve, ascending in
/// `mu`; `None` where the roots are complex or `T(c) = 0`.
pub fn discr_points(p: &ModelParams, c: f64) -> Option<[(f64, f64); 2]> {
    let k = Coefficients::at(p, c);
    if k.t == 0.0 {
        return None;
    }
    let rho = k.dt / k.t;
    let a = k.q * k.q;
    let b = 2.0 * k.q * (1.0 - k.s) + 4.0 * k.r - 4.0 * rho * k.a;
    let cc = (1.0 - k.s) * (1.0 - k.s) + 4.0 * rho * k.w;
    let (m0, m1) = quadratic_roots(a, b, cc)?;
    Some([(m0, k.lambda_for(m0)), (m1, k.lambda_for(m1))])
}

/// Point on the requested curve and branch.
pub fn curve_point(p: &ModelParams, kind: CurveKind, branch: u8, c: f64) -> Option<(f64, f64)> {
    match kind {
        CurveKind::Hopf => hopf_point(p, c),
        CurveKind::Fold => fold_point(p, c),
        CurveKind::Discriminant => discr_points(p, c).map(|r| r[branch.min(1) as usize]),
    }
}

fn check_grid(c_grid: &[f64]) -> Result<()> {
    if c_grid.len() < 2 || !c_grid.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::NonMonotoneGrid);
    }
    if !(c_grid[0] > 0.0) {
        return Err(Error::InvalidParameter {
            name: "c_grid",
            value: c_grid[0],
            reason: "curve parameter must be positive",
        });
    }
    Ok(())
}

fn build_curve(p: &ModelParams, kind: CurveKind, c_grid: &[f64]) -> Result<BifurcationCurve> {
    check_grid(c_grid)?;
    let branches: &[u8] = if kind == CurveKind::Discriminant { &[0, 1] } else { &[0] };
    let raw: Vec<Option<(f64, f64)>> = branches
        .iter()
        .flat_map(|&br| c_grid.iter().map(move |&c| (br, c)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(br, c)| curve_point(p, kind, br, c))
        .collect();
    let mut samples = Vec::new();
    let (mut discarded, mut skipped) = (0, 0);
    for (i, pt) in raw.into_iter().enumerate() {
        let branch = branches[i / c_grid.len()];
        let c = c_grid[i % c_grid.len()];
        match pt {
            None => skipped += 1,
            Some((mu, lambda)) if mu.is_finite() && lambda.is_finite() => {
                if mu >= 0.0 && lambda >= 0.0 {
                    samples.push(CurveSample { c, mu, lambda, branch });
                } else {
                    discarded += 1;
                }
            }
            Some(_) => skipped += 1,
        }
    }
    Ok(BifurcationCurve {
        kind,
        samples,
        stress: p.stress,
        discarded,
        skipped,
    })
}

pub fn hopf_curve(p: &ModelParams, c_grid: &[f64]) -> Result<BifurcationCurve> {
    build_curve(p, CurveKind::Hopf, c_grid)
}

pub fn fold_curve(p: &ModelParams, c_grid: &[f64]) -> Result<BifurcationCurve> {
    build_curve(p, CurveKind::Fold, c_grid)
}

pub fn discr_curve(p: &ModelParams, c_grid: &[f64]) -> Result<BifurcationCurve> {
    build_curve(p, CurveKind::Discriminant, c_grid)
}

/// Trace/determinant/discriminant of the steady state at `c` for the given
/// `(mu, lambda)`.
pub fn invariants_at(p: &ModelParams, c: f64, mu: f64, lambda: f64) -> (f64, f64, f64) {
    let q = p.with_mu(mu).with_lambda(lambda);
    let t = BlockTerms::at(&q, c, q.h_inf(c));
    (t.trace(), t.det(), t.discr())
}

/// Points where `lambda(c) = 0` on a curve branch, as `(c, mu)`, refined by
/// bisection in `c`.
pub fn lambda_zero_intercepts(p: &ModelParams, kind: CurveKind, branch: u8, c_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_grid(c_grid)?;
    let lam = |c: f64| curve_point(p, kind, branch, c).map_or(f64::NAN, |(_, l)| l);
    let values: Vec<f64> = c_grid.iter().map(|&c| lam(c)).collect();
    Ok(sign_changes(&values)
        .into_iter()
        .map(|i| {
            let c = bisect(lam, c_grid[i], c_grid[i + 1], 0.0);
            (c, curve_point(p, kind, branch, c).map_or(f64::NAN, |(m, _)| m))
        })
        .filter(|&(_, mu)| mu >= 0.0)
        .collect())
}

/// Stationary points of `f` on `grid`: sign changes of a centred finite
/// difference derivative, bisected to `|dc| < 1e-10`.
fn stationary_points<F: Fn(f64) -> f64 + Sync>(f: F, grid: &[f64]) -> Vec<f64> {
    let df = |c: f64| central_diff(&f, c, 1e-6);
    let values: Vec<f64> = grid.par_iter().map(|&c| df(c)).collect();
    sign_changes(&values)
        .into_iter()
        .map(|i| bisect(df, grid[i], grid[i + 1], 1e-10))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfExtremals {
    pub lambda_max: f64,
    pub mu_at_max: f64,
    pub c_at_max: f64,
    pub mu_min: f64,
    pub lambda_at_mu_min: f64,
    pub c_at_mu_min: f64,
}

fn hopf_lambda(p: &ModelParams, c: f64) -> f64 {
    hopf_point(p, c).map_or(f64::NAN, |(_, l)| l)
}

/// Location of the minimum of `mu` along the Hopf curve.
pub fn hopf_mu_min(p: &ModelParams, c_grid: &[f64]) -> Result<(f64, f64)> {
    check_grid(c_grid)?;
    stationary_points(|c| hopf_mu(p, c), c_grid)
        .into_iter()
        .map(|c| (c, hopf_mu(p, c)))
        .filter(|&(c, _)| central_diff(|x| hopf_mu(p, x), c * 1.01, 1e-6) > 0.0)
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .ok_or(Error::InvalidParameter {
            name: "c_grid",
            value: c_grid[0],
            reason: "no interior minimum of mu on the Hopf curve",
        })
}

/// Largest interior maximum of `lambda(c)` on the Hopf curve, as `c`.
fn hopf_lambda_argmax(p: &ModelParams, c_grid: &[f64]) -> Option<f64> {
    stationary_points(|c| hopf_lambda(p, c), c_grid)
        .into_iter()
        .filter(|&c| {
            let l = hopf_lambda(p, c);
            l > 0.0 && hopf_lambda(p, c * (1.0 - 1e-3)) < l && hopf_lambda(p, c * (1.0 + 1e-3)) < l
        })
        .max_by(|&a, &b| hopf_lambda(p, a).partial_cmp(&hopf_lambda(p, b)).unwrap())
}

pub fn hopf_extremals(p: &ModelParams, c_grid: &[f64]) -> Result<HopfExtremals> {
    check_grid(c_grid)?;
    let (c_mu, mu_min) = hopf_mu_min(p, c_grid)?;
    let c_max = hopf_lambda_argmax(p, c_grid).ok_or(Error::InvalidParameter {
        name: "alpha",
        value: p.stress.alpha,
        reason: "no interior maximum of lambda on the Hopf curve",
    })?;
    Ok(HopfExtremals {
        lambda_max: hopf_lambda(p, c_max),
        mu_at_max: hopf_mu(p, c_max),
        c_at_max: c_max,
        mu_min,
        lambda_at_mu_min: hopf_lambda(p, c_mu),
        c_at_mu_min: c_mu,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldMerge {
    pub lambda: f64,
    pub mu: f64,
    pub c: f64,
}

/// Point of largest `lambda` on the fold curve, where its two branches meet.
pub fn fold_merge(p: &ModelParams, c_grid: &[f64]) -> Result<FoldMerge> {
    check_grid(c_grid)?;
    let lam = |c: f64| match fold_point(p, c) {
        Some((mu, l)) if mu >= 0.0 && l.is_finite() => l,
        _ => f64::NEG_INFINITY,
    };
    let (i, _) = c_grid
        .iter()
        .enumerate()
        .map(|(i, &c)| (i, lam(c)))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .ok_or(Error::NonMonotoneGrid)?;
    if !(lam(c_grid[i]) > 0.0) || i == 0 || i == c_grid.len() - 1 {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lam(c_grid[i]),
            reason: "fold curve has no interior positive maximum",
        });
    }
    let c = golden_min(|c| -lam(c), c_grid[i - 1], c_grid[i + 1], 1e-12);
    let (mu, lambda) = fold_point(p, c).expect("fold point exists near grid maximum");
    Ok(FoldMerge { lambda, mu, c })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSample {
    pub alpha: f64,
    pub lambda_max: f64,
    pub mu_at_max: f64,
}

/// `lambda_max` of the Hopf curve for each gain in `alpha_grid`.
pub fn lambda_max_vs_alpha(p: &ModelParams, kind: StressKind, alpha_grid: &[f64]) -> Result<Vec<AlphaSample>> {
    if kind == StressKind::None {
        return Err(Error::InvalidConfig("lambda_max needs a Hill stress law"));
    }
    if let Some(&a) = alpha_grid.iter().find(|&&a| !(a > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: a,
            reason: "gain must be positive",
        });
    }
    let grid = default_c_grid();
    alpha_grid
        .par_iter()
        .map(|&alpha| {
            let q = ModelParams {
                stress: StressLaw::new(kind, alpha),
                ..*p
            };
            let e = hopf_extremals(&q, &grid)?;
            Ok(AlphaSample {
                alpha,
                lambda_max: e.lambda_max,
                mu_at_max: e.mu_at_max,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Morphology {
    Simple,
    Cusp,
    BowTie,
    Inconclusive,
}

fn segments_cross(p1: (f64, f64), p2: (f64, f64), p3: (f64, f64), p4: (f64, f64)) -> bool {
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let d1 = cross(p3, p4, p1);
    let d2 = cross(p3, p4, p2);
    let d3 = cross(p1, p2, p3);
    let d4 = cross(p1, p2, p4);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Number of proper crossings between non-adjacent segments of the polyline.
pub fn self_intersections(points: &[(f64, f64)]) -> usize {
    let n = points.len();
    if n < 4 {
        return 0;
    }
    (0..n - 1)
        .into_par_iter()
        .map(|i| {
            (i + 2..n - 1)
                .filter(|&j| segments_cross(points[i], points[i + 1], points[j], points[j + 1]))
                .count()
        })
        .sum()
}

/// Signed `dlambda/dc` at the minimum of `mu`; it vanishes exactly when both
/// derivatives of the parametrisation vanish together.
pub fn cusp_indicator(p: &ModelParams, c_mu: f64) -> f64 {
    central_diff(|c| hopf_lambda(p, c), c_mu, 1e-6)
}

/// Shape of the `lambda >= 0` part of the Hopf curve for a Hill law.
pub fn hopf_morphology(p: &ModelParams, kind: StressKind, alpha: f64) -> Result<Morphology> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "gain must be positive",
        });
    }
    let q = ModelParams {
        stress: StressLaw::new(kind, alpha),
        ..*p
    };
    let grid = log_grid(1e-4, 50.0, 4000);
    let (c_mu, _) = hopf_mu_min(&q, &grid)?;

    let slope = cusp_indicator(&q, c_mu);
    let scale = hopf_lambda(&q, c_mu).abs().max(1e-12) / c_mu;
    if slope.abs() <= 1e-6 * scale {
        return Ok(Morphology::Cusp);
    }

    let curve = hopf_curve(&q, &grid)?;
    let pts: Vec<(f64, f64)> = curve.samples.iter().map(|s| (s.mu, s.lambda)).collect();
    let crossings = self_intersections(&pts);
    if crossings > 0 {
        return Ok(Morphology::BowTie);
    }
    // a loop between the two stationary points smaller than the grid spacing
    // cannot be ruled out
    if let Some(c_lam) = hopf_lambda_argmax(&q, &grid) {
        let spacing = (grid[1] / grid[0]).ln();
        if (c_lam / c_mu).ln().abs() < 3.0 * spacing {
            return Ok(Morphology::Inconclusive);
        }
    }
    Ok(Morphology::Simple)
}

/// Gain at which the Hopf curve has a cusp, found by bisecting the sign of
/// [`cusp_indicator`] on `[lo, hi]`. `None` when it does not change sign.
pub fn cusp_alpha(p: &ModelParams, kind: StressKind, lo: f64, hi: f64) -> Result<Option<f64>> {
    let grid = default_c_grid();
    let ind = |alpha: f64| -> f64 {
        let q = ModelParams {
            stress: StressLaw::new(kind, alpha),
            ..*p
        };
        match hopf_mu_min(&q, &grid) {
            Ok((c_mu, _)) => cusp_indicator(&q, c_mu),
            Err(_) => f64::NAN,
        }
    };
    let alphas = log_grid(lo, hi, 24);
    let values: Vec<f64> = alphas.par_iter().map(|&a| ind(a)).collect();
    Ok(sign_changes(&values)
        .first()
        .map(|&i| bisect(ind, alphas[i], alphas[i + 1], 1e-12 * alphas[i])))
}

/// Scans `[lo, hi]` for a gain at which [`hopf_morphology`] reports a cusp.
pub fn find_cusp(p: &ModelParams, kind: StressKind, lo: f64, hi: f64) -> Result<Option<f64>> {
    match cusp_alpha(p, kind, lo, hi)? {
        Some(a) if hopf_morphology(p, kind, a)? == Morphology::Cusp => Ok(Some(a)),
        _ => Ok(None),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSummary {
    pub lambda_max: f64,
    pub mu_at_max: f64,
    pub mu_min: f64,
    pub lambda_at_mu_min: f64,
    pub morphology: Morphology,
}

pub fn curve_summary(p: &ModelParams) -> Result<CurveSummary> {
    let e = hopf_extremals(p, &default_c_grid())?;
    let morphology = match p.stress.kind {
        StressKind::None => Morphology::Inconclusive,
        kind => hopf_morphology(p, kind, p.stress.alpha)?,
    };
    Ok(CurveSummary {
        lambda_max: e.lambda_max,
        mu_at_max: e.mu_at_max,
        mu_min: e.mu_min,
        lambda_at_mu_min: e.lambda_at_mu_min,
        morphology,
    })
}
