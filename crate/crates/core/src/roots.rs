//! Bracketing, bisection and grid helpers used by the steady-state and curve
//! solvers.

/// `n` logarithmically spaced points on `[lo, hi]` (both ends included).
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// `n` evenly spaced points on `[lo, hi]` (both ends included).
pub fn lin_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Bisects a sign change of `f` on `[a, b]` until the bracket is narrower than
/// `xtol` or cannot be split further in floating point.
///
/// `f(a)` and `f(b)` must have opposite signs (or one of them be zero).
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> f64 {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    debug_assert!(fa.signum() != fb.signum(), "bisect: no sign change");
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a.min(b) || m >= a.max(b) || (b - a).abs() <= xtol {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Index pairs `(i, i + 1)` of consecutive samples where `values` changes
/// sign. Non-finite samples break brackets.
pub fn sign_changes(values: &[f64]) -> Vec<usize> {
    values
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].is_finite() && w[1].is_finite())
        .filter(|(_, w)| (w[0] < 0.0 && w[1] > 0.0) || (w[0] > 0.0 && w[1] < 0.0) || (w[1] == 0.0 && w[0] != 0.0))
        .map(|(i, _)| i)
        .collect()
}

/// All roots of `f` found by sampling on `grid` and bisecting each sign
/// change to `xtol`.
pub fn bracketed_roots<F: Fn(f64) -> f64>(f: F, grid: &[f64], xtol: f64) -> Vec<f64> {
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    sign_changes(&values)
        .into_iter()
        .map(|i| bisect(&f, grid[i], grid[i + 1], xtol))
        .collect()
}

/// Centered finite difference with relative step `rel` (absolute floor 1e-12).
pub fn central_diff<F: Fn(f64) -> f64>(f: F, x: f64, rel: f64) -> f64 {
    let h = (rel * x.abs()).max(1e-12);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Golden-section search for a minimum of `f` on `[a, b]`. Stops at `xtol`
/// or when the bracket is a few ulps wide.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while (b - a).abs() > xtol.max(4.0 * f64::EPSILON * a.abs().max(b.abs())) {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Real roots of `a x^2 + b x + c` in ascending order, computed without
/// cancellation. A vanishing leading coefficient degrades to the linear case.
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return None;
    }
    if a.abs() <= 1e-14 * scale {
        if b == 0.0 {
            return None;
        }
        let x = -c / b;
        return Some((x, x));
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    Some(if r1 <= r2 { (r1, r2) } else { (r2, r1) })
}

/// Radical-inverse (van der Corput) sequence in base `base`, used for
/// deterministic low-discrepancy parameter sampling.
pub fn halton(index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}
