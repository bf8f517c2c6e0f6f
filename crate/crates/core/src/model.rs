//! Parameter sets, state vectors and right-hand sides of the two calcium models.
//!
//! The two-variable model evolves the cytosolic calcium concentration `c` and
//! the fraction `h` of IP3 receptors not yet inactivated by calcium:
//!
//! ```text
//! dc/dt = mu h K1 (b + c)/(1 + c) - Gamma c/(K + c)
//! dh/dt = K2^2/(K2^2 + c^2) - h
//! ```
//!
//! The mechanochemical extension adds the dilatation `theta`, driven by a
//! calcium-induced stress `T(c)`, and a stretch-activated source `lambda theta`
//! in the calcium equation:
//!
//! ```text
//! dc/dt     = mu h K1 (b + c)/(1 + c) - Gamma c/(K + c) + lambda theta
//! dtheta/dt = -theta + T(c)
//! dh/dt     = K2^2/(K2^2 + c^2) - h
//! ```
//!
//! With `lambda = 0` the calcium and receptor equations decouple from `theta`
//! and reproduce the two-variable model exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensional parameters of the two-variable model.
///
/// `beta` (the constant leak flux) is carried for completeness but does not
/// enter the nondimensional system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionalParams {
    /// Calcium activation constant (uM).
    pub k1: f64,
    /// Calcium inactivation constant (uM).
    pub k2: f64,
    /// Basal fraction of the ER flux.
    pub b: f64,
    /// Maximal pump rate (uM/s).
    pub gamma: f64,
    /// Maximal ER flux (uM/s).
    pub k_f: f64,
    /// Pump half-saturation (uM).
    pub k_gamma: f64,
    /// IP3 half-saturation (uM).
    pub k_mu: f64,
    /// Inactivation time constant (s).
    pub tau_h: f64,
    /// Leak flux (uM/s).
    pub beta: f64,
    /// IP3 concentration (uM).
    pub p: f64,
}

impl Default for DimensionalParams {
    fn default() -> Self {
        Self {
            k1: 0.7,
            k2: 0.7,
            b: 0.111,
            gamma: 2.0,
            k_f: 16.2,
            k_gamma: 0.1,
            k_mu: 0.7,
            tau_h: 2.0,
            beta: 0.0,
            p: 0.0,
        }
    }
}

impl DimensionalParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k1", self.k1),
            ("k2", self.k2),
            ("b", self.b),
            ("gamma", self.gamma),
            ("k_f", self.k_f),
            ("k_gamma", self.k_gamma),
            ("k_mu", self.k_mu),
            ("tau_h", self.tau_h),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be strictly positive",
                });
            }
        }
        for (name, value) in [("beta", self.beta), ("p", self.p)] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be nonnegative",
                });
            }
        }
        Ok(())
    }
}

/// Fraction of IP3 receptors with IP3 bound, `p/(k_mu + p)`.
pub fn mu_from_ip3(p: f64, k_mu: f64) -> f64 {
    p / (k_mu + p)
}

/// Reduces dimensional parameters to the nondimensional set with
/// `c = k1 c'` and `t = tau_h t'`. The mechanical gain is zero and no stress
/// law is attached; use [`ModelParams::with_mechanics`] to add them.
pub fn nondimensionalize(d: &DimensionalParams) -> Result<ModelParams> {
    d.validate()?;
    let p = ModelParams {
        mu: mu_from_ip3(d.p, d.k_mu),
        lambda: 0.0,
        k1: d.k_f * d.tau_h / d.k1,
        k2: d.k2 / d.k1,
        gamma: d.gamma * d.tau_h / d.k1,
        k: d.k_gamma / d.k1,
        b: d.b,
        stress: StressLaw::none(),
    };
    p.validate()?;
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StressKind {
    #[serde(alias = "none", alias = "NONE")]
    None,
    #[serde(alias = "hill1", alias = "HILL1", alias = "1")]
    Hill1,
    #[serde(alias = "hill2", alias = "HILL2", alias = "2")]
    Hill2,
}

/// Calcium-induced stress `T(c)`.
///
/// `Hill1` is `alpha c/(1 + alpha c)` and `Hill2` is `alpha c^2/(1 + alpha c^2)`;
/// both start at zero and saturate at one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressLaw {
    pub kind: StressKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    10.0
}

impl Default for StressLaw {
    fn default() -> Self {
        Self::hill1(10.0)
    }
}

impl StressLaw {
    pub fn none() -> Self {
        Self {
            kind: StressKind::None,
            alpha: 0.0,
        }
    }

    pub fn hill1(alpha: f64) -> Self {
        Self {
            kind: StressKind::Hill1,
            alpha,
        }
    }

    pub fn hill2(alpha: f64) -> Self {
        Self {
            kind: StressKind::Hill2,
            alpha,
        }
    }

    pub fn new(kind: StressKind, alpha: f64) -> Self {
        Self { kind, alpha }
    }

    /// `T(c)`.
    pub fn eval(&self, c: f64) -> f64 {
        match self.kind {
            StressKind::None => 0.0,
            StressKind::Hill1 => {
                let x = self.alpha * c;
                x / (1.0 + x)
            }
            StressKind::Hill2 => {
                let x = self.alpha * c * c;
                x / (1.0 + x)
            }
        }
    }

    /// `T'(c)`.
    pub fn deriv(&self, c: f64) -> f64 {
        match self.kind {
            StressKind::None => 0.0,
            StressKind::Hill1 => {
                let d = 1.0 + self.alpha * c;
                self.alpha / (d * d)
            }
            StressKind::Hill2 => {
                let d = 1.0 + self.alpha * c * c;
                2.0 * self.alpha * c / (d * d)
            }
        }
    }

    /// Limit of `T(c)` as `c -> infinity`.
    pub fn saturation(&self) -> f64 {
        match self.kind {
            StressKind::None => 0.0,
            StressKind::Hill1 | StressKind::Hill2 => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            StressKind::None => Ok(()),
            _ if self.alpha > 0.0 && self.alpha.is_finite() => Ok(()),
            _ => Err(Error::InvalidParameter {
                name: "alpha",
                value: self.alpha,
                reason: "Hill gain must be strictly positive",
            }),
        }
    }
}

/// Nondimensional parameters shared by both models.
///
/// Missing keys in a JSON parameter file fall back to the compiled-in
/// defaults (`K1 = 46.285714`, `K2 = 1`, `Gamma = 5.71429`, `K = 1/7`,
/// `b = 0.111`, `mu = 0.3`, `lambda = 0`, Hill1 stress with `alpha = 10`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub mu: f64,
    pub lambda: f64,
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "K2")]
    pub k2: f64,
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub b: f64,
    pub stress: StressLaw,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            mu: 0.3,
            lambda: 0.0,
            k1: 16.2 * 2.0 / 0.7,
            k2: 1.0,
            gamma: 2.0 * 2.0 / 0.7,
            k: 0.1 / 0.7,
            b: 0.111,
            stress: StressLaw::default(),
        }
    }
}

impl ModelParams {
    /// Defaults with the given `mu` and no mechanical coupling.
    pub fn atri(mu: f64) -> Self {
        Self { mu, ..Self::default() }
    }

    pub fn mech(mu: f64, lambda: f64, stress: StressLaw) -> Self {
        Self {
            mu,
            lambda,
            stress,
            ..Self::default()
        }
    }

    pub fn with_mu(self, mu: f64) -> Self {
        Self { mu, ..self }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    pub fn with_mechanics(self, lambda: f64, stress: StressLaw) -> Self {
        Self { lambda, stress, ..self }
    }

    /// Time-scale ratio `1/K1` of calcium to receptor dynamics.
    pub fn epsilon(&self) -> f64 {
        1.0 / self.k1
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("K1", self.k1), ("K2", self.k2), ("Gamma", self.gamma), ("K", self.k)];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be strictly positive",
                });
            }
        }
        if !(self.b > 0.0 && self.b < 1.0) {
            return Err(Error::InvalidParameter {
                name: "b",
                value: self.b,
                reason: "must lie in (0, 1)",
            });
        }
        for (name, value) in [("mu", self.mu), ("lambda", self.lambda)] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be nonnegative",
                });
            }
        }
        self.stress.validate()
    }

    /// Receptor nullcline `G = 0`, `h = K2^2/(K2^2 + c^2)`.
    pub fn h_inf(&self, c: f64) -> f64 {
        let k2sq = self.k2 * self.k2;
        k2sq / (k2sq + c * c)
    }

    /// Derivative of [`Self::h_inf`] with respect to `c`.
    pub fn h_inf_deriv(&self, c: f64) -> f64 {
        let k2sq = self.k2 * self.k2;
        let d = k2sq + c * c;
        -2.0 * c * k2sq / (d * d)
    }

    /// ER release flux per unit `mu h`: `K1 (b + c)/(1 + c)`.
    pub(crate) fn release(&self, c: f64) -> f64 {
        self.k1 * (self.b + c) / (1.0 + c)
    }

    /// Pump flux `Gamma c/(K + c)`.
    pub(crate) fn pump(&self, c: f64) -> f64 {
        self.gamma * c / (self.k + c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State2 {
    pub c: f64,
    pub h: f64,
}

impl State2 {
    pub fn new(c: f64, h: f64) -> Self {
        Self { c, h }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State3 {
    pub c: f64,
    pub theta: f64,
    pub h: f64,
}

impl State3 {
    pub fn new(c: f64, theta: f64, h: f64) -> Self {
        Self { c, theta, h }
    }
}

/// Right-hand side `(dc/dt, dh/dt)` of the two-variable model.
pub fn rhs_atri(p: &ModelParams, s: State2) -> (f64, f64) {
    let dc = p.mu * s.h * p.release(s.c) - p.pump(s.c);
    let dh = p.h_inf(s.c) - s.h;
    (dc, dh)
}

/// Right-hand side `(dc/dt, dtheta/dt, dh/dt)` of the mechanochemical model.
pub fn rhs_mech(p: &ModelParams, s: State3) -> (f64, f64, f64) {
    let dc = p.mu * s.h * p.release(s.c) - p.pump(s.c) + p.lambda * s.theta;
    let dtheta = -s.theta + p.stress.eval(s.c);
    let dh = p.h_inf(s.c) - s.h;
    (dc, dtheta, dh)
}

/// Time and stress rescaling of the one-dimensional Kelvin-Voigt reduction.
///
/// Integrating `(xi1 + xi2) theta_t + (1 + nu') theta - tau(c) = A` with `A = 0`
/// (no traction, dilatation or strain rate at `c = 0`) and rescaling
/// `t* = (1 + nu') t/(xi1 + xi2)`, `T = tau/(1 + nu')` gives
/// `dtheta/dt* = -theta + T(c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ViscoelasticScaling {
    /// `nu' = nu/(1 - 2 nu)`.
    pub nu_prime: f64,
    /// Multiplies dimensional time to give the nondimensional time.
    pub time_factor: f64,
    /// Multiplies the traction `tau(c)` to give `T(c)`.
    pub stress_factor: f64,
    /// Dimensional traction scale after rescaling (`tau_scale * stress_factor`).
    pub stress_scale: f64,
    /// Integration constant of the one-dimensional force balance.
    pub integration_constant: f64,
}

pub fn viscoelastic_reduction(
    xi1: f64,
    xi2: f64,
    young_modulus: f64,
    nu: f64,
    tau_scale: f64,
) -> Result<ViscoelasticScaling> {
    if !(xi1 + xi2 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "xi1+xi2",
            value: xi1 + xi2,
            reason: "total viscosity must be positive",
        });
    }
    if !(young_modulus > 0.0) {
        return Err(Error::InvalidParameter {
            name: "E",
            value: young_modulus,
            reason: "Young's modulus must be positive",
        });
    }
    if !(nu > -1.0 && nu < 0.5) {
        return Err(Error::SingularPoissonRatio(nu));
    }
    let nu_prime = nu / (1.0 - 2.0 * nu);
    if !nu_prime.is_finite() {
        return Err(Error::SingularPoissonRatio(nu));
    }
    let stress_factor = 1.0 / (1.0 + nu_prime);
    Ok(ViscoelasticScaling {
        nu_prime,
        time_factor: (1.0 + nu_prime) / (xi1 + xi2),
        stress_factor,
        stress_scale: tau_scale * stress_factor,
        integration_constant: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn defaults_match_dimensional_reduction() {
        let p = nondimensionalize(&DimensionalParams::default()).unwrap();
        assert!(close(p.k1, 46.285714, 1e-6));
        assert!(close(p.k2, 1.0, 1e-12));
        assert!(close(p.gamma, 5.71429, 1e-5));
        assert!(close(p.k, 1.0 / 7.0, 1e-12));
        assert_eq!(p.mu, 0.0);
        assert_eq!(p.lambda, 0.0);
        assert_eq!(p.stress.kind, StressKind::None);
        let q = ModelParams::default();
        assert!(close(p.k1, q.k1, 1e-12) && close(p.gamma, q.gamma, 1e-12) && close(p.k, q.k, 1e-12));
    }

    #[test]
    fn ip3_maps_to_mu() {
        let d = DimensionalParams {
            p: 0.7,
            ..Default::default()
        };
        assert!(close(nondimensionalize(&d).unwrap().mu, 0.5, 1e-15));
        assert_eq!(mu_from_ip3(0.0, 0.7), 0.0);
    }

    #[test]
    fn rejects_nonpositive_dimensional_fields() {
        let d = DimensionalParams {
            tau_h: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            nondimensionalize(&d),
            Err(Error::InvalidParameter { name: "tau_h", .. })
        ));
        let d = DimensionalParams {
            p: -1.0,
            ..Default::default()
        };
        assert!(nondimensionalize(&d).is_err());
    }

    #[test]
    fn stress_values() {
        let s = StressLaw::hill1(10.0);
        assert_eq!(s.eval(0.0), 0.0);
        assert!(close(s.eval(0.1), 0.5, 1e-15));
        assert!(close(StressLaw::hill2(10.0).eval(1.0), 10.0 / 11.0, 1e-15));
        assert_eq!(StressLaw::none().eval(3.0), 0.0);
        assert!(close(s.eval(1e9), 1.0, 1e-8));
    }

    #[test]
    fn stress_derivative_matches_finite_difference() {
        for s in [StressLaw::hill1(2.5), StressLaw::hill2(7.0)] {
            for &c in &[0.01, 0.3, 1.0, 4.0] {
                let dh = 1e-6 * c;
                let fd = (s.eval(c + dh) - s.eval(c - dh)) / (2.0 * dh);
                assert!(close(fd, s.deriv(c), 1e-7 * (1.0 + fd.abs())));
            }
        }
    }

    #[test]
    fn atri_rhs_hand_values() {
        let p = ModelParams::atri(0.3);
        let (dc, dh) = rhs_atri(&p, State2::new(0.0, 1.0));
        // mu * K1 * b
        assert!(close(dc, 0.3 * (16.2 * 2.0 / 0.7) * 0.111, 1e-12));
        assert!(close(dc, 1.541314, 1e-6));
        assert_eq!(dh, 0.0);
        assert_eq!(rhs_atri(&ModelParams::atri(0.77), State2::new(0.0, 0.0)), (0.0, 1.0));
    }

    #[test]
    fn mech_rhs_hand_values() {
        let p = ModelParams::mech(0.3, 1.0, StressLaw::hill1(10.0));
        let (dc, dth, dh) = rhs_mech(&p, State3::new(1.0, 0.5, 0.5));
        let k1 = 16.2 * 2.0 / 0.7;
        let gamma = 4.0 / 0.7;
        let k = 1.0 / 7.0;
        let dc_hand = 0.3 * 0.5 * k1 * 1.111 / 2.0 - gamma / (k + 1.0) + 0.5;
        assert!(close(dc, dc_hand, 1e-12));
        assert!(close(dc, 3.856757 - 5.0 + 0.5, 1e-5));
        assert!(close(dth, -0.5 + 10.0 / 11.0, 1e-15));
        assert!(close(dh, 0.0, 1e-15));
        assert_eq!(rhs_mech(&p, State3::new(0.0, 0.0, 0.0)), (0.0, 0.0, 1.0));
    }

    #[test]
    fn viscoelastic_cases() {
        let v = viscoelastic_reduction(0.5, 0.5, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(v.nu_prime, 0.0);
        assert!(close(v.time_factor, 1.0, 1e-15));
        assert!(close(v.stress_factor, 1.0, 1e-15));
        assert_eq!(v.integration_constant, 0.0);

        let v = viscoelastic_reduction(1.0, 1.0, 1.0, 0.25, 3.0).unwrap();
        assert!(close(v.nu_prime, 0.5, 1e-15));
        assert!(close(v.time_factor, 0.75, 1e-15));
        assert!(close(v.stress_factor, 2.0 / 3.0, 1e-15));
        assert!(close(v.stress_scale, 2.0, 1e-15));

        assert!(matches!(
            viscoelastic_reduction(1.0, 1.0, 1.0, 0.5, 1.0),
            Err(Error::SingularPoissonRatio(_))
        ));
        assert!(viscoelastic_reduction(1.0, 1.0, 1.0, -1.0, 1.0).is_err());
        assert!(viscoelastic_reduction(0.0, 0.0, 1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn params_json_defaults_and_overrides() {
        let p = ModelParams::from_json(r#"{"mu": 0.45, "stress": {"kind": "Hill2", "alpha": 2}}"#).unwrap();
        assert_eq!(p.mu, 0.45);
        assert_eq!(p.stress, StressLaw::hill2(2.0));
        assert_eq!(p.k1, ModelParams::default().k1);
        let p = ModelParams::from_json(r#"{"K": 1.5, "stress": {"kind": "hill1"}}"#).unwrap();
        assert_eq!(p.k, 1.5);
        assert_eq!(p.stress.alpha, 10.0);
        let p = ModelParams::from_json(r#"{"b": 2}"#).unwrap();
        assert!(matches!(p.validate(), Err(Error::InvalidParameter { name: "b", .. })));
    }
}
