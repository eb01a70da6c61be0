//! Tangent-kernel weight function `phi = exp(z)` used to build the weighted
//! `L^p` functional, together with the parameter construction that turns a
//! signal amplitude below `sqrt(2/n) pi` into admissible `(p, eps)`.
//!
//! With `a = (p-1)^2`, `b = -4(p-1) eps`, `c = 4/p (1 + (p-1) eps)`,
//! `d = 4/p (p-1)(1-eps)` and `disc = 4ac - b^2`,
//!
//! ```text
//! z(s) = -b/(2c) s + sqrt(disc)/(2c) * int_0^s tan(kappa t + theta0) dt
//! kappa = sqrt(disc) / (2d),  theta0 = atan(b / sqrt(disc))
//! ```
//!
//! `phi` is defined on `[0, M]` as long as `kappa M + theta0 < pi/2`, which is
//! exactly `M < admissible_bound(p, eps)`.

use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::WeightError;

/// Margin below the admissible bound inside which construction is refused.
pub const BOUNDARY_MARGIN: f64 = 1e-12;

/// Relative slack for rounding in the radicand of the identity residual.
pub const RADICAND_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Coefficients {
    /// `4ac - b^2` straight from the coefficients.
    pub fn discriminant(&self) -> f64 {
        4.0 * self.a * self.c - self.b * self.b
    }
}

fn check_params(p: f64, eps: f64) -> Result<(), WeightError> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(WeightError::BadExponent(p));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(WeightError::BadEpsilon(eps));
    }
    Ok(())
}

pub fn coefficients(p: f64, eps: f64) -> Result<Coefficients, WeightError> {
    check_params(p, eps)?;
    Ok(Coefficients {
        a: (p - 1.0).powi(2),
        b: -4.0 * (p - 1.0) * eps,
        c: 4.0 / p * (1.0 + (p - 1.0) * eps),
        d: 4.0 / p * (p - 1.0) * (1.0 - eps),
    })
}

/// `16 (p-1)^2 / p * (1 + (p-1) eps - p eps^2)`, the factored discriminant.
///
/// `1 + (p-1) eps - p eps^2 = (1 - eps)(1 + p eps)` is evaluated in the
/// product form, which stays accurate as `eps -> 1`.
pub fn discriminant(p: f64, eps: f64) -> Result<f64, WeightError> {
    check_params(p, eps)?;
    Ok(16.0 * (p - 1.0).powi(2) / p * ((1.0 - eps) * (1.0 + p * eps)))
}

/// Largest amplitude `M` for which the weight is defined on `[0, M]` (exclusive).
pub fn admissible_bound(p: f64, eps: f64) -> Result<f64, WeightError> {
    check_params(p, eps)?;
    let q = (1.0 - eps) * (1.0 + p * eps);
    let phase = (p / q).sqrt() * eps;
    Ok(2.0 / p.sqrt() * ((1.0 - eps) / (1.0 + p * eps)).sqrt() * (FRAC_PI_2 + phase.atan()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightFunction {
    pub p: f64,
    pub eps: f64,
    /// Upper end of the domain, the signal amplitude bound.
    pub m: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub disc: f64,
    /// Phase of the tangent at `s = 0`.
    pub theta0: f64,
    /// Angular rate of the tangent argument.
    pub kappa: f64,
    tan_theta0: f64,
}

/// Builds the weight on `[0, m]`, refusing amplitudes at or within
/// [`BOUNDARY_MARGIN`] of the admissible bound.
pub fn make_weight(p: f64, eps: f64, m: f64) -> Result<WeightFunction, WeightError> {
    let coef = coefficients(p, eps)?;
    if !(m.is_finite() && m >= 0.0) {
        return Err(WeightError::BadAmplitude(m));
    }
    let bound = admissible_bound(p, eps)?;
    if m >= bound - BOUNDARY_MARGIN {
        return Err(WeightError::NotAdmissible { m, bound });
    }
    let disc = discriminant(p, eps)?;
    let root = disc.sqrt();
    let tan_theta0 = coef.b / root;
    Ok(WeightFunction {
        p,
        eps,
        m,
        a: coef.a,
        b: coef.b,
        c: coef.c,
        d: coef.d,
        disc,
        theta0: tan_theta0.atan(),
        kappa: root / (2.0 * coef.d),
        tan_theta0,
    })
}

impl WeightFunction {
    fn check_domain(&self, s: f64) -> Result<(), WeightError> {
        if !(0.0..=self.m).contains(&s) {
            return Err(WeightError::Domain { s, m: self.m });
        }
        Ok(())
    }

    /// `cos(kappa s + theta0) / cos(theta0) = cos(kappa s) - tan(theta0) sin(kappa s)`,
    /// returned minus one so that small `s` keeps full precision.
    fn cos_ratio_m1(&self, s: f64) -> f64 {
        let x = self.kappa * s;
        let half = (0.5 * x).sin();
        -2.0 * half * half - self.tan_theta0 * x.sin()
    }

    /// Tangent argument `kappa s + theta0`; stays inside `(-pi/2, pi/2)` on the domain.
    pub fn phase(&self, s: f64) -> f64 {
        self.kappa * s + self.theta0
    }

    /// `count` equispaced arguments covering `[0, m]`, endpoints exact.
    pub fn samples(&self, count: usize) -> impl Iterator<Item = f64> + '_ {
        let last = count.saturating_sub(1).max(1);
        (0..count).map(move |i| (self.m * i as f64 / last as f64).min(self.m))
    }

    pub fn z(&self, s: f64) -> Result<f64, WeightError> {
        self.check_domain(s)?;
        Ok(self.z_unchecked(s))
    }

    fn z_unchecked(&self, s: f64) -> f64 {
        // int_0^s tan(kappa t + theta0) dt = -(1/kappa) ln(cos(kappa s + theta0) / cos theta0),
        // and sqrt(disc) / (2 c kappa) = d / c.
        -self.b / (2.0 * self.c) * s - self.d / self.c * self.cos_ratio_m1(s).ln_1p()
    }

    /// `z'(s) = sqrt(disc)/(2c) (tan(kappa s + theta0) - tan theta0)`, written
    /// through the tangent difference formula so that `z'(0) = 0` exactly.
    pub fn z_prime(&self, s: f64) -> Result<f64, WeightError> {
        self.check_domain(s)?;
        Ok(self.z_prime_unchecked(s))
    }

    fn z_prime_unchecked(&self, s: f64) -> f64 {
        let sec2_theta0 = 1.0 + self.tan_theta0 * self.tan_theta0;
        let ratio = 1.0 + self.cos_ratio_m1(s);
        self.disc.sqrt() / (2.0 * self.c) * sec2_theta0 * (self.kappa * s).sin() / ratio
    }

    pub fn z_second(&self, s: f64) -> Result<f64, WeightError> {
        self.check_domain(s)?;
        Ok(self.z_second_from(self.z_prime_unchecked(s)))
    }

    fn z_second_from(&self, zp: f64) -> f64 {
        (self.a + self.b * zp + self.c * zp * zp) / self.d
    }

    pub fn phi(&self, s: f64) -> Result<f64, WeightError> {
        Ok(self.z(s)?.exp())
    }

    pub fn phi_prime(&self, s: f64) -> Result<f64, WeightError> {
        Ok(self.phi(s)? * self.z_prime_unchecked(s))
    }

    pub fn phi_second(&self, s: f64) -> Result<f64, WeightError> {
        let phi = self.phi(s)?;
        let zp = self.z_prime_unchecked(s);
        Ok(phi * (self.z_second_from(zp) + zp * zp))
    }

    /// `(phi, phi', phi'')` in one pass.
    pub fn derivatives(&self, s: f64) -> Result<(f64, f64, f64), WeightError> {
        let phi = self.phi(s)?;
        let zp = self.z_prime_unchecked(s);
        Ok((phi, phi * zp, phi * (self.z_second_from(zp) + zp * zp)))
    }

    /// `|(p-1) phi - 2 phi'| - 2 sqrt((p-1)(1-eps) phi (phi''/p - phi'))`,
    /// which vanishes identically on the domain.
    pub fn identity_residual(&self, s: f64) -> Result<f64, WeightError> {
        let (phi, dphi, ddphi) = self.derivatives(s)?;
        let pm1 = self.p - 1.0;
        let factor = pm1 * (1.0 - self.eps) * phi;
        let mut radicand = factor * (ddphi / self.p - dphi);
        if radicand < 0.0 {
            let scale = factor * (ddphi.abs() / self.p + dphi.abs());
            if radicand < -RADICAND_TOLERANCE * scale {
                return Err(WeightError::NegativeRadicand(radicand));
            }
            radicand = 0.0;
        }
        Ok((pm1 * phi - 2.0 * dphi).abs() - 2.0 * radicand.sqrt())
    }
}

/// Free-function form of [`WeightFunction::z`].
pub fn z_eval(wf: &WeightFunction, s: f64) -> Result<f64, WeightError> {
    wf.z(s)
}

pub fn phi_eval(wf: &WeightFunction, s: f64) -> Result<f64, WeightError> {
    wf.phi(s)
}

pub fn phi_prime(wf: &WeightFunction, s: f64) -> Result<f64, WeightError> {
    wf.phi_prime(s)
}

pub fn phi_second(wf: &WeightFunction, s: f64) -> Result<f64, WeightError> {
    wf.phi_second(s)
}

pub fn phi_identity_residual(wf: &WeightFunction, s: f64) -> Result<f64, WeightError> {
    wf.identity_residual(s)
}

/// `eps = (pi^2 - (n/2) M^2) / (2 (pi^2 + (n/2)^2 M^2))`, the choice that makes
/// `M = 2/sqrt(n/2) * sqrt((1 - 2 eps)/(1 + 2 eps n/2)) * pi/2` hold with equality.
pub fn epsilon_for_threshold(m: f64, n: usize) -> Result<f64, WeightError> {
    let bound = crate::model::threshold_bound(n);
    if !(m.is_finite() && m >= 0.0) {
        return Err(WeightError::BadAmplitude(m));
    }
    if m >= bound {
        return Err(WeightError::AboveThreshold { m, bound });
    }
    let q = n as f64 / 2.0;
    let pi2 = PI * PI;
    Ok((pi2 - q * m * m) / (2.0 * (pi2 + q * q * m * m)))
}

/// Right-hand side of the defining identity of [`epsilon_for_threshold`].
pub fn threshold_identity(eps: f64, n: usize) -> f64 {
    let q = n as f64 / 2.0;
    2.0 / q.sqrt() * ((1.0 - 2.0 * eps) / (1.0 + 2.0 * eps * q)).sqrt() * FRAC_PI_2
}

/// Positive root `p` of `M = 2/sqrt(p) * sqrt((1-eps)/(1+eps p)) * pi/2`.
///
/// Squaring gives `eps p^2 + p - K = 0` with `K = pi^2 (1-eps) / M^2`; the root
/// is taken in the rationalized form `2K / (1 + sqrt(1 + 4 eps K))`.
pub fn p_for_equality(m: f64, eps: f64) -> Result<f64, WeightError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(WeightError::BadEpsilon(eps));
    }
    if !(m.is_finite() && m > 0.0) {
        return Err(WeightError::NoRoot { m, eps });
    }
    let k = PI * PI * (1.0 - eps) / (m * m);
    let p = 2.0 * k / (1.0 + (1.0 + 4.0 * eps * k).sqrt());
    if !(p.is_finite() && p > 0.0) {
        return Err(WeightError::NoRoot { m, eps });
    }
    Ok(p)
}

/// Right-hand side `2/sqrt(p) * sqrt((1-eps)/(1+eps p)) * pi/2` of the equality.
pub fn equality_amplitude(p: f64, eps: f64) -> f64 {
    2.0 / p.sqrt() * ((1.0 - eps) / (1.0 + eps * p)).sqrt() * FRAC_PI_2
}

/// `(eps, p)` from the threshold construction for amplitude `m` in dimension `n`.
pub fn construct_parameters(m: f64, n: usize) -> Result<(f64, f64), WeightError> {
    let eps = epsilon_for_threshold(m, n)?;
    let p = p_for_equality(m, eps)?;
    Ok((eps, p))
}
