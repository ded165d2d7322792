//! Lévy-measure quadrature for the Laplace exponent.
//!
//! Each integral is split at `y = 1`. On `[0, 1]` the factor
//! `(1 - e^{-μy}) / y` is bounded, and for the stable density the
//! substitution `y = u^{1/(1-α)}` absorbs `y^{-α}`. On `[1, ∞)` the stable
//! tail is mapped by `y = w^{-1/α}` and the gamma tail is truncated where
//! `e^{-y}` underflows.

use statrs::function::gamma::gamma;

use super::{Kind, LaplaceExponent};
use crate::error::{Error, Result};
use crate::quadrature::integrate;

use super::mittag_leffler::mittag_leffler;

const REL_TOL: f64 = 1e-10;

/// `(1 - e^{-μy}) / y`, accurate for small `μy`.
fn damped_ratio(mu: f64, y: f64) -> f64 {
    if y == 0.0 {
        mu
    } else {
        -(-mu * y).exp_m1() / y
    }
}

fn stable_part(alpha: f64, mu: f64) -> Result<f64> {
    let norm = 1.0 / gamma(1.0 - alpha);
    let p = 1.0 / (1.0 - alpha);
    let head = integrate(
        |u: f64| alpha * p * norm * damped_ratio(mu, u.powf(p)),
        0.0,
        1.0,
        0.0,
        REL_TOL,
    )?;
    let tail = integrate(
        |w: f64| {
            if w == 0.0 {
                norm
            } else {
                -norm * (-mu * w.powf(-1.0 / alpha)).exp_m1()
            }
        },
        0.0,
        1.0,
        0.0,
        REL_TOL,
    )?;
    Ok(head.value + tail.value)
}

fn gamma_part(mu: f64) -> Result<f64> {
    let head = integrate(|y: f64| damped_ratio(mu, y) * (-y).exp(), 0.0, 1.0, 0.0, REL_TOL)?;
    let tail = integrate(
        |y: f64| -(-mu * y).exp_m1() * (-y).exp() / y,
        1.0,
        60.0,
        0.0,
        REL_TOL,
    )?;
    Ok(head.value + tail.value)
}

/// Density `α y^{-1} E_α(-y^α)`. With `u = y^α` the head becomes
/// `∫_0^1 (1 - e^{-μ u^{1/α}}) E_α(-u) / u du`; with `y = w^{-1/α}` the
/// tail becomes `∫_0^1 (1 - e^{-μ w^{-1/α}}) E_α(-1/w) / w dw`, whose
/// integrand tends to `1 / Γ(1 - α)` as `w → 0`.
fn geometric_stable_part(alpha: f64, mu: f64) -> Result<f64> {
    if alpha == 1.0 {
        return gamma_part(mu);
    }
    let ml = |x: f64| mittag_leffler(alpha, -x).unwrap_or(f64::NAN);
    let inv = 1.0 / alpha;
    let head = integrate(
        |u: f64| {
            if u == 0.0 {
                0.0
            } else {
                -(-mu * u.powf(inv)).exp_m1() * ml(u) / u
            }
        },
        0.0,
        1.0,
        0.0,
        REL_TOL,
    )?;
    let limit = 1.0 / gamma(1.0 - alpha);
    let tail = integrate(
        |w: f64| {
            if w == 0.0 {
                limit
            } else {
                -(-mu * w.powf(-inv)).exp_m1() * ml(1.0 / w) / w
            }
        },
        0.0,
        1.0,
        0.0,
        REL_TOL,
    )?;
    Ok(head.value + tail.value)
}

pub(super) fn psi_from_levy_measure(psi: &LaplaceExponent, mu: f64) -> Result<f64> {
    if mu.is_nan() || mu < 0.0 {
        return Err(Error::Domain(format!("Psi needs mu >= 0, got {mu}")));
    }
    if mu == 0.0 {
        return Ok(0.0);
    }
    match psi.kind() {
        Kind::Stable { alpha } => stable_part(alpha, mu),
        Kind::StableWithDrift { drift, alpha } => Ok(drift * mu + stable_part(alpha, mu)?),
        Kind::Gamma => gamma_part(mu),
        Kind::GeometricStable { alpha } => geometric_stable_part(alpha, mu),
        Kind::Drift { drift } => Ok(drift * mu),
        Kind::Sum { .. } => Err(Error::InvalidParameter(
            "sum kind has no single listed Lévy density; check its components".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn gamma_frullani() {
        let v = LaplaceExponent::gamma().psi_from_levy_measure(1.0).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn stable_quadrature() {
        let v = LaplaceExponent::stable(0.5).unwrap().psi_from_levy_measure(4.0).unwrap();
        assert!((v - 2.0).abs() < 1e-6);
    }

    #[test]
    fn zero_and_sum() {
        assert_eq!(LaplaceExponent::gamma().psi_from_levy_measure(0.0).unwrap(), 0.0);
        let sum = LaplaceExponent::sum(1.0, 0.5, 1.0, 0.5).unwrap();
        assert!(sum.psi_from_levy_measure(1.0).is_err());
    }

    #[test]
    fn agrees_with_closed_form() {
        let kinds = [
            LaplaceExponent::stable(0.3).unwrap(),
            LaplaceExponent::stable(0.5).unwrap(),
            LaplaceExponent::stable(0.8).unwrap(),
            LaplaceExponent::stable_with_drift(2.0, 0.5).unwrap(),
            LaplaceExponent::gamma(),
            LaplaceExponent::geometric_stable(0.5).unwrap(),
            LaplaceExponent::geometric_stable(0.8).unwrap(),
        ];
        for psi in kinds {
            for mu in [0.1, 1.0, 10.0, 100.0] {
                let q = psi.psi_from_levy_measure(mu).unwrap();
                assert!(rel(q, psi.psi(mu)) < 1e-6, "{psi} at {mu}: {q} vs {}", psi.psi(mu));
            }
        }
    }

    #[test]
    fn sum_components_agree_separately() {
        let (c, alpha, d, beta) = (1.0, 0.5, 2.0, 0.3);
        let sum = LaplaceExponent::sum(c, alpha, d, beta).unwrap();
        let stable = LaplaceExponent::stable(alpha).unwrap();
        let geo = LaplaceExponent::geometric_stable(beta).unwrap();
        for mu in [0.1, 1.0, 10.0] {
            let q = c * stable.psi_from_levy_measure(mu).unwrap() + d * geo.psi_from_levy_measure(mu).unwrap();
            assert!(rel(q, sum.psi(mu)) < 1e-6);
        }
    }
}
