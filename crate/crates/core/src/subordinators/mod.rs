//! Laplace exponents of subordinators, their Lévy measures and exact
//! marginal samplers.
//!
//! A subordinator `D_t` is characterized by `E exp(-μ D_t) = exp(-t Ψ(μ))`
//! with the Bernstein function `Ψ(μ) = bμ + ∫(1 - e^{-μy}) M(dy)`.

mod levy;
mod mittag_leffler;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01};

use crate::error::{Error, Result};
use crate::spec_string::ParamString;

pub use mittag_leffler::mittag_leffler;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    /// `Ψ(μ) = μ^α`
    Stable { alpha: f64 },
    /// `Ψ(μ) = bμ + μ^α`
    StableWithDrift { drift: f64, alpha: f64 },
    /// `Ψ(μ) = ln(1 + μ)`
    Gamma,
    /// `Ψ(μ) = ln(1 + μ^α)`
    GeometricStable { alpha: f64 },
    /// `Ψ(μ) = c μ^α + d ln(1 + μ^β)`
    Sum { c: f64, alpha: f64, d: f64, beta: f64 },
    /// `Ψ(μ) = bμ`, the deterministic clock `D_t = bt`.
    Drift { drift: f64 },
}

/// A validated subordinator symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceExponent(Kind);

/// One draw of `D_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubordinatorSample {
    pub t: f64,
    pub value: f64,
}

fn check_index(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must lie in (0, 1)")))
    }
}

fn check_nonnegative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must be >= 0")))
    }
}

impl LaplaceExponent {
    pub fn stable(alpha: f64) -> Result<Self> {
        check_index("alpha", alpha)?;
        Ok(Self(Kind::Stable { alpha }))
    }

    pub fn stable_with_drift(drift: f64, alpha: f64) -> Result<Self> {
        check_nonnegative("b", drift)?;
        check_index("alpha", alpha)?;
        Ok(Self(Kind::StableWithDrift { drift, alpha }))
    }

    pub fn gamma() -> Self {
        Self(Kind::Gamma)
    }

    /// `α = 1` is allowed and reproduces the gamma subordinator.
    pub fn geometric_stable(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1]")));
        }
        Ok(Self(Kind::GeometricStable { alpha }))
    }

    pub fn sum(c: f64, alpha: f64, d: f64, beta: f64) -> Result<Self> {
        check_nonnegative("c", c)?;
        check_nonnegative("d", d)?;
        check_index("alpha", alpha)?;
        check_index("beta", beta)?;
        Ok(Self(Kind::Sum { c, alpha, d, beta }))
    }

    pub fn drift(drift: f64) -> Result<Self> {
        check_nonnegative("b", drift)?;
        Ok(Self(Kind::Drift { drift }))
    }

    /// `Ψ(μ) = μ`, i.e. `D_t = t`.
    pub fn elementary() -> Self {
        Self(Kind::Drift { drift: 1.0 })
    }

    pub fn kind(&self) -> Kind {
        self.0
    }

    /// Drift coefficient `b`.
    pub fn drift_coefficient(&self) -> f64 {
        match self.0 {
            Kind::StableWithDrift { drift, .. } | Kind::Drift { drift } => drift,
            _ => 0.0,
        }
    }

    /// `Ψ(μ)` in closed form. `Ψ(0) = 0` exactly.
    pub fn psi(&self, mu: f64) -> f64 {
        if mu == 0.0 {
            return 0.0;
        }
        match self.0 {
            Kind::Stable { alpha } => mu.powf(alpha),
            Kind::StableWithDrift { drift, alpha } => drift * mu + mu.powf(alpha),
            Kind::Gamma => mu.ln_1p(),
            Kind::GeometricStable { alpha } => mu.powf(alpha).ln_1p(),
            Kind::Sum { c, alpha, d, beta } => c * mu.powf(alpha) + d * mu.powf(beta).ln_1p(),
            Kind::Drift { drift } => drift * mu,
        }
    }

    /// `Ψ'(μ)`; singular at `μ = 0` for every kind with a stable-like part.
    pub fn psi_prime(&self, mu: f64) -> Result<f64> {
        if mu.is_nan() || mu < 0.0 {
            return Err(Error::Domain(format!("Psi' needs mu >= 0, got {mu}")));
        }
        let stable_part = |alpha: f64| alpha * mu.powf(alpha - 1.0);
        let geometric_part = |alpha: f64| alpha * mu.powf(alpha - 1.0) / (1.0 + mu.powf(alpha));
        if mu == 0.0 {
            return match self.0 {
                Kind::Gamma | Kind::GeometricStable { alpha: 1.0 } => Ok(1.0),
                Kind::Drift { drift } => Ok(drift),
                Kind::Sum { c: 0.0, d: 0.0, .. } => Ok(0.0),
                _ => Err(Error::SingularDerivative(self.to_string())),
            };
        }
        Ok(match self.0 {
            Kind::Stable { alpha } => stable_part(alpha),
            Kind::StableWithDrift { drift, alpha } => drift + stable_part(alpha),
            Kind::Gamma => 1.0 / (1.0 + mu),
            Kind::GeometricStable { alpha } => geometric_part(alpha),
            Kind::Sum { c, alpha, d, beta } => c * stable_part(alpha) + d * geometric_part(beta),
            Kind::Drift { drift } => drift,
        })
    }

    /// `bμ + ∫_0^∞ (1 - e^{-μy}) M(y) dy` by quadrature of the Lévy density.
    pub fn psi_from_levy_measure(&self, mu: f64) -> Result<f64> {
        levy::psi_from_levy_measure(self, mu)
    }

    /// Draws `D_t` for `t > 0`.
    pub fn sample<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> SubordinatorSample {
        assert!(t > 0.0 && t.is_finite(), "subordinator time must be positive, got {t}");
        let value = match self.0 {
            Kind::Stable { alpha } => stable_at(alpha, t, rng),
            Kind::StableWithDrift { drift, alpha } => drift * t + stable_at(alpha, t, rng),
            Kind::Gamma => gamma_at(t, rng),
            Kind::GeometricStable { alpha } => geometric_stable_at(alpha, t, rng),
            Kind::Sum { c, alpha, d, beta } => {
                let x = if c > 0.0 { stable_at(alpha, c * t, rng) } else { 0.0 };
                let y = if d > 0.0 { geometric_stable_at(beta, d * t, rng) } else { 0.0 };
                x + y
            }
            Kind::Drift { drift } => drift * t,
        };
        SubordinatorSample { t, value }
    }
}

/// Positive stable variate with `E e^{-μS} = e^{-μ^α}` (Kanter's representation).
pub fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = PI * rng.sample::<f64, _>(Open01);
    let w: f64 = rng.sample(Exp1);
    let log_s = (alpha * u).sin().ln() - (u.sin().ln()) / alpha
        + (1.0 - alpha) / alpha * (((1.0 - alpha) * u).sin().ln() - w.ln());
    log_s.exp()
}

fn stable_at<R: Rng + ?Sized>(alpha: f64, t: f64, rng: &mut R) -> f64 {
    t.powf(1.0 / alpha) * positive_stable(alpha, rng)
}

fn gamma_at<R: Rng + ?Sized>(t: f64, rng: &mut R) -> f64 {
    Gamma::new(t, 1.0).expect("shape is positive").sample(rng)
}

/// Stable variate run at an independent gamma time: `S_α(G_t)`.
fn geometric_stable_at<R: Rng + ?Sized>(alpha: f64, t: f64, rng: &mut R) -> f64 {
    let g = gamma_at(t, rng);
    if alpha == 1.0 || g == 0.0 {
        return g;
    }
    stable_at(alpha, g, rng)
}

impl fmt::Display for LaplaceExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Kind::Stable { alpha } => write!(f, "stable:alpha={alpha}"),
            Kind::StableWithDrift { drift, alpha } => write!(f, "stable-drift:b={drift},alpha={alpha}"),
            Kind::Gamma => write!(f, "gamma"),
            Kind::GeometricStable { alpha } => write!(f, "geostable:alpha={alpha}"),
            Kind::Sum { c, alpha, d, beta } => write!(f, "sum:c={c},alpha={alpha},d={d},beta={beta}"),
            Kind::Drift { drift } => write!(f, "drift:b={drift}"),
        }
    }
}

impl FromStr for LaplaceExponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = ParamString::parse(s)?;
        let psi = match p.family {
            "stable" => Self::stable(p.take("alpha")?)?,
            "stable-drift" => Self::stable_with_drift(p.take("b")?, p.take("alpha")?)?,
            "gamma" => Self::gamma(),
            "geostable" => Self::geometric_stable(p.take("alpha")?)?,
            "sum" => Self::sum(p.take("c")?, p.take("alpha")?, p.take("d")?, p.take("beta")?)?,
            "drift" => Self::drift(p.take("b")?)?,
            "elementary" => Self::elementary(),
            other => return Err(Error::Parse(format!("unknown subordinator '{other}'"))),
        };
        p.finish()?;
        Ok(psi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamFactory;

    fn all_kinds() -> Vec<LaplaceExponent> {
        vec![
            LaplaceExponent::stable(0.5).unwrap(),
            LaplaceExponent::stable_with_drift(1.0, 0.6).unwrap(),
            LaplaceExponent::gamma(),
            LaplaceExponent::geometric_stable(0.7).unwrap(),
            LaplaceExponent::sum(1.0, 0.5, 2.0, 0.3).unwrap(),
            LaplaceExponent::elementary(),
        ]
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(LaplaceExponent::stable(0.5).unwrap().psi(4.0), 2.0);
        assert!((LaplaceExponent::gamma().psi(std::f64::consts::E - 1.0) - 1.0).abs() < 1e-15);
        let sum = LaplaceExponent::sum(1.0, 0.5, 2.0, 0.5).unwrap();
        assert!((sum.psi(4.0) - (2.0 + 2.0 * 3f64.ln())).abs() < 1e-14);
        for psi in all_kinds() {
            assert_eq!(psi.psi(0.0), 0.0);
        }
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(LaplaceExponent::gamma().psi_prime(0.0).unwrap(), 1.0);
        assert!((LaplaceExponent::stable(0.5).unwrap().psi_prime(4.0).unwrap() - 0.25).abs() < 1e-16);
        for psi in [
            LaplaceExponent::stable(0.5).unwrap(),
            LaplaceExponent::stable_with_drift(1.0, 0.5).unwrap(),
            LaplaceExponent::geometric_stable(0.5).unwrap(),
            LaplaceExponent::sum(1.0, 0.5, 0.0, 0.5).unwrap(),
        ] {
            assert!(matches!(psi.psi_prime(0.0), Err(Error::SingularDerivative(_))));
        }
        let h = 1e-5;
        for psi in all_kinds() {
            let fd = (psi.psi(10.0 + h) - psi.psi(10.0 - h)) / (2.0 * h);
            let d = psi.psi_prime(10.0).unwrap();
            assert!((fd - d).abs() <= 1e-7 * d.abs(), "{psi}: {fd} vs {d}");
        }
    }

    #[test]
    fn bernstein_sign_pattern() {
        for psi in all_kinds().into_iter().filter(|p| p.drift_coefficient() == 0.0) {
            for i in 1..60 {
                let mu = 0.05 * 1.25f64.powi(i);
                let h = 1e-3 * mu;
                let second = (psi.psi(mu + h) - 2.0 * psi.psi(mu) + psi.psi(mu - h)) / (h * h);
                let scale = psi.psi(mu) / (mu * mu);
                assert!(psi.psi(mu) >= 0.0);
                assert!(psi.psi_prime(mu).unwrap() >= 0.0);
                assert!(second <= 1e-6 * scale.abs().max(1e-12), "{psi} at {mu}: {second}");
            }
        }
    }

    #[test]
    fn geometric_stable_one_is_gamma() {
        let g = LaplaceExponent::geometric_stable(1.0).unwrap();
        for mu in [0.0, 0.1, 1.0, 7.5, 300.0] {
            assert_eq!(g.psi(mu), LaplaceExponent::gamma().psi(mu));
        }
    }

    #[test]
    fn construction_validation() {
        assert!(LaplaceExponent::stable(1.0).is_err());
        assert!(LaplaceExponent::stable(0.0).is_err());
        assert!(LaplaceExponent::stable_with_drift(-1.0, 0.5).is_err());
        assert!(LaplaceExponent::geometric_stable(1.5).is_err());
        assert!(LaplaceExponent::sum(1.0, 0.5, -2.0, 0.3).is_err());
    }

    #[test]
    fn spec_strings_round_trip() {
        for text in [
            "stable:alpha=0.5",
            "stable-drift:b=1,alpha=0.5",
            "gamma",
            "geostable:alpha=0.7",
            "sum:c=1,alpha=0.5,d=2,beta=0.3",
            "drift:b=1",
        ] {
            let psi: LaplaceExponent = text.parse().unwrap();
            assert_eq!(psi.to_string(), text);
        }
        assert_eq!("elementary".parse::<LaplaceExponent>().unwrap(), LaplaceExponent::elementary());
        for bad in ["stable", "stable:alpha=2", "gamma:alpha=0.5", "levy:alpha=0.5", "sum:c=1,alpha=0.5"] {
            assert!(bad.parse::<LaplaceExponent>().is_err(), "{bad}");
        }
    }

    #[test]
    fn drift_floor() {
        let psi = LaplaceExponent::stable_with_drift(1.0, 0.5).unwrap();
        let streams = StreamFactory::new(5);
        for i in 0..2000 {
            assert!(psi.sample(2.0, &mut streams.stream(i)).value >= 2.0);
        }
    }

    #[test]
    fn gamma_mean() {
        let psi = LaplaceExponent::gamma();
        let streams = StreamFactory::new(8).split("gamma");
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|i| psi.sample(3.0, &mut streams.stream(i)).value).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 3.0).abs() <= 4.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn positive_stable_laplace_transform() {
        let streams = StreamFactory::new(2).split("stable");
        let n = 50_000;
        for alpha in [0.3, 0.5, 0.8] {
            let draws: Vec<f64> = (0..n).map(|i| positive_stable(alpha, &mut streams.stream(i))).collect();
            assert!(draws.iter().all(|d| *d >= 0.0 && d.is_finite()));
            for mu in [0.5, 1.0, 2.0] {
                let xs: Vec<f64> = draws.iter().map(|d| (-mu * d).exp()).collect();
                let mean = xs.iter().sum::<f64>() / n as f64;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                let expect = (-mu.powf(alpha)).exp();
                assert!((mean - expect).abs() <= 4.0 * (var / n as f64).sqrt(), "{alpha} {mu}");
            }
        }
    }
}
