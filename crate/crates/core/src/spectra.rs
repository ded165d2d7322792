//! Angular power spectra: parametric families, variances with certified
//! tails, semigroup-evolved spectra and dependence sums.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::harmonics::eigenvalue;
use crate::quadrature::integrate;
use crate::spec_string::ParamString;
use crate::subordinators::LaplaceExponent;

/// Upper limit on explicit tail summation beyond the bandlimit.
const TAIL_TERMS: usize = 1 << 20;

/// How `C_l` continues beyond the stored bandlimit.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumFamily {
    /// Explicit values only; zero beyond the bandlimit.
    Tabulated,
    /// `A (1+l)^{-γ}`
    PowerLaw { amplitude: f64, gamma: f64 },
    /// `A (1+l)^{-θ} exp(-c l^ν)`
    Damped { amplitude: f64, theta: f64, nu: f64, c: f64 },
    /// `base(l) · exp(-2t Ψ(μ_l))`
    Evolved { base: Box<SpectrumFamily>, psi: LaplaceExponent, t: f64 },
}

impl SpectrumFamily {
    /// `C_l` from the closed form, `None` for tabulated spectra.
    pub fn coefficient(&self, l: usize) -> Option<f64> {
        let shifted = 1.0 + l as f64;
        match self {
            Self::Tabulated => None,
            Self::PowerLaw { amplitude, gamma } => Some(amplitude * shifted.powf(-gamma)),
            Self::Damped { amplitude, theta, nu, c } => {
                Some(amplitude * shifted.powf(-theta) * (-c * (l as f64).powf(*nu)).exp())
            }
            Self::Evolved { base, psi, t } => base
                .coefficient(l)
                .map(|b| b * (-2.0 * t * psi.psi(eigenvalue(l))).exp()),
        }
    }

    /// Certified upper bound on `Σ_{l > from} (2l+1)/(4π) C_l`.
    pub fn tail_bound(&self, from: usize) -> f64 {
        match self {
            Self::Tabulated => 0.0,
            Self::PowerLaw { amplitude, gamma } => power_law_tail_bound(*amplitude, *gamma, from),
            Self::Damped { amplitude, theta, nu, c } => match as_power_law(*amplitude, *theta, *nu, *c) {
                Some((a, g)) => power_law_tail_bound(a, g, from),
                None => damped_tail(self, from),
            },
            Self::Evolved { base, psi, t } => {
                (-2.0 * t * psi.psi(eigenvalue(from + 1))).exp() * base.tail_bound(from)
            }
        }
    }

    /// Accurate estimate of `Σ_{l > from} (2l+1)/(4π) C_l`.
    pub fn tail_estimate(&self, from: usize) -> f64 {
        match self {
            Self::Tabulated => 0.0,
            Self::PowerLaw { amplitude, gamma } => power_law_tail_estimate(*amplitude, *gamma, from),
            Self::Damped { amplitude, theta, nu, c } => match as_power_law(*amplitude, *theta, *nu, *c) {
                Some((a, g)) => power_law_tail_estimate(a, g, from),
                None => damped_tail(self, from),
            },
            Self::Evolved { .. } => summed_tail(self, from),
        }
    }
}

impl fmt::Display for SpectrumFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Tabulated => write!(f, "tabulated"),
            Self::PowerLaw { amplitude, gamma } => write!(f, "power:A={amplitude},gamma={gamma}"),
            Self::Damped { amplitude, theta, nu, c } => {
                write!(f, "damped:A={amplitude},theta={theta},nu={nu},c={c}")
            }
            Self::Evolved { base, psi, t } => write!(f, "evolved({base};{psi};t={t})"),
        }
    }
}

/// A damped family with `ν·c = 0` is a power law with amplitude `A e^{-c}` or `A`.
fn as_power_law(amplitude: f64, theta: f64, nu: f64, c: f64) -> Option<(f64, f64)> {
    if c == 0.0 {
        Some((amplitude, theta))
    } else if nu == 0.0 {
        Some((amplitude * (-c).exp(), theta))
    } else {
        None
    }
}

/// `(2l+1) ≤ 2(l+1)` and integral comparison over `k = l + 1 ≥ from + 2`.
fn power_law_tail_bound(amplitude: f64, gamma: f64, from: usize) -> f64 {
    amplitude / (2.0 * PI) * (from as f64 + 1.0).powf(2.0 - gamma) / (gamma - 2.0)
}

/// Euler-Maclaurin for `Σ_{k ≥ a} (2k - 1) k^{-γ}` with `a = from + 2`.
fn power_law_tail_estimate(amplitude: f64, gamma: f64, from: usize) -> f64 {
    let a = from as f64 + 2.0;
    let p1 = 1.0 - gamma;
    let p2 = -gamma;
    let g = 2.0 * a.powf(p1) - a.powf(p2);
    let g1 = 2.0 * p1 * a.powf(p1 - 1.0) - p2 * a.powf(p2 - 1.0);
    let g3 = 2.0 * p1 * (p1 - 1.0) * (p1 - 2.0) * a.powf(p1 - 3.0)
        - p2 * (p2 - 1.0) * (p2 - 2.0) * a.powf(p2 - 3.0);
    let integral = 2.0 * a.powf(2.0 - gamma) / (gamma - 2.0) - a.powf(1.0 - gamma) / (gamma - 1.0);
    amplitude / (4.0 * PI) * (integral + 0.5 * g - g1 / 12.0 + g3 / 720.0)
}

fn weighted(l: usize, c: f64) -> f64 {
    (2 * l + 1) as f64 / (4.0 * PI) * c
}

/// Explicit sum past the point where the damped terms decrease, closed by
/// the integral of the (decreasing) term function.
fn damped_tail(family: &SpectrumFamily, from: usize) -> f64 {
    let term = |x: f64| {
        match family {
            SpectrumFamily::Damped { amplitude, theta, nu, c } => {
                (2.0 * x + 1.0) / (4.0 * PI) * amplitude * (1.0 + x).powf(-theta) * (-c * x.powf(*nu)).exp()
            }
            _ => unreachable!("damped_tail is only used for damped families"),
        }
    };
    let (theta, nu, c) = match family {
        SpectrumFamily::Damped { theta, nu, c, .. } => (*theta, *nu, *c),
        _ => unreachable!(),
    };
    // d/dx log term < 0 from here on
    let decreasing = |x: f64| 2.0 / (2.0 * x + 1.0) - theta / (1.0 + x) - c * nu * x.powf(nu - 1.0) < 0.0;
    let mut sum = 0.0;
    let mut l = from + 1;
    while l - from < TAIL_TERMS {
        let t = term(l as f64);
        sum += t;
        if decreasing(l as f64) && decreasing(2.0 * l as f64) && t <= 1e-20 * sum.max(f64::MIN_POSITIVE) {
            break;
        }
        l += 1;
    }
    // Σ_{k > l} term(k) ≤ ∫_l^∞ term(x) dx, mapped to [0, 1).
    let start = l as f64;
    let rest = integrate(
        |s: f64| {
            let x = start + s / (1.0 - s);
            term(x) / ((1.0 - s) * (1.0 - s))
        },
        0.0,
        1.0 - 1e-12,
        1e-300,
        1e-8,
    )
    .map(|r| r.value + r.error)
    .unwrap_or(f64::INFINITY);
    sum + rest
}

/// Explicit continuation of the series, closed by the family's certified bound.
fn summed_tail(family: &SpectrumFamily, from: usize) -> f64 {
    let mut sum = 0.0;
    let mut l = from + 1;
    loop {
        let c = family.coefficient(l).unwrap_or(0.0);
        sum += weighted(l, c);
        let rest = family.tail_bound(l);
        if rest <= 1e-14 * sum || l - from >= TAIL_TERMS {
            return sum + rest;
        }
        l += 1;
    }
}

/// Nonnegative angular power spectrum `C_0, ..., C_L` with a tail descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    values: Vec<f64>,
    family: SpectrumFamily,
}

impl PowerSpectrum {
    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("spectrum needs at least C_0".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("C_l = {v} must be finite and >= 0")));
        }
        Ok(Self {
            values,
            family: SpectrumFamily::Tabulated,
        })
    }

    fn from_family(family: SpectrumFamily, bandlimit: usize) -> Self {
        let values = (0..=bandlimit)
            .map(|l| family.coefficient(l).expect("parametric family"))
            .collect();
        Self { values, family }
    }

    /// Parses `power:A=..,gamma=..` or `damped:A=..,theta=..,nu=..,c=..`.
    pub fn parse(text: &str, bandlimit: usize) -> Result<Self> {
        let mut p = ParamString::parse(text)?;
        let spectrum = match p.family {
            "power" => power_law_spectrum(p.take("A")?, p.take("gamma")?, bandlimit)?,
            "damped" => damped_spectrum(
                p.take("A")?,
                p.take("theta")?,
                p.take("nu")?,
                p.take("c")?,
                bandlimit,
            )?,
            other => return Err(Error::Parse(format!("unknown spectrum family '{other}'"))),
        };
        p.finish()?;
        Ok(spectrum)
    }

    pub fn bandlimit(&self) -> usize {
        self.values.len() - 1
    }

    pub fn value(&self, l: usize) -> f64 {
        self.values[l]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn family(&self) -> &SpectrumFamily {
        &self.family
    }

    /// `C_l` for any `l`: stored values up to the bandlimit, the family's
    /// closed form (or zero) beyond.
    pub fn coefficient(&self, l: usize) -> f64 {
        self.values
            .get(l)
            .copied()
            .or_else(|| self.family.coefficient(l))
            .unwrap_or(0.0)
    }

    /// The same values with no tail: the spectrum of a field sampled at
    /// this bandlimit.
    pub fn band_limited(&self) -> Self {
        Self {
            values: self.values.clone(),
            family: SpectrumFamily::Tabulated,
        }
    }

    /// `Σ_{l ≤ L} (2l+1)/(4π) C_l`.
    pub fn truncated_variance(&self) -> f64 {
        self.values.iter().enumerate().map(|(l, &c)| weighted(l, c)).sum()
    }

    /// Certified bound on the variance carried by degrees above the bandlimit.
    pub fn tail_bound(&self) -> f64 {
        self.family.tail_bound(self.bandlimit())
    }
}

pub fn power_law_spectrum(amplitude: f64, gamma: f64, bandlimit: usize) -> Result<PowerSpectrum> {
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidParameter(format!("amplitude {amplitude} must be > 0")));
    }
    if gamma.is_nan() || gamma <= 2.0 || gamma.is_infinite() {
        return Err(Error::NonSummable(gamma));
    }
    Ok(PowerSpectrum::from_family(
        SpectrumFamily::PowerLaw { amplitude, gamma },
        bandlimit,
    ))
}

pub fn damped_spectrum(amplitude: f64, theta: f64, nu: f64, c: f64, bandlimit: usize) -> Result<PowerSpectrum> {
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidParameter(format!("amplitude {amplitude} must be > 0")));
    }
    if !(nu >= 0.0 && nu.is_finite()) || !(c >= 0.0 && c.is_finite()) || !theta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "damped spectrum needs nu >= 0, c >= 0 (nu = {nu}, c = {c}, theta = {theta})"
        )));
    }
    if nu * c == 0.0 && theta <= 2.0 {
        return Err(Error::ClassViolation { theta, nu, c });
    }
    Ok(PowerSpectrum::from_family(
        SpectrumFamily::Damped { amplitude, theta, nu, c },
        bandlimit,
    ))
}

/// `E[T(x)²] = Σ_l (2l+1)/(4π) C_l`, including the family's tail.
pub fn field_variance(s: &PowerSpectrum) -> f64 {
    s.truncated_variance() + s.family.tail_estimate(s.bandlimit())
}

/// `C̃_l = C_l exp(-2t Ψ(μ_l))`, the spectrum of the semigroup-evolved field.
pub fn effective_spectrum(s: &PowerSpectrum, psi: &LaplaceExponent, t: f64) -> Result<PowerSpectrum> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("time {t} must be >= 0")));
    }
    if t == 0.0 {
        return Ok(s.clone());
    }
    let values = s
        .values
        .iter()
        .enumerate()
        .map(|(l, &c)| c * (-2.0 * t * psi.psi(eigenvalue(l))).exp())
        .collect();
    let family = match &s.family {
        SpectrumFamily::Tabulated => SpectrumFamily::Tabulated,
        SpectrumFamily::Evolved { base, psi: inner, t: t0 } if inner == psi => SpectrumFamily::Evolved {
            base: base.clone(),
            psi: *psi,
            t: t0 + t,
        },
        other => SpectrumFamily::Evolved {
            base: Box::new(other.clone()),
            psi: *psi,
            t,
        },
    };
    Ok(PowerSpectrum { values, family })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dependence {
    Short,
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DependenceSum {
    pub value: f64,
    pub class: Dependence,
}

/// `Σ_{τ ≥ 1} (2l+1)/(4π) C_l e^{-τΨ(μ_l)} = (2l+1)/(4π) C_l / (e^{Ψ(μ_l)} - 1)`.
pub fn dependence_sum(s: &PowerSpectrum, psi: &LaplaceExponent, l: usize) -> DependenceSum {
    let weight = weighted(l, s.coefficient(l));
    let rate = psi.psi(eigenvalue(l));
    if rate > 0.0 {
        DependenceSum {
            value: weight / rate.exp_m1(),
            class: Dependence::Short,
        }
    } else {
        DependenceSum {
            value: if weight > 0.0 { f64::INFINITY } else { 0.0 },
            class: Dependence::Long,
        }
    }
}
