//! Isotropic Gaussian random fields in coefficient space.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::harmonics::{assoc_legendre_table, SpherePoint};
use crate::spectra::PowerSpectrum;

/// Harmonic coefficients `a_lm` of a real field, stored for `m ≥ 0` only.
///
/// Negative orders are implied by `a_{l,-m} = (-1)^m conj(a_lm)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoefficients {
    bandlimit: usize,
    data: Vec<Complex64>,
}

fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

impl HarmonicCoefficients {
    pub fn zeros(bandlimit: usize) -> Self {
        Self {
            bandlimit,
            data: vec![Complex64::new(0.0, 0.0); tri(bandlimit + 1, 0)],
        }
    }

    pub fn bandlimit(&self) -> usize {
        self.bandlimit
    }

    /// `a_lm` for `0 ≤ m ≤ l`. Panics outside the stored triangle.
    pub fn get(&self, l: usize, m: usize) -> Complex64 {
        assert!(m <= l && l <= self.bandlimit, "(l, m) = ({l}, {m}) out of range");
        self.data[tri(l, m)]
    }

    /// `a_lm` for any `|m| ≤ l`, using the implied negative orders.
    pub fn get_signed(&self, l: usize, m: i64) -> Complex64 {
        let am = m.unsigned_abs() as usize;
        let a = self.get(l, am);
        match (m < 0, am % 2) {
            (false, _) => a,
            (true, 0) => a.conj(),
            (true, _) => -a.conj(),
        }
    }

    pub fn set(&mut self, l: usize, m: usize, value: Complex64) -> Result<()> {
        if m > l || l > self.bandlimit {
            return Err(Error::InvalidParameter(format!(
                "(l, m) = ({l}, {m}) outside bandlimit {}",
                self.bandlimit
            )));
        }
        if m == 0 && value.im.abs() > 1e-9 {
            return Err(Error::Reality(value.im));
        }
        self.data[tri(l, m)] = if m == 0 { Complex64::new(value.re, 0.0) } else { value };
        Ok(())
    }

    /// Entries `(l, m, a_lm)` with `m ≥ 0`, sorted by `(l, m)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..=self.bandlimit).flat_map(move |l| (0..=l).map(move |m| (l, m, self.data[tri(l, m)])))
    }

    pub(crate) fn check_reality(&self, tolerance: f64) -> Result<()> {
        for l in 0..=self.bandlimit {
            let im = self.data[tri(l, 0)].im;
            if im.abs() > tolerance {
                return Err(Error::Reality(im));
            }
        }
        Ok(())
    }

    /// Multiplies every `a_lm` by `factor(l)`.
    pub fn scale_by_degree(&mut self, factor: impl Fn(usize) -> f64) {
        for l in 0..=self.bandlimit {
            let f = factor(l);
            for a in &mut self.data[tri(l, 0)..tri(l + 1, 0)] {
                *a *= f;
            }
        }
    }

    /// `Σ_{l, |m| ≤ l} |a_lm|²`, the squared L² norm of the field.
    pub fn total_power(&self) -> f64 {
        (0..=self.bandlimit).map(|l| self.degree_power(l)).sum()
    }

    /// `Σ_{|m| ≤ l} |a_lm|²` for one degree.
    pub fn degree_power(&self, l: usize) -> f64 {
        let row = &self.data[tri(l, 0)..tri(l + 1, 0)];
        row[0].norm_sqr() + 2.0 * row[1..].iter().map(|a| a.norm_sqr()).sum::<f64>()
    }
}

/// Draws the coefficients of a zero-mean isotropic Gaussian field.
///
/// `a_l0 ~ N(0, C_l)` and, for `m > 0`, independent real and imaginary
/// parts `~ N(0, C_l / 2)`, so that `E|a_lm|² = C_l` for every order.
pub fn sample_field<R: Rng + ?Sized>(spectrum: &PowerSpectrum, rng: &mut R) -> HarmonicCoefficients {
    let bandlimit = spectrum.bandlimit();
    let mut c = HarmonicCoefficients::zeros(bandlimit);
    for l in 0..=bandlimit {
        let cl = spectrum.value(l);
        let sd0 = cl.sqrt();
        let sd = (0.5 * cl).sqrt();
        let z: f64 = rng.sample(StandardNormal);
        c.data[tri(l, 0)] = Complex64::new(sd0 * z, 0.0);
        for m in 1..=l {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            c.data[tri(l, m)] = Complex64::new(sd * re, sd * im);
        }
    }
    c
}

fn phases(lmax: usize, phi: f64) -> Vec<Complex64> {
    (0..=lmax).map(|m| Complex64::from_polar(1.0, m as f64 * phi)).collect()
}

fn degree_value(c: &HarmonicCoefficients, l: usize, lambda: &[f64], phase: &[Complex64]) -> f64 {
    let base = tri(l, 0);
    let mut sum = c.data[base].re * lambda[base];
    for m in 1..=l {
        sum += 2.0 * lambda[base + m] * (c.data[base + m] * phase[m]).re;
    }
    sum
}

/// The degree-`l` projection `T_l(x) = Σ_{|m| ≤ l} a_lm Y_lm(x)`.
pub fn frequency_component(c: &HarmonicCoefficients, l: usize, x: &SpherePoint) -> Result<f64> {
    if l > c.bandlimit() {
        return Err(Error::InvalidParameter(format!(
            "degree {l} exceeds bandlimit {}",
            c.bandlimit()
        )));
    }
    let lambda = assoc_legendre_table(l, x.theta());
    Ok(degree_value(c, l, &lambda, &phases(l, x.phi())))
}

/// Pointwise synthesis `Σ_lm a_lm Y_lm(x)`.
pub fn evaluate_field(c: &HarmonicCoefficients, x: &SpherePoint) -> f64 {
    let lmax = c.bandlimit();
    let lambda = assoc_legendre_table(lmax, x.theta());
    let phase = phases(lmax, x.phi());
    (0..=lmax).map(|l| degree_value(c, l, &lambda, &phase)).sum()
}

/// Unbiased estimator `Ĉ_l = (2l+1)^{-1} Σ_{|m| ≤ l} |a_lm|²`.
pub fn estimate_spectrum(c: &HarmonicCoefficients) -> PowerSpectrum {
    let values = (0..=c.bandlimit())
        .map(|l| c.degree_power(l) / (2 * l + 1) as f64)
        .collect();
    PowerSpectrum::tabulated(values).expect("estimates are nonnegative")
}
