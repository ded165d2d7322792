//! Spherical harmonics, Legendre polynomials and band-limited transforms on
//! a Gauss-Legendre x equispaced-longitude grid.
//!
//! Harmonics are fully normalized with the Condon-Shortley phase:
//! `Y_lm(θ, φ) = λ_lm(cos θ) e^{imφ}` and `Y*_lm = (-1)^m Y_{l,-m}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::HarmonicCoefficients;
use crate::quadrature::gauss_legendre;

const UNIT_TOLERANCE: f64 = 1e-12;

/// A point on the unit sphere: colatitude `theta` and longitude `phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    theta: f64,
    phi: f64,
}

impl SpherePoint {
    /// Builds a point, wrapping `phi` into `[0, 2π)`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::Domain(format!("non-finite coordinates ({theta}, {phi})")));
        }
        if !(-UNIT_TOLERANCE..=PI + UNIT_TOLERANCE).contains(&theta) {
            return Err(Error::Domain(format!("colatitude {theta} outside [0, π]")));
        }
        let mut phi = phi.rem_euclid(2.0 * PI);
        if phi >= 2.0 * PI {
            phi = 0.0;
        }
        Ok(Self {
            theta: theta.clamp(0.0, PI),
            phi,
        })
    }

    pub fn north_pole() -> Self {
        Self { theta: 0.0, phi: 0.0 }
    }

    /// Projects a nonzero vector of R^3 onto the sphere.
    pub fn from_cartesian(v: [f64; 3]) -> Self {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let z = (v[2] / norm).clamp(-1.0, 1.0);
        let rho = v[0].hypot(v[1]);
        let theta = rho.atan2(v[2]).clamp(0.0, PI);
        let theta = if rho == 0.0 { z.acos() } else { theta };
        let mut phi = v[1].atan2(v[0]);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        if phi >= 2.0 * PI {
            phi = 0.0;
        }
        Self { theta, phi }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn to_cartesian(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// `⟨x, y⟩ = cos d(x, y)`, clamped to `[-1, 1]`.
    pub fn inner_product(&self, other: &SpherePoint) -> f64 {
        let a = self.to_cartesian();
        let b = other.to_cartesian();
        (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0)
    }

    /// The point at great-circle distance `angle` from `self`, moving
    /// toward increasing colatitude along the meridian.
    pub fn offset_along_meridian(&self, angle: f64) -> SpherePoint {
        let v = self.to_cartesian();
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        let e = [ct * cp, ct * sp, -st];
        let (sa, ca) = angle.sin_cos();
        SpherePoint::from_cartesian(std::array::from_fn(|i| ca * v[i] + sa * e[i]))
    }

    /// Great-circle distance, computed with `atan2` so that it stays
    /// accurate for nearly coincident points.
    pub fn angular_distance(&self, other: &SpherePoint) -> f64 {
        let a = self.to_cartesian();
        let b = other.to_cartesian();
        let cross = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        sin.atan2(cos)
    }
}

/// Eigenvalue `μ_l = l(l+1)` of `-Δ` on the degree-`l` harmonics.
pub fn eigenvalue(l: usize) -> f64 {
    let l = l as f64;
    l * (l + 1.0)
}

pub(crate) fn clamp_unit(z: f64) -> Result<f64> {
    if z.is_nan() || z.abs() > 1.0 + UNIT_TOLERANCE {
        return Err(Error::Domain(format!("Legendre argument {z} outside [-1, 1]")));
    }
    Ok(z.clamp(-1.0, 1.0))
}

/// Legendre polynomial `Q_l(z)` by the three-term recurrence.
pub fn legendre_poly(l: usize, z: f64) -> Result<f64> {
    let z = clamp_unit(z)?;
    Ok(legendre_upto(l, z)[l])
}

/// `Q_0(z), ..., Q_lmax(z)` for an already validated `z`.
pub(crate) fn legendre_upto(lmax: usize, z: f64) -> Vec<f64> {
    let mut q = Vec::with_capacity(lmax + 1);
    q.push(1.0);
    if lmax >= 1 {
        q.push(z);
    }
    for l in 1..lmax {
        let lf = l as f64;
        let next = ((2.0 * lf + 1.0) * z * q[l] - lf * q[l - 1]) / (lf + 1.0);
        q.push(next);
    }
    q
}

/// Runs the normalized associated-Legendre recurrence at fixed order `m`
/// from the sectoral term up to degree `lmax`, handing each `(l, λ_lm)`
/// to `visit`.
fn for_each_degree(m: usize, lmax: usize, cos: f64, sin: f64, mut visit: impl FnMut(usize, f64)) {
    if m > lmax {
        return;
    }
    let mut sectoral = 1.0 / (4.0 * PI).sqrt();
    for k in 1..=m {
        let kf = k as f64;
        sectoral *= -((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * sin;
    }
    visit(m, sectoral);
    if m == lmax {
        return;
    }
    let mf = m as f64;
    let mut prev2 = sectoral;
    let mut prev = cos * (2.0 * mf + 3.0).sqrt() * sectoral;
    visit(m + 1, prev);
    let mut a_prev = (2.0 * mf + 3.0).sqrt();
    for l in m + 2..=lmax {
        let lf = l as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let next = a * (cos * prev - prev2 / a_prev);
        visit(l, next);
        prev2 = prev;
        prev = next;
        a_prev = a;
    }
}

/// Normalized associated Legendre values `λ_lm(cos θ)` for `0 ≤ m ≤ l ≤ lmax`,
/// stored in triangular order `l(l+1)/2 + m`.
pub fn assoc_legendre_table(lmax: usize, theta: f64) -> Vec<f64> {
    let (sin, cos) = theta.sin_cos();
    let mut out = vec![0.0; (lmax + 1) * (lmax + 2) / 2];
    for m in 0..=lmax {
        for_each_degree(m, lmax, cos, sin.abs(), |l, v| out[l * (l + 1) / 2 + m] = v);
    }
    out
}

/// `Y_lm(θ, φ)` for `|m| ≤ l`.
pub fn sph_harm(l: usize, m: i64, p: &SpherePoint) -> Result<Complex64> {
    let am = m.unsigned_abs() as usize;
    if am > l {
        return Err(Error::Domain(format!("|m| = {am} exceeds l = {l}")));
    }
    let (sin, cos) = p.theta.sin_cos();
    let mut lambda = 0.0;
    for_each_degree(am, l, cos, sin.abs(), |deg, v| {
        if deg == l {
            lambda = v;
        }
    });
    let y = Complex64::from_polar(lambda, am as f64 * p.phi);
    if m >= 0 {
        Ok(y)
    } else if am.is_multiple_of(2) {
        Ok(y.conj())
    } else {
        Ok(-y.conj())
    }
}

/// `Σ_{|m|≤l} Y_lm(x) Y*_lm(y)` evaluated term by term, as a complex number.
pub fn addition_sum_complex(l: usize, x: &SpherePoint, y: &SpherePoint) -> Complex64 {
    let li = l as i64;
    (-li..=li)
        .map(|m| {
            let a = sph_harm(l, m, x).expect("|m| <= l");
            let b = sph_harm(l, m, y).expect("|m| <= l");
            a * b.conj()
        })
        .sum()
}

/// Real part of [`addition_sum_complex`]; equals `(2l+1)/(4π) Q_l(⟨x, y⟩)`.
pub fn addition_sum(l: usize, x: &SpherePoint, y: &SpherePoint) -> f64 {
    addition_sum_complex(l, x, y).re
}

/// Gauss-Legendre nodes in `cos θ` times `phi_count` equispaced longitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    bandlimit: usize,
    cos_theta: Vec<f64>,
    theta: Vec<f64>,
    weights: Vec<f64>,
    phi_count: usize,
}

impl SphereGrid {
    /// Minimal grid for bandlimit `l`: `l + 1` rings and `2l + 1` longitudes.
    pub fn new(bandlimit: usize) -> Self {
        Self::with_resolution(bandlimit, bandlimit + 1, 2 * bandlimit + 1)
            .expect("minimal resolution is valid")
    }

    pub fn with_resolution(bandlimit: usize, theta_count: usize, phi_count: usize) -> Result<Self> {
        if theta_count < bandlimit + 1 || phi_count < 2 * bandlimit + 1 {
            return Err(Error::InvalidParameter(format!(
                "grid {theta_count} x {phi_count} too coarse for bandlimit {bandlimit}"
            )));
        }
        let (cos_theta, weights) = gauss_legendre(theta_count);
        let theta = cos_theta.iter().map(|c| c.acos()).collect();
        Ok(Self {
            bandlimit,
            cos_theta,
            theta,
            weights,
            phi_count,
        })
    }

    pub fn bandlimit(&self) -> usize {
        self.bandlimit
    }

    pub fn theta_count(&self) -> usize {
        self.theta.len()
    }

    pub fn phi_count(&self) -> usize {
        self.phi_count
    }

    pub fn theta(&self, j: usize) -> f64 {
        self.theta[j]
    }

    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_theta
    }

    pub fn theta_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn phi(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.phi_count as f64
    }

    pub fn point(&self, j: usize, k: usize) -> SpherePoint {
        SpherePoint {
            theta: self.theta[j],
            phi: self.phi(k),
        }
    }

    /// Quadrature weight of node `(j, k)`: `w_j · 2π / N_φ`.
    pub fn node_weight(&self, j: usize) -> f64 {
        self.weights[j] * 2.0 * PI / self.phi_count as f64
    }

    pub fn points(&self) -> impl Iterator<Item = SpherePoint> + '_ {
        (0..self.theta_count()).flat_map(move |j| (0..self.phi_count).map(move |k| self.point(j, k)))
    }

    /// Integral over the sphere of a function given at the nodes (row-major).
    pub fn integrate(&self, values: &[f64]) -> f64 {
        let n = self.phi_count;
        (0..self.theta_count())
            .map(|j| self.node_weight(j) * values[j * n..(j + 1) * n].iter().sum::<f64>())
            .sum()
    }

    /// `e^{i 2π r / N_φ}` for `r = 0..N_φ`.
    fn roots_of_unity(&self) -> Vec<Complex64> {
        let n = self.phi_count;
        (0..n)
            .map(|r| Complex64::from_polar(1.0, 2.0 * PI * r as f64 / n as f64))
            .collect()
    }
}

/// Real field samples on a [`SphereGrid`], row-major in θ then φ.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    grid: SphereGrid,
    values: Vec<f64>,
}

impl FieldMap {
    pub fn new(grid: SphereGrid, values: Vec<f64>) -> Result<Self> {
        let expected = grid.theta_count() * grid.phi_count();
        if values.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "map has {} values, grid needs {expected}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite map value {v}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: SphereGrid, f: impl Fn(&SpherePoint) -> f64) -> Result<Self> {
        let values = grid.points().map(|p| f(&p)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &SphereGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.grid.phi_count() + k]
    }
}

/// Spherical harmonic analysis by exact quadrature.
///
/// Rows are Fourier-analysed in φ in parallel; each order `m` then runs
/// its degree recurrence over the rings in a fixed order, so the result
/// does not depend on the number of threads.
pub fn analyze(map: &FieldMap, bandlimit: usize) -> Result<HarmonicCoefficients> {
    let grid = map.grid();
    if grid.bandlimit() < bandlimit {
        return Err(Error::Resolution {
            grid: grid.bandlimit(),
            requested: bandlimit,
        });
    }
    let n = grid.phi_count();
    let roots = grid.roots_of_unity();
    let dphi = 2.0 * PI / n as f64;
    let rows: Vec<Vec<Complex64>> = (0..grid.theta_count())
        .into_par_iter()
        .map(|j| {
            let row = &map.values()[j * n..(j + 1) * n];
            (0..=bandlimit)
                .map(|m| {
                    let s: Complex64 = row
                        .iter()
                        .enumerate()
                        .map(|(k, &v)| roots[(m * k) % n].conj() * v)
                        .sum();
                    s * dphi
                })
                .collect()
        })
        .collect();

    let per_order: Vec<Vec<Complex64>> = (0..=bandlimit)
        .into_par_iter()
        .map(|m| {
            let mut acc = vec![Complex64::new(0.0, 0.0); bandlimit + 1 - m];
            for (j, row) in rows.iter().enumerate() {
                let g = row[m] * grid.theta_weights()[j];
                let sin = grid.theta(j).sin().abs();
                for_each_degree(m, bandlimit, grid.cos_theta[j], sin, |l, v| {
                    acc[l - m] += g * v;
                });
            }
            acc
        })
        .collect();

    let mut coeffs = HarmonicCoefficients::zeros(bandlimit);
    for (m, column) in per_order.into_iter().enumerate() {
        for (i, a) in column.into_iter().enumerate() {
            let l = m + i;
            let a = if m == 0 { Complex64::new(a.re, 0.0) } else { a };
            coeffs.set(l, m, a)?;
        }
    }
    Ok(coeffs)
}

/// Spherical harmonic synthesis `Σ a_lm Y_lm` on the grid nodes.
pub fn synthesize(coeffs: &HarmonicCoefficients, grid: &SphereGrid) -> Result<FieldMap> {
    let lmax = coeffs.bandlimit();
    if grid.bandlimit() < lmax {
        return Err(Error::Resolution {
            grid: grid.bandlimit(),
            requested: lmax,
        });
    }
    coeffs.check_reality(1e-9)?;
    let n = grid.phi_count();
    let roots = grid.roots_of_unity();
    let rows: Vec<Vec<f64>> = (0..grid.theta_count())
        .into_par_iter()
        .map(|j| {
            let sin = grid.theta(j).sin().abs();
            let cos = grid.cos_theta[j];
            let orders: Vec<Complex64> = (0..=lmax)
                .map(|m| {
                    let mut f = Complex64::new(0.0, 0.0);
                    for_each_degree(m, lmax, cos, sin, |l, v| f += coeffs.get(l, m) * v);
                    f
                })
                .collect();
            (0..n)
                .map(|k| {
                    let tail: f64 = orders
                        .iter()
                        .enumerate()
                        .skip(1)
                        .map(|(m, f)| (f * roots[(m * k) % n]).re)
                        .sum();
                    orders[0].re + 2.0 * tail
                })
                .collect()
        })
        .collect();
    FieldMap::new(grid.clone(), rows.concat())
}
