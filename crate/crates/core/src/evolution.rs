//! Semigroup and generator action in coefficient space, the jump kernel,
//! analytic space-time covariances and PDE-residual checks.
//!
//! Every evolution here is diagonal in the harmonic basis: degree `l` is
//! multiplied by `exp(-t Ψ(μ_l))` (semigroup) or `-Ψ(μ_l)` (generator).

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::fields::HarmonicCoefficients;
use crate::harmonics::{clamp_unit, eigenvalue, legendre_upto};
use crate::quadrature::integrate;
use crate::spectra::{effective_spectrum, field_variance, PowerSpectrum};
use crate::subordinators::LaplaceExponent;

/// Degrees summed past the bandlimit of a parametric spectrum, at most.
const MAX_EXTENSION: usize = 1 << 16;
/// Relative size of the certified remainder at which series stop.
const SERIES_TOLERANCE: f64 = 1e-10;

fn check_time(name: &str, t: f64) -> Result<()> {
    if t >= 0.0 && !t.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {t} must be >= 0")))
    }
}

/// `exp(-t Ψ)` with the convention `exp(-∞ · 0) = 1`.
fn decay(t: f64, rate: f64) -> f64 {
    if rate == 0.0 {
        1.0
    } else {
        (-t * rate).exp()
    }
}

/// `a_lm ↦ a_lm exp(-t Ψ(μ_l))`.
pub fn apply_semigroup(c: &HarmonicCoefficients, psi: &LaplaceExponent, t: f64) -> Result<HarmonicCoefficients> {
    check_time("t", t)?;
    let mut out = c.clone();
    out.scale_by_degree(|l| decay(t, psi.psi(eigenvalue(l))));
    Ok(out)
}

/// `a_lm ↦ -Ψ(μ_l) a_lm`; for `Ψ(μ) = μ^α` this is `-(-Δ)^α`.
pub fn apply_generator(c: &HarmonicCoefficients, psi: &LaplaceExponent) -> HarmonicCoefficients {
    let mut out = c.clone();
    out.scale_by_degree(|l| -psi.psi(eigenvalue(l)));
    out
}

/// Evaluates `α/Γ(1-α) ∫_0^∞ (e^{-sμ} - 1) s^{-α-1} ds`, which equals `-μ^α`.
///
/// The integral is taken on the logarithmic scale `s = e^x`, where the
/// integrand `expm1(-μ e^x) e^{-αx}` is smooth; the two exponential tails
/// outside the integration window are added in closed form.
pub fn bochner_check(alpha: f64, mu: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!("mu = {mu} must be > 0")));
    }
    // μ e^lo = 1e-9 and μ e^hi = 60
    let lo = (1e-9 / mu).ln();
    let hi = (60.0 / mu).ln();
    let body = integrate(
        |x: f64| (-mu * x.exp()).exp_m1() * (-alpha * x).exp(),
        lo,
        hi,
        0.0,
        1e-13,
    )?;
    let lower_tail = -mu * ((1.0 - alpha) * lo).exp() / (1.0 - alpha);
    let upper_tail = -(-alpha * hi).exp() / alpha;
    Ok(alpha / gamma(1.0 - alpha) * (body.value + lower_tail + upper_tail))
}

/// A truncated jump-kernel value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpKernel {
    pub value: f64,
    /// Magnitude of the last summed term.
    pub last_term: f64,
    /// Set when the last term is not below `1e-8`; the truncated series
    /// then carries no certified error bound.
    pub truncation_warning: bool,
}

/// `J(cos) = Σ_{l = l_min}^{L} (2l+1)/(4π) Q_l(cos) Ψ'(μ_l)`.
pub fn jump_kernel(psi: &LaplaceExponent, cos_angle: f64, l_trunc: usize, l_min: usize) -> Result<JumpKernel> {
    if l_min > l_trunc {
        return Err(Error::InvalidParameter(format!("l_min = {l_min} exceeds L = {l_trunc}")));
    }
    let z = clamp_unit(cos_angle)?;
    let q = legendre_upto(l_trunc, z);
    let mut value = 0.0;
    let mut last_term = 0.0;
    for (l, ql) in q.iter().enumerate().skip(l_min) {
        let slope = psi.psi_prime(eigenvalue(l))?;
        last_term = (2 * l + 1) as f64 / (4.0 * PI) * ql * slope;
        value += last_term;
    }
    Ok(JumpKernel {
        value,
        last_term: last_term.abs(),
        truncation_warning: last_term.abs() >= 1e-8,
    })
}

/// Inputs of the covariance oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceQuery {
    pub spectrum: PowerSpectrum,
    pub psi: LaplaceExponent,
    pub t1: f64,
    pub t2: f64,
    pub cos_angle: f64,
}

/// A series value and a certified bound on the neglected remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceValue {
    pub gamma: f64,
    pub tail_bound: f64,
}

/// Sums `Σ_l (2l+1)/(4π) C_l Q_l(z) exp(-s Ψ(μ_l))`, continuing past the
/// bandlimit for parametric spectra until the remainder bound is small.
fn zonal_series(spectrum: &PowerSpectrum, psi: &LaplaceExponent, s: f64, z: f64) -> CovarianceValue {
    let family = spectrum.family();
    let bandlimit = spectrum.bandlimit();
    let remainder = |l: usize| decay(s, psi.psi(eigenvalue(l + 1))) * family.tail_bound(l);

    let mut sum = 0.0;
    let (mut q_prev, mut q) = (1.0, z);
    let mut l = 0;
    loop {
        let ql = if l == 0 { 1.0 } else { q };
        let weight = (2 * l + 1) as f64 / (4.0 * PI) * spectrum.coefficient(l);
        sum += weight * ql * decay(s, psi.psi(eigenvalue(l)));
        if l >= bandlimit {
            let bound = remainder(l);
            if bound <= SERIES_TOLERANCE * sum.abs() || bound == 0.0 || l - bandlimit >= MAX_EXTENSION {
                return CovarianceValue { gamma: sum, tail_bound: bound };
            }
        }
        if l >= 1 {
            let lf = l as f64;
            let next = ((2.0 * lf + 1.0) * z * q - lf * q_prev) / (lf + 1.0);
            q_prev = q;
            q = next;
        }
        l += 1;
    }
}

/// Space-time covariance `E[𝔗_{t1}(x) 𝔗_{t2}(y)] = Σ (2l+1)/(4π) C_l Q_l(⟨x,y⟩) e^{-(t1+t2)Ψ(μ_l)}`.
pub fn cov_space_time(q: &CovarianceQuery) -> Result<CovarianceValue> {
    check_time("t1", q.t1)?;
    check_time("t2", q.t2)?;
    let z = clamp_unit(q.cos_angle)?;
    Ok(zonal_series(&q.spectrum, &q.psi, q.t1 + q.t2, z))
}

/// Time covariance at a common point, `Σ (2l+1)/(4π) C_l e^{-(t2-t1)Ψ(μ_l)}`.
pub fn cov_time(q: &CovarianceQuery) -> Result<CovarianceValue> {
    check_time("t1", q.t1)?;
    check_time("t2", q.t2)?;
    if q.t2 < q.t1 {
        return Err(Error::InvalidParameter(format!(
            "time covariance needs t1 <= t2 (t1 = {}, t2 = {})",
            q.t1, q.t2
        )));
    }
    Ok(zonal_series(&q.spectrum, &q.psi, q.t2 - q.t1, 1.0))
}

/// Per-degree terms `(2l+1)/(4π) C_l e^{-(t1+t2)Ψ(μ_l)}` of the space-time
/// covariance, up to the bandlimit.
pub fn covariance_terms(q: &CovarianceQuery) -> Vec<f64> {
    let s = q.t1 + q.t2;
    (0..=q.spectrum.bandlimit())
        .map(|l| (2 * l + 1) as f64 / (4.0 * PI) * q.spectrum.value(l) * decay(s, q.psi.psi(eigenvalue(l))))
        .collect()
}

/// The same terms built from the mean field `η_t = P_t T`: the product of
/// the two semigroup multipliers applied to `E|a_lm|² = C_l`.
pub fn eta_covariance_terms(q: &CovarianceQuery) -> Vec<f64> {
    (0..=q.spectrum.bandlimit())
        .map(|l| {
            let rate = q.psi.psi(eigenvalue(l));
            (2 * l + 1) as f64 / (4.0 * PI) * q.spectrum.value(l) * (decay(q.t1, rate) * decay(q.t2, rate))
        })
        .collect()
}

/// Variance of `η_t(x)`: `Σ (2l+1)/(4π) C_l e^{-2tΨ(μ_l)}`.
pub fn mean_field_variance(s: &PowerSpectrum, psi: &LaplaceExponent, t: f64) -> Result<f64> {
    Ok(field_variance(&effective_spectrum(s, psi, t)?))
}

fn check_accuracy(dt: f64, max_rate: f64) -> Result<()> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::InvalidParameter(format!("dt = {dt} must be > 0")));
    }
    let regime = dt * max_rate * max_rate;
    if regime > 0.1 {
        return Err(Error::Accuracy(regime));
    }
    Ok(())
}

/// Central-difference residual of `∂_t a_lm(t) = -Ψ(μ_l) a_lm(t)` for the
/// evolved coefficients, maximized over `(l, m)` and normalized by
/// `max |a_lm(t)|`.
pub fn pde_residual(c: &HarmonicCoefficients, psi: &LaplaceExponent, t: f64, dt: f64) -> Result<f64> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::InvalidParameter(format!("t = {t} must be > 0")));
    }
    let max_rate = (0..=c.bandlimit()).map(|l| psi.psi(eigenvalue(l))).fold(0.0, f64::max);
    check_accuracy(dt, max_rate)?;
    let now = apply_semigroup(c, psi, t)?;
    let ahead = apply_semigroup(c, psi, t + dt)?;
    let behind = apply_semigroup(c, psi, (t - dt).max(0.0))?;
    let generated = apply_generator(&now, psi);
    let scale = now.iter().map(|(_, _, a)| a.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let worst = now
        .iter()
        .map(|(l, m, _)| {
            let derivative = (ahead.get(l, m) - behind.get(l, m)) / (2.0 * dt);
            (derivative - generated.get(l, m)).norm()
        })
        .fold(0.0, f64::max);
    Ok(worst / scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovariancePdeReport {
    /// Max over `l` of the central-difference residual of
    /// `(∂_t + (-Δ)^α) γ_t`, normalized by the largest coefficient.
    pub residual: f64,
    /// `|γ_0(cos) - cov_space_time(t1 = t2 = 0)|` at the requested angle.
    pub initial_condition_error: f64,
}

/// Residual of the fractional heat equation for the zonal covariance
/// `γ_t = Σ e^{-tμ_l^α} (2l+1)/(4π) C_l Q_l`.
pub fn cov_pde_residual(
    s: &PowerSpectrum,
    alpha: f64,
    t: f64,
    dt: f64,
    cos_angle: f64,
) -> Result<CovariancePdeReport> {
    let psi = LaplaceExponent::stable(alpha)?;
    if t.is_nan() || t <= 0.0 {
        return Err(Error::InvalidParameter(format!("t = {t} must be > 0")));
    }
    let z = clamp_unit(cos_angle)?;
    let bandlimit = s.bandlimit();
    let rate = |l: usize| psi.psi(eigenvalue(l));
    check_accuracy(dt, rate(bandlimit))?;
    let coefficient = |l: usize, time: f64| (2 * l + 1) as f64 / (4.0 * PI) * s.value(l) * decay(time, rate(l));

    let scale = (0..=bandlimit).map(|l| coefficient(l, t).abs()).fold(0.0, f64::max);
    let worst = (0..=bandlimit)
        .map(|l| {
            let derivative = (coefficient(l, t + dt) - coefficient(l, (t - dt).max(0.0))) / (2.0 * dt);
            (derivative + rate(l) * coefficient(l, t)).abs()
        })
        .fold(0.0, f64::max);
    let residual = if scale == 0.0 { 0.0 } else { worst / scale };

    let q = legendre_upto(bandlimit, z);
    let gamma0: f64 = (0..=bandlimit).map(|l| coefficient(l, 0.0) * q[l]).sum();
    let reference = cov_space_time(&CovarianceQuery {
        spectrum: s.band_limited(),
        psi,
        t1: 0.0,
        t2: 0.0,
        cos_angle: z,
    })?;
    Ok(CovariancePdeReport {
        residual,
        initial_condition_error: (gamma0 - reference.gamma).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::sample_field;
    use crate::harmonics::{legendre_poly, synthesize, FieldMap, SphereGrid};
    use crate::rng::StreamFactory;
    use crate::spectra::power_law_spectrum;
    use num_complex::Complex64;

    fn stable(alpha: f64) -> LaplaceExponent {
        LaplaceExponent::stable(alpha).unwrap()
    }

    fn constant_field(bandlimit: usize) -> HarmonicCoefficients {
        let mut c = HarmonicCoefficients::zeros(bandlimit);
        c.set(0, 0, Complex64::new(2.0, 0.0)).unwrap();
        c
    }

    fn unit_coefficients(bandlimit: usize) -> HarmonicCoefficients {
        let mut c = HarmonicCoefficients::zeros(bandlimit);
        for l in 0..=bandlimit {
            for m in 0..=l {
                let a = if m == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.6, 0.8) };
                c.set(l, m, a).unwrap();
            }
        }
        c
    }

    #[test]
    fn semigroup_properties() {
        let s = power_law_spectrum(1.0, 3.0, 12).unwrap();
        let c = sample_field(&s, &mut StreamFactory::new(1).stream(0));
        let psi = LaplaceExponent::sum(1.0, 0.5, 2.0, 0.3).unwrap();
        assert_eq!(apply_semigroup(&c, &psi, 0.0).unwrap(), c);
        let split = apply_semigroup(&apply_semigroup(&c, &psi, 0.3).unwrap(), &psi, 0.45).unwrap();
        let joint = apply_semigroup(&c, &psi, 0.75).unwrap();
        for ((_, _, a), (_, _, b)) in split.iter().zip(joint.iter()) {
            assert!((a - b).norm() <= 1e-15 * c.total_power().sqrt());
        }
        let one = constant_field(5);
        assert_eq!(apply_semigroup(&one, &psi, 17.0).unwrap(), one);
        assert!(apply_semigroup(&c, &psi, -1.0).is_err());
    }

    #[test]
    fn generator_examples() {
        let psi = stable(0.5);
        let zero = apply_generator(&constant_field(4), &psi);
        assert!(zero.iter().all(|(_, _, a)| a.norm() == 0.0));
        let mut c = HarmonicCoefficients::zeros(3);
        c.set(1, 1, Complex64::new(0.5, -0.25)).unwrap();
        let g = apply_generator(&c, &psi);
        assert!((g.get(1, 1) - c.get(1, 1) * -2f64.sqrt()).norm() < 1e-16);
        let laplacian = apply_generator(&unit_coefficients(6), &LaplaceExponent::elementary());
        for (l, m, a) in laplacian.iter() {
            assert_eq!(a, unit_coefficients(6).get(l, m) * -eigenvalue(l));
        }
    }

    #[test]
    fn generator_commutes_with_semigroup() {
        let c = unit_coefficients(8);
        let psi = LaplaceExponent::geometric_stable(0.4).unwrap();
        let a = apply_generator(&apply_semigroup(&c, &psi, 0.6).unwrap(), &psi);
        let b = apply_semigroup(&apply_generator(&c, &psi), &psi, 0.6).unwrap();
        for ((_, _, x), (_, _, y)) in a.iter().zip(b.iter()) {
            assert!((x - y).norm() <= 1e-15);
        }
    }

    #[test]
    fn bochner_formula() {
        let v = bochner_check(0.5, 4.0).unwrap();
        assert!((v + 2.0).abs() <= 1e-7 * 2.0);
        for alpha in [0.2, 0.5, 0.8] {
            for mu in [0.5, 2.0, 30.0] {
                let v = bochner_check(alpha, mu).unwrap();
                let expect = -stable(alpha).psi(mu);
                assert!((v - expect).abs() <= 1e-7 * expect.abs(), "{alpha} {mu}: {v}");
            }
        }
        assert!(bochner_check(0.5, 1e-12).unwrap().abs() < 1e-5);
        assert!(bochner_check(1.0, 1.0).is_err());
        assert!(bochner_check(0.5, 0.0).is_err());
    }

    #[test]
    fn jump_kernel_examples() {
        let gamma = LaplaceExponent::gamma();
        let head = jump_kernel(&gamma, 0.3, 0, 0).unwrap();
        assert!((head.value - 1.0 / (4.0 * PI)).abs() < 1e-16);
        assert!(matches!(
            jump_kernel(&stable(0.5), 0.3, 10, 0),
            Err(Error::SingularDerivative(_))
        ));
        assert!(jump_kernel(&stable(0.5), 0.3, 10, 1).is_ok());
        assert!(jump_kernel(&gamma, 0.3, 2, 5).is_err());
        let k = jump_kernel(&gamma, 0.1, 40, 0).unwrap();
        assert!(k.truncation_warning);
        assert!(k.last_term > 0.0);
    }

    fn kernel_operator(psi: &LaplaceExponent, f: &HarmonicCoefficients, l_trunc: usize, x_index: (usize, usize)) -> f64 {
        let grid = SphereGrid::new(l_trunc);
        let map: FieldMap = synthesize(f, &grid).unwrap();
        let x = grid.point(x_index.0, x_index.1);
        let fx = map.value(x_index.0, x_index.1);
        let integrand: Vec<f64> = grid
            .points()
            .zip(map.values())
            .map(|(y, fy)| (fy - fx) * jump_kernel(psi, x.inner_product(&y), l_trunc, 0).unwrap().value)
            .collect();
        grid.integrate(&integrand)
    }

    fn zero_mean_test_field() -> HarmonicCoefficients {
        let mut f = HarmonicCoefficients::zeros(4);
        f.set(1, 0, Complex64::new(0.7, 0.0)).unwrap();
        f.set(2, 1, Complex64::new(0.2, -0.4)).unwrap();
        f.set(4, 3, Complex64::new(-0.3, 0.1)).unwrap();
        f
    }

    #[test]
    fn kernel_operator_acts_by_derivative_differences() {
        // ∫ (f(y) - f(x)) J(x, y) dy = Σ_l (Ψ'(μ_l) - Ψ'(0)) f_l(x)
        let psi = LaplaceExponent::gamma();
        let f = zero_mean_test_field();
        let grid = SphereGrid::new(16);
        let mut expected = f.clone();
        let slope0 = psi.psi_prime(0.0).unwrap();
        expected.scale_by_degree(|l| psi.psi_prime(eigenvalue(l)).unwrap() - slope0);
        let expected_map = synthesize(&expected, &grid).unwrap();
        for idx in [(3, 5), (8, 0), (12, 20)] {
            let v = kernel_operator(&psi, &f, 16, idx);
            assert!((v - expected_map.value(idx.0, idx.1)).abs() < 1e-10, "{idx:?}");
        }
    }

    #[test]
    #[ignore = "Ψ'(μ_l)-weighted kernel yields Ψ'(μ_l) - Ψ'(0), not -Ψ(μ_l)"]
    fn kernel_operator_reproduces_generator() {
        let psi = LaplaceExponent::gamma();
        let f = zero_mean_test_field();
        let grid = SphereGrid::new(16);
        let generated = synthesize(&apply_generator(&f, &psi), &grid).unwrap();
        for idx in [(3, 5), (8, 0), (12, 20)] {
            let v = kernel_operator(&psi, &f, 16, idx);
            assert!((v - generated.value(idx.0, idx.1)).abs() < 1e-4, "{idx:?}");
        }
    }

    #[test]
    fn covariance_examples() {
        let s = power_law_spectrum(1.0, 3.0, 8).unwrap().band_limited();
        let psi = stable(0.5);
        let query = |t1, t2, cos_angle| CovarianceQuery {
            spectrum: s.clone(),
            psi,
            t1,
            t2,
            cos_angle,
        };
        let inf = cov_space_time(&query(f64::INFINITY, 1.0, 0.3)).unwrap();
        assert!((inf.gamma - s.value(0) / (4.0 * PI)).abs() < 1e-16);
        let var = cov_space_time(&query(0.0, 0.0, 1.0)).unwrap();
        assert!((var.gamma - field_variance(&s)).abs() < 1e-15);
        assert_eq!(var.tail_bound, 0.0);

        let mut single = vec![0.0; 6];
        single[3] = 0.8;
        let s3 = PowerSpectrum::tabulated(single).unwrap();
        let q = CovarianceQuery { spectrum: s3, psi, t1: 0.2, t2: 0.5, cos_angle: 0.35 };
        let expect = 7.0 / (4.0 * PI) * 0.8 * legendre_poly(3, 0.35).unwrap() * (-0.7 * psi.psi(12.0)).exp();
        assert!((cov_space_time(&q).unwrap().gamma - expect).abs() < 1e-16);
    }

    #[test]
    fn time_covariance_examples() {
        let s = power_law_spectrum(1.0, 3.0, 8).unwrap().band_limited();
        let psi = LaplaceExponent::gamma();
        let q = |t1, t2| CovarianceQuery { spectrum: s.clone(), psi, t1, t2, cos_angle: 0.0 };
        assert!((cov_time(&q(1.5, 1.5)).unwrap().gamma - field_variance(&s)).abs() < 1e-15);
        let far = cov_time(&q(0.0, 1e9)).unwrap();
        assert!((far.gamma - 1.0 / (4.0 * PI)).abs() < 1e-15);
        assert_eq!(cov_time(&q(0.0, 1.0)).unwrap(), cov_time(&q(2.0, 3.0)).unwrap());
        assert!(cov_time(&q(2.0, 1.0)).is_err());

        let mut single = vec![0.0; 3];
        single[2] = 1.3;
        let s2 = PowerSpectrum::tabulated(single).unwrap();
        let q2 = CovarianceQuery { spectrum: s2, psi, t1: 0.5, t2: 1.5, cos_angle: 0.0 };
        let expect = 5.0 / (4.0 * PI) * 1.3 * (-psi.psi(6.0)).exp();
        assert!((cov_time(&q2).unwrap().gamma - expect).abs() < 1e-16);
    }

    #[test]
    fn parametric_series_extend_past_bandlimit() {
        let s = power_law_spectrum(1.0, 3.0, 8).unwrap();
        let q = CovarianceQuery { spectrum: s.clone(), psi: stable(0.5), t1: 0.3, t2: 0.4, cos_angle: 0.2 };
        let v = cov_space_time(&q).unwrap();
        assert!(v.tail_bound <= SERIES_TOLERANCE * v.gamma.abs());
        let direct: f64 = (0..4000)
            .map(|l| {
                (2 * l + 1) as f64 / (4.0 * PI)
                    * s.coefficient(l)
                    * legendre_poly(l, 0.2).unwrap()
                    * (-0.7 * q.psi.psi(eigenvalue(l))).exp()
            })
            .sum();
        assert!((v.gamma - direct).abs() <= v.tail_bound + 1e-15);
    }

    #[test]
    fn eta_and_theorem_terms_coincide() {
        let s = power_law_spectrum(2.0, 2.5, 24).unwrap();
        for psi in [stable(0.5), LaplaceExponent::gamma(), LaplaceExponent::sum(1.0, 0.4, 0.5, 0.6).unwrap()] {
            let q = CovarianceQuery { spectrum: s.clone(), psi, t1: 0.35, t2: 1.1, cos_angle: 0.0 };
            for (a, b) in covariance_terms(&q).iter().zip(eta_covariance_terms(&q)) {
                assert!((a - b).abs() <= 1e-14 * a.abs());
            }
        }
    }

    #[test]
    fn mean_field_variance_examples() {
        let s = power_law_spectrum(1.0, 3.0, 16).unwrap();
        let psi = stable(0.5);
        assert_eq!(mean_field_variance(&s, &psi, 0.0).unwrap(), field_variance(&s));
        let late = mean_field_variance(&s, &psi, 1e6).unwrap();
        assert!((late - 1.0 / (4.0 * PI)).abs() < 1e-15);
        let mut prev = field_variance(&s);
        for t in [0.01, 0.1, 1.0, 10.0] {
            let v = mean_field_variance(&s, &psi, t).unwrap();
            assert!(v < prev);
            prev = v;
        }
        let mut single = vec![0.0; 3];
        single[1] = 0.9;
        let s1 = PowerSpectrum::tabulated(single).unwrap();
        let expect = 3.0 / (4.0 * PI) * 0.9 * (-2.0 * 2f64.sqrt()).exp();
        assert!((mean_field_variance(&s1, &psi, 1.0).unwrap() - expect).abs() < 1e-16);
    }

    #[test]
    fn pde_residual_is_second_order() {
        let c = unit_coefficients(16);
        let psi = stable(0.5);
        let r1 = pde_residual(&c, &psi, 0.5, 1e-4).unwrap();
        let r2 = pde_residual(&c, &psi, 0.5, 5e-5).unwrap();
        assert!(r1 <= 1e-6);
        let ratio = r1 / r2;
        assert!((ratio - 4.0).abs() <= 0.8, "ratio {ratio}");
        assert_eq!(pde_residual(&constant_field(16), &psi, 0.5, 1e-4).unwrap(), 0.0);
        assert!(matches!(pde_residual(&c, &psi, 0.5, 0.1), Err(Error::Accuracy(_))));
    }

    #[test]
    fn covariance_pde_residual() {
        let s = power_law_spectrum(1.0, 3.0, 16).unwrap();
        let r1 = cov_pde_residual(&s, 0.5, 0.5, 1e-4, 0.3).unwrap();
        let r2 = cov_pde_residual(&s, 0.5, 0.5, 5e-5, 0.3).unwrap();
        assert!(r1.residual <= 1e-6);
        assert!((r1.residual / r2.residual - 4.0).abs() <= 0.8);
        assert!(r1.initial_condition_error < 1e-15);

        let mut single = vec![0.0; 5];
        single[4] = 1.0;
        let one = PowerSpectrum::tabulated(single).unwrap();
        let rate = stable(0.5).psi(20.0);
        let r = cov_pde_residual(&one, 0.5, 0.5, 1e-4, 0.3).unwrap();
        // per-mode truncation error of the central difference: Ψ³ dt² / 6
        let bound = rate.powi(3) * 1e-8 / 6.0 * 1.01;
        assert!(r.residual <= bound, "{} > {bound}", r.residual);
    }
}
