//! Rotational Brownian motion on the sphere, its subordinate version and
//! Monte-Carlo estimators of the covariances of the moved field.
//!
//! Brownian displacements are drawn by composing exact transition laws at
//! dyadic times `τ_k = 10⁻⁴·2^k`: a step of length `s` is split greedily into
//! those times, each part rotating the current point by an angle drawn from
//! a cached inverse-CDF table. A remainder below `10⁻⁴` uses the
//! tangent-plane Gaussian approximation; `s ≥ 40` is indistinguishable from
//! the uniform law and is sampled as such.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::apply_semigroup;
use crate::fields::{evaluate_field, sample_field};
use crate::harmonics::{eigenvalue, SpherePoint};
use crate::rng::{Stream, StreamFactory};
use crate::spectra::PowerSpectrum;
use crate::subordinators::LaplaceExponent;

const TABLE_NODES: usize = 4096;
const MAX_TRUNCATION: usize = 4096;
const TRUNCATION_TOLERANCE: f64 = 1e-12;
/// Below this time the tangent-plane sampler is used.
pub const SMALL_TIME: f64 = 1e-4;
/// From this time on the displacement is sampled uniformly.
pub const MIXED_TIME: f64 = 40.0;
const DYADIC_LEVELS: usize = 19;

/// Tabulated law of the displacement angle `Θ_t = d(x, B_t)`.
#[derive(Debug, Clone)]
pub struct AngleDistribution {
    t: f64,
    truncation: usize,
    raw_mass: f64,
    nodes: Vec<f64>,
    cdf: Vec<f64>,
}

/// Smallest `L` with `(2L+1) e^{-t μ_L} < 1e-12`.
fn required_truncation(t: f64) -> Option<usize> {
    (0..=MAX_TRUNCATION).find(|&l| (2 * l + 1) as f64 * (-t * eigenvalue(l)).exp() < TRUNCATION_TOLERANCE)
}

/// Builds the displacement-angle law of Brownian motion at time `t`.
///
/// The CDF is the termwise integral of the Legendre series,
/// `F(θ) = (1 - cos θ)/2 + ½ Σ_{l≥1} e^{-tμ_l} (Q_{l-1} - Q_{l+1})(cos θ)`,
/// evaluated on 4096 nodes spanning `[0, min(π, 14√t)]`, made monotone
/// (which clips negative ringing of the density) and renormalized.
pub fn bm_angle_cdf(t: f64) -> Result<AngleDistribution> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t = {t} must be > 0")));
    }
    let truncation = required_truncation(t).ok_or(Error::SeriesTooLong {
        t,
        required: MAX_TRUNCATION + 1,
        limit: MAX_TRUNCATION,
    })?;
    let weights: Vec<f64> = (0..=truncation).map(|l| (-t * eigenvalue(l)).exp()).collect();
    let theta_max = PI.min(14.0 * t.sqrt());
    let step = theta_max / (TABLE_NODES - 1) as f64;
    let nodes: Vec<f64> = (0..TABLE_NODES).map(|i| i as f64 * step).collect();
    let raw: Vec<f64> = nodes
        .par_iter()
        .map(|&theta| {
            let z = theta.cos();
            let mut sum = 0.5 * (1.0 - z);
            let (mut q_prev, mut q) = (1.0, z);
            for (l, w) in weights.iter().enumerate().skip(1) {
                let lf = l as f64;
                let q_next = ((2.0 * lf + 1.0) * z * q - lf * q_prev) / (lf + 1.0);
                sum += 0.5 * w * (q_prev - q_next);
                q_prev = q;
                q = q_next;
            }
            sum
        })
        .collect();
    let raw_mass = if theta_max == PI { raw[TABLE_NODES - 1] } else { raw[TABLE_NODES - 1].min(1.0) };
    let mut cdf = Vec::with_capacity(TABLE_NODES);
    let mut running: f64 = 0.0;
    for v in &raw {
        running = running.max(*v).max(0.0);
        cdf.push(running);
    }
    let total = cdf[TABLE_NODES - 1];
    for v in &mut cdf {
        *v /= total;
    }
    cdf[0] = 0.0;
    Ok(AngleDistribution { t, truncation, raw_mass, nodes, cdf })
}

impl AngleDistribution {
    pub fn t(&self) -> f64 {
        self.t
    }

    /// Degree at which the Legendre series was truncated.
    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Mass of the truncated series before renormalization.
    pub fn mass(&self) -> f64 {
        self.raw_mass
    }

    /// Largest tabulated angle; the law puts no mass beyond it.
    pub fn theta_max(&self) -> f64 {
        self.nodes[TABLE_NODES - 1]
    }

    /// Truncated series density `sin θ Σ (2l+1)/2 Q_l(cos θ) e^{-tμ_l}`.
    pub fn density(&self, theta: f64) -> f64 {
        let z = theta.cos();
        let mut sum = 0.5;
        let (mut q_prev, mut q) = (1.0, z);
        for l in 1..=self.truncation {
            let lf = l as f64;
            sum += (lf + 0.5) * q * (-self.t * eigenvalue(l)).exp();
            let q_next = ((2.0 * lf + 1.0) * z * q - lf * q_prev) / (lf + 1.0);
            q_prev = q;
            q = q_next;
        }
        theta.sin() * sum
    }

    /// The tabulated (monotone, piecewise-linear) CDF.
    pub fn cdf(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            return 0.0;
        }
        if theta >= self.theta_max() {
            return 1.0;
        }
        let step = self.nodes[1];
        let i = ((theta / step) as usize).min(TABLE_NODES - 2);
        let frac = (theta - self.nodes[i]) / step;
        self.cdf[i] + frac * (self.cdf[i + 1] - self.cdf[i])
    }

    /// Inverse CDF at `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, TABLE_NODES - 1);
        let (lo, hi) = (self.cdf[i - 1], self.cdf[i]);
        if hi <= lo {
            return self.nodes[i - 1];
        }
        self.nodes[i - 1] + (u - lo) / (hi - lo) * (self.nodes[i] - self.nodes[i - 1])
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

fn dyadic_tables() -> &'static [AngleDistribution] {
    static TABLES: OnceLock<Vec<AngleDistribution>> = OnceLock::new();
    TABLES.get_or_init(|| {
        (0..DYADIC_LEVELS)
            .map(|k| bm_angle_cdf(SMALL_TIME * (1u64 << k) as f64).expect("dyadic times are tabulable"))
            .collect()
    })
}

type Vec3 = [f64; 3];

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalized(v: Vec3) -> Vec3 {
    let n = dot(&v, &v).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn tangent_basis(v: &Vec3) -> (Vec3, Vec3) {
    let a = if v[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let p = dot(&a, v);
    let e1 = normalized([a[0] - p * v[0], a[1] - p * v[1], a[2] - p * v[2]]);
    let e2 = [
        v[1] * e1[2] - v[2] * e1[1],
        v[2] * e1[0] - v[0] * e1[2],
        v[0] * e1[1] - v[1] * e1[0],
    ];
    (e1, e2)
}

/// Moves `v` by `angle` along the great circle leaving it at `azimuth`.
fn rotate(v: &Vec3, angle: f64, azimuth: f64) -> Vec3 {
    let (e1, e2) = tangent_basis(v);
    let (sa, ca) = angle.sin_cos();
    let (sp, cp) = azimuth.sin_cos();
    normalized(std::array::from_fn(|i| ca * v[i] + sa * (cp * e1[i] + sp * e2[i])))
}

fn uniform_point<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let z = 2.0 * rng.random::<f64>() - 1.0;
    let phi = 2.0 * PI * rng.random::<f64>();
    let rho = (1.0 - z * z).max(0.0).sqrt();
    [rho * phi.cos(), rho * phi.sin(), z]
}

fn tangent_step<R: Rng + ?Sized>(v: &Vec3, t: f64, rng: &mut R) -> Vec3 {
    let sd = (2.0 * t).sqrt();
    let u: f64 = sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
    let w: f64 = sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
    let r = u.hypot(w);
    if r == 0.0 {
        return *v;
    }
    rotate(v, r, w.atan2(u))
}

fn brownian_displace<R: Rng + ?Sized>(v: Vec3, t: f64, rng: &mut R) -> Vec3 {
    if t <= 0.0 {
        return v;
    }
    if t >= MIXED_TIME {
        return uniform_point(rng);
    }
    let tables = dyadic_tables();
    let mut v = v;
    let mut remaining = t;
    for table in tables.iter().rev() {
        if remaining >= table.t() {
            let angle = table.sample(rng);
            let azimuth = 2.0 * PI * rng.random::<f64>();
            v = rotate(&v, angle, azimuth);
            remaining -= table.t();
        }
    }
    if remaining > 0.0 {
        v = tangent_step(&v, remaining, rng);
    }
    v
}

/// Brownian motion (generator `Δ`) started at `x`, observed after time `t`.
pub fn sample_bm_step<R: Rng + ?Sized>(x: &SpherePoint, t: f64, rng: &mut R) -> SpherePoint {
    assert!(t > 0.0 && !t.is_nan(), "step time must be positive, got {t}");
    SpherePoint::from_cartesian(brownian_displace(x.to_cartesian(), t, rng))
}

/// Advances the subordinate motion by `dt` of physical time.
fn subordinate_advance<R: Rng + ?Sized>(v: Vec3, psi: &LaplaceExponent, dt: f64, rng: &mut R) -> Vec3 {
    if dt <= 0.0 {
        return v;
    }
    let operational = psi.sample(dt, rng).value;
    brownian_displace(v, operational, rng)
}

/// Positions of a subordinate path at increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkPath {
    pub start: SpherePoint,
    pub times: Vec<f64>,
    pub positions: Vec<SpherePoint>,
}

/// Samples `B^Ψ` started at `x` at the given strictly increasing positive
/// times, one subordinator increment per step.
pub fn sample_subordinate_path<R: Rng + ?Sized>(
    x: &SpherePoint,
    psi: &LaplaceExponent,
    times: &[f64],
    rng: &mut R,
) -> Result<WalkPath> {
    let mut prev = 0.0;
    for &t in times {
        if !(t > prev && t.is_finite()) {
            return Err(Error::NonMonotoneTimes);
        }
        prev = t;
    }
    let mut v = x.to_cartesian();
    let mut prev = 0.0;
    let mut positions = Vec::with_capacity(times.len());
    for &t in times {
        v = subordinate_advance(v, psi, t - prev, rng);
        positions.push(SpherePoint::from_cartesian(v));
        prev = t;
    }
    Ok(WalkPath { start: *x, times: times.to_vec(), positions })
}

/// A Monte-Carlo mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub standard_error: f64,
}

impl McEstimate {
    pub fn z_score(&self, oracle: f64) -> f64 {
        (self.estimate - oracle) / self.standard_error
    }

    /// `|estimate - oracle| ≤ k·SE`.
    pub fn within(&self, oracle: f64, k: f64) -> bool {
        (self.estimate - oracle).abs() <= k * self.standard_error
    }
}

/// Mean and standard error of `f` over `n` replications; replication `i`
/// receives stream `i` of `factory`, so the result is independent of the
/// number of worker threads.
pub fn replicate<F>(n: usize, factory: &StreamFactory, f: F) -> McEstimate
where
    F: Fn(&mut Stream) -> f64 + Sync,
{
    let values: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| f(&mut factory.stream(i)))
        .collect();
    summarize(&values)
}

/// Sample mean and standard error of the mean.
pub fn summarize(values: &[f64]) -> McEstimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    McEstimate {
        estimate: mean,
        standard_error: (var / n).sqrt(),
    }
}

fn check_replications(n: usize) -> Result<()> {
    if n < 100 {
        return Err(Error::InvalidParameter(format!("N = {n} must be at least 100")));
    }
    Ok(())
}

fn check_times(t1: f64, t2: f64) -> Result<()> {
    for t in [t1, t2] {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("time {t} must be finite and >= 0")));
        }
    }
    Ok(())
}

/// Estimates `E[𝔗_{t1}(x) 𝔗_{t2}(y)]` for `x ≠ y` with a fresh field and two
/// independent subordinate paths per replication.
#[allow(clippy::too_many_arguments)]
pub fn mc_cov_space(
    s: &PowerSpectrum,
    psi: &LaplaceExponent,
    x: &SpherePoint,
    y: &SpherePoint,
    t1: f64,
    t2: f64,
    n: usize,
    factory: &StreamFactory,
) -> Result<McEstimate> {
    check_replications(n)?;
    check_times(t1, t2)?;
    let distance = x.angular_distance(y);
    if distance <= 1e-9 {
        return Err(Error::CoincidentPoints(distance));
    }
    let (vx, vy) = (x.to_cartesian(), y.to_cartesian());
    Ok(replicate(n, factory, |rng| {
        let field = sample_field(s, rng);
        let px = SpherePoint::from_cartesian(subordinate_advance(vx, psi, t1, rng));
        let py = SpherePoint::from_cartesian(subordinate_advance(vy, psi, t2, rng));
        evaluate_field(&field, &px) * evaluate_field(&field, &py)
    }))
}

/// Estimates `E[𝔗_{t1}(x) 𝔗_{t2}(x)]` along one subordinate path per replication.
pub fn mc_cov_time(
    s: &PowerSpectrum,
    psi: &LaplaceExponent,
    x: &SpherePoint,
    t1: f64,
    t2: f64,
    n: usize,
    factory: &StreamFactory,
) -> Result<McEstimate> {
    check_replications(n)?;
    check_times(t1, t2)?;
    if t2 < t1 {
        return Err(Error::NonMonotoneTimes);
    }
    let v = x.to_cartesian();
    Ok(replicate(n, factory, |rng| {
        let field = sample_field(s, rng);
        let first = subordinate_advance(v, psi, t1, rng);
        let second = subordinate_advance(first, psi, t2 - t1, rng);
        evaluate_field(&field, &SpherePoint::from_cartesian(first))
            * evaluate_field(&field, &SpherePoint::from_cartesian(second))
    }))
}

/// Estimates `E[η_{t1}(x) η_{t2}(y)]` for the mean field `η_t = P_t T`.
#[allow(clippy::too_many_arguments)]
pub fn mc_eta_cov(
    s: &PowerSpectrum,
    psi: &LaplaceExponent,
    x: &SpherePoint,
    y: &SpherePoint,
    t1: f64,
    t2: f64,
    n: usize,
    factory: &StreamFactory,
) -> Result<McEstimate> {
    check_replications(n)?;
    check_times(t1, t2)?;
    Ok(replicate(n, factory, |rng| {
        let field = sample_field(s, rng);
        let a = apply_semigroup(&field, psi, t1).expect("time checked");
        let b = apply_semigroup(&field, psi, t2).expect("time checked");
        evaluate_field(&a, x) * evaluate_field(&b, y)
    }))
}
