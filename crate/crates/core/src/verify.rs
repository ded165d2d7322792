//! The acceptance gate: numerical criteria 1 through 10, each a list of
//! checks with explicit tolerances. Reports depend only on the seed.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::evolution::{
    bochner_check, cov_pde_residual, cov_space_time, cov_time, mean_field_variance, pde_residual, CovarianceQuery,
};
use crate::fields::{estimate_spectrum, sample_field, HarmonicCoefficients};
use crate::harmonics::{
    addition_sum, analyze, assoc_legendre_table, eigenvalue, legendre_poly, synthesize, SphereGrid, SpherePoint,
};
use crate::rng::StreamFactory;
use crate::spectra::{dependence_sum, field_variance, power_law_spectrum, PowerSpectrum};
use crate::sphere_walk::{
    mc_cov_space, mc_cov_time, mc_eta_cov, sample_bm_step, sample_subordinate_path, summarize, McEstimate,
};
use crate::subordinators::LaplaceExponent;

pub const CRITERIA: [u8; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|observed - reference| ≤ bound`
    Within,
    /// `observed ≥ bound`
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub observed: f64,
    pub reference: f64,
    pub bound: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Check {
    pub fn within(label: impl Into<String>, observed: f64, reference: f64, bound: f64) -> Self {
        Self {
            label: label.into(),
            observed,
            reference,
            bound,
            comparison: Comparison::Within,
            pass: (observed - reference).abs() <= bound,
        }
    }

    pub fn at_most(label: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self::within(label, observed, 0.0, bound)
    }

    pub fn at_least(label: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self {
            label: label.into(),
            observed,
            reference: bound,
            bound,
            comparison: Comparison::AtLeast,
            pass: observed >= bound,
        }
    }

    fn monte_carlo(label: impl Into<String>, est: McEstimate, oracle: f64) -> Self {
        Self::within(label, est.estimate, oracle, 4.0 * est.standard_error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub seed: u64,
    pub pass: bool,
    pub criteria: Vec<CriterionReport>,
}

pub fn title(id: u8) -> &'static str {
    match id {
        1 => "harmonic identities",
        2 => "transform round trip",
        3 => "subordinator samplers",
        4 => "sphere-walk transition law",
        5 => "space-time covariance",
        6 => "time covariance",
        7 => "PDE residuals and Bochner integral",
        8 => "mean field versus moved field",
        9 => "spectrum estimator",
        10 => "dependence sums",
        _ => "unknown",
    }
}

/// Runs one criterion with streams derived from `seed`.
pub fn run_criterion(id: u8, seed: u64) -> Result<CriterionReport> {
    let factory = StreamFactory::new(seed).split(&format!("criterion-{id}"));
    let checks = match id {
        1 => harmonic_identities(&factory)?,
        2 => round_trip(&factory)?,
        3 => subordinator_samplers(&factory)?,
        4 => walk_transitions(&factory)?,
        5 => space_covariance(&factory)?,
        6 => time_covariance(&factory)?,
        7 => pde_checks(&factory)?,
        8 => eta_versus_moved(&factory)?,
        9 => estimator(&factory)?,
        10 => dependence()?,
        _ => return Err(crate::Error::InvalidParameter(format!("no criterion {id}"))),
    };
    Ok(CriterionReport {
        id,
        title: title(id).to_string(),
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

pub fn run_all(seed: u64) -> Result<Report> {
    let criteria = CRITERIA
        .iter()
        .map(|&id| run_criterion(id, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(Report {
        seed,
        pass: criteria.iter().all(|c| c.pass),
        criteria,
    })
}

fn random_point(rng: &mut impl rand::Rng) -> SpherePoint {
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    SpherePoint::new(z.acos(), 2.0 * PI * rng.random::<f64>()).expect("valid coordinates")
}

/// A point with `⟨x, y⟩ = cos_angle`.
fn partner(x: &SpherePoint, cos_angle: f64) -> SpherePoint {
    x.offset_along_meridian(cos_angle.acos())
}

fn harmonic_identities(factory: &StreamFactory) -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    let lmax = 16;
    let grid = SphereGrid::new(lmax);
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut weights = Vec::new();
    for j in 0..grid.theta_count() {
        let lambda = assoc_legendre_table(lmax, grid.theta(j));
        for k in 0..grid.phi_count() {
            let phi = grid.phi(k);
            weights.push(grid.node_weight(j));
            let row = (0..=lmax)
                .flat_map(|l| (-(l as i64)..=l as i64).map(move |m| (l, m)))
                .map(|(l, m)| {
                    let am = m.unsigned_abs() as usize;
                    let y = Complex64::from_polar(lambda[l * (l + 1) / 2 + am], am as f64 * phi);
                    match (m < 0, am % 2) {
                        (false, _) => y,
                        (true, 0) => y.conj(),
                        (true, _) => -y.conj(),
                    }
                })
                .collect();
            basis.push(row);
        }
    }
    let count = basis[0].len();
    let mut worst: f64 = 0.0;
    for a in 0..count {
        for b in a..count {
            let inner: Complex64 = basis
                .iter()
                .zip(&weights)
                .map(|(row, w)| row[a] * row[b].conj() * *w)
                .sum();
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((inner - target).norm());
        }
    }
    checks.push(Check::at_most("orthonormality l <= 16: max |<Y, Y'> - δ|", worst, 1e-10));

    let mut rng = factory.stream(0);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (x, y) = (random_point(&mut rng), random_point(&mut rng));
        for l in 0..=16 {
            let scale = (2 * l + 1) as f64 / (4.0 * PI);
            let expect = scale * legendre_poly(l, x.inner_product(&y))?;
            worst = worst.max((addition_sum(l, &x, &y) - expect).abs() / scale);
        }
    }
    checks.push(Check::at_most("addition formula l <= 16, 20 pairs: max relative error", worst, 1e-11));

    let grid = SphereGrid::new(10);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let (x, y) = (random_point(&mut rng), random_point(&mut rng));
        for l in 0..=10 {
            let scale = (2 * l + 1) as f64 / (4.0 * PI);
            let kernel = |a: &SpherePoint, b: &SpherePoint| scale * legendre_poly(l, a.inner_product(b)).unwrap();
            let values: Vec<f64> = grid.points().map(|z| kernel(&x, &z) * kernel(&z, &y)).collect();
            worst = worst.max((grid.integrate(&values) - kernel(&x, &y)).abs());
        }
    }
    checks.push(Check::at_most("reproducing kernel l <= 10: max error", worst, 1e-9));
    Ok(checks)
}

fn round_trip(factory: &StreamFactory) -> Result<Vec<Check>> {
    let bandlimit = 64;
    let flat = PowerSpectrum::tabulated(vec![1.0; bandlimit + 1])?;
    let c = sample_field(&flat, &mut factory.stream(0));
    let back = analyze(&synthesize(&c, &SphereGrid::new(bandlimit))?, bandlimit)?;
    let worst = c
        .iter()
        .map(|(l, m, a)| (a - back.get(l, m)).norm())
        .fold(0.0, f64::max);
    Ok(vec![Check::at_most("L = 64: max |a - analyze(synthesize(a))|", worst, 1e-10)])
}

/// The five subordinator kinds exercised by the sampler checks.
pub fn sampler_kinds() -> Vec<LaplaceExponent> {
    vec![
        LaplaceExponent::stable(0.5).expect("valid"),
        LaplaceExponent::stable_with_drift(1.0, 0.5).expect("valid"),
        LaplaceExponent::gamma(),
        LaplaceExponent::geometric_stable(0.7).expect("valid"),
        LaplaceExponent::sum(1.0, 0.5, 2.0, 0.3).expect("valid"),
    ]
}

fn subordinator_samplers(factory: &StreamFactory) -> Result<Vec<Check>> {
    let n = 100_000;
    let mut checks = Vec::new();
    for psi in sampler_kinds() {
        for t in [0.5, 2.0] {
            let sub = factory.split(&format!("{psi} t={t}"));
            let draws: Vec<f64> = {
                let est = |i: u64| psi.sample(t, &mut sub.stream(i)).value;
                use rayon::prelude::*;
                (0..n as u64).into_par_iter().map(est).collect()
            };
            for mu in [0.5, 1.0, 2.0] {
                let values: Vec<f64> = draws.iter().map(|d| (-mu * d).exp()).collect();
                checks.push(Check::monte_carlo(
                    format!("{psi}, t = {t}, μ = {mu}: E exp(-μ D_t)"),
                    summarize(&values),
                    (-t * psi.psi(mu)).exp(),
                ));
            }
        }
    }
    for psi in [
        LaplaceExponent::stable(0.5)?,
        LaplaceExponent::gamma(),
        LaplaceExponent::geometric_stable(0.7)?,
    ] {
        for mu in [0.1, 1.0, 10.0, 100.0] {
            let closed = psi.psi(mu);
            checks.push(Check::within(
                format!("{psi}, μ = {mu}: Lévy-measure quadrature"),
                psi.psi_from_levy_measure(mu)?,
                closed,
                1e-6 * closed,
            ));
        }
    }
    Ok(checks)
}

fn transition_checks(
    label: &str,
    factory: &StreamFactory,
    rate: impl Fn(usize) -> f64,
    step: impl Fn(&SpherePoint, &mut crate::rng::Stream) -> SpherePoint + Sync,
) -> Vec<Check> {
    use rayon::prelude::*;
    let x = SpherePoint::new(PI / 2.0, 0.7).expect("valid");
    let cosines: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .map(|i| x.inner_product(&step(&x, &mut factory.stream(i))))
        .collect();
    [1, 2, 4]
        .into_iter()
        .map(|l| {
            let values: Vec<f64> = cosines.iter().map(|&z| legendre_poly(l, z).expect("z in [-1, 1]")).collect();
            Check::monte_carlo(format!("{label}, l = {l}: E Q_l(cos Θ)"), summarize(&values), rate(l))
        })
        .collect()
}

fn walk_transitions(factory: &StreamFactory) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for psi in [
        LaplaceExponent::elementary(),
        LaplaceExponent::stable(0.5)?,
        LaplaceExponent::gamma(),
    ] {
        for t in [0.3, 1.0] {
            checks.extend(transition_checks(
                &format!("{psi}, t = {t}"),
                &factory.split(&format!("{psi} t={t}")),
                |l| (-t * psi.psi(eigenvalue(l))).exp(),
                |x, rng| sample_subordinate_path(x, &psi, &[t], rng).expect("valid times").positions[0],
            ));
        }
    }
    let t = 0.3;
    checks.extend(transition_checks(
        "Brownian two steps of t/2, t = 0.3",
        &factory.split("ck-bm"),
        |l| (-t * eigenvalue(l)).exp(),
        |x, rng| {
            let mid = sample_bm_step(x, t / 2.0, rng);
            sample_bm_step(&mid, t / 2.0, rng)
        },
    ));
    let psi = LaplaceExponent::stable(0.5)?;
    checks.extend(transition_checks(
        "stable:alpha=0.5 path at (0.5, 1), t = 1",
        &factory.split("ck-stable"),
        |l| (-psi.psi(eigenvalue(l))).exp(),
        |x, rng| sample_subordinate_path(x, &psi, &[0.5, 1.0], rng).expect("valid times").positions[1],
    ));
    Ok(checks)
}

fn theorem_spectrum() -> PowerSpectrum {
    power_law_spectrum(1.0, 3.0, 8).expect("valid").band_limited()
}

fn query(psi: LaplaceExponent, t1: f64, t2: f64, cos_angle: f64) -> CovarianceQuery {
    CovarianceQuery {
        spectrum: theorem_spectrum(),
        psi,
        t1,
        t2,
        cos_angle,
    }
}

fn space_covariance(factory: &StreamFactory) -> Result<Vec<Check>> {
    let s = theorem_spectrum();
    let psi = LaplaceExponent::stable(0.5)?;
    let x = SpherePoint::new(1.1, 0.4)?;
    let mut checks = Vec::new();
    for (cos_angle, t1, t2) in [(0.5, 0.5, 0.5), (-0.3, 0.2, 1.0), (0.9, 0.0, 0.7)] {
        let y = partner(&x, cos_angle);
        let oracle = cov_space_time(&query(psi, t1, t2, cos_angle))?.gamma;
        let est = mc_cov_space(&s, &psi, &x, &y, t1, t2, 20_000, &factory.split(&format!("{cos_angle} {t1} {t2}")))?;
        checks.push(Check::monte_carlo(
            format!("<x,y> = {cos_angle}, t1 = {t1}, t2 = {t2}"),
            est,
            oracle,
        ));
    }
    let y = partner(&x, 0.5);
    let est = mc_cov_space(&s, &psi, &x, &y, 25.0, 25.0, 20_000, &factory.split("limit"))?;
    checks.push(Check::monte_carlo("t1 + t2 = 50: C_0/(4π) limit", est, s.value(0) / (4.0 * PI)));
    Ok(checks)
}

fn time_covariance(factory: &StreamFactory) -> Result<Vec<Check>> {
    let s = theorem_spectrum();
    let psi = LaplaceExponent::stable(0.5)?;
    let x = SpherePoint::new(1.1, 0.4)?;
    let n = 20_000;
    let mut checks = Vec::new();
    for (t1, t2) in [(0.5, 0.5), (0.0, 1.0)] {
        let est = mc_cov_time(&s, &psi, &x, t1, t2, n, &factory.split(&format!("{t1} {t2}")))?;
        let oracle = cov_time(&query(psi, t1, t2, 1.0))?.gamma;
        checks.push(Check::monte_carlo(format!("τ = {}, t1 = {t1}", t2 - t1), est, oracle));
    }
    let a = mc_cov_time(&s, &psi, &x, 0.0, 1.0, n, &factory.split("shift-a"))?;
    let b = mc_cov_time(&s, &psi, &x, 2.0, 3.0, n, &factory.split("shift-b"))?;
    checks.push(Check::within(
        "stationarity: (0, 1) versus (2, 3)",
        a.estimate - b.estimate,
        0.0,
        4.0 * a.standard_error.hypot(b.standard_error),
    ));
    Ok(checks)
}

fn pde_checks(factory: &StreamFactory) -> Result<Vec<Check>> {
    let s = power_law_spectrum(1.0, 3.0, 16)?;
    let psi = LaplaceExponent::stable(0.5)?;
    let c: HarmonicCoefficients = sample_field(&s, &mut factory.stream(0));
    let (t, dt) = (0.5, 1e-4);
    let mut checks = Vec::new();

    let r1 = pde_residual(&c, &psi, t, dt)?;
    let r2 = pde_residual(&c, &psi, t, dt / 2.0)?;
    checks.push(Check::at_most("coefficient PDE residual, dt = 1e-4", r1, 1e-6));
    checks.push(Check::within("coefficient PDE residual ratio under dt halving", r1 / r2, 4.0, 0.8));

    let k1 = cov_pde_residual(&s, 0.5, t, dt, 0.3)?;
    let k2 = cov_pde_residual(&s, 0.5, t, dt / 2.0, 0.3)?;
    checks.push(Check::at_most("covariance PDE residual, dt = 1e-4", k1.residual, 1e-6));
    checks.push(Check::within(
        "covariance PDE residual ratio under dt halving",
        k1.residual / k2.residual,
        4.0,
        0.8,
    ));
    checks.push(Check::at_most("covariance initial condition", k1.initial_condition_error, 1e-12));

    for alpha in [0.25, 0.5, 0.75] {
        for mu in [0.5f64, 4.0, 50.0] {
            let target = mu.powf(alpha);
            checks.push(Check::within(
                format!("Bochner integral α = {alpha}, μ = {mu}"),
                bochner_check(alpha, mu)?,
                -target,
                1e-7 * target,
            ));
        }
    }
    Ok(checks)
}

fn eta_versus_moved(factory: &StreamFactory) -> Result<Vec<Check>> {
    let s = theorem_spectrum();
    let psi = LaplaceExponent::stable(0.5)?;
    let x = SpherePoint::new(1.1, 0.4)?;
    let t = 1.0;
    let n = 20_000;
    let total = field_variance(&s);
    let eta = mc_eta_cov(&s, &psi, &x, &x, t, t, n, &factory.split("eta"))?;
    let moved = mc_cov_time(&s, &psi, &x, t, t, n, &factory.split("moved"))?;
    Ok(vec![
        Check::monte_carlo("Var η_1(x) versus mean-field series", eta, mean_field_variance(&s, &psi, t)?),
        Check::at_least(
            "field variance - Var η_1(x), in standard errors",
            (total - eta.estimate) / eta.standard_error,
            4.0,
        ),
        Check::monte_carlo("Var 𝔗_1(x) versus field variance", moved, total),
    ])
}

fn estimator(factory: &StreamFactory) -> Result<Vec<Check>> {
    let s = power_law_spectrum(1.0, 3.0, 16)?;
    let mut checks = Vec::new();
    let n = 2000;
    let fields: Vec<PowerSpectrum> = {
        use rayon::prelude::*;
        let sub = factory.split("mean");
        (0..n as u64)
            .into_par_iter()
            .map(|i| estimate_spectrum(&sample_field(&s, &mut sub.stream(i))))
            .collect()
    };
    for l in [2, 8, 16] {
        let mean = fields.iter().map(|e| e.value(l)).sum::<f64>() / n as f64;
        let cl = s.value(l);
        let bound = 4.0 * cl * (2.0 / (2 * l + 1) as f64).sqrt() / (n as f64).sqrt();
        checks.push(Check::within(format!("mean of Ĉ_{l} over {n} fields"), mean, cl, bound));
    }
    let l = 8;
    let dof = (2 * l + 1) as f64;
    let scaled: Vec<f64> = {
        let sub = factory.split("chi2");
        use rayon::prelude::*;
        (0..10_000u64)
            .into_par_iter()
            .map(|i| dof * estimate_spectrum(&sample_field(&s, &mut sub.stream(i))).value(l) / s.value(l))
            .collect()
    };
    let mean = scaled.iter().sum::<f64>() / scaled.len() as f64;
    let var = scaled.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (scaled.len() - 1) as f64;
    checks.push(Check::within(
        "variance of (2l+1)Ĉ_8/C_8 versus 2(2l+1)",
        var,
        2.0 * dof,
        0.05 * 2.0 * dof,
    ));
    Ok(checks)
}

fn dependence() -> Result<Vec<Check>> {
    let s = power_law_spectrum(1.0, 3.0, 8)?;
    let (stable, geometric, combined) = (
        LaplaceExponent::stable(0.5)?,
        LaplaceExponent::geometric_stable(0.7)?,
        LaplaceExponent::sum(1.0, 0.5, 2.0, 0.3)?,
    );
    let mut checks = Vec::new();
    for l in [1, 2, 5] {
        let mu = eigenvalue(l);
        let weight = (2 * l + 1) as f64 / (4.0 * PI) * s.value(l);
        let remarks = [
            (stable, weight / (mu.sqrt().exp() - 1.0)),
            (geometric, weight / mu.powf(0.7)),
            (combined, weight / ((mu.sqrt()).exp() * (1.0 + mu.powf(0.3)).powi(2) - 1.0)),
        ];
        // the printed combined form e^{cμ^α} + μ^{dβ} e^{cμ^α} - 1 at d = 1
        let unit_d = LaplaceExponent::sum(1.0, 0.5, 1.0, 0.3)?;
        let printed = weight / (mu.sqrt().exp() + mu.powf(0.3) * mu.sqrt().exp() - 1.0);
        let sum = dependence_sum(&s, &unit_d, l);
        checks.push(Check::within(
            format!("{unit_d}, l = {l}: printed combined form"),
            sum.value,
            printed,
            1e-12 * printed,
        ));
        for (psi, closed) in remarks {
            let sum = dependence_sum(&s, &psi, l);
            checks.push(Check::within(
                format!("{psi}, l = {l}: closed form"),
                sum.value,
                closed,
                1e-12 * closed,
            ));
            let r = (-psi.psi(mu)).exp();
            let terms = 10_000;
            let partial: f64 = (1..=terms).map(|tau| weight * r.powi(tau)).sum();
            let remainder = weight * r.powi(terms + 1) / (1.0 - r);
            checks.push(Check::within(
                format!("{psi}, l = {l}: partial sum to τ = 10⁴"),
                partial,
                sum.value,
                remainder + 1e-13 * sum.value,
            ));
        }
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_criteria_pass() {
        for id in [1, 2, 7, 10] {
            let report = run_criterion(id, 20_240_601).unwrap();
            for c in &report.checks {
                assert!(c.pass, "{}: {c:?}", report.title);
            }
        }
    }

    #[test]
    fn partner_has_requested_inner_product() {
        let x = SpherePoint::new(1.1, 0.4).unwrap();
        for c in [-0.9, -0.3, 0.0, 0.5, 0.9] {
            assert!((x.inner_product(&partner(&x, c)) - c).abs() < 1e-14);
        }
    }

    #[test]
    fn unknown_criterion() {
        assert!(run_criterion(11, 0).is_err());
    }
}
