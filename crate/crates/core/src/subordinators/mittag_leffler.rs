//! Mittag-Leffler function on the negative real axis.

use std::f64::consts::PI;

use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::quadrature::integrate;

/// Largest series term tolerated before switching to the integral form.
const SERIES_PEAK_LIMIT: f64 = 10.0;

/// `E_α(z) = Σ_j z^j / Γ(αj + 1)` for `0 < α ≤ 1`, `z ≤ 0`.
///
/// The power series is summed (Kahan-compensated) while its terms stay
/// small; otherwise the complete-monotonicity representation
///
/// `E_α(-x) = sin(απ)/(απ) ∫_0^∞ exp(-(s x)^{1/α}) / (s² + 2s cos(απ) + 1) ds`
///
/// is integrated, which avoids the cancellation of alternating terms.
pub fn mittag_leffler(alpha: f64, z: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("Mittag-Leffler order {alpha} outside (0, 1]")));
    }
    if z.is_nan() || z > 0.0 {
        return Err(Error::Domain(format!("Mittag-Leffler argument {z} must be <= 0")));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if alpha == 1.0 {
        return Ok(z.exp());
    }
    let x = -z;
    if x.is_infinite() {
        return Ok(0.0);
    }
    if peak_term(alpha, x) <= SERIES_PEAK_LIMIT {
        Ok(series(alpha, z))
    } else {
        integral(alpha, x)
    }
}

fn peak_term(alpha: f64, x: f64) -> f64 {
    let lnx = x.ln();
    let mut best = 0.0_f64;
    let mut j = 1.0;
    loop {
        let log_term = j * lnx - ln_gamma(alpha * j + 1.0);
        best = best.max(log_term);
        if log_term < best - 40.0 || j > 1e6 {
            break;
        }
        j += 1.0;
    }
    best.exp()
}

fn series(alpha: f64, z: f64) -> f64 {
    let mut sum = 1.0;
    let mut compensation = 0.0;
    let mut power = 1.0;
    for j in 1..10_000 {
        power *= z;
        let term = power / gamma(alpha * j as f64 + 1.0);
        let y = term - compensation;
        let t = sum + y;
        compensation = (t - sum) - y;
        sum = t;
        if term.abs() < 1e-17 * sum.abs() && j as f64 * alpha > 1.0 {
            break;
        }
    }
    sum
}

fn integral(alpha: f64, x: f64) -> Result<f64> {
    let (sin, cos) = (alpha * PI).sin_cos();
    let inv_alpha = 1.0 / alpha;
    let f = |s: f64| (-(s * x).powf(inv_alpha)).exp() / (s * s + 2.0 * s * cos + 1.0);
    let cutoff = 750f64.powf(alpha) / x;
    let value = if cutoff <= 1.0 {
        integrate(f, 0.0, cutoff, 0.0, 1e-13)?.value
    } else {
        integrate(f, 0.0, 1.0, 0.0, 1e-13)?.value + integrate(f, 1.0, cutoff, 0.0, 1e-13)?.value
    };
    Ok(sin / (alpha * PI) * value)
}
