//! One-sample Kolmogorov-Smirnov test against the uniform distribution on
//! [0, 1], with the asymptotic Kolmogorov distribution for p-values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this many samples the asymptotic p-value is still reported but the
/// result is marked as small-sample.
pub const ASYMPTOTIC_MIN_SAMPLES: usize = 100;

const SERIES_TOLERANCE: f64 = 1e-12;
const SERIES_MAX_TERMS: usize = 100;

// Below this λ the alternating series converges too slowly; the Jacobi
// theta transform of the same function converges in a handful of terms.
const SMALL_LAMBDA: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    /// Supremum distance between the eCDF and the uniform CDF.
    pub d: f64,
    pub p: f64,
    pub n: usize,
    /// Set when `n` is under [`ASYMPTOTIC_MIN_SAMPLES`].
    pub small_sample: bool,
}

/// D-statistic of `pvalues` against U(0, 1), plus its asymptotic p-value.
///
/// The supremum of |F_emp − F_uni| is attained at a sample point, either at
/// the top of an eCDF step (i/n − u₍ᵢ₎) or just before it (u₍ᵢ₎ − (i−1)/n),
/// so sorting and one pass suffice.
pub fn ks_uniform_test(pvalues: &[f64]) -> Result<KsResult> {
    if pvalues.is_empty() {
        return Err(Error::domain("ks_uniform_test requires at least one value"));
    }
    if let Some(bad) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::domain(format!(
            "ks_uniform_test values must lie in [0, 1], got {bad}"
        )));
    }
    let mut sorted = pvalues.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let d = uniform_d_statistic_sorted(&sorted);
    let n = sorted.len();
    let p = kolmogorov_sf_unchecked((n as f64).sqrt() * d);
    Ok(KsResult {
        d,
        p,
        n,
        small_sample: n < ASYMPTOTIC_MIN_SAMPLES,
    })
}

pub(crate) fn uniform_d_statistic_sorted(sorted: &[f64]) -> f64 {
    let nf = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        let above = (i + 1) as f64 / nf - u;
        let below = u - i as f64 / nf;
        d = d.max(above).max(below);
    }
    d.clamp(0.0, 1.0)
}

/// Kolmogorov survival function Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²λ²).
pub fn kolmogorov_sf(lambda: f64) -> Result<f64> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::domain(format!(
            "kolmogorov_sf requires lambda >= 0, got {lambda}"
        )));
    }
    Ok(kolmogorov_sf_unchecked(lambda))
}

fn kolmogorov_sf_unchecked(lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 1.0;
    }
    if lambda.is_infinite() {
        return 0.0;
    }
    if lambda < SMALL_LAMBDA {
        return 1.0 - kolmogorov_cdf_theta(lambda);
    }
    kolmogorov_sf_series(lambda)
}

fn kolmogorov_sf_series(lambda: f64) -> f64 {
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=SERIES_MAX_TERMS {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < SERIES_TOLERANCE {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// K(λ) = √(2π)/λ Σ_{k≥1} exp(−(2k−1)²π²/(8λ²)).
fn kolmogorov_cdf_theta(lambda: f64) -> f64 {
    use std::f64::consts::PI;
    let scale = (2.0 * PI).sqrt() / lambda;
    let c = PI * PI / (8.0 * lambda * lambda);
    let mut sum = 0.0;
    for k in 1..=SERIES_MAX_TERMS {
        let odd = (2 * k - 1) as f64;
        let term = (-odd * odd * c).exp();
        sum += term;
        if term * scale < SERIES_TOLERANCE {
            break;
        }
    }
    (scale * sum).clamp(0.0, 1.0)
}
