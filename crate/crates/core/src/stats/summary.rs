use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Moments of one group of users' outcomes.
///
/// Variance and skewness use 1/n divisors throughout, so `variance` is the
/// population variance of the group rather than the unbiased estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    /// Sample skewness g1 = m3 / m2^(3/2); zero for a constant sample.
    pub skewness: f64,
    pub n_nonzero: usize,
}

impl SampleSummary {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Mean, population variance and sample skewness of `values`.
pub fn summarize(values: &[f64]) -> Result<SampleSummary> {
    if values.is_empty() {
        return Err(Error::domain("summarize requires at least one value"));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!("non-finite value {bad} in sample")));
    }
    let n = values.len();
    let nf = n as f64;
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Ok(SampleSummary {
            n,
            mean: first,
            variance: 0.0,
            skewness: 0.0,
            n_nonzero: if first != 0.0 { n } else { 0 },
        });
    }
    let mean = values.iter().sum::<f64>() / nf;
    let (mut m2, mut m3) = (0.0, 0.0);
    let mut n_nonzero = 0;
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        if v != 0.0 {
            n_nonzero += 1;
        }
    }
    m2 /= nf;
    m3 /= nf;
    let skewness = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
    Ok(SampleSummary {
        n,
        mean,
        variance: m2,
        skewness,
        n_nonzero,
    })
}
