use serde::{Deserialize, Serialize};

use super::normal::{cdf_unchecked, inverse_normal_cdf};
use super::summary::SampleSummary;
use crate::error::{Error, Result};

/// The sufficient statistics the z-test needs from one group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupMoments {
    pub n: usize,
    pub mean: f64,
    /// Population (1/n) variance.
    pub variance: f64,
}

impl From<&SampleSummary> for GroupMoments {
    fn from(s: &SampleSummary) -> Self {
        GroupMoments {
            n: s.n,
            mean: s.mean,
            variance: s.variance,
        }
    }
}

/// Difference-in-means estimate with its normal confidence interval and
/// two-tailed p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AteEstimate {
    pub ate: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub z: f64,
    pub p: f64,
    pub alpha: f64,
}

impl AteEstimate {
    /// Whether the confidence interval excludes zero.
    pub fn significant(&self) -> bool {
        self.ci_low > 0.0 || self.ci_high < 0.0
    }
}

/// A two-sample z-test at a fixed significance level.
///
/// Holds the critical value Φ⁻¹(1 − α/2) so repeated comparisons (one per
/// A/A split and event) don't recompute it.
#[derive(Debug, Clone, Copy)]
pub struct ZTest {
    alpha: f64,
    critical: f64,
}

impl ZTest {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(ZTest {
            alpha,
            critical: inverse_normal_cdf(1.0 - alpha / 2.0)?,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn critical_value(&self) -> f64 {
        self.critical
    }

    /// Compares `treatment` against `control`.
    pub fn estimate(&self, control: GroupMoments, treatment: GroupMoments) -> Result<AteEstimate> {
        if control.n < 2 || treatment.n < 2 {
            return Err(Error::InsufficientData(format!(
                "each group needs at least 2 users (control {}, treatment {})",
                control.n, treatment.n
            )));
        }
        let ate = treatment.mean - control.mean;
        let se = (control.variance.max(0.0) / control.n as f64
            + treatment.variance.max(0.0) / treatment.n as f64)
            .sqrt();
        Ok(self.finish(ate, se))
    }

    pub(crate) fn finish(&self, ate: f64, se: f64) -> AteEstimate {
        let half_width = self.critical * se;
        let ci_low = ate - half_width;
        let ci_high = ate + half_width;

        let (z, mut p) = if se > 0.0 {
            let z = ate / se;
            (z, (2.0 * cdf_unchecked(-z.abs())).min(1.0))
        } else if ate == 0.0 {
            (0.0, 1.0)
        } else {
            (ate.signum() * f64::INFINITY, 0.0)
        };

        // p < α and "CI excludes 0" are the same event; only rounding at the
        // boundary can split them, so the interval decides.
        let excludes = ci_low > 0.0 || ci_high < 0.0;
        if excludes && p >= self.alpha {
            p = self.alpha.next_down();
        } else if !excludes && p < self.alpha {
            p = self.alpha;
        }

        AteEstimate {
            ate,
            se,
            ci_low,
            ci_high,
            z,
            p,
            alpha: self.alpha,
        }
    }
}

/// Treatment-minus-control z-test on two group summaries.
pub fn ate_estimate(
    control: &SampleSummary,
    treatment: &SampleSummary,
    alpha: f64,
) -> Result<AteEstimate> {
    ZTest::new(alpha)?.estimate(control.into(), treatment.into())
}
