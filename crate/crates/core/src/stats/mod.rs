//! Numerical building blocks: the normal distribution, the two-sample
//! z-test, the KS uniformity test and the rank/multiple-testing helpers
//! used by the audit diagnostics.
//!
//! Everything here is a pure function of its arguments.

mod ate;
mod ks;
mod multiple;
mod normal;
mod rank;
mod summary;

pub use ate::{ate_estimate, AteEstimate, GroupMoments, ZTest};
pub use ks::{kolmogorov_sf, ks_uniform_test, KsResult, ASYMPTOTIC_MIN_SAMPLES};
pub use multiple::bonferroni_adjust;
pub use normal::{inverse_normal_cdf, normal_cdf, normal_sf};
pub use rank::{average_ranks, spearman_rho};
pub use summary::{summarize, SampleSummary};
