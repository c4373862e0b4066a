//! Empirical checks of the normality assumption behind z-test analysis of
//! A/B tests.
//!
//! For every metric in a user population, the population is split into two
//! random halves many times over. Because both halves receive the same
//! treatment, the true effect is zero, and if the sampling distribution of
//! the difference in means is close enough to normal the resulting z-test
//! p-values are uniform on [0, 1]. A one-sample Kolmogorov-Smirnov test on
//! those p-values then flags metrics whose confidence intervals and p-values
//! cannot be trusted at the available sample size.
//!
//! ```
//! use aa_guard::{audit, synth, ResamplePlan};
//!
//! let population = synth::PopulationSpec {
//!     users: 2_000,
//!     seed: 7,
//!     events: vec![synth::EventSpec::new(
//!         "open",
//!         synth::Distribution::Bernoulli { p: 0.3 },
//!     )],
//! };
//! let matrix = synth::generate(&population)?;
//! let report = audit(&matrix, &ResamplePlan::new(200, 1), 1e-4)?;
//! assert_eq!(report.events[0].pvalue_histogram.iter().sum::<u64>(), 200);
//! # Ok::<(), aa_guard::Error>(())
//! ```

pub mod error;
pub mod ingest;
pub mod report;
pub mod resample;
pub mod seed;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use ingest::{aggregate, load_events, EventLogRecord, InputFormat, UserMetricMatrix};
pub use report::{audit, emit_report, AuditReport, EventAudit, ReportFormat};
pub use resample::{run_aa_audit, split_population, PvalueSample, ResamplePlan};
pub use stats::{ate_estimate, ks_uniform_test, summarize, AteEstimate, KsResult, SampleSummary};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/z-test.md")]
    mod z_test {}
    #[doc = include_str!("../../../book/src/ks.md")]
    mod ks {}
    #[doc = include_str!("../../../book/src/resampling.md")]
    mod resampling {}
    #[doc = include_str!("../../../book/src/ingestion.md")]
    mod ingestion {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/reports.md")]
    mod reports {}
}
