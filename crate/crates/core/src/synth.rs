//! Seeded synthetic populations with controlled per-event outcome
//! distributions.
//!
//! A population spec is a TOML document:
//!
//! ```toml
//! users = 100000
//! seed = 42
//!
//! [[events]]
//! id = "open_app"
//! distribution = "bernoulli"
//! p = 0.3
//!
//! [[events]]
//! id = "purchase_value"
//! distribution = "zero_inflated_lognormal"
//! pi = 0.999   # probability of a zero outcome
//! mu = 0.0
//! sigma = 3.0
//! ```
//!
//! Distribution names and their parameters:
//!
//! | `distribution`            | parameters                  |
//! |---------------------------|-----------------------------|
//! | `constant`                | `value`                     |
//! | `bernoulli`               | `p` in [0, 1]               |
//! | `poisson`                 | `lambda` ≥ 0                |
//! | `normal`                  | `mu`, `sigma` > 0           |
//! | `lognormal`               | `mu`, `sigma` > 0           |
//! | `zero_inflated_lognormal` | `pi` in [0, 1], `mu`, `sigma` > 0 |
//! | `pareto`                  | `alpha` > 0, `x_min` > 0    |

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, LogNormal, Normal, Pareto, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{EventLogRecord, SparseColumn, UserMetricMatrix};
use crate::seed::{label_hash, substream, DOMAIN_EVENT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "snake_case")]
pub enum Distribution {
    Constant { value: f64 },
    Bernoulli { p: f64 },
    Poisson { lambda: f64 },
    Normal { mu: f64, sigma: f64 },
    Lognormal { mu: f64, sigma: f64 },
    ZeroInflatedLognormal { pi: f64, mu: f64, sigma: f64 },
    Pareto { alpha: f64, x_min: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Distribution::Constant { value } => value.is_finite(),
            Distribution::Bernoulli { p } => (0.0..=1.0).contains(&p),
            Distribution::Poisson { lambda } => lambda >= 0.0 && lambda.is_finite(),
            Distribution::Normal { mu, sigma } | Distribution::Lognormal { mu, sigma } => {
                mu.is_finite() && sigma > 0.0 && sigma.is_finite()
            }
            Distribution::ZeroInflatedLognormal { pi, mu, sigma } => {
                (0.0..=1.0).contains(&pi) && mu.is_finite() && sigma > 0.0 && sigma.is_finite()
            }
            Distribution::Pareto { alpha, x_min } => {
                alpha > 0.0 && alpha.is_finite() && x_min > 0.0 && x_min.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid distribution parameters {self:?}")))
        }
    }

    /// Whether outcomes are counts of logged instances (one record per
    /// unit) rather than a single valued record per user.
    pub fn is_count(&self) -> bool {
        matches!(self, Distribution::Bernoulli { .. } | Distribution::Poisson { .. })
    }

    /// Analytic (mean, variance), where both are finite.
    ///
    /// Pareto is deliberately excluded: its higher moments are infinite for
    /// the shapes of interest.
    pub fn moments(&self) -> Option<(f64, f64)> {
        match *self {
            Distribution::Constant { value } => Some((value, 0.0)),
            Distribution::Bernoulli { p } => Some((p, p * (1.0 - p))),
            Distribution::Poisson { lambda } => Some((lambda, lambda)),
            Distribution::Normal { mu, sigma } => Some((mu, sigma * sigma)),
            Distribution::Lognormal { mu, sigma } => {
                let s2 = sigma * sigma;
                Some(((mu + s2 / 2.0).exp(), (s2.exp() - 1.0) * (2.0 * mu + s2).exp()))
            }
            Distribution::ZeroInflatedLognormal { pi, mu, sigma } => {
                let s2 = sigma * sigma;
                let mean = (1.0 - pi) * (mu + s2 / 2.0).exp();
                let second = (1.0 - pi) * (2.0 * mu + 2.0 * s2).exp();
                Some((mean, second - mean * mean))
            }
            Distribution::Pareto { .. } => None,
        }
    }

    fn sample_column(&self, users: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        // Parameters are validated before sampling, so constructors succeed.
        match *self {
            Distribution::Constant { value } => vec![value; users],
            Distribution::Bernoulli { p } => (0..users)
                .map(|_| if rng.random_bool(p) { 1.0 } else { 0.0 })
                .collect(),
            Distribution::Poisson { lambda } => {
                if lambda == 0.0 {
                    return vec![0.0; users];
                }
                let d = Poisson::new(lambda).expect("validated");
                (0..users).map(|_| d.sample(rng)).collect()
            }
            Distribution::Normal { mu, sigma } => {
                let d = Normal::new(mu, sigma).expect("validated");
                (0..users).map(|_| d.sample(rng)).collect()
            }
            Distribution::Lognormal { mu, sigma } => {
                let d = LogNormal::new(mu, sigma).expect("validated");
                (0..users).map(|_| d.sample(rng)).collect()
            }
            Distribution::ZeroInflatedLognormal { pi, mu, sigma } => {
                let d = LogNormal::new(mu, sigma).expect("validated");
                (0..users)
                    .map(|_| {
                        if rng.random_bool(pi) {
                            0.0
                        } else {
                            d.sample(rng)
                        }
                    })
                    .collect()
            }
            Distribution::Pareto { alpha, x_min } => {
                let d = Pareto::new(x_min, alpha).expect("validated");
                (0..users).map(|_| d.sample(rng)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub id: String,
    #[serde(flatten)]
    pub distribution: Distribution,
}

impl EventSpec {
    pub fn new(id: impl Into<String>, distribution: Distribution) -> Self {
        EventSpec {
            id: id.into(),
            distribution,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub users: usize,
    pub seed: u64,
    #[serde(default)]
    pub events: Vec<EventSpec>,
}

impl PopulationSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: PopulationSpec =
            toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.users < 4 {
            return Err(Error::domain(format!(
                "a population needs at least 4 users, got {}",
                self.users
            )));
        }
        if self.users > u32::MAX as usize {
            return Err(Error::domain("too many users"));
        }
        let mut seen = BTreeSet::new();
        for e in &self.events {
            if e.id.is_empty() || !seen.insert(e.id.as_str()) {
                return Err(Error::domain(format!("empty or duplicate event id {:?}", e.id)));
            }
            e.distribution.validate()?;
        }
        Ok(())
    }

    /// Zero-padded user identifiers, so lexicographic order is numeric order.
    pub fn user_ids(&self) -> Vec<String> {
        let width = (self.users - 1).to_string().len();
        (0..self.users).map(|i| format!("u{i:0width$}")).collect()
    }

    /// One event's outcomes for every user.
    ///
    /// Each event draws from its own substream keyed by its id, so adding,
    /// removing or reordering events leaves the other columns untouched.
    pub fn sample_event(&self, event: &EventSpec) -> Vec<f64> {
        let mut rng = substream(self.seed, DOMAIN_EVENT, label_hash(&event.id));
        event.distribution.sample_column(self.users, &mut rng)
    }
}

/// Draws the population described by `spec`.
///
/// Observation counts follow the log the population stands for: count-like
/// events (Bernoulli, Poisson) log one record per unit, every other family
/// logs one valued record per user with a nonzero outcome.
pub fn generate(spec: &PopulationSpec) -> Result<UserMetricMatrix> {
    spec.validate()?;
    let mut events: Vec<&EventSpec> = spec.events.iter().collect();
    events.sort_by(|a, b| a.id.cmp(&b.id));

    let columns: Vec<(SparseColumn, u64)> = events
        .par_iter()
        .map(|event| {
            let dense = spec.sample_event(event);
            let entries: Vec<(u32, f64)> = dense
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(u, &v)| (u as u32, v))
                .collect();
            let observations = if event.distribution.is_count() {
                entries.iter().map(|&(_, v)| v as u64).sum()
            } else {
                entries.len() as u64
            };
            (SparseColumn { entries }, observations)
        })
        .collect();

    let (columns, counts) = columns.into_iter().unzip();
    UserMetricMatrix::from_parts(
        spec.user_ids(),
        events.iter().map(|e| e.id.clone()).collect(),
        columns,
        counts,
    )
}

/// The raw event log behind [`generate`], plus the full user universe.
///
/// Aggregating these records over the returned universe reproduces the
/// generated matrix exactly.
pub fn generate_records(spec: &PopulationSpec) -> Result<(Vec<EventLogRecord>, BTreeSet<String>)> {
    let matrix = generate(spec)?;
    let kinds: Vec<bool> = matrix
        .event_ids()
        .iter()
        .map(|id| {
            spec.events
                .iter()
                .find(|e| &e.id == id)
                .is_some_and(|e| e.distribution.is_count())
        })
        .collect();
    let mut records = Vec::new();
    for (e, event_id) in matrix.event_ids().iter().enumerate() {
        for &(u, v) in &matrix.column(e).entries {
            let user = &matrix.user_ids()[u as usize];
            if kinds[e] {
                for _ in 0..v as u64 {
                    records.push(EventLogRecord::new(user.clone(), event_id.clone(), 1.0));
                }
            } else {
                records.push(EventLogRecord::new(user.clone(), event_id.clone(), v));
            }
        }
    }
    let universe = matrix.user_ids().iter().cloned().collect();
    Ok((records, universe))
}
