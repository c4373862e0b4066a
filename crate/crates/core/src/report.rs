//! End-to-end audit: A/A resampling, per-event KS verdicts, multiple-testing
//! correction, and the frequency/skewness diagnostics, plus report output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::UserMetricMatrix;
use crate::resample::{run_aa_audit, ResamplePlan};
use crate::stats::{bonferroni_adjust, ks_uniform_test, spearman_rho, summarize};

pub const HISTOGRAM_BINS: usize = 20;
pub const DEFAULT_FLAG_THRESHOLD: f64 = 1e-4;
/// Events with fewer raw observations than this are marked `low_data`.
pub const LOW_DATA_OBSERVATIONS: u64 = 10;
const SIGNIFICANT_DIGITS: usize = 10;

/// Equal-width density histogram of one event's per-user outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeHistogram {
    /// `HISTOGRAM_BINS + 1` ascending bin edges.
    pub edges: Vec<f64>,
    /// Density per bin; integrates to 1 over the edges.
    pub density: Vec<f64>,
}

impl OutcomeHistogram {
    fn new(values: &[f64]) -> Self {
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let width = (hi - lo) / HISTOGRAM_BINS as f64;
        let mut counts = [0u64; HISTOGRAM_BINS];
        for &v in values {
            let bin = (((v - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
            counts[bin] += 1;
        }
        let total = values.len() as f64;
        OutcomeHistogram {
            edges: (0..=HISTOGRAM_BINS).map(|i| lo + width * i as f64).collect(),
            density: counts.iter().map(|&c| c as f64 / (total * width)).collect(),
        }
    }
}

fn pvalue_histogram(pvalues: &[f64]) -> Vec<u64> {
    let mut bins = vec![0u64; HISTOGRAM_BINS];
    for &p in pvalues {
        let bin = ((p * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        bins[bin] += 1;
    }
    bins
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventAudit {
    pub event_id: String,
    /// Users taking part in this event's comparisons.
    pub n_users: usize,
    /// Raw logged instances of the event.
    pub n_observations: u64,
    /// Same as `n_observations`; the x-axis of the frequency diagnostic.
    pub frequency: f64,
    pub mean_outcome: f64,
    pub skewness: f64,
    pub ks_d: f64,
    pub ks_p: f64,
    pub ks_p_bonferroni: f64,
    /// Fraction of A/A p-values below alpha.
    pub empirical_type1_rate: f64,
    /// Counts of A/A p-values in 20 equal-width bins over [0, 1].
    pub pvalue_histogram: Vec<u64>,
    pub outcome_histogram: OutcomeHistogram,
    /// Fewer than `LOW_DATA_OBSERVATIONS` observations.
    pub low_data: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanEcho {
    pub iterations: usize,
    pub seed: u64,
    pub alpha: f64,
    pub split_fraction: f64,
    pub include_zero_users: bool,
}

impl From<&ResamplePlan> for PlanEcho {
    fn from(p: &ResamplePlan) -> Self {
        PlanEcho {
            iterations: p.iterations,
            seed: p.master_seed,
            alpha: p.alpha,
            split_fraction: p.split_fraction,
            include_zero_users: p.include_zero_users,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub events: Vec<EventAudit>,
    /// Spearman ρ between observation count and D; absent with < 2 events.
    pub spearman_frequency_vs_d: Option<f64>,
    /// Spearman ρ between outcome skewness and D; absent with < 2 events.
    pub spearman_skewness_vs_d: Option<f64>,
    pub plan: PlanEcho,
    pub flag_threshold: f64,
    /// Events whose Bonferroni-adjusted KS p-value is below the threshold,
    /// most significant first.
    pub flagged_events: Vec<String>,
}

impl AuditReport {
    pub fn event(&self, event_id: &str) -> Option<&EventAudit> {
        self.events.iter().find(|e| e.event_id == event_id)
    }

    pub fn is_flagged(&self, event_id: &str) -> bool {
        self.flagged_events.iter().any(|e| e == event_id)
    }

    /// The report as it reads back after a JSON round trip, with every
    /// float rounded to 10 significant digits.
    pub fn rounded(&self) -> Self {
        let value = rounded_value(serde_json::to_value(self).expect("report serializes"));
        serde_json::from_value(value).expect("rounded report deserializes")
    }

    pub fn to_json(&self) -> String {
        let value = rounded_value(serde_json::to_value(self).expect("report serializes"));
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

fn round_significant(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses")
}

fn rounded_value(v: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_significant(n.as_f64().expect("f64"));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(rounded_value).collect()),
        Value::Object(map) => {
            Value::Object(map.into_iter().map(|(k, v)| (k, rounded_value(v))).collect())
        }
        other => other,
    }
}

/// Runs the A/A audit over `matrix` and assembles the per-event verdicts.
pub fn audit(matrix: &UserMetricMatrix, plan: &ResamplePlan, flag_threshold: f64) -> Result<AuditReport> {
    if !(0.0..=1.0).contains(&flag_threshold) {
        return Err(Error::Config(format!(
            "flag threshold must lie in [0, 1], got {flag_threshold}"
        )));
    }
    let samples = run_aa_audit(matrix, plan)?;

    let partial: Vec<(EventAudit, f64)> = samples
        .par_iter()
        .enumerate()
        .map(|(e, sample)| {
            let dense = matrix.dense_column(e);
            let population: Vec<f64> = if plan.include_zero_users {
                dense
            } else {
                dense.into_iter().filter(|&v| v != 0.0).collect()
            };
            let summary = summarize(&population)?;
            let ks = ks_uniform_test(&sample.pvalues)?;
            let n_observations = matrix.observation_counts()[e];
            let audit = EventAudit {
                event_id: sample.event_id.clone(),
                n_users: summary.n,
                n_observations,
                frequency: n_observations as f64,
                mean_outcome: summary.mean,
                skewness: summary.skewness,
                ks_d: ks.d,
                ks_p: ks.p,
                ks_p_bonferroni: ks.p,
                empirical_type1_rate: sample.reject_count_at_alpha as f64
                    / sample.pvalues.len() as f64,
                pvalue_histogram: pvalue_histogram(&sample.pvalues),
                outcome_histogram: OutcomeHistogram::new(&population),
                low_data: n_observations < LOW_DATA_OBSERVATIONS,
            };
            Ok((audit, ks.p))
        })
        .collect::<Result<_>>()?;

    let raw_p: Vec<f64> = partial.iter().map(|(_, p)| *p).collect();
    let adjusted = bonferroni_adjust(&raw_p)?;
    let mut events: Vec<EventAudit> = partial.into_iter().map(|(a, _)| a).collect();
    for (event, adj) in events.iter_mut().zip(adjusted) {
        event.ks_p_bonferroni = adj;
    }

    let d: Vec<f64> = events.iter().map(|e| e.ks_d).collect();
    let (spearman_frequency_vs_d, spearman_skewness_vs_d) = if events.len() >= 2 {
        // Rank-based, so the log scale of the frequency axis is immaterial.
        let freq: Vec<f64> = events.iter().map(|e| e.frequency).collect();
        let skew: Vec<f64> = events.iter().map(|e| e.skewness).collect();
        (Some(spearman_rho(&freq, &d)?), Some(spearman_rho(&skew, &d)?))
    } else {
        (None, None)
    };

    let mut flagged: Vec<&EventAudit> = events
        .iter()
        .filter(|e| e.ks_p_bonferroni < flag_threshold)
        .collect();
    flagged.sort_by(|a, b| a.ks_p.total_cmp(&b.ks_p).then_with(|| a.event_id.cmp(&b.event_id)));
    let flagged_events = flagged.into_iter().map(|e| e.event_id.clone()).collect();

    Ok(AuditReport {
        events,
        spearman_frequency_vs_d,
        spearman_skewness_vs_d,
        plan: plan.into(),
        flag_threshold,
        flagged_events,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

impl ReportFormat {
    /// Format implied by a file extension, defaulting to JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => ReportFormat::Csv,
            _ => ReportFormat::Json,
        }
    }
}

fn fmt_float(x: f64) -> String {
    round_significant(x).to_string()
}

const CSV_HEADER: &str = "event_id,n_users,n_observations,frequency,mean_outcome,skewness,\
ks_d,ks_p,ks_p_bonferroni,empirical_type1_rate,low_data,flagged";

/// One row per event with every scalar field of [`EventAudit`].
pub fn report_csv(report: &AuditReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for e in &report.events {
        let row = [
            e.event_id.clone(),
            e.n_users.to_string(),
            e.n_observations.to_string(),
            fmt_float(e.frequency),
            fmt_float(e.mean_outcome),
            fmt_float(e.skewness),
            fmt_float(e.ks_d),
            fmt_float(e.ks_p),
            fmt_float(e.ks_p_bonferroni),
            fmt_float(e.empirical_type1_rate),
            e.low_data.to_string(),
            report.is_flagged(&e.event_id).to_string(),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Plot-ready tables: `fig1.csv` (D and KS p per event), `fig2.csv`
/// (observations against D) and `fig3.csv` (outcome density histograms with
/// skewness).
pub fn plot_tables(report: &AuditReport) -> [(&'static str, String); 3] {
    let mut fig1 = String::from("event_id,d,ks_p\n");
    let mut fig2 = String::from("event_id,n_observations,d\n");
    let mut fig3 = String::from("event_id,bin_low,bin_high,density,skewness\n");
    for e in &report.events {
        fig1.push_str(&format!("{},{},{}\n", e.event_id, fmt_float(e.ks_d), fmt_float(e.ks_p)));
        fig2.push_str(&format!("{},{},{}\n", e.event_id, e.n_observations, fmt_float(e.ks_d)));
        let h = &e.outcome_histogram;
        for (i, density) in h.density.iter().enumerate() {
            fig3.push_str(&format!(
                "{},{},{},{},{}\n",
                e.event_id,
                fmt_float(h.edges[i]),
                fmt_float(h.edges[i + 1]),
                fmt_float(*density),
                fmt_float(e.skewness)
            ));
        }
    }
    [("fig1.csv", fig1), ("fig2.csv", fig2), ("fig3.csv", fig3)]
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Writes the report to `destination` and the plot tables to `plots_dir`
/// (the destination's directory when `None`).
pub fn emit_report(
    report: &AuditReport,
    format: ReportFormat,
    destination: &Path,
    plots_dir: Option<&Path>,
) -> Result<()> {
    let body = match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Csv => report_csv(report),
    };
    write_file(destination, &body)?;

    let dir: PathBuf = match plots_dir {
        Some(d) => d.to_path_buf(),
        None => destination
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for (name, contents) in plot_tables(report) {
        write_file(&dir.join(name), &contents)?;
    }
    Ok(())
}

/// Reads a JSON report written by [`emit_report`].
pub fn load_report(path: &Path) -> Result<AuditReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    AuditReport::from_json(&text)
}

/// Human-readable summary: flagged events and both rank correlations.
pub fn diagnose(report: &AuditReport) -> String {
    let mut out = String::new();
    let rho = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |r| format!("{r:.4}"));
    out.push_str(&format!(
        "{} events audited over {} A/A iterations (alpha {}, seed {})\n",
        report.events.len(),
        report.plan.iterations,
        report.plan.alpha,
        report.plan.seed
    ));
    out.push_str(&format!(
        "spearman rho, observations vs D: {}\n",
        rho(report.spearman_frequency_vs_d)
    ));
    out.push_str(&format!(
        "spearman rho, skewness vs D:     {}\n",
        rho(report.spearman_skewness_vs_d)
    ));
    if report.flagged_events.is_empty() {
        out.push_str(&format!(
            "no events flagged at Bonferroni-adjusted KS p < {}\n",
            report.flag_threshold
        ));
    } else {
        out.push_str(&format!(
            "{} flagged at Bonferroni-adjusted KS p < {}:\n",
            report.flagged_events.len(),
            report.flag_threshold
        ));
        for id in &report.flagged_events {
            if let Some(e) = report.event(id) {
                out.push_str(&format!(
                    "  {:<24} D = {:.4}  KS p = {:.3e}  adj p = {:.3e}  type-I = {:.4}  skew = {:.2}{}\n",
                    e.event_id,
                    e.ks_d,
                    e.ks_p,
                    e.ks_p_bonferroni,
                    e.empirical_type1_rate,
                    e.skewness,
                    if e.low_data { "  (low data)" } else { "" }
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_rounding() {
        assert_eq!(round_significant(0.123_456_789_012_34), 0.123_456_789_0);
        assert_eq!(round_significant(1_234.567_890_123), 1_234.567_890);
        assert_eq!(round_significant(0.0), 0.0);
        assert_eq!(round_significant(-2.5e-17), -2.5e-17);
    }

    #[test]
    fn pvalue_bins() {
        let h = pvalue_histogram(&[0.0, 0.049, 0.05, 0.5, 0.999, 1.0]);
        assert_eq!(h.len(), HISTOGRAM_BINS);
        assert_eq!(h[0], 2);
        assert_eq!(h[1], 1);
        assert_eq!(h[10], 1);
        assert_eq!(h[19], 2);
    }

    #[test]
    fn outcome_histogram_integrates_to_one() {
        let h = OutcomeHistogram::new(&[0.0, 0.0, 1.0, 3.0, 10.0]);
        let area: f64 = h
            .density
            .iter()
            .zip(h.edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum();
        assert!((area - 1.0).abs() < 1e-12);
        let flat = OutcomeHistogram::new(&[2.0, 2.0]);
        assert_eq!(flat.edges.len(), HISTOGRAM_BINS + 1);
        assert!(flat.edges[0] < 2.0 && 2.0 < flat.edges[HISTOGRAM_BINS]);
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(ReportFormat::from_path(Path::new("r.CSV")), ReportFormat::Csv);
        assert_eq!(ReportFormat::from_path(Path::new("r.json")), ReportFormat::Json);
        assert_eq!(ReportFormat::from_path(Path::new("r")), ReportFormat::Json);
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
