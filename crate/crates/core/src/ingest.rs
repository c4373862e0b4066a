//! Raw event-log ingestion and aggregation into a per-user × per-event
//! outcome matrix.
//!
//! Two input formats are accepted:
//!
//! * CSV with header `user_id,event_type,value` (the `value` column, or an
//!   individual value cell, may be omitted and defaults to 1). Fields are
//!   not quoted; commas inside fields are unsupported. A file without the
//!   header line is read as data.
//! * JSONL, one object per line with keys `user_id`, `event_type` and an
//!   optional numeric `value`.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLogRecord {
    pub user_id: String,
    pub event_type: String,
    #[serde(default = "default_value")]
    pub value: f64,
}

fn default_value() -> f64 {
    1.0
}

impl EventLogRecord {
    pub fn new(user_id: impl Into<String>, event_type: impl Into<String>, value: f64) -> Self {
        EventLogRecord {
            user_id: user_id.into(),
            event_type: event_type.into(),
            value,
        }
    }

    fn validate(&self, line: usize) -> Result<()> {
        let fail = |message: &str| {
            Err(Error::Parse {
                line,
                message: message.to_string(),
            })
        };
        if self.user_id.is_empty() {
            return fail("empty user_id");
        }
        if self.event_type.is_empty() {
            return fail("empty event_type");
        }
        if !self.value.is_finite() {
            return fail("non-finite value");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Csv,
    Jsonl,
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(InputFormat::Csv),
            "jsonl" | "ndjson" => Ok(InputFormat::Jsonl),
            other => Err(Error::Config(format!("unknown input format {other:?}"))),
        }
    }
}

/// Reads every record from `source`. Line numbers in errors are 1-based.
pub fn load_events<R: Read>(source: R, format: InputFormat) -> Result<Vec<EventLogRecord>> {
    match format {
        InputFormat::Csv => load_csv(source),
        InputFormat::Jsonl => load_jsonl(source),
    }
}

fn load_csv<R: Read>(source: R) -> Result<Vec<EventLogRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(i + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(i + 1, |p| p.line() as usize);
        if i == 0 && row.get(0) == Some("user_id") && row.get(1) == Some("event_type") {
            continue;
        }
        if row.len() == 1 && row.get(0) == Some("") {
            continue;
        }
        if row.len() < 2 || row.len() > 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 or 3 fields, found {}", row.len()),
            });
        }
        let value = match row.get(2) {
            None | Some("") => 1.0,
            Some(raw) => raw.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("invalid value {raw:?}"),
            })?,
        };
        let record = EventLogRecord::new(&row[0], &row[1], value);
        record.validate(line)?;
        records.push(record);
    }
    Ok(records)
}

fn load_jsonl<R: Read>(source: R) -> Result<Vec<EventLogRecord>> {
    let reader = std::io::BufReader::new(source);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EventLogRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        record.validate(line_no)?;
        records.push(record);
    }
    Ok(records)
}

/// One event's outcomes, stored sparsely: only users with a nonzero
/// outcome appear, sorted by user index.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseColumn {
    pub entries: Vec<(u32, f64)>,
}

impl SparseColumn {
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }
}

/// Aggregated outcomes for a fixed user population.
///
/// Users and events are kept in lexicographic order of their identifiers,
/// so the matrix does not depend on the order records arrived in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserMetricMatrix {
    user_ids: Vec<String>,
    event_ids: Vec<String>,
    columns: Vec<SparseColumn>,
    observation_counts: Vec<u64>,
}

impl UserMetricMatrix {
    /// Builds a matrix from parts, checking the shape and ordering
    /// invariants.
    pub fn from_parts(
        user_ids: Vec<String>,
        event_ids: Vec<String>,
        columns: Vec<SparseColumn>,
        observation_counts: Vec<u64>,
    ) -> Result<Self> {
        if columns.len() != event_ids.len() || observation_counts.len() != event_ids.len() {
            return Err(Error::Inconsistent(
                "column and observation count lists must match the event list".into(),
            ));
        }
        if user_ids.len() > u32::MAX as usize {
            return Err(Error::Inconsistent("too many users".into()));
        }
        if !user_ids.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Inconsistent(
                "user identifiers must be unique and sorted".into(),
            ));
        }
        let unique: BTreeSet<&String> = event_ids.iter().collect();
        if unique.len() != event_ids.len() {
            return Err(Error::Inconsistent("duplicate event identifiers".into()));
        }
        for (e, col) in columns.iter().enumerate() {
            let sorted = col.entries.windows(2).all(|w| w[0].0 < w[1].0);
            let in_range = col.entries.iter().all(|&(u, v)| {
                (u as usize) < user_ids.len() && v.is_finite() && v != 0.0
            });
            if !sorted || !in_range {
                return Err(Error::Inconsistent(format!(
                    "column {:?} has unsorted, out-of-range, zero or non-finite entries",
                    event_ids[e]
                )));
            }
        }
        Ok(UserMetricMatrix {
            user_ids,
            event_ids,
            columns,
            observation_counts,
        })
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_events(&self) -> usize {
        self.event_ids.len()
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn event_ids(&self) -> &[String] {
        &self.event_ids
    }

    pub fn observation_counts(&self) -> &[u64] {
        &self.observation_counts
    }

    pub fn column(&self, event: usize) -> &SparseColumn {
        &self.columns[event]
    }

    pub fn event_index(&self, event_id: &str) -> Option<usize> {
        self.event_ids.iter().position(|e| e == event_id)
    }

    pub fn user_index(&self, user_id: &str) -> Option<usize> {
        self.user_ids
            .binary_search_by(|u| u.as_str().cmp(user_id))
            .ok()
    }

    /// Outcome of `user` for `event`, zero when the user never logged it.
    pub fn get(&self, user: usize, event: usize) -> f64 {
        let entries = &self.columns[event].entries;
        entries
            .binary_search_by_key(&(user as u32), |&(u, _)| u)
            .map_or(0.0, |i| entries[i].1)
    }

    /// Dense copy of one event column, indexed by user.
    pub fn dense_column(&self, event: usize) -> Vec<f64> {
        let mut dense = vec![0.0; self.n_users()];
        for &(u, v) in &self.columns[event].entries {
            dense[u as usize] = v;
        }
        dense
    }

    /// Replaces every nonzero outcome with 1: "did the user log this event".
    pub fn to_indicator(&self) -> Self {
        let columns = self
            .columns
            .iter()
            .map(|c| SparseColumn {
                entries: c.entries.iter().map(|&(u, _)| (u, 1.0)).collect(),
            })
            .collect();
        UserMetricMatrix {
            columns,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: UserMetricMatrix = serde_json::from_str(s).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        Self::from_parts(
            raw.user_ids,
            raw.event_ids,
            raw.columns,
            raw.observation_counts,
        )
    }
}

/// Sums record values per (user, event).
///
/// With a `universe`, every listed user gets a row even without records, so
/// rare events keep their zero-outcome users in the denominator. Every user
/// seen in `records` must then be part of the universe.
///
/// Per-cell sums are taken in a canonical order, which makes the result
/// bit-identical under any permutation of `records`.
pub fn aggregate(
    records: &[EventLogRecord],
    universe: Option<&BTreeSet<String>>,
) -> Result<UserMetricMatrix> {
    let observed: BTreeSet<&str> = records.iter().map(|r| r.user_id.as_str()).collect();
    let user_ids: Vec<String> = match universe {
        Some(universe) => {
            if let Some(stray) = observed.iter().find(|u| !universe.contains(**u)) {
                return Err(Error::Inconsistent(format!(
                    "user {stray:?} appears in the log but not in the user universe"
                )));
            }
            universe.iter().cloned().collect()
        }
        None => observed.iter().map(|s| s.to_string()).collect(),
    };
    let event_ids: Vec<String> = records
        .iter()
        .map(|r| r.event_type.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_string)
        .collect();

    let user_index: HashMap<&str, u32> = user_ids
        .iter()
        .enumerate()
        .map(|(i, u)| (u.as_str(), i as u32))
        .collect();
    let event_index: HashMap<&str, usize> = event_ids
        .iter()
        .enumerate()
        .map(|(i, e)| (e.as_str(), i))
        .collect();

    let mut cells: Vec<(usize, u32, f64)> = records
        .iter()
        .map(|r| {
            (
                event_index[r.event_type.as_str()],
                user_index[r.user_id.as_str()],
                r.value,
            )
        })
        .collect();
    cells.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));

    let mut columns = vec![SparseColumn::default(); event_ids.len()];
    let mut observation_counts = vec![0u64; event_ids.len()];
    let mut i = 0;
    while i < cells.len() {
        let (e, u, _) = cells[i];
        let mut sum = 0.0;
        while i < cells.len() && cells[i].0 == e && cells[i].1 == u {
            sum += cells[i].2;
            observation_counts[e] += 1;
            i += 1;
        }
        if sum != 0.0 {
            columns[e].entries.push((u, sum));
        }
    }

    UserMetricMatrix::from_parts(user_ids, event_ids, columns, observation_counts)
}

/// Writes records as CSV with the `user_id,event_type,value` header.
///
/// Values are printed in their shortest round-trip form, so reading the
/// output back with [`load_events`] reproduces `records` exactly.
pub fn write_events_csv<W: Write>(records: &[EventLogRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "user_id,event_type,value")?;
    for r in records {
        writeln!(out, "{},{},{}", r.user_id, r.event_type, r.value)?;
    }
    out.flush()
}

/// Reads a user universe file: one identifier per line, blank lines ignored.
pub fn read_universe<R: Read>(source: R) -> Result<BTreeSet<String>> {
    let reader = std::io::BufReader::new(source);
    let mut users = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let id = line.trim();
        if !id.is_empty() {
            users.insert(id.to_string());
        }
    }
    Ok(users)
}
