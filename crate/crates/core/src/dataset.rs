//! In-memory survival data, CSV ingestion, cause derivation and splitting.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Symbols accepted in a status column.
pub const STATUS_SYMBOLS: [&str; 6] = ["1", "0", "event", "censored", "TRUE", "FALSE"];

const MISSING: [&str; 3] = ["", "NA", "NaN"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Event,
    Censored,
}

impl Status {
    pub fn parse(symbol: &str) -> Option<Status> {
        match symbol {
            "1" | "event" | "TRUE" => Some(Status::Event),
            "0" | "censored" | "FALSE" => Some(Status::Censored),
            _ => None,
        }
    }
}

/// One observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub covariates: Vec<f64>,
    pub time: f64,
    pub status: Status,
    /// Cause of failure; only set on event records of competing-risk data.
    pub cause: Option<u32>,
}

impl SurvivalRecord {
    pub fn new(covariates: Vec<f64>, time: f64, status: Status) -> Self {
        SurvivalRecord {
            covariates,
            time,
            status,
            cause: None,
        }
    }

    pub fn with_cause(covariates: Vec<f64>, time: f64, cause: u32) -> Self {
        SurvivalRecord {
            covariates,
            time,
            status: Status::Event,
            cause: Some(cause),
        }
    }

    pub fn is_event(&self) -> bool {
        self.status == Status::Event
    }
}

/// How a covariate column was turned into reals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureEncoding {
    Numeric,
    /// Level `i` of `levels` is encoded as `i as f64`.
    Categorical { levels: Vec<String> },
}

impl FeatureEncoding {
    /// Encodes one raw cell; `None` for missing or unknown values.
    pub fn encode(&self, raw: &str) -> Option<f64> {
        let raw = raw.trim();
        if MISSING.contains(&raw) {
            return None;
        }
        match self {
            FeatureEncoding::Numeric => raw.parse::<f64>().ok().filter(|v| v.is_finite()),
            FeatureEncoding::Categorical { levels } => {
                levels.iter().position(|l| l == raw).map(|i| i as f64)
            }
        }
    }

    fn decode(&self, value: f64) -> String {
        match self {
            FeatureEncoding::Numeric => format!("{value}"),
            FeatureEncoding::Categorical { levels } => levels
                .get(value as usize)
                .cloned()
                .unwrap_or_else(|| format!("{value}")),
        }
    }
}

/// An immutable collection of survival records with a common covariate layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<SurvivalRecord>,
    feature_names: Vec<String>,
    encodings: Vec<FeatureEncoding>,
    competing_risk: bool,
    causes: BTreeSet<u32>,
    time_units: Option<String>,
    dropped_rows: usize,
}

impl Dataset {
    /// Builds a dataset of numeric covariates, checking the record invariants.
    pub fn new(
        records: Vec<SurvivalRecord>,
        feature_names: Vec<String>,
        competing_risk: bool,
    ) -> Result<Self> {
        let encodings = vec![FeatureEncoding::Numeric; feature_names.len()];
        Self::with_encodings(records, feature_names, encodings, competing_risk)
    }

    pub fn with_encodings(
        records: Vec<SurvivalRecord>,
        feature_names: Vec<String>,
        encodings: Vec<FeatureEncoding>,
        competing_risk: bool,
    ) -> Result<Self> {
        let p = feature_names.len();
        if encodings.len() != p {
            return Err(Error::validation(format!(
                "{} encodings for {p} features",
                encodings.len()
            )));
        }
        let mut causes = BTreeSet::new();
        for (i, r) in records.iter().enumerate() {
            if r.covariates.len() != p {
                return Err(Error::validation(format!(
                    "record {i} has {} covariates, expected {p}",
                    r.covariates.len()
                )));
            }
            check_time(r.time).map_err(|m| Error::validation(format!("record {i}: {m}")))?;
            match (r.status, r.cause, competing_risk) {
                (Status::Event, Some(c), true) => {
                    causes.insert(c);
                }
                (Status::Event, None, true) => {
                    return Err(Error::validation(format!(
                        "record {i} is an event without a cause in competing-risk data"
                    )))
                }
                (Status::Censored, Some(_), _) => {
                    return Err(Error::validation(format!(
                        "record {i} is censored but carries a cause"
                    )))
                }
                (_, Some(_), false) => {
                    return Err(Error::validation(format!(
                        "record {i} carries a cause but the dataset is not competing-risk"
                    )))
                }
                _ => {}
            }
        }
        Ok(Dataset {
            records,
            feature_names,
            encodings,
            competing_risk,
            causes,
            time_units: None,
            dropped_rows: 0,
        })
    }

    pub fn with_time_units(mut self, units: Option<String>) -> Self {
        self.time_units = units;
        self
    }

    pub fn records(&self) -> &[SurvivalRecord] {
        &self.records
    }

    pub fn record(&self, i: usize) -> &SurvivalRecord {
        &self.records[i]
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn encodings(&self) -> &[FeatureEncoding] {
        &self.encodings
    }

    pub fn is_competing_risk(&self) -> bool {
        self.competing_risk
    }

    pub fn causes(&self) -> &BTreeSet<u32> {
        &self.causes
    }

    pub fn time_units(&self) -> Option<&str> {
        self.time_units.as_deref()
    }

    /// Rows dropped at load time because of missing covariates.
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn n_events(&self) -> usize {
        self.records.iter().filter(|r| r.is_event()).count()
    }

    /// Sorted distinct event times.
    pub fn event_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.is_event())
            .map(|r| r.time)
            .collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    /// Rejects data without any event.
    pub fn require_events(&self, at_least: usize) -> Result<()> {
        let n = self.n_events();
        if n < at_least {
            return Err(Error::domain(format!(
                "need at least {at_least} event record(s), found {n}"
            )));
        }
        Ok(())
    }

    /// Per-feature means, used as the default covariate profile.
    pub fn covariate_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_features()];
        for r in &self.records {
            for (s, x) in sums.iter_mut().zip(&r.covariates) {
                *s += x;
            }
        }
        let n = self.len().max(1) as f64;
        sums.into_iter().map(|s| s / n).collect()
    }

    /// The records at `indices`, in that order. Declared causes are kept.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            encodings: self.encodings.clone(),
            competing_risk: self.competing_risk,
            causes: self.causes.clone(),
            time_units: self.time_units.clone(),
            dropped_rows: 0,
        }
    }

    /// Replaces the records, keeping layout and metadata.
    pub(crate) fn with_records(&self, records: Vec<SurvivalRecord>, competing_risk: bool) -> Dataset {
        let causes = if competing_risk {
            self.causes.clone()
        } else {
            BTreeSet::new()
        };
        Dataset {
            records,
            feature_names: self.feature_names.clone(),
            encodings: self.encodings.clone(),
            competing_risk,
            causes,
            time_units: self.time_units.clone(),
            dropped_rows: self.dropped_rows,
        }
    }

    /// Schema that reads back what [`Dataset::write_csv`] produces.
    pub fn csv_schema(&self) -> ColumnSchema {
        ColumnSchema {
            time: "time".into(),
            status: "status".into(),
            cause: self.competing_risk.then(|| "cause".to_string()),
            covariates: self.feature_names.clone(),
            ignore: Vec::new(),
            time_units: self.time_units.clone(),
        }
    }

    /// Writes covariates, `time`, `status` (1/0) and, for competing-risk
    /// data, `cause`. Categorical columns are written as their labels.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = self.feature_names.clone();
        header.push("time".into());
        header.push("status".into());
        if self.competing_risk {
            header.push("cause".into());
        }
        w.write_record(&header).map_err(csv_write_error)?;
        for r in &self.records {
            let mut row: Vec<String> = r
                .covariates
                .iter()
                .zip(&self.encodings)
                .map(|(x, e)| e.decode(*x))
                .collect();
            row.push(format!("{}", r.time));
            row.push(if r.is_event() { "1" } else { "0" }.into());
            if self.competing_risk {
                row.push(r.cause.map(|c| c.to_string()).unwrap_or_default());
            }
            w.write_record(&row).map_err(csv_write_error)?;
        }
        w.flush().map_err(|e| Error::validation(format!("write failed: {e}")))?;
        Ok(())
    }
}

fn csv_write_error(e: csv::Error) -> Error {
    Error::validation(format!("write failed: {e}"))
}

fn check_time(t: f64) -> std::result::Result<(), String> {
    if !t.is_finite() || t <= 0.0 {
        return Err(format!("time must be positive and finite, got {t}"));
    }
    Ok(())
}

/// Maps CSV columns to roles.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub time: String,
    pub status: String,
    pub cause: Option<String>,
    /// Covariate columns in order; empty means every remaining column.
    pub covariates: Vec<String>,
    /// Columns excluded when `covariates` is empty.
    pub ignore: Vec<String>,
    pub time_units: Option<String>,
}

impl ColumnSchema {
    pub fn new(time: &str, status: &str) -> Self {
        ColumnSchema {
            time: time.into(),
            status: status.into(),
            ..Default::default()
        }
    }
}

/// Reads a dataset from a CSV file.
pub fn load_csv(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, schema)
}

struct RawTable {
    header: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

fn read_raw<R: Read>(input: R) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_error(&e, 1))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| parse_error(&e, 0))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        rows.push((line, rec.iter().map(|s| s.trim().to_string()).collect()));
    }
    Ok(RawTable { header, rows })
}

fn parse_error(e: &csv::Error, fallback: u64) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn column_index(header: &[String], name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::config(format!("column '{name}' not found in header")))
}

/// Reads a dataset from any CSV source.
///
/// Records keep file order. A covariate column is categorical when any
/// present value fails to parse as a finite real; its levels are numbered
/// by first appearance among the kept rows. Rows with a missing covariate
/// are dropped and counted; rows with a missing time or status are errors.
pub fn read_csv<R: Read>(input: R, schema: &ColumnSchema) -> Result<Dataset> {
    let raw = read_raw(input)?;
    let time_col = column_index(&raw.header, &schema.time)?;
    let status_col = column_index(&raw.header, &schema.status)?;
    let cause_col = schema
        .cause
        .as_deref()
        .map(|c| column_index(&raw.header, c))
        .transpose()?;

    let covariate_names: Vec<String> = if schema.covariates.is_empty() {
        raw.header
            .iter()
            .enumerate()
            .filter(|(i, h)| {
                *i != time_col
                    && *i != status_col
                    && Some(*i) != cause_col
                    && !schema.ignore.contains(h)
            })
            .map(|(_, h)| h.clone())
            .collect()
    } else {
        schema.covariates.clone()
    };
    let covariate_cols: Vec<usize> = covariate_names
        .iter()
        .map(|n| column_index(&raw.header, n))
        .collect::<Result<_>>()?;

    struct Pending {
        cells: Vec<String>,
        time: f64,
        status: Status,
        cause: Option<u32>,
    }
    let mut pending = Vec::with_capacity(raw.rows.len());
    let mut dropped = 0usize;
    for (line, row) in &raw.rows {
        let line = *line;
        let cell = |i: usize| row.get(i).map(String::as_str).unwrap_or("");
        let time_raw = cell(time_col);
        if MISSING.contains(&time_raw) {
            return Err(Error::validation(format!("line {line}: missing time")));
        }
        let time: f64 = time_raw.parse().map_err(|_| Error::Parse {
            line,
            message: format!("time '{time_raw}' is not a number"),
        })?;
        check_time(time).map_err(|m| Error::validation(format!("line {line}: {m}")))?;
        let status_raw = cell(status_col);
        if MISSING.contains(&status_raw) {
            return Err(Error::validation(format!("line {line}: missing status")));
        }
        let status = Status::parse(status_raw).ok_or_else(|| {
            Error::validation(format!(
                "line {line}: unknown status '{status_raw}', accepted symbols are {}",
                STATUS_SYMBOLS.join(", ")
            ))
        })?;
        let cause = match cause_col {
            None => None,
            Some(c) => parse_cause(cell(c), status, line)?,
        };
        let cells: Vec<String> = covariate_cols.iter().map(|&c| cell(c).to_string()).collect();
        if cells.iter().any(|c| MISSING.contains(&c.as_str())) {
            dropped += 1;
            continue;
        }
        pending.push(Pending {
            cells,
            time,
            status,
            cause,
        });
    }

    let encodings: Vec<FeatureEncoding> = (0..covariate_cols.len())
        .map(|j| {
            let numeric = pending
                .iter()
                .all(|p| p.cells[j].parse::<f64>().map(f64::is_finite).unwrap_or(false));
            if numeric {
                FeatureEncoding::Numeric
            } else {
                let mut levels: Vec<String> = Vec::new();
                for p in &pending {
                    if !levels.contains(&p.cells[j]) {
                        levels.push(p.cells[j].clone());
                    }
                }
                FeatureEncoding::Categorical { levels }
            }
        })
        .collect();

    let records: Vec<SurvivalRecord> = pending
        .into_iter()
        .map(|p| SurvivalRecord {
            covariates: p
                .cells
                .iter()
                .zip(&encodings)
                .map(|(c, e)| e.encode(c).expect("encoding built from these rows"))
                .collect(),
            time: p.time,
            status: p.status,
            cause: p.cause,
        })
        .collect();

    let mut data =
        Dataset::with_encodings(records, covariate_names, encodings, cause_col.is_some())?;
    data.time_units = schema.time_units.clone();
    data.dropped_rows = dropped;
    Ok(data)
}

fn parse_cause(raw: &str, status: Status, line: u64) -> Result<Option<u32>> {
    let missing = MISSING.contains(&raw) || raw == "0";
    match status {
        Status::Censored if missing => Ok(None),
        Status::Censored => Err(Error::validation(format!(
            "line {line}: censored row carries cause '{raw}'"
        ))),
        Status::Event if missing => Err(Error::validation(format!(
            "line {line}: event row without a cause"
        ))),
        Status::Event => raw
            .parse::<u32>()
            .map(Some)
            .map_err(|_| Error::validation(format!("line {line}: cause '{raw}' is not a positive integer"))),
    }
}

/// A covariate matrix read against an existing feature layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateTable {
    /// One entry per input row; `None` where a value was missing or unknown.
    pub rows: Vec<Option<Vec<f64>>>,
    /// Input columns that are not model features.
    pub extra_columns: Vec<String>,
}

/// Reads covariate rows for prediction, encoding them like the training data.
pub fn read_covariates<R: Read>(
    input: R,
    feature_names: &[String],
    encodings: &[FeatureEncoding],
) -> Result<CovariateTable> {
    let raw = read_raw(input)?;
    let missing: Vec<String> = feature_names
        .iter()
        .filter(|f| !raw.header.contains(f))
        .cloned()
        .collect();
    let extra: Vec<String> = raw
        .header
        .iter()
        .filter(|h| !feature_names.contains(h))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::FeatureMismatch {
            missing,
            extra,
        });
    }
    let cols: Vec<usize> = feature_names
        .iter()
        .map(|f| raw.header.iter().position(|h| h == f).expect("checked above"))
        .collect();
    let rows = raw
        .rows
        .iter()
        .map(|(_, row)| {
            cols.iter()
                .zip(encodings)
                .map(|(&c, e)| e.encode(row.get(c).map(String::as_str).unwrap_or("")))
                .collect::<Option<Vec<f64>>>()
        })
        .collect();
    Ok(CovariateTable {
        rows,
        extra_columns: extra,
    })
}

/// Turns indicator covariates into cause labels.
///
/// `indicators` is in precedence order: a record whose first nonzero
/// indicator is `(column, cause)` gets that cause.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CauseRule {
    pub indicators: Vec<(String, u32)>,
}

impl CauseRule {
    /// Parses `column:cause,column:cause,...`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut indicators = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (col, cause) = part
                .split_once([':', '='])
                .ok_or_else(|| Error::config(format!("cause rule entry '{part}' is not column:cause")))?;
            let cause: u32 = cause
                .trim()
                .parse()
                .ok()
                .filter(|c| *c > 0)
                .ok_or_else(|| Error::config(format!("cause label '{cause}' must be a positive integer")))?;
            indicators.push((col.trim().to_string(), cause));
        }
        if indicators.is_empty() {
            return Err(Error::config("empty cause rule"));
        }
        Ok(CauseRule { indicators })
    }

    pub fn to_spec(&self) -> String {
        self.indicators
            .iter()
            .map(|(c, k)| format!("{c}:{k}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Derives a competing-risk dataset from indicator columns.
///
/// The indicator columns are removed from the covariates. A record is an
/// event iff some indicator is nonzero, and that must agree with its
/// original status.
pub fn derive_cause_labels(raw: &Dataset, rule: &CauseRule) -> Result<Dataset> {
    let cols: Vec<(usize, u32)> = rule
        .indicators
        .iter()
        .map(|(name, cause)| {
            raw.feature_names
                .iter()
                .position(|f| f == name)
                .map(|i| (i, *cause))
                .ok_or_else(|| Error::config(format!("cause rule references missing column '{name}'")))
        })
        .collect::<Result<_>>()?;
    let drop: BTreeSet<usize> = cols.iter().map(|(i, _)| *i).collect();
    let keep: Vec<usize> = (0..raw.n_features()).filter(|i| !drop.contains(i)).collect();

    let mut records = Vec::with_capacity(raw.len());
    for (row, r) in raw.records.iter().enumerate() {
        let cause = cols
            .iter()
            .find(|(i, _)| r.covariates[*i] != 0.0)
            .map(|(_, c)| *c);
        let status = if cause.is_some() {
            Status::Event
        } else {
            Status::Censored
        };
        if status != r.status {
            return Err(Error::validation(format!(
                "record {row}: status {:?} disagrees with cause indicators",
                r.status
            )));
        }
        records.push(SurvivalRecord {
            covariates: keep.iter().map(|&i| r.covariates[i]).collect(),
            time: r.time,
            status,
            cause,
        });
    }
    let names = keep.iter().map(|&i| raw.feature_names[i].clone()).collect();
    let encodings = keep.iter().map(|&i| raw.encodings[i].clone()).collect();
    let mut out = Dataset::with_encodings(records, names, encodings, true)?;
    out.time_units = raw.time_units.clone();
    out.dropped_rows = raw.dropped_rows;
    Ok(out)
}

/// How to partition a dataset into train and test sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub test_fraction: f64,
    /// Keep the event/censored mix equal on both sides.
    pub stratified: bool,
}

/// Size of the test side: `ceil(n * fraction)` clamped to `[1, n - 1]`.
///
/// Products within 1e-9 of an integer are taken as that integer so that
/// `10 * 0.3` gives 3, not 4.
pub fn test_size(n: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config(format!("test fraction {fraction} is outside (0, 1)")));
    }
    if n < 2 {
        return Err(Error::config(format!("cannot split {n} record(s)")));
    }
    let x = n as f64 * fraction;
    let nearest = x.round();
    let k = if (x - nearest).abs() <= 1e-9 * x.max(1.0) {
        nearest
    } else {
        x.ceil()
    } as usize;
    Ok(k.clamp(1, n - 1))
}

/// Train and test row indices, each ascending.
pub fn split_indices(data: &Dataset, plan: &SplitPlan) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = data.len();
    let n_test = test_size(n, plan.test_fraction)?;
    let mut rng = seed::stream(plan.seed, "train-test-split", 0);
    let mut test: Vec<usize> = if plan.stratified {
        let (mut events, mut censored): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&i| data.records[i].is_event());
        events.shuffle(&mut rng);
        censored.shuffle(&mut rng);
        let share = n_test as f64 * events.len() as f64 / n as f64;
        let mut test_events = (share.round() as usize).min(events.len());
        if n_test - test_events.min(n_test) > censored.len() {
            test_events = n_test - censored.len();
        }
        let test_events = test_events.min(n_test);
        events
            .into_iter()
            .take(test_events)
            .chain(censored.into_iter().take(n_test - test_events))
            .collect()
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        all.truncate(n_test);
        all
    };
    test.sort_unstable();
    let mut is_test = vec![false; n];
    for &i in &test {
        is_test[i] = true;
    }
    let train = (0..n).filter(|&i| !is_test[i]).collect();
    Ok((train, test))
}

/// Splits into (train, test) datasets.
pub fn train_test_split(data: &Dataset, plan: &SplitPlan) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(data, plan)?;
    Ok((data.subset(&train), data.subset(&test)))
}

/// Counts records per cause label (`None` for censored).
pub fn cause_counts(data: &Dataset) -> HashMap<Option<u32>, usize> {
    let mut counts = HashMap::new();
    for r in &data.records {
        let key = if r.is_event() { Some(r.cause.unwrap_or(1)) } else { None };
        *counts.entry(key).or_insert(0) += 1;
    }
    counts
}
