//! Nonparametric estimators over a risk table: Kaplan-Meier survival,
//! Nelson-Aalen cumulative hazard (all-cause and cause-specific) and
//! Aalen-Johansen cumulative incidence.
//!
//! Every curve is a right-continuous step function that jumps only at
//! event times. Censorings shrink the risk set but add no curve point.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::{Status, SurvivalRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Survival,
    CumulativeHazard,
    CumulativeIncidence,
}

impl CurveKind {
    /// Value of the curve before its first time point.
    pub fn initial_value(self) -> f64 {
        match self {
            CurveKind::Survival => 1.0,
            CurveKind::CumulativeHazard | CurveKind::CumulativeIncidence => 0.0,
        }
    }
}

/// A step function over strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub kind: CurveKind,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl SurvivalCurve {
    pub fn empty(kind: CurveKind) -> Self {
        SurvivalCurve {
            kind,
            times: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Right-continuous evaluation at `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            self.kind.initial_value()
        } else {
            self.values[k - 1]
        }
    }

    /// Value at the last time point (or the initial value when empty).
    pub fn final_value(&self) -> f64 {
        self.values
            .last()
            .copied()
            .unwrap_or_else(|| self.kind.initial_value())
    }

    /// Applies `f` pointwise, producing a curve of `kind`.
    pub fn map(&self, kind: CurveKind, f: impl Fn(f64) -> f64) -> SurvivalCurve {
        SurvivalCurve {
            kind,
            times: self.times.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Checks ordering, range and monotonicity for the curve's kind.
    pub fn check_invariants(&self) -> Result<()> {
        const SLACK: f64 = 1e-12;
        if self.times.len() != self.values.len() {
            return Err(Error::validation("times and values differ in length"));
        }
        if self.times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("curve times are not strictly increasing"));
        }
        let mut prev = self.kind.initial_value();
        for &v in &self.values {
            let ok = match self.kind {
                CurveKind::Survival => v <= prev && (0.0..=1.0).contains(&v),
                CurveKind::CumulativeHazard => v >= prev && v >= 0.0 && v.is_finite(),
                CurveKind::CumulativeIncidence => v >= prev && (0.0..=1.0 + SLACK).contains(&v),
            };
            if !ok {
                return Err(Error::validation(format!(
                    "{:?} curve violates its invariants at value {v}",
                    self.kind
                )));
            }
            prev = v;
        }
        Ok(())
    }

    /// Two-column `time,value` CSV.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time,value")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(out, "{t},{v}")?;
        }
        Ok(())
    }
}

/// Counts at one distinct observed time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEntry {
    pub time: f64,
    /// Y(t): records with observed time >= t.
    pub at_risk: usize,
    /// d(t): events at t, any cause.
    pub events: usize,
    pub censored: usize,
    /// d_j(t), aligned with [`RiskTable::causes`].
    pub cause_events: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskTable {
    entries: Vec<RiskEntry>,
    causes: Vec<u32>,
    n: usize,
}

impl RiskTable {
    /// Builds the table from `(time, status, cause)` triples.
    ///
    /// The cause set is the union of `declared` and the observed causes.
    /// Repeated observations count once per occurrence.
    pub fn from_observations<I>(observations: I, declared: &BTreeSet<u32>) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, Status, Option<u32>)>,
    {
        let mut obs: Vec<(f64, Status, Option<u32>)> = observations.into_iter().collect();
        if obs.is_empty() {
            return Err(Error::domain("risk table of an empty sample"));
        }
        if let Some((t, _, _)) = obs.iter().find(|(t, _, _)| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::domain(format!("observed time {t} is not positive")));
        }
        let mut causes: BTreeSet<u32> = declared.clone();
        causes.extend(obs.iter().filter_map(|(_, _, c)| *c));
        let causes: Vec<u32> = causes.into_iter().collect();

        obs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = obs.len();
        let mut entries: Vec<RiskEntry> = Vec::new();
        let mut start = 0;
        while start < n {
            let t = obs[start].0;
            let mut end = start;
            let mut entry = RiskEntry {
                time: t,
                at_risk: n - start,
                events: 0,
                censored: 0,
                cause_events: vec![0; causes.len()],
            };
            while end < n && obs[end].0 == t {
                let (_, status, cause) = obs[end];
                match status {
                    Status::Event => {
                        entry.events += 1;
                        if let Some(c) = cause {
                            let j = causes.binary_search(&c).expect("cause collected above");
                            entry.cause_events[j] += 1;
                        }
                    }
                    Status::Censored => entry.censored += 1,
                }
                end += 1;
            }
            entries.push(entry);
            start = end;
        }
        Ok(RiskTable { entries, causes, n })
    }

    pub fn entries(&self) -> &[RiskEntry] {
        &self.entries
    }

    pub fn causes(&self) -> &[u32] {
        &self.causes
    }

    /// Sample size, counting repeats.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn total_events(&self) -> usize {
        self.entries.iter().map(|e| e.events).sum()
    }

    fn cause_slot(&self, cause: u32) -> Result<usize> {
        self.causes
            .binary_search(&cause)
            .map_err(|_| Error::domain(format!("cause {cause} is not in the risk table")))
    }
}

/// Risk table of a record collection; iterate indices to include repeats.
pub fn risk_table<'a, I>(records: I) -> Result<RiskTable>
where
    I: IntoIterator<Item = &'a SurvivalRecord>,
{
    RiskTable::from_observations(
        records.into_iter().map(|r| (r.time, r.status, r.cause)),
        &BTreeSet::new(),
    )
}

/// Kaplan-Meier event-free survival, product over event times of
/// `1 - d/Y`.
pub fn kaplan_meier(table: &RiskTable) -> SurvivalCurve {
    let mut curve = SurvivalCurve::empty(CurveKind::Survival);
    let mut s = 1.0;
    for e in table.entries.iter().filter(|e| e.events > 0) {
        s *= 1.0 - e.events as f64 / e.at_risk as f64;
        curve.times.push(e.time);
        curve.values.push(s);
    }
    curve
}

/// Nelson-Aalen cumulative hazard, sum over event times of `d/Y`.
pub fn nelson_aalen(table: &RiskTable) -> SurvivalCurve {
    let mut curve = SurvivalCurve::empty(CurveKind::CumulativeHazard);
    let mut h = 0.0;
    for e in table.entries.iter().filter(|e| e.events > 0) {
        h += e.events as f64 / e.at_risk as f64;
        curve.times.push(e.time);
        curve.values.push(h);
    }
    curve
}

/// Cause-specific Nelson-Aalen hazard, sum of `d_j/Y`.
pub fn cause_specific_chf(table: &RiskTable, cause: u32) -> Result<SurvivalCurve> {
    let j = table.cause_slot(cause)?;
    let mut curve = SurvivalCurve::empty(CurveKind::CumulativeHazard);
    let mut h = 0.0;
    for e in table.entries.iter().filter(|e| e.cause_events[j] > 0) {
        h += e.cause_events[j] as f64 / e.at_risk as f64;
        curve.times.push(e.time);
        curve.values.push(h);
    }
    Ok(curve)
}

/// Aalen-Johansen cumulative incidence of `cause`: sum over event times of
/// `S(t_{k-1}) d_j(t_k) / Y(t_k)`, with `S` the all-cause Kaplan-Meier left
/// limit.
pub fn aalen_johansen(table: &RiskTable, cause: u32) -> Result<SurvivalCurve> {
    let j = table.cause_slot(cause)?;
    let mut curve = SurvivalCurve::empty(CurveKind::CumulativeIncidence);
    let mut s_prev = 1.0;
    let mut f = 0.0;
    for e in table.entries.iter().filter(|e| e.events > 0) {
        let dj = e.cause_events[j];
        if dj > 0 {
            f += s_prev * dj as f64 / e.at_risk as f64;
            curve.times.push(e.time);
            curve.values.push(f);
        }
        s_prev *= 1.0 - e.events as f64 / e.at_risk as f64;
    }
    Ok(curve)
}
