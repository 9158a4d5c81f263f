//! Joining solutions with truth: per-epoch errors, CDF data and summary.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{range, EcefPoint};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("epoch {epoch_ms} has a solution but no truth row")]
    JoinMismatch { epoch_ms: i64 },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("no epochs to report")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochError {
    pub epoch_ms: i64,
    pub error_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

/// Read `epoch_ms` and the three position columns that follow it from a
/// headed CSV. Extra columns are ignored.
pub fn read_positions<R: Read>(reader: R) -> Result<BTreeMap<i64, EcefPoint>, ReportError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let mut out = BTreeMap::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 2;
        let bad = |message: String| ReportError::Malformed { line, message };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() < 4 {
            return Err(bad(format!("expected at least 4 fields, found {}", rec.len())));
        }
        let epoch: i64 = rec[0].trim().parse().map_err(|_| bad(format!("bad epoch '{}'", &rec[0])))?;
        let mut xyz = [0.0; 3];
        for (k, v) in xyz.iter_mut().enumerate() {
            *v = rec[k + 1].trim().parse().map_err(|_| bad(format!("bad coordinate '{}'", &rec[k + 1])))?;
        }
        out.insert(epoch, EcefPoint::new(xyz[0], xyz[1], xyz[2]));
    }
    Ok(out)
}

/// 3-D error for every solved epoch. Every solution epoch must exist in truth.
pub fn join_errors(
    solutions: &BTreeMap<i64, EcefPoint>,
    truth: &BTreeMap<i64, EcefPoint>,
) -> Result<Vec<EpochError>, ReportError> {
    solutions
        .iter()
        .map(|(&epoch_ms, p)| {
            let t = truth.get(&epoch_ms).ok_or(ReportError::JoinMismatch { epoch_ms })?;
            Ok(EpochError { epoch_ms, error_m: range(*p, *t) })
        })
        .collect()
}

/// Linear-interpolated quantile of sorted data, `q` in [0, 1].
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn sorted_errors(errors: &[EpochError]) -> Vec<f64> {
    let mut v: Vec<f64> = errors.iter().map(|e| e.error_m).collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn summarize(errors: &[EpochError]) -> Result<Summary, ReportError> {
    if errors.is_empty() {
        return Err(ReportError::Empty);
    }
    let v = sorted_errors(errors);
    Ok(Summary {
        count: v.len(),
        mean: v.iter().sum::<f64>() / v.len() as f64,
        median: quantile(&v, 0.5),
        p95: quantile(&v, 0.95),
        max: v[v.len() - 1],
    })
}

/// Empirical CDF as (error, fraction ≤ error) pairs.
pub fn cdf(errors: &[EpochError]) -> Vec<(f64, f64)> {
    let v = sorted_errors(errors);
    let n = v.len() as f64;
    v.iter().enumerate().map(|(i, e)| (*e, (i + 1) as f64 / n)).collect()
}
