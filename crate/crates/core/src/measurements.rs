//! Per-epoch GNSS observations, the canonical CSV interchange format and the
//! raw-log converter.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::SPEED_OF_LIGHT;

/// GPS L1 carrier wavelength, meters.
pub const L1_WAVELENGTH: f64 = 0.19029367;

/// Plausible direct-path pseudorange band, meters.
pub const PLAUSIBLE_PSEUDORANGE: (f64, f64) = (1.8e7, 3.0e7);

/// Valid C/N0 band, dB-Hz.
pub const CN0_RANGE: (f64, f64) = (0.0, 70.0);

/// Exact header of the canonical measurement CSV.
pub const CANONICAL_HEADER: &str = "epoch_ms,svid,cn0_dbhz,pseudorange_m,adr_m,adr_valid,scattered";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasurementError {
    #[error("schema mismatch: expected header '{expected}', found '{found}'")]
    SchemaMismatch { expected: String, found: String },
    #[error("{} malformed row(s): {}", .0.len(), summarize(.0))]
    Malformed(Vec<RowError>),
    #[error("carrier phase not locked for svid {svid} at epoch {epoch_ms} ms")]
    CarrierUnlocked { svid: u32, epoch_ms: i64 },
    #[error("i/o error: {0}")]
    Io(String),
}

fn summarize(rows: &[RowError]) -> String {
    rows.iter().take(5).map(|r| r.to_string()).collect::<Vec<_>>().join("; ")
}

/// A row-indexed parse failure. `line` is 1-based and counts the header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl From<std::io::Error> for MeasurementError {
    fn from(e: std::io::Error) -> Self {
        MeasurementError::Io(e.to_string())
    }
}

/// Which path a measurement travelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PathClass {
    #[serde(rename = "D")]
    Direct,
    #[serde(rename = "S")]
    Scattered,
    #[serde(rename = "U")]
    Unknown,
}

impl PathClass {
    pub fn code(self) -> char {
        match self {
            PathClass::Direct => 'D',
            PathClass::Scattered => 'S',
            PathClass::Unknown => 'U',
        }
    }
}

impl FromStr for PathClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "D" => Ok(PathClass::Direct),
            "S" => Ok(PathClass::Scattered),
            "U" => Ok(PathClass::Unknown),
            other => Err(format!("scattered flag must be S, D or U, found '{other}'")),
        }
    }
}

/// One satellite observation at one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    /// Receiver timescale, milliseconds.
    pub epoch_ms: i64,
    pub svid: u32,
    /// dB-Hz.
    pub cn0: f64,
    /// Meters.
    pub pseudorange: f64,
    /// Accumulated delta range Φ = λφ, meters. Meaningful only when `adr_valid`.
    pub adr: f64,
    pub adr_valid: bool,
    pub scattered: PathClass,
}

impl Measurement {
    /// Pseudorange inside the direct-path band. Out-of-band rows are kept and
    /// left for the solvers to judge.
    pub fn pseudorange_plausible(&self) -> bool {
        let (lo, hi) = PLAUSIBLE_PSEUDORANGE;
        self.pseudorange.is_finite() && self.pseudorange >= lo && self.pseudorange <= hi
    }

    fn key(&self) -> (i64, u32, PathClass) {
        (self.epoch_ms, self.svid, self.scattered)
    }
}

/// Integer carrier-cycle ambiguity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ambiguity {
    pub svid: u32,
    pub n: i64,
    pub reference_epoch: i64,
}

/// N = round((Φ − ρ)/λ), ties away from zero.
pub fn estimate_ambiguity(m: &Measurement, wavelength: f64) -> Result<Ambiguity, MeasurementError> {
    if !m.adr_valid {
        return Err(MeasurementError::CarrierUnlocked { svid: m.svid, epoch_ms: m.epoch_ms });
    }
    let n = ((m.adr - m.pseudorange) / wavelength).round() as i64;
    Ok(Ambiguity { svid: m.svid, n, reference_epoch: m.epoch_ms })
}

/// Observations sorted by (epoch, svid, path class).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    measurements: Vec<Measurement>,
    pub wavelength: f64,
}

impl Default for MeasurementSet {
    fn default() -> Self {
        Self { measurements: Vec::new(), wavelength: L1_WAVELENGTH }
    }
}

impl MeasurementSet {
    /// Sorts and checks that each (epoch, svid, class) appears once.
    pub fn new(mut measurements: Vec<Measurement>, wavelength: f64) -> Result<Self, MeasurementError> {
        measurements.sort_by(|a, b| a.key().cmp(&b.key()));
        let dups: Vec<RowError> = measurements
            .windows(2)
            .filter(|w| w[0].key() == w[1].key())
            .map(|w| RowError {
                line: 0,
                message: format!(
                    "duplicate (epoch {}, svid {}, {})",
                    w[1].epoch_ms,
                    w[1].svid,
                    w[1].scattered.code()
                ),
            })
            .collect();
        if !dups.is_empty() {
            return Err(MeasurementError::Malformed(dups));
        }
        Ok(Self { measurements, wavelength })
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    pub fn into_measurements(self) -> Vec<Measurement> {
        self.measurements
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    /// Distinct epochs, ascending.
    pub fn epochs(&self) -> Vec<i64> {
        let mut out: Vec<i64> = self.measurements.iter().map(|m| m.epoch_ms).collect();
        out.dedup();
        out
    }

    /// Rows of one epoch.
    pub fn epoch(&self, epoch_ms: i64) -> &[Measurement] {
        let start = self.measurements.partition_point(|m| m.epoch_ms < epoch_ms);
        let end = self.measurements.partition_point(|m| m.epoch_ms <= epoch_ms);
        &self.measurements[start..end]
    }

    /// Rows grouped by epoch.
    pub fn by_epoch(&self) -> impl Iterator<Item = (i64, &[Measurement])> {
        self.measurements
            .chunk_by(|a, b| a.epoch_ms == b.epoch_ms)
            .map(|chunk| (chunk[0].epoch_ms, chunk))
    }

    /// Rows grouped by svid, each in epoch order.
    pub fn by_svid(&self) -> BTreeMap<u32, Vec<Measurement>> {
        let mut out: BTreeMap<u32, Vec<Measurement>> = BTreeMap::new();
        for m in &self.measurements {
            out.entry(m.svid).or_default().push(*m);
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), MeasurementError> {
        writeln!(w, "{CANONICAL_HEADER}")?;
        for m in &self.measurements {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                m.epoch_ms,
                m.svid,
                m.cn0,
                m.pseudorange,
                m.adr,
                if m.adr_valid { 1 } else { 0 },
                m.scattered.code()
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ASCII")
    }
}

/// Parse a canonical measurement CSV from a file.
pub fn parse_measurement_csv(path: impl AsRef<std::path::Path>) -> Result<MeasurementSet, MeasurementError> {
    let file = std::fs::File::open(path)?;
    read_measurement_csv(file)
}

/// Parse canonical CSV. All rows are checked; failures come back together.
pub fn read_measurement_csv<R: Read>(mut reader: R) -> Result<MeasurementSet, MeasurementError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let mut lines = text.split('\n');
    let header = lines.next().unwrap_or("").trim_end_matches('\r');
    if header != CANONICAL_HEADER {
        return Err(MeasurementError::SchemaMismatch {
            expected: CANONICAL_HEADER.into(),
            found: header.into(),
        });
    }
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    let mut seen: BTreeMap<(i64, u32, PathClass), usize> = BTreeMap::new();
    for (idx, raw) in lines.enumerate() {
        let line = idx + 2;
        if raw.is_empty() {
            continue;
        }
        match parse_row(raw) {
            Ok(m) => {
                if let Some(first) = seen.insert(m.key(), line) {
                    errors.push(RowError {
                        line,
                        message: format!(
                            "duplicate (epoch {}, svid {}, {}) first seen on line {first}",
                            m.epoch_ms,
                            m.svid,
                            m.scattered.code()
                        ),
                    });
                } else {
                    rows.push(m);
                }
            }
            Err(message) => errors.push(RowError { line, message }),
        }
    }
    if !errors.is_empty() {
        return Err(MeasurementError::Malformed(errors));
    }
    MeasurementSet::new(rows, L1_WAVELENGTH)
}

fn parse_row(raw: &str) -> Result<Measurement, String> {
    let fields: Vec<&str> = raw.split(',').collect();
    if fields.len() != 7 {
        return Err(format!("expected 7 fields, found {}", fields.len()));
    }
    fn num<T: FromStr>(s: &str, name: &str) -> Result<T, String> {
        s.parse::<T>().map_err(|_| format!("invalid {name} '{s}'"))
    }
    let cn0: f64 = num(fields[2], "cn0_dbhz")?;
    if !(CN0_RANGE.0..=CN0_RANGE.1).contains(&cn0) {
        return Err(format!("cn0_dbhz {cn0} outside [0, 70]"));
    }
    let pseudorange: f64 = num(fields[3], "pseudorange_m")?;
    let adr: f64 = num(fields[4], "adr_m")?;
    if !pseudorange.is_finite() || !adr.is_finite() {
        return Err("non-finite range".into());
    }
    let adr_valid = match fields[5] {
        "1" => true,
        "0" => false,
        other => return Err(format!("adr_valid must be 0 or 1, found '{other}'")),
    };
    Ok(Measurement {
        epoch_ms: num(fields[0], "epoch_ms")?,
        svid: num(fields[1], "svid")?,
        cn0,
        pseudorange,
        adr,
        adr_valid,
        scattered: fields[6].parse()?,
    })
}

// ---------------------------------------------------------------------------
// Raw-log subset

/// Header of the supported raw-log subset (see docs/formats.md).
pub const RAW_HEADER: &str = "utc_time_millis,time_nanos,full_bias_nanos,bias_nanos,svid,\
received_sv_time_nanos,cn0_dbhz,accumulated_delta_range_meters,accumulated_delta_range_state";

pub const WEEK_NANOS: i64 = 604_800 * 1_000_000_000;

const NANOS_TO_METERS: f64 = SPEED_OF_LIGHT * 1e-9;

/// Accumulated-delta-range state bits (Android `GnssMeasurement`).
pub const ADR_STATE_VALID: u32 = 1;
pub const ADR_STATE_RESET: u32 = 2;
pub const ADR_STATE_CYCLE_SLIP: u32 = 4;

/// Receiver clock interpretation for the converter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockModel {
    /// t_rx = time_nanos − (full_bias_nanos + bias_nanos), reduced to time of week.
    #[default]
    Simple,
}

/// One raw-log row of the supported subset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRow {
    pub utc_time_millis: i64,
    pub time_nanos: i64,
    pub full_bias_nanos: i64,
    pub bias_nanos: f64,
    pub svid: u32,
    pub received_sv_time_nanos: i64,
    pub cn0_dbhz: f64,
    pub adr_m: f64,
    pub adr_state: u32,
}

/// Rows dropped by the converter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRow {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConversionReport {
    pub set: MeasurementSet,
    pub skipped: Vec<SkippedRow>,
}

/// Time of flight in nanoseconds with week-rollover normalization.
///
/// Integer parts are combined exactly before the fractional bias is applied.
pub fn time_of_flight_nanos(row: &RawRow, _clock: ClockModel) -> f64 {
    let rx_int = (row.time_nanos - row.full_bias_nanos).rem_euclid(WEEK_NANOS);
    let mut tau_int = rx_int - row.received_sv_time_nanos;
    if tau_int > WEEK_NANOS / 2 {
        tau_int -= WEEK_NANOS;
    } else if tau_int < -WEEK_NANOS / 2 {
        tau_int += WEEK_NANOS;
    }
    tau_int as f64 - row.bias_nanos
}

/// Pseudorange c·(t_rx − t_tx), meters.
pub fn raw_pseudorange(row: &RawRow, clock: ClockModel) -> f64 {
    time_of_flight_nanos(row, clock) * NANOS_TO_METERS
}

/// Convert a raw-log subset file into canonical measurements.
pub fn convert_raw_log(
    path: impl AsRef<std::path::Path>,
    clock: ClockModel,
) -> Result<ConversionReport, MeasurementError> {
    let file = std::fs::File::open(path)?;
    read_raw_log(file, clock)
}

pub fn read_raw_log<R: Read>(mut reader: R, clock: ClockModel) -> Result<ConversionReport, MeasurementError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let mut lines = text.split('\n');
    let header = lines.next().unwrap_or("").trim_end_matches('\r');
    if header != RAW_HEADER {
        return Err(MeasurementError::SchemaMismatch { expected: RAW_HEADER.into(), found: header.into() });
    }
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let mut seen: BTreeMap<(i64, u32), usize> = BTreeMap::new();
    for (idx, raw) in lines.enumerate() {
        let line = idx + 2;
        if raw.trim().is_empty() {
            continue;
        }
        let row = match parse_raw_row(raw) {
            Ok(r) => r,
            Err(reason) => {
                skipped.push(SkippedRow { line, reason });
                continue;
            }
        };
        let tau = time_of_flight_nanos(&row, clock);
        if !(tau > 0.0) {
            skipped.push(SkippedRow { line, reason: format!("non-positive time of flight {tau} ns") });
            continue;
        }
        if let Some(first) = seen.insert((row.utc_time_millis, row.svid), line) {
            skipped.push(SkippedRow { line, reason: format!("duplicate of line {first}") });
            continue;
        }
        let adr_valid = row.adr_state & ADR_STATE_VALID != 0
            && row.adr_state & (ADR_STATE_RESET | ADR_STATE_CYCLE_SLIP) == 0;
        rows.push(Measurement {
            epoch_ms: row.utc_time_millis,
            svid: row.svid,
            cn0: row.cn0_dbhz.clamp(CN0_RANGE.0, CN0_RANGE.1),
            pseudorange: tau * NANOS_TO_METERS,
            adr: row.adr_m,
            adr_valid,
            scattered: PathClass::Unknown,
        });
    }
    Ok(ConversionReport { set: MeasurementSet::new(rows, L1_WAVELENGTH)?, skipped })
}

fn parse_raw_row(raw: &str) -> Result<RawRow, String> {
    let f: Vec<&str> = raw.trim_end_matches('\r').split(',').collect();
    if f.len() != 9 {
        return Err(format!("expected 9 fields, found {}", f.len()));
    }
    fn num<T: FromStr>(s: &str, name: &str) -> Result<T, String> {
        if s.is_empty() {
            return Err(format!("missing {name}"));
        }
        s.parse::<T>().map_err(|_| format!("invalid {name} '{s}'"))
    }
    Ok(RawRow {
        utc_time_millis: num(f[0], "utc_time_millis")?,
        time_nanos: num(f[1], "time_nanos")?,
        full_bias_nanos: num(f[2], "full_bias_nanos")?,
        bias_nanos: num(f[3], "bias_nanos")?,
        svid: num(f[4], "svid")?,
        received_sv_time_nanos: num(f[5], "received_sv_time_nanos")?,
        cn0_dbhz: num(f[6], "cn0_dbhz")?,
        adr_m: num(f[7], "accumulated_delta_range_meters")?,
        adr_state: num(f[8], "accumulated_delta_range_state")?,
    })
}

/// Encode canonical measurements as raw-log rows.
///
/// The receiver clock is put at `week` GPS weeks plus the epoch; the integer
/// nanoseconds of the time of flight go into `received_sv_time_nanos` and the
/// fractional remainder into `bias_nanos`. Path labels are not representable
/// and are dropped.
pub fn encode_raw_rows(set: &MeasurementSet, week: i64) -> Vec<RawRow> {
    set.measurements()
        .iter()
        .map(|m| {
            let tau = flight_nanos_for(m.pseudorange);
            let tau_int = tau.floor();
            let time_nanos = m.epoch_ms * 1_000_000;
            let full_bias_nanos = -week * WEEK_NANOS;
            let rx_tow = (time_nanos - full_bias_nanos).rem_euclid(WEEK_NANOS);
            RawRow {
                utc_time_millis: m.epoch_ms,
                time_nanos,
                full_bias_nanos,
                // floor(tau) - tau is exact, and so is the converter's
                // floor(tau) - bias.
                bias_nanos: tau_int - tau,
                svid: m.svid,
                received_sv_time_nanos: (rx_tow - tau_int as i64).rem_euclid(WEEK_NANOS),
                cn0_dbhz: m.cn0,
                adr_m: m.adr,
                adr_state: if m.adr_valid { ADR_STATE_VALID } else { 0 },
            }
        })
        .collect()
}

/// Time of flight whose conversion reproduces `pseudorange` bit for bit when
/// such a value exists, otherwise the closest one found.
fn flight_nanos_for(pseudorange: f64) -> f64 {
    let start = pseudorange / NANOS_TO_METERS;
    let mut best = start;
    let mut best_err = (start * NANOS_TO_METERS - pseudorange).abs();
    for dir in [1i64, -1] {
        let mut cand = start;
        for _ in 0..4 {
            cand = f64::from_bits((cand.to_bits() as i64 + dir) as u64);
            let err = (cand * NANOS_TO_METERS - pseudorange).abs();
            if err < best_err {
                best = cand;
                best_err = err;
            }
        }
    }
    best
}

pub fn write_raw_log<W: Write>(rows: &[RawRow], mut w: W) -> Result<(), MeasurementError> {
    writeln!(w, "{RAW_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.utc_time_millis,
            r.time_nanos,
            r.full_bias_nanos,
            r.bias_nanos,
            r.svid,
            r.received_sv_time_nanos,
            r.cn0_dbhz,
            r.adr_m,
            r.adr_state
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(epoch_ms: i64, svid: u32, class: PathClass) -> Measurement {
        Measurement {
            epoch_ms,
            svid,
            cn0: 40.0,
            pseudorange: 2.1e7,
            adr: 2.1e7 + 3.0,
            adr_valid: true,
            scattered: class,
        }
    }

    #[test]
    fn ambiguity_examples() {
        let mut x = m(0, 1, PathClass::Direct);
        x.pseudorange = 1000.0;
        x.adr = 1000.0;
        assert_eq!(estimate_ambiguity(&x, L1_WAVELENGTH).unwrap().n, 0);
        x.adr = 1019.03;
        assert_eq!(estimate_ambiguity(&x, L1_WAVELENGTH).unwrap().n, 100);
        x.pseudorange = 0.0;
        x.adr = L1_WAVELENGTH / 2.0;
        assert_eq!(estimate_ambiguity(&x, L1_WAVELENGTH).unwrap().n, 1);
        x.adr = -L1_WAVELENGTH / 2.0;
        assert_eq!(estimate_ambiguity(&x, L1_WAVELENGTH).unwrap().n, -1);
        x.adr_valid = false;
        assert_eq!(
            estimate_ambiguity(&x, L1_WAVELENGTH),
            Err(MeasurementError::CarrierUnlocked { svid: 1, epoch_ms: 0 })
        );
    }

    #[test]
    fn plausibility_flag() {
        let mut x = m(0, 1, PathClass::Direct);
        assert!(x.pseudorange_plausible());
        x.pseudorange = 3.5e7;
        assert!(!x.pseudorange_plausible());
    }

    #[test]
    fn empty_body_is_empty_set() {
        let set = read_measurement_csv(format!("{CANONICAL_HEADER}\n").as_bytes()).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn header_must_match_exactly() {
        let err = read_measurement_csv("epoch,svid\n".as_bytes()).unwrap_err();
        assert!(matches!(err, MeasurementError::SchemaMismatch { .. }));
    }

    #[test]
    fn duplicate_rows_are_malformed() {
        let text = format!("{CANONICAL_HEADER}\n0,3,40,2.1e7,0,0,D\n0,3,41,2.1e7,0,0,D\n0,3,41,2.1e7,0,0,S\n");
        match read_measurement_csv(text.as_bytes()) {
            Err(MeasurementError::Malformed(rows)) => {
                assert_eq!(rows.len(), 1);
                assert_eq!(rows[0].line, 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_rows_are_all_reported() {
        let text = format!("{CANONICAL_HEADER}\n0,3,40,x,0,0,D\n1,3,40,2e7,0,2,D\n2,3,90,2e7,0,0,D\n3,3,40,2e7,0,0,Q\n");
        match read_measurement_csv(text.as_bytes()) {
            Err(MeasurementError::Malformed(rows)) => {
                let lines: Vec<usize> = rows.iter().map(|r| r.line).collect();
                assert_eq!(lines, vec![2, 3, 4, 5]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn set_sorts_and_slices_by_epoch() {
        let set = MeasurementSet::new(
            vec![m(2000, 1, PathClass::Direct), m(1000, 2, PathClass::Direct), m(1000, 1, PathClass::Scattered)],
            L1_WAVELENGTH,
        )
        .unwrap();
        assert_eq!(set.epochs(), vec![1000, 2000]);
        assert_eq!(set.epoch(1000).len(), 2);
        assert_eq!(set.epoch(1000)[0].svid, 1);
        assert_eq!(set.epoch(1500).len(), 0);
        assert_eq!(set.by_epoch().count(), 2);
    }

    #[test]
    fn seventy_ms_flight_time() {
        let row = RawRow {
            utc_time_millis: 0,
            time_nanos: 1_000_000_000_000,
            full_bias_nanos: -2 * WEEK_NANOS,
            bias_nanos: 0.0,
            svid: 5,
            received_sv_time_nanos: 1_000_000_000_000 - 70_000_000,
            cn0_dbhz: 40.0,
            adr_m: 0.0,
            adr_state: 0,
        };
        let rho = raw_pseudorange(&row, ClockModel::Simple);
        assert!((rho - 20_985_472.06).abs() < 1.0);
    }

    #[test]
    fn week_rollover_is_normalized() {
        // Receiver just past the week boundary, satellite just before it.
        let row = RawRow {
            utc_time_millis: 0,
            time_nanos: 10_000_000,
            full_bias_nanos: -3 * WEEK_NANOS,
            bias_nanos: 0.0,
            svid: 5,
            received_sv_time_nanos: WEEK_NANOS - 60_000_000,
            cn0_dbhz: 40.0,
            adr_m: 0.0,
            adr_state: 0,
        };
        let tau = time_of_flight_nanos(&row, ClockModel::Simple);
        assert_eq!(tau, 70_000_000.0);
    }

    #[test]
    fn negative_time_of_flight_is_skipped() {
        let text = format!(
            "{RAW_HEADER}\n0,1000000000,0,0,7,1070000000,40,0,0\n0,1000000000,0,0,8,930000000,40,0,1\n"
        );
        let rep = read_raw_log(text.as_bytes(), ClockModel::Simple).unwrap();
        assert_eq!(rep.set.len(), 1);
        assert_eq!(rep.set.measurements()[0].svid, 8);
        assert!(rep.set.measurements()[0].adr_valid);
        assert_eq!(rep.skipped.len(), 1);
        assert_eq!(rep.skipped[0].line, 2);
    }

    #[test]
    fn rows_missing_fields_are_skipped() {
        let text = format!("{RAW_HEADER}\n0,1000000000,0,0,7,,40,0,0\n");
        let rep = read_raw_log(text.as_bytes(), ClockModel::Simple).unwrap();
        assert!(rep.set.is_empty());
        assert!(rep.skipped[0].reason.contains("received_sv_time_nanos"));
        assert!(matches!(
            read_raw_log("a,b\n".as_bytes(), ClockModel::Simple),
            Err(MeasurementError::SchemaMismatch { .. })
        ));
    }
}
