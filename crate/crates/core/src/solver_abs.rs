//! Absolute positioning with virtual satellites.
//!
//! A scattered measurement travels satellite → tag → receiver. Reflecting the
//! satellite through the surveyed tag gives a virtual satellite whose range to
//! the receiver matches the scattered pseudorange once the scatter delay is
//! removed, so scattered rows can join direct rows in one weighted
//! least-squares fix.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{range, unit_vector, EcefPoint, Ephemeris, GeometryError, SPEED_OF_LIGHT};
use crate::measurements::{Measurement, PathClass};
use crate::wls;

pub const DEFAULT_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 50;
pub const DEFAULT_ALPHA: f64 = 0.2;
/// Reference standard deviation of the C/N0 weight model at 45 dB-Hz, meters.
pub const REFERENCE_SIGMA: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("{rows} usable rows for {unknowns} unknowns")]
    Underdetermined { rows: usize, unknowns: usize },
    #[error("normal matrix is singular (degenerate geometry)")]
    SingularNormalMatrix,
    #[error("no convergence after {iterations} iterations (last step {last_step:.3e} m)")]
    NonConvergence { iterations: usize, last_step: f64 },
    #[error("scattered row for svid {svid} but no scatter delay is known and joint estimation is off")]
    MissingScatterDelay { svid: u32 },
    #[error("scatter delay {t_s} s is negative")]
    NegativeScatterDelay { t_s: f64 },
    #[error("no scattered/direct pairs")]
    NoPairs,
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Surveyed tag and its scatter-delay state.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TagConfig {
    pub position: EcefPoint,
    /// Seconds.
    pub t_s: f64,
    pub t_s_valid: bool,
    /// Per-satellite delays; take precedence over `t_s`.
    #[serde(default)]
    pub t_s_per_svid: BTreeMap<u32, f64>,
}

impl TagConfig {
    /// Tag with no scatter-delay estimate yet.
    pub fn new(position: EcefPoint) -> Self {
        Self { position, ..Default::default() }
    }

    pub fn with_delay(position: EcefPoint, t_s: f64) -> Self {
        Self { position, t_s, t_s_valid: true, t_s_per_svid: BTreeMap::new() }
    }

    pub fn with_delays(position: EcefPoint, per_svid: BTreeMap<u32, f64>) -> Self {
        Self { position, t_s: 0.0, t_s_valid: false, t_s_per_svid: per_svid }
    }

    /// Delay to remove from a scattered row of `svid`, if known.
    pub fn delay_for(&self, svid: u32) -> Option<f64> {
        self.t_s_per_svid
            .get(&svid)
            .copied()
            .or(if self.t_s_valid { Some(self.t_s) } else { None })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualSatellite {
    pub svid: u32,
    pub position: EcefPoint,
    pub source: EcefPoint,
}

/// Point reflection of `real` through `tag`: `2·tag − real`.
pub fn make_virtual_satellite(
    svid: u32,
    real: EcefPoint,
    tag: EcefPoint,
) -> Result<VirtualSatellite, SolveError> {
    if real == tag {
        return Err(GeometryError::DegenerateGeometry("satellite coincides with tag").into());
    }
    let position = EcefPoint::new(2.0 * tag.x - real.x, 2.0 * tag.y - real.y, 2.0 * tag.z - real.z);
    Ok(VirtualSatellite { svid, position, source: real })
}

/// Per-row weighting.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub enum Weighting {
    /// variance = (0.3 m)² · 10^((45 − cn0)/10)
    #[default]
    Cn0,
    Identity,
    /// Explicit variances (m²), one per input row.
    Variances(Vec<f64>),
}

pub fn cn0_variance(cn0: f64) -> f64 {
    REFERENCE_SIGMA * REFERENCE_SIGMA * 10f64.powf((45.0 - cn0) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Stop when the position update is shorter than this, meters.
    pub tol: f64,
    pub max_iter: usize,
    /// Estimate separate direct/scattered clock biases instead of removing a
    /// known scatter delay.
    pub joint_ts: bool,
    /// Start point; the origin when absent.
    pub warm_start: Option<EcefPoint>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOLERANCE, max_iter: DEFAULT_MAX_ITER, joint_ts: false, warm_start: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRow {
    pub svid: u32,
    pub class: PathClass,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionSolution {
    pub position: EcefPoint,
    /// t_b1, seconds. In known-delay mode scattered rows share this clock.
    pub clock_bias_direct: Option<f64>,
    /// t_b2, seconds; only in joint mode with scattered rows.
    pub clock_bias_scattered: Option<f64>,
    pub iterations: usize,
    pub residual_rms: f64,
    pub converged: bool,
    pub dop: f64,
    pub rows_used: usize,
    pub unknowns: usize,
    #[serde(default)]
    pub dropped: Vec<DroppedRow>,
}

impl PositionSolution {
    /// t_b2 − t_b1 when both biases were estimated.
    pub fn scatter_delay(&self) -> Option<f64> {
        Some(self.clock_bias_scattered? - self.clock_bias_direct?)
    }
}

struct Row {
    emitter: EcefPoint,
    corrected_range: f64,
    clock_col: usize,
    weight: f64,
}

/// Weighted Gauss-Newton fix from one epoch of measurements.
///
/// Direct and unlabeled rows use the real satellite; scattered rows use the
/// virtual satellite. Rows whose svid has no position are dropped and listed
/// in the solution.
pub fn solve_position(
    rows: &[Measurement],
    satellites: &BTreeMap<u32, EcefPoint>,
    tag: &TagConfig,
    weighting: &Weighting,
    options: &SolveOptions,
) -> Result<PositionSolution, SolveError> {
    if !(options.tol > 0.0) || options.max_iter == 0 {
        return Err(SolveError::InvalidOption("tol must be positive and max_iter nonzero".into()));
    }
    if let Weighting::Variances(v) = weighting {
        if v.len() != rows.len() || v.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(SolveError::InvalidOption(format!(
                "need {} positive variances, got {}",
                rows.len(),
                v.len()
            )));
        }
    }

    let mut dropped = Vec::new();
    let mut usable: Vec<(usize, &Measurement, EcefPoint)> = Vec::new();
    for (i, m) in rows.iter().enumerate() {
        match satellites.get(&m.svid) {
            Some(p) if m.pseudorange.is_finite() => usable.push((i, m, *p)),
            Some(_) => dropped.push(DroppedRow { svid: m.svid, class: m.scattered, reason: "non-finite pseudorange".into() }),
            None => dropped.push(DroppedRow { svid: m.svid, class: m.scattered, reason: "no satellite position".into() }),
        }
    }

    let has_direct = usable.iter().any(|(_, m, _)| m.scattered != PathClass::Scattered);
    let has_scattered = usable.iter().any(|(_, m, _)| m.scattered == PathClass::Scattered);
    let dual = options.joint_ts && has_direct && has_scattered;
    let unknowns = if dual { 5 } else { 4 };

    let mut built = Vec::with_capacity(usable.len());
    for &(i, m, sat) in &usable {
        let weight = 1.0
            / match weighting {
                Weighting::Cn0 => cn0_variance(m.cn0),
                Weighting::Identity => 1.0,
                Weighting::Variances(v) => v[i],
            };
        let row = if m.scattered == PathClass::Scattered {
            let virt = make_virtual_satellite(m.svid, sat, tag.position)?;
            if options.joint_ts {
                Row { emitter: virt.position, corrected_range: m.pseudorange, clock_col: if dual { 4 } else { 3 }, weight }
            } else {
                let t_s = tag.delay_for(m.svid).ok_or(SolveError::MissingScatterDelay { svid: m.svid })?;
                if t_s < 0.0 || !t_s.is_finite() {
                    return Err(SolveError::NegativeScatterDelay { t_s });
                }
                Row {
                    emitter: virt.position,
                    corrected_range: m.pseudorange - SPEED_OF_LIGHT * t_s,
                    clock_col: 3,
                    weight,
                }
            }
        } else {
            Row { emitter: sat, corrected_range: m.pseudorange, clock_col: 3, weight }
        };
        built.push(row);
    }
    if built.len() < unknowns {
        return Err(SolveError::Underdetermined { rows: built.len(), unknowns });
    }

    let w = DVector::from_iterator(built.len(), built.iter().map(|r| r.weight));
    let mut pos = options.warm_start.unwrap_or(EcefPoint::ORIGIN).to_vector();
    // Clock terms in meters (c·t).
    let mut clocks = vec![0.0; unknowns - 3];
    let mut last_step = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iter {
        iterations += 1;
        let (g, r) = linearize(&built, pos, &clocks, unknowns)?;
        let dx = wls::weighted_step(&g, &w, &r).map_err(|_| SolveError::SingularNormalMatrix)?;
        let dl = Vector3::new(dx[0], dx[1], dx[2]);
        pos += dl;
        for (k, c) in clocks.iter_mut().enumerate() {
            *c += dx[3 + k];
        }
        last_step = dl.norm();
        if !last_step.is_finite() {
            break;
        }
        if last_step < options.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SolveError::NonConvergence { iterations, last_step });
    }

    let (g, r) = linearize(&built, pos, &clocks, unknowns)?;
    let residual_rms = (r.norm_squared() / r.len() as f64).sqrt();
    let dop = dilution_of_precision(&g)?;

    let (clock_bias_direct, clock_bias_scattered) = if dual {
        (Some(clocks[0] / SPEED_OF_LIGHT), Some(clocks[1] / SPEED_OF_LIGHT))
    } else if options.joint_ts && has_scattered {
        (None, Some(clocks[0] / SPEED_OF_LIGHT))
    } else {
        (Some(clocks[0] / SPEED_OF_LIGHT), None)
    };

    Ok(PositionSolution {
        position: EcefPoint::from_vector(&pos),
        clock_bias_direct,
        clock_bias_scattered,
        iterations,
        residual_rms,
        converged,
        dop,
        rows_used: built.len(),
        unknowns,
        dropped,
    })
}

/// Geometry matrix and prefit residuals at `pos`.
fn linearize(
    rows: &[Row],
    pos: Vector3<f64>,
    clocks: &[f64],
    unknowns: usize,
) -> Result<(DMatrix<f64>, DVector<f64>), SolveError> {
    let here = EcefPoint::from_vector(&pos);
    let mut g = DMatrix::zeros(rows.len(), unknowns);
    let mut r = DVector::zeros(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let u = unit_vector(here, row.emitter)?;
        g[(i, 0)] = -u.x;
        g[(i, 1)] = -u.y;
        g[(i, 2)] = -u.z;
        g[(i, row.clock_col)] = 1.0;
        let predicted = range(here, row.emitter) + clocks[row.clock_col - 3];
        r[i] = row.corrected_range - predicted;
    }
    Ok((g, r))
}

/// sqrt(trace) of the position block of (GᵀG)⁻¹. `g` has three position
/// columns followed by one or more clock columns.
pub fn dilution_of_precision(g: &DMatrix<f64>) -> Result<f64, SolveError> {
    if g.ncols() < 4 || g.nrows() < g.ncols() {
        return Err(SolveError::SingularNormalMatrix);
    }
    let ones = DVector::from_element(g.nrows(), 1.0);
    let q = wls::normal_inverse(g, &ones).map_err(|_| SolveError::SingularNormalMatrix)?;
    Ok(wls::block_trace_sqrt(&q, 3))
}

/// Single-clock geometry matrix for `receiver` and the given emitters.
pub fn geometry_matrix(receiver: EcefPoint, emitters: &[EcefPoint]) -> Result<DMatrix<f64>, SolveError> {
    let mut g = DMatrix::zeros(emitters.len(), 4);
    for (i, e) in emitters.iter().enumerate() {
        let u = unit_vector(receiver, *e)?;
        g[(i, 0)] = -u.x;
        g[(i, 1)] = -u.y;
        g[(i, 2)] = -u.z;
        g[(i, 3)] = 1.0;
    }
    Ok(g)
}

/// Exponential moving average of scatter-delay samples. The first sample
/// initializes the state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterDelayEstimator {
    alpha: f64,
    state: Option<f64>,
    samples: usize,
}

impl Default for ScatterDelayEstimator {
    fn default() -> Self {
        Self { alpha: DEFAULT_ALPHA, state: None, samples: 0 }
    }
}

impl ScatterDelayEstimator {
    pub fn new(alpha: f64) -> Result<Self, SolveError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(SolveError::InvalidOption(format!("alpha {alpha} outside (0, 1]")));
        }
        Ok(Self { alpha, state: None, samples: 0 })
    }

    /// Feed one t_b2 − t_b1 sample; returns the updated estimate.
    pub fn update(&mut self, sample: f64) -> f64 {
        let next = match self.state {
            None => sample,
            Some(prev) => self.alpha * sample + (1.0 - self.alpha) * prev,
        };
        self.state = Some(next);
        self.samples += 1;
        next
    }

    pub fn estimate(&self) -> Option<f64> {
        self.state
    }

    pub fn samples(&self) -> usize {
        self.samples
    }
}

/// EMA of (t_b1, t_b2) pairs.
pub fn estimate_scatter_delay(pairs: &[(f64, f64)], alpha: f64) -> Result<f64, SolveError> {
    let mut est = ScatterDelayEstimator::new(alpha)?;
    for &(tb1, tb2) in pairs {
        est.update(tb2 - tb1);
    }
    est.estimate().ok_or(SolveError::NoPairs)
}

/// Which point a scattered range is compared against when extracting t_b2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DelayReference {
    /// Real satellite: yields the geometric excess delay of the tag path.
    #[default]
    Real,
    /// Virtual satellite: yields the delay that makes the virtual range exact.
    Virtual,
}

/// Receiver fix from direct rows only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectFix {
    pub epoch_ms: i64,
    pub position: EcefPoint,
    /// t_b1, seconds.
    pub clock_bias: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySample {
    pub svid: u32,
    pub epoch_ms: i64,
    pub fix_epoch_ms: i64,
    pub t_b1: f64,
    pub t_b2: f64,
}

impl DelaySample {
    pub fn t_s(&self) -> f64 {
        self.t_b2 - self.t_b1
    }
}

/// t_b2 = (ρ_s − |emitter − L|)/c for one scattered row and a direct fix.
pub fn delay_sample(
    scattered: &Measurement,
    satellite: EcefPoint,
    tag: EcefPoint,
    fix: &DirectFix,
    reference: DelayReference,
) -> Result<DelaySample, SolveError> {
    let emitter = match reference {
        DelayReference::Real => satellite,
        DelayReference::Virtual => make_virtual_satellite(scattered.svid, satellite, tag)?.position,
    };
    let t_b2 = (scattered.pseudorange - range(emitter, fix.position)) / SPEED_OF_LIGHT;
    Ok(DelaySample {
        svid: scattered.svid,
        epoch_ms: scattered.epoch_ms,
        fix_epoch_ms: fix.epoch_ms,
        t_b1: fix.clock_bias,
        t_b2,
    })
}

/// Pair each scattered row with the nearest direct fix within `window_ms`
/// (ties go to the earlier fix) and extract a delay sample. Rows without a
/// fix in range or without a satellite position are skipped.
pub fn pair_delay_samples(
    fixes: &[DirectFix],
    rows: &[Measurement],
    ephemeris: &dyn Ephemeris,
    tag: EcefPoint,
    reference: DelayReference,
    window_ms: i64,
) -> Result<Vec<DelaySample>, SolveError> {
    let mut out = Vec::new();
    for m in rows.iter().filter(|m| m.scattered == PathClass::Scattered) {
        let nearest = fixes
            .iter()
            .filter(|f| (f.epoch_ms - m.epoch_ms).abs() <= window_ms)
            .min_by_key(|f| ((f.epoch_ms - m.epoch_ms).abs(), f.epoch_ms));
        let (Some(fix), Some(sat)) = (nearest, ephemeris.satellite_position(m.svid, m.epoch_ms)) else {
            continue;
        };
        out.push(delay_sample(m, sat, tag, fix, reference)?);
    }
    Ok(out)
}

/// Per-svid EMA over samples taken in epoch order.
pub fn estimate_delays_per_svid(
    samples: &[DelaySample],
    alpha: f64,
) -> Result<BTreeMap<u32, ScatterDelayEstimator>, SolveError> {
    let mut sorted: Vec<&DelaySample> = samples.iter().collect();
    sorted.sort_by_key(|s| (s.epoch_ms, s.svid));
    let mut out: BTreeMap<u32, ScatterDelayEstimator> = BTreeMap::new();
    for s in sorted {
        match out.get_mut(&s.svid) {
            Some(est) => {
                est.update(s.t_s());
            }
            None => {
                let mut est = ScatterDelayEstimator::new(alpha)?;
                est.update(s.t_s());
                out.insert(s.svid, est);
            }
        }
    }
    if out.is_empty() {
        return Err(SolveError::NoPairs);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::{satellite_at_az_el, GPS_ORBIT_RADIUS};

    fn receiver() -> EcefPoint {
        EcefPoint::new(6.371e6 * 0.6, 6.371e6 * 0.0, 6.371e6 * 0.8)
    }

    fn sky(rx: EcefPoint, dirs: &[(f64, f64)]) -> Vec<EcefPoint> {
        dirs.iter()
            .map(|&(az, el)| satellite_at_az_el(rx, az.to_radians(), el.to_radians(), GPS_ORBIT_RADIUS).unwrap())
            .collect()
    }

    fn direct_rows(rx: EcefPoint, sats: &[EcefPoint], tb: f64) -> (Vec<Measurement>, BTreeMap<u32, EcefPoint>) {
        let mut rows = Vec::new();
        let mut map = BTreeMap::new();
        for (i, s) in sats.iter().enumerate() {
            let svid = i as u32 + 1;
            map.insert(svid, *s);
            rows.push(Measurement {
                epoch_ms: 0,
                svid,
                cn0: 40.0,
                pseudorange: range(*s, rx) + SPEED_OF_LIGHT * tb,
                adr: 0.0,
                adr_valid: false,
                scattered: PathClass::Direct,
            });
        }
        (rows, map)
    }

    #[test]
    fn virtual_satellite_reflects_through_tag() {
        let v = make_virtual_satellite(3, EcefPoint::new(1e7, 2e7, 0.0), EcefPoint::ORIGIN).unwrap();
        assert_eq!(v.position, EcefPoint::new(-1e7, -2e7, 0.0));
        assert_eq!(v.svid, 3);
        let tag = EcefPoint::new(1.0, 2.0, 3.0);
        assert!(matches!(
            make_virtual_satellite(1, tag, tag),
            Err(SolveError::Geometry(GeometryError::DegenerateGeometry(_)))
        ));
    }

    #[test]
    fn five_direct_satellites_zero_noise() {
        let rx = receiver();
        let sats = sky(rx, &[(0.0, 80.0), (60.0, 30.0), (150.0, 45.0), (230.0, 20.0), (300.0, 55.0)]);
        let tb = 1.234e-4;
        let (rows, map) = direct_rows(rx, &sats, tb);
        let sol = solve_position(&rows, &map, &TagConfig::default(), &Weighting::Cn0, &SolveOptions::default()).unwrap();
        assert!(range(sol.position, rx) < 1e-3);
        assert!((sol.clock_bias_direct.unwrap() - tb).abs() < 1e-12);
        assert!(sol.converged);
        assert_eq!(sol.unknowns, 4);
        assert!(sol.dop > 0.0 && sol.dop < 10.0);
    }

    #[test]
    fn underdetermined_and_missing_delay() {
        let rx = receiver();
        let sats = sky(rx, &[(0.0, 80.0), (60.0, 30.0), (150.0, 45.0)]);
        let (rows, map) = direct_rows(rx, &sats, 0.0);
        assert_eq!(
            solve_position(&rows, &map, &TagConfig::default(), &Weighting::Cn0, &SolveOptions::default()),
            Err(SolveError::Underdetermined { rows: 3, unknowns: 4 })
        );
        let mut rows = rows;
        rows[0].scattered = PathClass::Scattered;
        rows.push(rows[1]);
        assert!(matches!(
            solve_position(&rows, &map, &TagConfig::new(rx), &Weighting::Cn0, &SolveOptions::default()),
            Err(SolveError::MissingScatterDelay { svid: 1 })
        ));
    }

    #[test]
    fn collinear_geometry_is_singular() {
        // Every line of sight from the start point is along the x axis.
        let sats = [
            EcefPoint::new(2e7, 0.0, 0.0),
            EcefPoint::new(-2e7, 0.0, 0.0),
            EcefPoint::new(3e7, 0.0, 0.0),
            EcefPoint::new(-3e7, 0.0, 0.0),
            EcefPoint::new(2.5e7, 0.0, 0.0),
        ];
        let (rows, map) = direct_rows(EcefPoint::ORIGIN, &sats, 0.0);
        assert_eq!(
            solve_position(&rows, &map, &TagConfig::default(), &Weighting::Identity, &SolveOptions::default()),
            Err(SolveError::SingularNormalMatrix)
        );
    }

    #[test]
    fn missing_satellite_is_dropped_and_reported() {
        let rx = receiver();
        let sats = sky(rx, &[(0.0, 80.0), (60.0, 30.0), (150.0, 45.0), (230.0, 20.0), (300.0, 55.0)]);
        let (mut rows, map) = direct_rows(rx, &sats, 0.0);
        rows.push(Measurement { svid: 99, ..rows[0] });
        let sol = solve_position(&rows, &map, &TagConfig::default(), &Weighting::Cn0, &SolveOptions::default()).unwrap();
        assert_eq!(sol.dropped.len(), 1);
        assert_eq!(sol.dropped[0].svid, 99);
        assert_eq!(sol.rows_used, 5);
    }

    #[test]
    fn tetrahedral_dop() {
        let dirs = [
            Vector3::new(1.0, 1.0, 1.0),
            Vector3::new(1.0, -1.0, -1.0),
            Vector3::new(-1.0, 1.0, -1.0),
            Vector3::new(-1.0, -1.0, 1.0),
        ];
        let emitters: Vec<EcefPoint> = dirs.iter().map(|d| EcefPoint::from_vector(&(d.normalize() * 2e7))).collect();
        let g = geometry_matrix(EcefPoint::ORIGIN, &emitters).unwrap();
        let dop = dilution_of_precision(&g).unwrap();
        assert!((dop - 1.4999999999999998).abs() < 1e-9);
    }

    #[test]
    fn near_collinear_dop_is_large() {
        let rx = receiver();
        let sats = sky(rx, &[(10.0, 60.0), (10.05, 60.0), (10.0, 60.05), (10.05, 60.05)]);
        let g = geometry_matrix(rx, &sats).unwrap();
        match dilution_of_precision(&g) {
            Ok(d) => assert!(d > 100.0),
            Err(e) => assert_eq!(e, SolveError::SingularNormalMatrix),
        }
    }

    #[test]
    fn ema_examples() {
        assert_eq!(estimate_scatter_delay(&[(0.0, 5e-8)], 0.2).unwrap(), 5e-8);
        let v = estimate_scatter_delay(&[(0.0, 4e-8), (0.0, 6e-8)], 0.5).unwrap();
        assert!((v - 5e-8).abs() < 1e-20);
        assert_eq!(estimate_scatter_delay(&[], 0.2), Err(SolveError::NoPairs));
        assert!(ScatterDelayEstimator::new(0.0).is_err());
    }

    #[test]
    fn pairing_respects_window() {
        let tag = EcefPoint::new(6.371e6, 0.0, 0.0);
        let sat = EcefPoint::new(2.6e7, 1e6, 0.0);
        let map: BTreeMap<u32, EcefPoint> = [(7, sat)].into_iter().collect();
        let fixes = [
            DirectFix { epoch_ms: 0, position: tag.offset(&Vector3::new(0.0, 5.0, 0.0)), clock_bias: 0.0 },
            DirectFix { epoch_ms: 100_000, position: tag, clock_bias: 0.0 },
        ];
        let m = Measurement {
            epoch_ms: 30_000,
            svid: 7,
            cn0: 40.0,
            pseudorange: 2e7,
            adr: 0.0,
            adr_valid: false,
            scattered: PathClass::Scattered,
        };
        let s = pair_delay_samples(&fixes, &[m], &map, tag, DelayReference::Real, 40_000).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].fix_epoch_ms, 0);
        let s = pair_delay_samples(&fixes, &[m], &map, tag, DelayReference::Real, 20_000).unwrap();
        assert!(s.is_empty());
    }
}
