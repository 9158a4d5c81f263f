//! Differential positioning against a tag.
//!
//! Differencing a scattered carrier range (satellite → tag → receiver) with a
//! nearby direct one from the same satellite cancels the satellite clock and
//! most atmospheric error, leaving the base vector `b` from tag to receiver
//! and a differential clock term. `b` is found by Gauss-Newton iteration.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{range, unit_vector, EcefPoint, EnuFrame, Ephemeris, GeometryError, SPEED_OF_LIGHT};
use crate::measurements::{estimate_ambiguity, Measurement, MeasurementError, MeasurementSet, PathClass};
use crate::wls;

pub const DEFAULT_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 50;
/// Default pairing window, ±2 switching periods of 20 s.
pub const DEFAULT_WINDOW_MS: i64 = 40_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiffError {
    #[error("no direct/scattered pairs")]
    NoPairs,
    #[error("{pairs} pairs for 4 unknowns")]
    Underdetermined { pairs: usize },
    #[error("normal matrix is singular (line-of-sight directions not spread)")]
    SingularNormalMatrix,
    #[error("no convergence after {iterations} iterations (last step {last_step:.3e} m)")]
    NonConvergence { iterations: usize, last_step: f64 },
    #[error("base vector is zero; the gradient of |b| is undefined there")]
    ZeroBaseVector,
    #[error("solution did not converge")]
    NotConverged,
    #[error("invalid floor plan: {0}")]
    InvalidFloorPlan(String),
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Which observable the pairs difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangeMode {
    /// Accumulated delta range with integer ambiguities.
    #[default]
    Phase,
    /// Pseudorange with ΔN = 0, for when carrier lock is missing.
    Pseudorange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePair {
    pub svid: u32,
    /// Direct-path range at t1, meters.
    pub phi_direct: f64,
    /// Scattered-path range at t2, meters.
    pub phi_scattered: f64,
    pub t1: i64,
    pub t2: i64,
    /// |sat(t2) − tag| − |sat(t1) − tag|, meters.
    pub delta_r_tag: f64,
    /// n_scattered − n_direct, cycles.
    pub delta_n: i64,
    pub wavelength: f64,
    /// Unit vector from the satellite at t2 toward the tag.
    pub e: Vector3<f64>,
}

impl PhasePair {
    /// Φ_d = Φ_s(t2) − Φ_n(t1).
    pub fn phi_d(&self) -> f64 {
        self.phi_scattered - self.phi_direct
    }
}

/// Pair every scattered row with the nearest direct row of the same svid
/// within `window_ms` (ties go to the earlier direct row).
pub fn build_phase_pairs(
    set: &MeasurementSet,
    ephemeris: &dyn Ephemeris,
    tag: EcefPoint,
    window_ms: i64,
    mode: RangeMode,
) -> Result<Vec<PhasePair>, DiffError> {
    if window_ms < 0 {
        return Err(DiffError::InvalidOption("window must be nonnegative".into()));
    }
    let mut pairs = Vec::new();
    for (svid, rows) in set.by_svid() {
        let direct: Vec<&Measurement> = rows.iter().filter(|m| m.scattered == PathClass::Direct).collect();
        for s in rows.iter().filter(|m| m.scattered == PathClass::Scattered) {
            let nearest = direct
                .iter()
                .filter(|d| (d.epoch_ms - s.epoch_ms).abs() <= window_ms)
                .min_by_key(|d| ((d.epoch_ms - s.epoch_ms).abs(), d.epoch_ms));
            let Some(d) = nearest else { continue };
            let (Some(sat1), Some(sat2)) = (
                ephemeris.satellite_position(svid, d.epoch_ms),
                ephemeris.satellite_position(svid, s.epoch_ms),
            ) else {
                continue;
            };
            pairs.push(make_pair(d, s, sat1, sat2, tag, set.wavelength, mode)?);
        }
    }
    if pairs.is_empty() {
        return Err(DiffError::NoPairs);
    }
    Ok(pairs)
}

/// One pair from a direct row at t1 and a scattered row at t2.
pub fn make_pair(
    direct: &Measurement,
    scattered: &Measurement,
    sat_t1: EcefPoint,
    sat_t2: EcefPoint,
    tag: EcefPoint,
    wavelength: f64,
    mode: RangeMode,
) -> Result<PhasePair, DiffError> {
    let (phi_direct, phi_scattered, delta_n) = match mode {
        RangeMode::Phase => {
            let nd = estimate_ambiguity(direct, wavelength)?;
            let ns = estimate_ambiguity(scattered, wavelength)?;
            (direct.adr, scattered.adr, ns.n - nd.n)
        }
        RangeMode::Pseudorange => (direct.pseudorange, scattered.pseudorange, 0),
    };
    Ok(PhasePair {
        svid: scattered.svid,
        phi_direct,
        phi_scattered,
        t1: direct.epoch_ms,
        t2: scattered.epoch_ms,
        delta_r_tag: range(sat_t2, tag) - range(sat_t1, tag),
        delta_n,
        wavelength,
        e: unit_vector(sat_t2, tag)?,
    })
}

/// S_Φ = Φ_d − Δr_T − λΔN − |b0| + b0·e and the row [(b0/|b0| − e)ᵀ, 1].
pub fn residual_and_jacobian(pair: &PhasePair, b0: &Vector3<f64>) -> Result<(f64, [f64; 4]), DiffError> {
    let nb = b0.norm();
    if !(nb > 0.0) {
        return Err(DiffError::ZeroBaseVector);
    }
    let s = pair.phi_d() - pair.delta_r_tag - pair.wavelength * pair.delta_n as f64 - nb + b0.dot(&pair.e);
    let grad = b0 / nb - pair.e;
    Ok((s, [grad.x, grad.y, grad.z, 1.0]))
}

/// Geometry term |b| − b·e.
pub fn geometry_term(b: &Vector3<f64>, e: &Vector3<f64>) -> f64 {
    b.norm() - b.dot(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DiffOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOLERANCE, max_iter: DEFAULT_MAX_ITER }
    }
}

pub fn default_b_init() -> Vector3<f64> {
    Vector3::new(1.0, 1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseVectorSolution {
    /// Tag → receiver, meters.
    pub b: Vector3<f64>,
    /// Differential clock term ΔT, seconds.
    pub delta_t: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual_rms: f64,
    pub pairs_used: usize,
}

/// Gauss-Newton on the stacked pair residuals. `weights` are per pair
/// (inverse variances); `None` weights all pairs equally.
pub fn solve_base_vector(
    pairs: &[PhasePair],
    b_init: Vector3<f64>,
    weights: Option<&[f64]>,
    options: &DiffOptions,
) -> Result<BaseVectorSolution, DiffError> {
    if pairs.len() < 4 {
        return Err(DiffError::Underdetermined { pairs: pairs.len() });
    }
    if !(options.tol > 0.0) || options.max_iter == 0 {
        return Err(DiffError::InvalidOption("tol must be positive and max_iter nonzero".into()));
    }
    let w = match weights {
        Some(w) if w.len() != pairs.len() || w.iter().any(|x| !(*x > 0.0) || !x.is_finite()) => {
            return Err(DiffError::InvalidOption(format!("need {} positive weights", pairs.len())));
        }
        Some(w) => DVector::from_column_slice(w),
        None => DVector::from_element(pairs.len(), 1.0),
    };
    if !(b_init.norm() > 0.0) {
        return Err(DiffError::ZeroBaseVector);
    }

    let mut b = b_init;
    let mut c_dt = 0.0;
    let mut iterations = 0;
    let mut last_step = f64::INFINITY;
    let mut converged = false;
    while iterations < options.max_iter {
        iterations += 1;
        let (g, s) = stack(pairs, &b)?;
        let dx = wls::weighted_step(&g, &w, &s).map_err(|_| DiffError::SingularNormalMatrix)?;
        let db = Vector3::new(dx[0], dx[1], dx[2]);
        b += db;
        // ΔT enters the residual linearly and is re-estimated in full each step.
        c_dt = dx[3];
        last_step = db.norm();
        if !last_step.is_finite() {
            break;
        }
        if last_step < options.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(DiffError::NonConvergence { iterations, last_step });
    }
    let residual_rms = {
        let ss: f64 = pairs
            .iter()
            .map(|p| {
                let (s, _) = residual_and_jacobian(p, &b).unwrap_or((f64::NAN, [0.0; 4]));
                (s - c_dt).powi(2)
            })
            .sum();
        (ss / pairs.len() as f64).sqrt()
    };
    Ok(BaseVectorSolution {
        b,
        delta_t: c_dt / SPEED_OF_LIGHT,
        iterations,
        converged,
        residual_rms,
        pairs_used: pairs.len(),
    })
}

fn stack(pairs: &[PhasePair], b: &Vector3<f64>) -> Result<(DMatrix<f64>, DVector<f64>), DiffError> {
    let mut g = DMatrix::zeros(pairs.len(), 4);
    let mut s = DVector::zeros(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        let (si, row) = residual_and_jacobian(p, b)?;
        s[i] = si;
        for (k, v) in row.iter().enumerate() {
            g[(i, k)] = *v;
        }
    }
    Ok((g, s))
}

/// Receiver position `tag + b`.
pub fn recover_position(tag: EcefPoint, solution: &BaseVectorSolution) -> Result<EcefPoint, DiffError> {
    if !solution.converged {
        return Err(DiffError::NotConverged);
    }
    Ok(tag.offset(&solution.b))
}

/// Allowed receiver region around a tag: a closed convex polygon in the local
/// east-north plane (meters, relative to the tag) and an up interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorPlanConstraint {
    pub polygon: Vec<[f64; 2]>,
    /// (min, max) up offset from the tag, meters.
    pub height: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectReason {
    /// Outside the half-plane of polygon edge `edge` (vertex `edge` to `edge + 1`).
    OutsidePolygon { edge: usize },
    BelowFloor { up: f64, floor: f64 },
    AboveCeiling { up: f64, ceiling: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum FloorPlanVerdict {
    Accepted,
    Rejected(RejectReason),
}

impl FloorPlanConstraint {
    pub fn validate(&self) -> Result<(), DiffError> {
        let n = self.polygon.len();
        if n < 3 {
            return Err(DiffError::InvalidFloorPlan("polygon needs at least 3 vertices".into()));
        }
        if self.polygon.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DiffError::InvalidFloorPlan("non-finite vertex".into()));
        }
        if !(self.height.0 <= self.height.1) {
            return Err(DiffError::InvalidFloorPlan("empty height interval".into()));
        }
        let area = self.signed_area();
        if area == 0.0 {
            return Err(DiffError::InvalidFloorPlan("polygon has zero area".into()));
        }
        for i in 0..n {
            let c = self.edge_cross(i, self.polygon[(i + 2) % n]);
            if c * area.signum() < 0.0 {
                return Err(DiffError::InvalidFloorPlan("polygon is not convex".into()));
            }
        }
        Ok(())
    }

    fn signed_area(&self) -> f64 {
        let n = self.polygon.len();
        (0..n)
            .map(|i| {
                let a = self.polygon[i];
                let b = self.polygon[(i + 1) % n];
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
            / 2.0
    }

    /// Cross product of edge `i` with the vector from its start to `p`.
    fn edge_cross(&self, i: usize, p: [f64; 2]) -> f64 {
        let n = self.polygon.len();
        let a = Vector2::from(self.polygon[i]);
        let b = Vector2::from(self.polygon[(i + 1) % n]);
        let e = b - a;
        let d = Vector2::from(p) - a;
        e.x * d.y - e.y * d.x
    }

    /// Verdict for a point given in local east-north-up meters.
    pub fn check_enu(&self, enu: &Vector3<f64>) -> FloorPlanVerdict {
        let orient = self.signed_area().signum();
        let scale = self.polygon.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..self.polygon.len() {
            if self.edge_cross(i, [enu.x, enu.y]) * orient < -1e-12 * scale * scale {
                return FloorPlanVerdict::Rejected(RejectReason::OutsidePolygon { edge: i });
            }
        }
        if enu.z < self.height.0 {
            return FloorPlanVerdict::Rejected(RejectReason::BelowFloor { up: enu.z, floor: self.height.0 });
        }
        if enu.z > self.height.1 {
            return FloorPlanVerdict::Rejected(RejectReason::AboveCeiling { up: enu.z, ceiling: self.height.1 });
        }
        FloorPlanVerdict::Accepted
    }
}

/// Accept `tag + b` iff it lies in the plan's region. The tag fixes the
/// local frame the plan is drawn in.
pub fn apply_floor_plan(
    tag: EcefPoint,
    solution: &BaseVectorSolution,
    plan: &FloorPlanConstraint,
) -> Result<FloorPlanVerdict, DiffError> {
    plan.validate()?;
    let frame = EnuFrame::at(tag)?;
    Ok(plan.check_enu(&frame.rotate_to_enu(&solution.b)))
}

/// Group pairs by scattered epoch.
pub fn group_by_epoch(pairs: &[PhasePair]) -> BTreeMap<i64, Vec<PhasePair>> {
    let mut out: BTreeMap<i64, Vec<PhasePair>> = BTreeMap::new();
    for p in pairs {
        out.entry(p.t2).or_default().push(*p);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_for(b: Vector3<f64>, e: Vector3<f64>, c_dt: f64) -> PhasePair {
        let e = e.normalize();
        PhasePair {
            svid: 1,
            phi_direct: 0.0,
            phi_scattered: geometry_term(&b, &e) + c_dt,
            t1: 0,
            t2: 0,
            delta_r_tag: 0.0,
            delta_n: 0,
            wavelength: 0.19029367,
            e,
        }
    }

    fn spread_dirs() -> Vec<Vector3<f64>> {
        vec![
            Vector3::new(0.1, 0.2, -1.0),
            Vector3::new(0.8, 0.1, -0.6),
            Vector3::new(-0.7, 0.3, -0.5),
            Vector3::new(0.2, -0.9, -0.4),
            Vector3::new(-0.3, -0.6, -0.7),
            Vector3::new(0.5, 0.7, -0.3),
        ]
    }

    #[test]
    fn aligned_and_orthogonal_rows() {
        let e = Vector3::new(0.0, 0.0, 1.0);
        let p = pair_for(Vector3::zeros() + e, e, 0.0);
        let (_, row) = residual_and_jacobian(&p, &(e * 5.0)).unwrap();
        assert!(row[0].abs() < 1e-15 && row[1].abs() < 1e-15 && row[2].abs() < 1e-15);
        assert_eq!(row[3], 1.0);
        assert!(geometry_term(&(e * 5.0), &e).abs() < 1e-15);

        let b0 = Vector3::new(10.0, 0.0, 0.0);
        assert!((geometry_term(&b0, &e) - 10.0).abs() < 1e-15);
        let (_, row) = residual_and_jacobian(&p, &b0).unwrap();
        let want = b0 / 10.0 - e;
        assert_eq!([row[0], row[1], row[2]], [want.x, want.y, want.z]);
        assert_eq!(residual_and_jacobian(&p, &Vector3::zeros()), Err(DiffError::ZeroBaseVector));
    }

    #[test]
    fn recovers_base_vector_zero_noise() {
        let b = Vector3::new(3.0, -4.0, 1.5);
        let c_dt = 12.0;
        let pairs: Vec<PhasePair> = spread_dirs().into_iter().map(|e| pair_for(b, e, c_dt)).collect();
        let sol = solve_base_vector(&pairs, default_b_init(), None, &DiffOptions::default()).unwrap();
        assert!((sol.b - b).norm() < 1e-3);
        assert!((sol.delta_t - c_dt / SPEED_OF_LIGHT).abs() < 1e-12);
    }

    #[test]
    fn identical_directions_are_singular() {
        let e = Vector3::new(0.2, 0.1, -1.0);
        let pairs: Vec<PhasePair> = (0..6).map(|_| pair_for(Vector3::new(1.0, 2.0, 0.0), e, 0.0)).collect();
        assert_eq!(
            solve_base_vector(&pairs, default_b_init(), None, &DiffOptions::default()),
            Err(DiffError::SingularNormalMatrix)
        );
        assert_eq!(
            solve_base_vector(&pairs[..3], default_b_init(), None, &DiffOptions::default()),
            Err(DiffError::Underdetermined { pairs: 3 })
        );
    }

    #[test]
    fn recover_position_adds_b() {
        let sol = BaseVectorSolution {
            b: Vector3::new(3.0, 4.0, 0.0),
            delta_t: 0.0,
            iterations: 1,
            converged: true,
            residual_rms: 0.0,
            pairs_used: 4,
        };
        assert_eq!(recover_position(EcefPoint::new(100.0, 0.0, 0.0), &sol).unwrap(), EcefPoint::new(103.0, 4.0, 0.0));
        let bad = BaseVectorSolution { converged: false, ..sol };
        assert_eq!(recover_position(EcefPoint::ORIGIN, &bad), Err(DiffError::NotConverged));
    }

    #[test]
    fn floor_plan_membership() {
        let plan = FloorPlanConstraint {
            polygon: vec![[-5.0, -5.0], [5.0, -5.0], [5.0, 5.0], [-5.0, 5.0]],
            height: (-1.0, 3.0),
        };
        assert_eq!(plan.check_enu(&Vector3::new(1.0, 2.0, 0.0)), FloorPlanVerdict::Accepted);
        assert_eq!(plan.check_enu(&Vector3::new(5.0, 0.0, 3.0)), FloorPlanVerdict::Accepted);
        assert_eq!(
            plan.check_enu(&Vector3::new(6.0, 0.0, 0.0)),
            FloorPlanVerdict::Rejected(RejectReason::OutsidePolygon { edge: 1 })
        );
        assert!(matches!(
            plan.check_enu(&Vector3::new(0.0, 0.0, -2.0)),
            FloorPlanVerdict::Rejected(RejectReason::BelowFloor { .. })
        ));
        assert!(matches!(
            plan.check_enu(&Vector3::new(0.0, 0.0, 4.0)),
            FloorPlanVerdict::Rejected(RejectReason::AboveCeiling { .. })
        ));
        let concave = FloorPlanConstraint {
            polygon: vec![[0.0, 0.0], [4.0, 0.0], [1.0, 1.0], [0.0, 4.0]],
            height: (0.0, 1.0),
        };
        assert!(matches!(concave.validate(), Err(DiffError::InvalidFloorPlan(_))));
    }

    #[test]
    fn static_satellite_has_no_tag_range_change() {
        let tag = EcefPoint::new(6.371e6, 0.0, 0.0);
        let sat = EcefPoint::new(2.6e7, 1e6, 2e6);
        let d = Measurement {
            epoch_ms: 0,
            svid: 4,
            cn0: 40.0,
            pseudorange: 2e7,
            adr: 2e7 + 0.19029367 * 3.0,
            adr_valid: true,
            scattered: PathClass::Direct,
        };
        let s = Measurement { epoch_ms: 1000, scattered: PathClass::Scattered, adr: 2e7 + 10.0 + 0.19029367 * 7.0, pseudorange: 2e7 + 10.0, ..d };
        let p = make_pair(&d, &s, sat, sat, tag, 0.19029367, RangeMode::Phase).unwrap();
        assert_eq!(p.delta_r_tag, 0.0);
        assert_eq!(p.delta_n, 4);
        let unlocked = Measurement { adr_valid: false, ..d };
        assert!(matches!(
            make_pair(&unlocked, &s, sat, sat, tag, 0.19029367, RangeMode::Phase),
            Err(DiffError::Measurement(MeasurementError::CarrierUnlocked { .. }))
        ));
        let p = make_pair(&unlocked, &s, sat, sat, tag, 0.19029367, RangeMode::Pseudorange).unwrap();
        assert_eq!(p.delta_n, 0);
        assert_eq!(p.phi_d(), 10.0);
    }

    #[test]
    fn pairs_outside_window_are_excluded() {
        let tag = EcefPoint::new(6.371e6, 0.0, 0.0);
        let sats: BTreeMap<u32, EcefPoint> = [(4, EcefPoint::new(2.6e7, 1e6, 2e6))].into_iter().collect();
        let d = Measurement {
            epoch_ms: 0,
            svid: 4,
            cn0: 40.0,
            pseudorange: 2e7,
            adr: 2e7,
            adr_valid: true,
            scattered: PathClass::Direct,
        };
        let s = Measurement { epoch_ms: 50_000, scattered: PathClass::Scattered, ..d };
        let set = MeasurementSet::new(vec![d, s], 0.19029367).unwrap();
        assert_eq!(
            build_phase_pairs(&set, &sats, tag, 40_000, RangeMode::Phase),
            Err(DiffError::NoPairs)
        );
        assert_eq!(build_phase_pairs(&set, &sats, tag, 60_000, RangeMode::Phase).unwrap().len(), 1);
    }
}
