//! C ABI for mirrorfix.
//!
//! Every fallible function returns an [`MfxStatus`]; on failure the message
//! is kept per thread and can be read with [`mfx_last_error`]. Measurement
//! sets and scenarios are opaque handles that must be released with their
//! `_free` function. No function retains caller pointers after returning.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mirrorfix_core::geodesy::{EcefPoint, GeometryError};
use mirrorfix_core::measurements::{parse_measurement_csv, MeasurementError, MeasurementSet, PathClass};
use mirrorfix_core::nalgebra::Vector3;
use mirrorfix_core::rfdesign::{self, DiodeModel, Impedance, RfError};
use mirrorfix_core::simulator::{generate, Scenario, SimError};
use mirrorfix_core::solver_abs::{self, SolveError, SolveOptions, TagConfig, Weighting};
use mirrorfix_core::solver_diff::{self, DiffError, DiffOptions, PhasePair};
use mirrorfix_core::tagdetect::{self, DetectConfig, DetectError, SwitchingPattern};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    DegenerateGeometry = 5,
    SingularMatrix = 6,
    NotConverged = 7,
    Underdetermined = 8,
    MissingData = 9,
    OutOfRange = 10,
    Panic = 11,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: MfxStatus, msg: impl Into<String>) -> MfxStatus {
    set_error(msg);
    status
}

/// Run `f`, turning panics into [`MfxStatus::Panic`].
fn guard(f: impl FnOnce() -> MfxStatus) -> MfxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(MfxStatus::Panic, "internal panic"),
    }
}

trait ToStatus {
    fn status(&self) -> MfxStatus;
}

impl ToStatus for MeasurementError {
    fn status(&self) -> MfxStatus {
        match self {
            MeasurementError::Io(_) => MfxStatus::Io,
            MeasurementError::CarrierUnlocked { .. } => MfxStatus::MissingData,
            _ => MfxStatus::Parse,
        }
    }
}

impl ToStatus for SolveError {
    fn status(&self) -> MfxStatus {
        match self {
            SolveError::Underdetermined { .. } => MfxStatus::Underdetermined,
            SolveError::SingularNormalMatrix => MfxStatus::SingularMatrix,
            SolveError::NonConvergence { .. } => MfxStatus::NotConverged,
            SolveError::MissingScatterDelay { .. } | SolveError::NoPairs => MfxStatus::MissingData,
            SolveError::Geometry(_) => MfxStatus::DegenerateGeometry,
            SolveError::NegativeScatterDelay { .. } | SolveError::InvalidOption(_) => MfxStatus::InvalidArgument,
        }
    }
}

impl ToStatus for DiffError {
    fn status(&self) -> MfxStatus {
        match self {
            DiffError::Underdetermined { .. } => MfxStatus::Underdetermined,
            DiffError::SingularNormalMatrix => MfxStatus::SingularMatrix,
            DiffError::NonConvergence { .. } | DiffError::NotConverged => MfxStatus::NotConverged,
            DiffError::NoPairs => MfxStatus::MissingData,
            DiffError::ZeroBaseVector | DiffError::Geometry(_) => MfxStatus::DegenerateGeometry,
            DiffError::Measurement(e) => e.status(),
            DiffError::InvalidFloorPlan(_) | DiffError::InvalidOption(_) => MfxStatus::InvalidArgument,
        }
    }
}

impl ToStatus for RfError {
    fn status(&self) -> MfxStatus {
        match self {
            RfError::SingularDenominator | RfError::RankDeficient(_) | RfError::ZeroSlope { .. } => {
                MfxStatus::SingularMatrix
            }
            RfError::AboveCutoff { .. } | RfError::OutsideFitDomain { .. } => MfxStatus::OutOfRange,
            RfError::MissingCutoff => MfxStatus::MissingData,
            _ => MfxStatus::InvalidArgument,
        }
    }
}

impl ToStatus for DetectError {
    fn status(&self) -> MfxStatus {
        match self {
            DetectError::InsufficientSpan { .. } | DetectError::EmptyInput => MfxStatus::MissingData,
            DetectError::Measurement(e) => e.status(),
            _ => MfxStatus::InvalidArgument,
        }
    }
}

impl ToStatus for SimError {
    fn status(&self) -> MfxStatus {
        match self {
            SimError::Io(_) => MfxStatus::Io,
            SimError::InvalidScenario(_) => MfxStatus::Parse,
            SimError::Measurement(e) => e.status(),
        }
    }
}

impl ToStatus for GeometryError {
    fn status(&self) -> MfxStatus {
        MfxStatus::DegenerateGeometry
    }
}

fn report<E: ToStatus + std::fmt::Display>(e: E) -> MfxStatus {
    fail(e.status(), e.to_string())
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length plus one; pass a
/// null `buf` to query the size.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mfx_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfxVec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<MfxVec3> for EcefPoint {
    fn from(v: MfxVec3) -> Self {
        EcefPoint::new(v.x, v.y, v.z)
    }
}

impl From<EcefPoint> for MfxVec3 {
    fn from(p: EcefPoint) -> Self {
        MfxVec3 { x: p.x, y: p.y, z: p.z }
    }
}

/// One measurement row. `path_class` is `'D'`, `'S'` or `'U'`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfxMeasurement {
    pub epoch_ms: i64,
    pub svid: u32,
    pub cn0: f64,
    pub pseudorange: f64,
    pub adr: f64,
    pub adr_valid: bool,
    pub path_class: c_char,
}

/// Opaque measurement set.
pub struct MfxMeasurementSet {
    inner: MeasurementSet,
}

/// Opaque scenario.
pub struct MfxScenario {
    inner: Scenario,
}

unsafe fn path_arg(path: *const c_char) -> Result<String, MfxStatus> {
    if path.is_null() {
        return Err(fail(MfxStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| fail(MfxStatus::InvalidArgument, "path is not UTF-8"))
}

/// Load a canonical measurement CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfx_measurement_set_load_csv(
    path: *const c_char,
    out: *mut *mut MfxMeasurementSet,
) -> MfxStatus {
    guard(|| {
        if out.is_null() {
            return fail(MfxStatus::NullPointer, "out is null");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match parse_measurement_csv(&path) {
            Ok(set) => {
                *out = Box::into_raw(Box::new(MfxMeasurementSet { inner: set }));
                MfxStatus::Ok
            }
            Err(e) => report(e),
        }
    })
}

/// Number of rows; 0 for a null handle.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mfx_measurement_set_len(set: *const MfxMeasurementSet) -> usize {
    set.as_ref().map(|s| s.inner.len()).unwrap_or(0)
}

/// Row `index` in (epoch, svid, class) order.
///
/// # Safety
/// `set` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfx_measurement_set_get(
    set: *const MfxMeasurementSet,
    index: usize,
    out: *mut MfxMeasurement,
) -> MfxStatus {
    guard(|| {
        let (Some(set), false) = (set.as_ref(), out.is_null()) else {
            return fail(MfxStatus::NullPointer, "null argument");
        };
        let Some(m) = set.inner.measurements().get(index) else {
            return fail(MfxStatus::OutOfRange, format!("index {index} out of range"));
        };
        *out = MfxMeasurement {
            epoch_ms: m.epoch_ms,
            svid: m.svid,
            cn0: m.cn0,
            pseudorange: m.pseudorange,
            adr: m.adr,
            adr_valid: m.adr_valid,
            path_class: m.scattered.code() as c_char,
        };
        MfxStatus::Ok
    })
}

/// # Safety
/// `set` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mfx_measurement_set_free(set: *mut MfxMeasurementSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Load a scenario JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfx_scenario_load(path: *const c_char, out: *mut *mut MfxScenario) -> MfxStatus {
    guard(|| {
        if out.is_null() {
            return fail(MfxStatus::NullPointer, "out is null");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match Scenario::load(&path) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(MfxScenario { inner: s }));
                MfxStatus::Ok
            }
            Err(e) => report(e),
        }
    })
}

/// Generate the scenario's measurements into a new set handle.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfx_scenario_generate(
    scenario: *const MfxScenario,
    out: *mut *mut MfxMeasurementSet,
) -> MfxStatus {
    guard(|| {
        let (Some(sc), false) = (scenario.as_ref(), out.is_null()) else {
            return fail(MfxStatus::NullPointer, "null argument");
        };
        match generate(&sc.inner) {
            Ok((set, _)) => {
                *out = Box::into_raw(Box::new(MfxMeasurementSet { inner: set }));
                MfxStatus::Ok
            }
            Err(e) => report(e),
        }
    })
}

/// Tag position of a scenario.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfx_scenario_tag_position(scenario: *const MfxScenario, out: *mut MfxVec3) -> MfxStatus {
    guard(|| {
        let (Some(sc), false) = (scenario.as_ref(), out.is_null()) else {
            return fail(MfxStatus::NullPointer, "null argument");
        };
        *out = sc.inner.tag_position().into();
        MfxStatus::Ok
    })
}

/// # Safety
/// `scenario` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mfx_scenario_free(scenario: *mut MfxScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

unsafe fn write_out(out: *mut f64, r: Result<f64, impl ToStatus + std::fmt::Display>) -> MfxStatus {
    if out.is_null() {
        return fail(MfxStatus::NullPointer, "out is null");
    }
    match r {
        Ok(v) => {
            *out = v;
            MfxStatus::Ok
        }
        Err(e) => report(e),
    }
}

/// 10·log10|Γ|² for load and antenna impedances (ohms).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfx_reflection_gain_db(
    zl_re: f64,
    zl_im: f64,
    za_re: f64,
    za_im: f64,
    out: *mut f64,
) -> MfxStatus {
    guard(|| {
        write_out(out, rfdesign::reflection_gain_db(Impedance::new(zl_re, zl_im), Impedance::new(za_re, za_im)))
    })
}

/// Inductance resonating with `c` farads at `f_c` hertz.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfx_solve_inductance(f_c: f64, c: f64, out: *mut f64) -> MfxStatus {
    guard(|| write_out(out, rfdesign::solve_inductance(f_c, c)))
}

/// Linear noise figure.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfx_noise_figure(r: f64, k_a: f64, f_r0: f64, r_nr: f64, f: f64, out: *mut f64) -> MfxStatus {
    guard(|| write_out(out, rfdesign::noise_figure_with(r, k_a, f_r0, r_nr, f)))
}

/// Equivalent parallel capacitance of a packaged diode, farads.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfx_equivalent_capacitance(
    c_j: f64,
    c_p: f64,
    l_p: f64,
    r: f64,
    r_nr: f64,
    f_c: f64,
    out: *mut f64,
) -> MfxStatus {
    guard(|| {
        let diode = DiodeModel { c_j, c_p, l_p, r, ..Default::default() };
        write_out(out, rfdesign::equivalent_parallel_capacitance(&diode, r_nr, f_c))
    })
}

/// Virtual satellite `2·tag − real`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfx_virtual_satellite(real: MfxVec3, tag: MfxVec3, out: *mut MfxVec3) -> MfxStatus {
    guard(|| {
        if out.is_null() {
            return fail(MfxStatus::NullPointer, "out is null");
        }
        match solver_abs::make_virtual_satellite(0, real.into(), tag.into()) {
            Ok(v) => {
                *out = v.position.into();
                MfxStatus::Ok
            }
            Err(e) => report(e),
        }
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfxSatellite {
    pub svid: u32,
    pub position: MfxVec3,
}

/// Scatter-delay handling for [`mfx_solve_position`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfxTsMode {
    /// Remove `t_s` from scattered rows; all rows share one clock.
    Known = 0,
    /// Estimate separate direct and scattered clock biases.
    Joint = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfxPositionSolution {
    pub position: MfxVec3,
    pub has_clock_bias_direct: bool,
    /// Seconds.
    pub clock_bias_direct: f64,
    pub has_clock_bias_scattered: bool,
    /// Seconds.
    pub clock_bias_scattered: f64,
    pub iterations: u32,
    pub residual_rms: f64,
    pub dop: f64,
    pub rows_used: u32,
}

/// Solve one epoch of `set` with C/N0 weights and default tolerances.
///
/// # Safety
/// `set` must be a live handle, `satellites` must point to `n_satellites`
/// entries and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfx_solve_position(
    set: *const MfxMeasurementSet,
    epoch_ms: i64,
    satellites: *const MfxSatellite,
    n_satellites: usize,
    tag: MfxVec3,
    mode: MfxTsMode,
    t_s: f64,
    out: *mut MfxPositionSolution,
) -> MfxStatus {
    guard(|| {
        let (Some(set), false, false) = (set.as_ref(), satellites.is_null() && n_satellites > 0, out.is_null()) else {
            return fail(MfxStatus::NullPointer, "null argument");
        };
        let sats: BTreeMap<u32, EcefPoint> = if n_satellites == 0 {
            BTreeMap::new()
        } else {
            std::slice::from_raw_parts(satellites, n_satellites).iter().map(|s| (s.svid, s.position.into())).collect()
        };
        let rows = set.inner.epoch(epoch_ms);
        let (tag_cfg, joint) = match mode {
            MfxTsMode::Known => (TagConfig::with_delay(tag.into(), t_s), false),
            MfxTsMode::Joint => (TagConfig::new(tag.into()), true),
        };
        let opts = SolveOptions { joint_ts: joint, ..Default::default() };
        match solver_abs::solve_position(rows, &sats, &tag_cfg, &Weighting::Cn0, &opts) {
            Ok(sol) => {
                *out = MfxPositionSolution {
                    position: sol.position.into(),
                    has_clock_bias_direct: sol.clock_bias_direct.is_some(),
                    clock_bias_direct: sol.clock_bias_direct.unwrap_or(0.0),
                    has_clock_bias_scattered: sol.clock_bias_scattered.is_some(),
                    clock_bias_scattered: sol.clock_bias_scattered.unwrap_or(0.0),
                    iterations: sol.iterations as u32,
                    residual_rms: sol.residual_rms,
                    dop: sol.dop,
                    rows_used: sol.rows_used as u32,
                };
                MfxStatus::Ok
            }
            Err(e) => report(e),
        }
    })
}

/// Differenced pair; see the library's `PhasePair`. `e` is the unit vector
/// from the satellite toward the tag.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfxPhasePair {
    pub svid: u32,
    pub phi_direct: f64,
    pub phi_scattered: f64,
    pub delta_r_tag: f64,
    pub delta_n: i64,
    pub wavelength: f64,
    pub e: MfxVec3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfxBaseVector {
    pub b: MfxVec3,
    /// Seconds.
    pub delta_t: f64,
    pub iterations: u32,
    pub residual_rms: f64,
}

/// Gauss-Newton base-vector solve with equal weights and default tolerances.
///
/// # Safety
/// `pairs` must point to `n_pairs` entries and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfx_solve_base_vector(
    pairs: *const MfxPhasePair,
    n_pairs: usize,
    b_init: MfxVec3,
    out: *mut MfxBaseVector,
) -> MfxStatus {
    guard(|| {
        if pairs.is_null() || out.is_null() {
            return fail(MfxStatus::NullPointer, "null argument");
        }
        let pairs: Vec<PhasePair> = std::slice::from_raw_parts(pairs, n_pairs)
            .iter()
            .map(|p| PhasePair {
                svid: p.svid,
                phi_direct: p.phi_direct,
                phi_scattered: p.phi_scattered,
                t1: 0,
                t2: 0,
                delta_r_tag: p.delta_r_tag,
                delta_n: p.delta_n,
                wavelength: p.wavelength,
                e: Vector3::new(p.e.x, p.e.y, p.e.z),
            })
            .collect();
        let init = Vector3::new(b_init.x, b_init.y, b_init.z);
        match solver_diff::solve_base_vector(&pairs, init, None, &DiffOptions::default()) {
            Ok(sol) => {
                *out = MfxBaseVector {
                    b: MfxVec3 { x: sol.b.x, y: sol.b.y, z: sol.b.z },
                    delta_t: sol.delta_t,
                    iterations: sol.iterations as u32,
                    residual_rms: sol.residual_rms,
                };
                MfxStatus::Ok
            }
            Err(e) => report(e),
        }
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfxDetection {
    pub detected: bool,
    /// NaN when not detected.
    pub gain_db: f64,
    pub phase_ms: i64,
    pub score: f64,
}

/// ON-OFF keying detection on one C/N0 series. When `labels` is not null it
/// receives `n` bytes, 1 for scattered and 0 for direct.
///
/// # Safety
/// `epochs` and `cn0` must point to `n` values, `labels` must be null or
/// point to `n` writable bytes, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfx_detect_pattern(
    epochs: *const i64,
    cn0: *const f64,
    n: usize,
    period_ms: i64,
    duty: f64,
    threshold_db: f64,
    score_min: f64,
    labels: *mut u8,
    out: *mut MfxDetection,
) -> MfxStatus {
    guard(|| {
        if epochs.is_null() || cn0.is_null() || out.is_null() {
            return fail(MfxStatus::NullPointer, "null argument");
        }
        let t = std::slice::from_raw_parts(epochs, n);
        let c = std::slice::from_raw_parts(cn0, n);
        let series: Vec<(i64, f64)> = t.iter().copied().zip(c.iter().copied()).collect();
        let pattern = SwitchingPattern { period_ms, duty, phase_ms: 0 };
        match tagdetect::detect_pattern(&series, pattern, DetectConfig { threshold_db, score_min }) {
            Ok(r) => {
                if !labels.is_null() {
                    let dst = std::slice::from_raw_parts_mut(labels, n);
                    for (d, l) in dst.iter_mut().zip(&r.labels) {
                        *d = u8::from(*l == PathClass::Scattered);
                    }
                }
                *out = MfxDetection {
                    detected: r.detected,
                    gain_db: r.gain_db.unwrap_or(f64::NAN),
                    phase_ms: r.phase_ms,
                    score: r.score,
                };
                MfxStatus::Ok
            }
            Err(e) => report(e),
        }
    })
}
