//! Scenario description (JSON, schema 1). Angles are degrees here and
//! radians everywhere else.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geodesy::{
    satellite_at_az_el, CircularOrbit, EcefPoint, EnuFrame, Ephemeris, EARTH_RADIUS, GPS_ORBIT_RADIUS, GPS_PERIOD,
};
use crate::tagdetect::SwitchingPattern;

use super::SimError;

pub const SCHEMA_VERSION: u32 = 1;

/// A location given either in ECEF meters or as spherical latitude,
/// longitude and height above the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointSpec {
    Ecef { x: f64, y: f64, z: f64 },
    Geodetic { lat_deg: f64, lon_deg: f64, height_m: f64 },
}

impl PointSpec {
    pub fn to_ecef(&self) -> EcefPoint {
        match *self {
            PointSpec::Ecef { x, y, z } => EcefPoint::new(x, y, z),
            PointSpec::Geodetic { lat_deg, lon_deg, height_m } => {
                let r = EARTH_RADIUS + height_m;
                let (sl, cl) = lat_deg.to_radians().sin_cos();
                let (so, co) = lon_deg.to_radians().sin_cos();
                EcefPoint::new(r * cl * co, r * cl * so, r * sl)
            }
        }
    }
}

impl From<EcefPoint> for PointSpec {
    fn from(p: EcefPoint) -> Self {
        PointSpec::Ecef { x: p.x, y: p.y, z: p.z }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitSpec {
    #[serde(default = "default_orbit_radius")]
    pub radius_m: f64,
    #[serde(default = "default_inclination")]
    pub inclination_deg: f64,
    #[serde(default)]
    pub raan_deg: f64,
    #[serde(default)]
    pub phase0_deg: f64,
    #[serde(default = "default_period")]
    pub period_s: f64,
}

fn default_orbit_radius() -> f64 {
    GPS_ORBIT_RADIUS
}
fn default_inclination() -> f64 {
    55.0
}
fn default_period() -> f64 {
    GPS_PERIOD
}

impl OrbitSpec {
    pub fn to_orbit(&self) -> Result<CircularOrbit, SimError> {
        if !(self.period_s > 0.0) {
            return Err(SimError::InvalidScenario(format!("orbit period {} s must be positive", self.period_s)));
        }
        CircularOrbit::new(
            self.radius_m,
            self.inclination_deg.to_radians(),
            self.raan_deg.to_radians(),
            self.phase0_deg.to_radians(),
            std::f64::consts::TAU / self.period_s,
        )
        .map_err(|e| SimError::InvalidScenario(e.to_string()))
    }
}

/// Fixed satellite placed by azimuth/elevation as seen from the tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkySpec {
    pub az_deg: f64,
    pub el_deg: f64,
    #[serde(default = "default_orbit_radius")]
    pub radius_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SatelliteKind {
    Orbit(OrbitSpec),
    Fixed(PointSpec),
    Sky(SkySpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatelliteSpec {
    pub svid: u32,
    #[serde(flatten)]
    pub kind: SatelliteKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagSpec {
    pub position: PointSpec,
    /// Internal processing delay of the tag, seconds.
    #[serde(default)]
    pub processing_delay_s: f64,
    #[serde(default)]
    pub pattern: SwitchingPattern,
    #[serde(default = "default_gain")]
    pub gain_db: f64,
}

fn default_gain() -> f64 {
    9.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub epoch_ms: i64,
    pub position: PointSpec,
}

/// Receiver truth. Trajectories are linearly interpolated and held constant
/// outside their first and last points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverSpec {
    Static(PointSpec),
    /// Static, offset from the tag in the tag's east-north-up frame, meters.
    TagOffset([f64; 3]),
    Trajectory(Vec<TrajectoryPoint>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockSpec {
    #[serde(default)]
    pub bias_s: f64,
    /// Seconds per second.
    #[serde(default)]
    pub drift: f64,
}

impl Default for ClockSpec {
    fn default() -> Self {
        Self { bias_s: 1e-4, drift: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(default = "default_sigma_rho")]
    pub sigma_pseudorange_m: f64,
    #[serde(default = "default_sigma_phi")]
    pub sigma_phase_m: f64,
    #[serde(default = "default_sigma_cn0")]
    pub sigma_cn0_db: f64,
}

fn default_sigma_rho() -> f64 {
    3.0
}
fn default_sigma_phi() -> f64 {
    0.02
}
fn default_sigma_cn0() -> f64 {
    1.0
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            sigma_pseudorange_m: default_sigma_rho(),
            sigma_phase_m: default_sigma_phi(),
            sigma_cn0_db: default_sigma_cn0(),
        }
    }
}

impl NoiseSpec {
    pub fn zero() -> Self {
        Self { sigma_pseudorange_m: 0.0, sigma_phase_m: 0.0, sigma_cn0_db: 0.0 }
    }
}

/// C/N0 of direct rows and the tag gain's decay with tag-receiver distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cn0Model {
    #[serde(default = "default_baseline")]
    pub baseline_dbhz: f64,
    #[serde(default = "default_d0")]
    pub d0_m: f64,
    #[serde(default = "default_rolloff")]
    pub rolloff_db_per_decade: f64,
}

fn default_baseline() -> f64 {
    35.0
}
fn default_d0() -> f64 {
    2.0
}

/// Log-distance slope that takes 9 dB at 2 m down to 4 dB at 27.7 m.
pub fn default_rolloff() -> f64 {
    5.0 / (27.7f64 / 2.0).log10()
}

impl Default for Cn0Model {
    fn default() -> Self {
        Self { baseline_dbhz: default_baseline(), d0_m: default_d0(), rolloff_db_per_decade: default_rolloff() }
    }
}

impl Cn0Model {
    /// Scattered minus direct C/N0 at tag-receiver distance `d`, clamped at 0.
    pub fn scatter_gain(&self, gain_db: f64, d: f64) -> f64 {
        let ratio = d.max(self.d0_m) / self.d0_m;
        (gain_db - self.rolloff_db_per_decade * ratio.log10()).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochSpec {
    #[serde(default)]
    pub start_ms: i64,
    #[serde(default = "default_step")]
    pub step_ms: i64,
    pub count: usize,
}

fn default_step() -> i64 {
    1000
}

/// Row layout of the generated measurement set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputMode {
    /// Labeled `D` rows every epoch plus labeled `S` rows while the tag is ON.
    #[default]
    Paired,
    /// One unlabeled `U` row per satellite and epoch, taken from the tag path
    /// while the tag is ON, as a phone would log it.
    Blind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema: u32,
    #[serde(default)]
    pub seed: u64,
    pub epochs: EpochSpec,
    pub satellites: Vec<SatelliteSpec>,
    pub tag: TagSpec,
    pub receiver: ReceiverSpec,
    #[serde(default)]
    pub clock: ClockSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub cn0_model: Cn0Model,
    #[serde(default = "default_mask")]
    pub elevation_mask_deg: f64,
    /// Satellites whose direct path to the receiver is blocked.
    #[serde(default)]
    pub blocked: Vec<u32>,
    #[serde(default)]
    pub output: OutputMode,
    #[serde(default = "default_wavelength")]
    pub wavelength_m: f64,
}

fn default_mask() -> f64 {
    5.0
}
fn default_wavelength() -> f64 {
    crate::measurements::L1_WAVELENGTH
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| SimError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        if self.schema != SCHEMA_VERSION {
            return bad(format!("schema {} is not supported (expected {SCHEMA_VERSION})", self.schema));
        }
        if self.epochs.step_ms <= 0 {
            return bad("epochs.step_ms must be positive".into());
        }
        if self.epochs.count == 0 {
            return bad("epochs.count must be positive".into());
        }
        if self.satellites.is_empty() {
            return bad("no satellites".into());
        }
        let mut seen = BTreeSet::new();
        for s in &self.satellites {
            if !seen.insert(s.svid) {
                return bad(format!("duplicate svid {}", s.svid));
            }
            if let SatelliteKind::Orbit(o) = &s.kind {
                o.to_orbit()?;
            }
        }
        let n = &self.noise;
        for (name, v) in [
            ("sigma_pseudorange_m", n.sigma_pseudorange_m),
            ("sigma_phase_m", n.sigma_phase_m),
            ("sigma_cn0_db", n.sigma_cn0_db),
            ("tag.processing_delay_s", self.tag.processing_delay_s),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be a nonnegative number"));
            }
        }
        self.tag.pattern.validate().map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        if !(self.wavelength_m > 0.0) {
            return bad("wavelength_m must be positive".into());
        }
        if !(-90.0..=90.0).contains(&self.elevation_mask_deg) {
            return bad("elevation_mask_deg outside [-90, 90]".into());
        }
        if !(self.cn0_model.d0_m > 0.0) {
            return bad("cn0_model.d0_m must be positive".into());
        }
        if let ReceiverSpec::Trajectory(points) = &self.receiver {
            if points.is_empty() {
                return bad("empty receiver trajectory".into());
            }
            if points.windows(2).any(|w| w[1].epoch_ms <= w[0].epoch_ms) {
                return bad("trajectory epochs must increase".into());
            }
        }
        let tag = self.tag.position.to_ecef();
        if !tag.is_finite() || tag.norm() < 1.0 {
            return bad("tag position must be finite and away from the Earth's center".into());
        }
        Ok(())
    }

    pub fn tag_position(&self) -> EcefPoint {
        self.tag.position.to_ecef()
    }

    pub fn epoch_times(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.epochs.count).map(move |k| self.epochs.start_ms + k as i64 * self.epochs.step_ms)
    }

    pub fn receiver_at(&self, epoch_ms: i64) -> Result<EcefPoint, SimError> {
        match &self.receiver {
            ReceiverSpec::Static(p) => Ok(p.to_ecef()),
            ReceiverSpec::TagOffset(enu) => {
                let frame = EnuFrame::at(self.tag_position()).map_err(|e| SimError::InvalidScenario(e.to_string()))?;
                Ok(frame.from_enu(&nalgebra::Vector3::new(enu[0], enu[1], enu[2])))
            }
            ReceiverSpec::Trajectory(points) => {
                let first = &points[0];
                let last = &points[points.len() - 1];
                if epoch_ms <= first.epoch_ms {
                    return Ok(first.position.to_ecef());
                }
                if epoch_ms >= last.epoch_ms {
                    return Ok(last.position.to_ecef());
                }
                let i = points.partition_point(|p| p.epoch_ms <= epoch_ms);
                let (a, b) = (&points[i - 1], &points[i]);
                let f = (epoch_ms - a.epoch_ms) as f64 / (b.epoch_ms - a.epoch_ms) as f64;
                let pa = a.position.to_ecef().to_vector();
                let pb = b.position.to_ecef().to_vector();
                Ok(EcefPoint::from_vector(&(pa + (pb - pa) * f)))
            }
        }
    }

    /// Receiver clock bias at `epoch_ms`, seconds.
    pub fn clock_bias_at(&self, epoch_ms: i64) -> f64 {
        self.clock.bias_s + self.clock.drift * (epoch_ms - self.epochs.start_ms) as f64 / 1000.0
    }

    pub fn satellite_at(&self, spec: &SatelliteSpec, epoch_ms: i64) -> Result<EcefPoint, SimError> {
        match &spec.kind {
            SatelliteKind::Orbit(o) => Ok(o.to_orbit()?.position(epoch_ms as f64 / 1000.0)),
            SatelliteKind::Fixed(p) => Ok(p.to_ecef()),
            SatelliteKind::Sky(s) => satellite_at_az_el(
                self.tag_position(),
                s.az_deg.to_radians(),
                s.el_deg.to_radians(),
                s.radius_m,
            )
            .map_err(|e| SimError::InvalidScenario(format!("svid {}: {e}", spec.svid))),
        }
    }

    pub fn svids(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.satellites.iter().map(|s| s.svid).collect();
        v.sort_unstable();
        v
    }
}

impl Ephemeris for Scenario {
    fn satellite_position(&self, svid: u32, epoch_ms: i64) -> Option<EcefPoint> {
        let spec = self.satellites.iter().find(|s| s.svid == svid)?;
        self.satellite_at(spec, epoch_ms).ok()
    }
}
