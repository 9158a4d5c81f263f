//! Coordinate frames and satellite geometry.
//!
//! Everything works in an Earth-centered Earth-fixed frame with a spherical
//! Earth. Angles are radians; conversion to degrees happens only at the
//! configuration and CLI boundary.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius used for visibility checks, meters.
pub const EARTH_RADIUS: f64 = 6.371e6;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Nominal GPS orbit radius, meters.
pub const GPS_ORBIT_RADIUS: f64 = 2.656e7;
/// Nominal GPS orbit inclination, radians (55 degrees).
pub const GPS_INCLINATION: f64 = 55.0 * PI / 180.0;
/// Nominal GPS orbital period, seconds.
pub const GPS_PERIOD: f64 = 43_082.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("invalid orbit: {0}")]
    InvalidOrbit(String),
}

/// A point in the Earth-centered Earth-fixed frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EcefPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EcefPoint {
    pub const ORIGIN: EcefPoint = EcefPoint { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(self) -> f64 {
        self.to_vector().norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// `self + v`.
    pub fn offset(self, v: &Vector3<f64>) -> Self {
        Self::new(self.x + v.x, self.y + v.y, self.z + v.z)
    }

    /// Vector from `other` to `self`.
    pub fn sub(self, other: EcefPoint) -> Vector3<f64> {
        Vector3::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }
}

impl From<[f64; 3]> for EcefPoint {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

/// Euclidean distance between two points.
pub fn range(a: EcefPoint, b: EcefPoint) -> f64 {
    a.sub(b).norm()
}

/// Unit vector pointing from `from` to `to`.
pub fn unit_vector(from: EcefPoint, to: EcefPoint) -> Result<Vector3<f64>, GeometryError> {
    let d = to.sub(from);
    let n = d.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(GeometryError::DegenerateGeometry("coincident points"));
    }
    Ok(d / n)
}

/// A circular orbit around the Earth's center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularOrbit {
    pub radius: f64,
    pub inclination: f64,
    pub raan: f64,
    pub phase0: f64,
    /// Radians per second.
    pub angular_rate: f64,
}

impl CircularOrbit {
    pub fn new(
        radius: f64,
        inclination: f64,
        raan: f64,
        phase0: f64,
        angular_rate: f64,
    ) -> Result<Self, GeometryError> {
        let orbit = Self { radius, inclination, raan, phase0, angular_rate };
        orbit.validate()?;
        Ok(orbit)
    }

    /// GPS-like orbit (radius 2.656e7 m, 55 degrees, 43 082 s period).
    pub fn gps(raan: f64, phase0: f64) -> Self {
        Self {
            radius: GPS_ORBIT_RADIUS,
            inclination: GPS_INCLINATION,
            raan,
            phase0,
            angular_rate: 2.0 * PI / GPS_PERIOD,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = [self.radius, self.inclination, self.raan, self.phase0, self.angular_rate]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(GeometryError::InvalidOrbit("non-finite parameter".into()));
        }
        if self.radius <= EARTH_RADIUS {
            return Err(GeometryError::InvalidOrbit(format!(
                "radius {} m is inside the Earth",
                self.radius
            )));
        }
        // A zero rate is accepted so that tests can pin a satellite in place.
        if self.angular_rate < 0.0 {
            return Err(GeometryError::InvalidOrbit("negative angular rate".into()));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.angular_rate
    }

    /// Position at time `t` seconds.
    pub fn position(&self, t: f64) -> EcefPoint {
        orbit_position(self, t)
    }
}

/// Position on `orbit` at `t` seconds: `Rz(raan) · Rx(incl) · (r cos θ, r sin θ, 0)`
/// with `θ = phase0 + angular_rate · t`.
pub fn orbit_position(orbit: &CircularOrbit, t: f64) -> EcefPoint {
    let theta = orbit.phase0 + orbit.angular_rate * t;
    let (st, ct) = theta.sin_cos();
    let (si, ci) = orbit.inclination.sin_cos();
    let (so, co) = orbit.raan.sin_cos();
    let px = orbit.radius * ct;
    let py = orbit.radius * st;
    // Rx(incl) applied to (px, py, 0)
    let y1 = py * ci;
    let z1 = py * si;
    EcefPoint::new(co * px - so * y1, so * px + co * y1, z1)
}

/// Satellite positions by svid and receiver epoch (milliseconds).
pub trait Ephemeris {
    fn satellite_position(&self, svid: u32, epoch_ms: i64) -> Option<EcefPoint>;
}

/// Static positions, the same at every epoch.
impl Ephemeris for std::collections::BTreeMap<u32, EcefPoint> {
    fn satellite_position(&self, svid: u32, _epoch_ms: i64) -> Option<EcefPoint> {
        self.get(&svid).copied()
    }
}

/// Local east-north-up frame anchored at a point on the spherical Earth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnuFrame {
    pub origin: EcefPoint,
    /// Rows are the east, north and up axes expressed in ECEF.
    rotation: Matrix3<f64>,
}

impl EnuFrame {
    pub fn at(origin: EcefPoint) -> Result<Self, GeometryError> {
        let up = unit_vector(EcefPoint::ORIGIN, origin)?;
        let pole = Vector3::z();
        let mut east = pole.cross(&up);
        if east.norm() < 1e-12 {
            // At a pole; any horizontal direction works.
            east = Vector3::y().cross(&up);
        }
        let east = east.normalize();
        let north = up.cross(&east);
        let rotation = Matrix3::from_rows(&[east.transpose(), north.transpose(), up.transpose()]);
        Ok(Self { origin, rotation })
    }

    pub fn up(&self) -> Vector3<f64> {
        self.rotation.row(2).transpose()
    }

    /// Rotate an ECEF displacement into ENU components.
    pub fn rotate_to_enu(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn rotate_from_enu(&self, enu: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * enu
    }

    pub fn to_enu(&self, p: EcefPoint) -> Vector3<f64> {
        self.rotate_to_enu(&p.sub(self.origin))
    }

    pub fn from_enu(&self, enu: &Vector3<f64>) -> EcefPoint {
        self.origin.offset(&self.rotate_from_enu(enu))
    }
}

/// Elevation of `target` seen from `observer`, radians, using the spherical up.
pub fn elevation(observer: EcefPoint, target: EcefPoint) -> Result<f64, GeometryError> {
    let up = unit_vector(EcefPoint::ORIGIN, observer)?;
    let los = unit_vector(observer, target)?;
    Ok(up.dot(&los).clamp(-1.0, 1.0).asin())
}

/// Point at `distance` from `observer` along azimuth/elevation (radians).
pub fn point_at_az_el(
    observer: EcefPoint,
    azimuth: f64,
    elevation: f64,
    distance: f64,
) -> Result<EcefPoint, GeometryError> {
    let frame = EnuFrame::at(observer)?;
    let (se, ce) = elevation.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    let dir = Vector3::new(ce * sa, ce * ca, se);
    Ok(frame.from_enu(&(dir * distance)))
}

/// Point at orbit radius `radius` seen from `observer` at the given azimuth
/// and elevation (radians).
pub fn satellite_at_az_el(
    observer: EcefPoint,
    azimuth: f64,
    elevation: f64,
    radius: f64,
) -> Result<EcefPoint, GeometryError> {
    let frame = EnuFrame::at(observer)?;
    let (se, ce) = elevation.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    let dir = frame.rotate_from_enu(&Vector3::new(ce * sa, ce * ca, se));
    // Solve |o + s·dir| = radius for s > 0.
    let o = observer.to_vector();
    let b = o.dot(&dir);
    let c = o.norm_squared() - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return Err(GeometryError::DegenerateGeometry("line of sight misses the orbit sphere"));
    }
    let s = -b + disc.sqrt();
    if s <= 0.0 {
        return Err(GeometryError::DegenerateGeometry("orbit sphere is behind the observer"));
    }
    Ok(observer.offset(&(dir * s)))
}

/// True when the segment `a`–`b` stays outside the sphere of `radius`
/// (endpoints on the surface are allowed).
pub fn segment_clears_sphere(a: EcefPoint, b: EcefPoint, radius: f64) -> bool {
    let av = a.to_vector();
    let d = b.sub(a);
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        return av.norm() >= radius;
    }
    let t = (-av.dot(&d) / len2).clamp(0.0, 1.0);
    let closest = av + d * t;
    // Tolerance lets surface endpoints pass.
    closest.norm() >= radius * (1.0 - 1e-9)
}
