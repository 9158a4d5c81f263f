//! Deterministic measurement simulator with exact ground truth.
//!
//! Direct rows follow ρ = |sat − rx| + c·t_b, scattered rows follow
//! ρ = |sat − tag| + |tag − rx| + c·t_b + c·t_proc; carrier ranges add λN.
//! Every satellite draws the same number of random values at every epoch in
//! a fixed order, so output depends only on the scenario and seed.

pub mod rng;
pub mod scenario;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{elevation, range, segment_clears_sphere, EcefPoint, EARTH_RADIUS, SPEED_OF_LIGHT};
use crate::measurements::{Measurement, MeasurementError, MeasurementSet, PathClass, CN0_RANGE};
use crate::solver_abs::make_virtual_satellite;

pub use rng::SimRng;
pub use scenario::*;

/// Range of the integer ambiguities drawn at lock-on, cycles.
pub const AMBIGUITY_RANGE: (i64, i64) = (-1_000_000, 1_000_000);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
}

/// True when the segment clears the spherical Earth and `sat` is at least
/// `mask` radians above the horizon of `rx`.
pub fn visibility(sat: EcefPoint, rx: EcefPoint, mask: f64) -> bool {
    if !segment_clears_sphere(sat, rx, EARTH_RADIUS) {
        return false;
    }
    matches!(elevation(rx, sat), Ok(el) if el >= mask)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatelliteTruth {
    pub svid: u32,
    pub position: EcefPoint,
    pub direct_range: f64,
    /// |sat − tag| + |tag − rx|.
    pub scattered_range: f64,
    /// Geometric excess delay plus processing delay, seconds.
    pub t_s: f64,
    /// Delay that makes the virtual-satellite range exact, seconds.
    pub t_s_virtual: f64,
    pub direct_visible: bool,
    pub tag_visible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochTruth {
    pub epoch_ms: i64,
    pub receiver: EcefPoint,
    pub clock_bias: f64,
    pub tag_on: bool,
    pub satellites: Vec<SatelliteTruth>,
}

impl EpochTruth {
    pub fn satellite(&self, svid: u32) -> Option<&SatelliteTruth> {
        self.satellites.iter().find(|s| s.svid == svid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub tag: EcefPoint,
    pub svids: Vec<u32>,
    pub epochs: Vec<EpochTruth>,
}

impl TruthRecord {
    pub fn epoch(&self, epoch_ms: i64) -> Option<&EpochTruth> {
        self.epochs.iter().find(|e| e.epoch_ms == epoch_ms)
    }

    /// `epoch_ms,truth_x,truth_y,truth_z,t_b,t_s_<svid>...,t_sv_<svid>...`
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = String::from("epoch_ms,truth_x,truth_y,truth_z,t_b");
        for s in &self.svids {
            header.push_str(&format!(",t_s_{s}"));
        }
        for s in &self.svids {
            header.push_str(&format!(",t_sv_{s}"));
        }
        writeln!(w, "{header}")?;
        for e in &self.epochs {
            let mut line = format!("{},{},{},{},{}", e.epoch_ms, e.receiver.x, e.receiver.y, e.receiver.z, e.clock_bias);
            for s in &self.svids {
                line.push(',');
                if let Some(t) = e.satellite(*s) {
                    line.push_str(&t.t_s.to_string());
                }
            }
            for s in &self.svids {
                line.push(',');
                if let Some(t) = e.satellite(*s) {
                    line.push_str(&t.t_s_virtual.to_string());
                }
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

struct Draws {
    cn0_d: f64,
    rho_d: f64,
    phi_d: f64,
    cn0_s: f64,
    rho_s: f64,
    phi_s: f64,
}

impl Draws {
    fn take(rng: &mut SimRng) -> Self {
        Self {
            cn0_d: rng.normal(),
            rho_d: rng.normal(),
            phi_d: rng.normal(),
            cn0_s: rng.normal(),
            rho_s: rng.normal(),
            phi_s: rng.normal(),
        }
    }
}

fn clamp_cn0(v: f64) -> f64 {
    v.clamp(CN0_RANGE.0, CN0_RANGE.1)
}

/// Generate measurements and truth for `scenario` using its own seed.
pub fn generate(scenario: &Scenario) -> Result<(MeasurementSet, TruthRecord), SimError> {
    scenario.validate()?;
    let mut rng = SimRng::new(scenario.seed);
    let mut sats: Vec<&SatelliteSpec> = scenario.satellites.iter().collect();
    sats.sort_by_key(|s| s.svid);

    // Ambiguities: (direct, scattered) per svid, drawn once in svid order.
    let (lo, hi) = AMBIGUITY_RANGE;
    let ambiguities: BTreeMap<u32, (i64, i64)> =
        sats.iter().map(|s| (s.svid, (rng.integer(lo, hi), rng.integer(lo, hi)))).collect();

    let tag = scenario.tag_position();
    let mask = scenario.elevation_mask_deg.to_radians();
    let noise = scenario.noise;
    let lambda = scenario.wavelength_m;
    let proc_delay = scenario.tag.processing_delay_s;
    let mut rows = Vec::new();
    let mut truth = Vec::with_capacity(scenario.epochs.count);

    for t in scenario.epoch_times() {
        let rx = scenario.receiver_at(t)?;
        let tb = scenario.clock_bias_at(t);
        let tag_on = scenario.tag.pattern.is_on(t);
        let d_tag_rx = range(tag, rx);
        let gain = scenario.cn0_model.scatter_gain(scenario.tag.gain_db, d_tag_rx);
        let mut epoch_truth = Vec::with_capacity(sats.len());

        for spec in &sats {
            let draws = Draws::take(&mut rng);
            let sat = scenario.satellite_at(spec, t)?;
            let direct_range = range(sat, rx);
            let scattered_range = range(sat, tag) + d_tag_rx;
            let virt = make_virtual_satellite(spec.svid, sat, tag)
                .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
            let t_s = (scattered_range - direct_range) / SPEED_OF_LIGHT + proc_delay;
            let t_s_virtual = (scattered_range - range(virt.position, rx)) / SPEED_OF_LIGHT + proc_delay;
            let direct_visible = !scenario.blocked.contains(&spec.svid) && visibility(sat, rx, mask);
            let tag_visible = visibility(sat, tag, mask);
            epoch_truth.push(SatelliteTruth {
                svid: spec.svid,
                position: sat,
                direct_range,
                scattered_range,
                t_s,
                t_s_virtual,
                direct_visible,
                tag_visible,
            });

            let (n_d, n_s) = ambiguities[&spec.svid];
            let base_cn0 = scenario.cn0_model.baseline_dbhz;
            let direct = |class: PathClass, n: i64| {
                let rho = direct_range + SPEED_OF_LIGHT * tb;
                Measurement {
                    epoch_ms: t,
                    svid: spec.svid,
                    cn0: clamp_cn0(base_cn0 + noise.sigma_cn0_db * draws.cn0_d),
                    pseudorange: rho + noise.sigma_pseudorange_m * draws.rho_d,
                    adr: rho + lambda * n as f64 + noise.sigma_phase_m * draws.phi_d,
                    adr_valid: true,
                    scattered: class,
                }
            };
            let scattered = |class: PathClass, n: i64| {
                let rho = scattered_range + SPEED_OF_LIGHT * (tb + proc_delay);
                Measurement {
                    epoch_ms: t,
                    svid: spec.svid,
                    cn0: clamp_cn0(base_cn0 + gain + noise.sigma_cn0_db * draws.cn0_s),
                    pseudorange: rho + noise.sigma_pseudorange_m * draws.rho_s,
                    adr: rho + lambda * n as f64 + noise.sigma_phase_m * draws.phi_s,
                    adr_valid: true,
                    scattered: class,
                }
            };
            let scatter_now = tag_on && tag_visible;
            match scenario.output {
                OutputMode::Paired => {
                    if direct_visible {
                        rows.push(direct(PathClass::Direct, n_d));
                    }
                    if scatter_now {
                        rows.push(scattered(PathClass::Scattered, n_s));
                    }
                }
                OutputMode::Blind => {
                    if scatter_now {
                        rows.push(scattered(PathClass::Unknown, n_d));
                    } else if direct_visible {
                        rows.push(direct(PathClass::Unknown, n_d));
                    }
                }
            }
        }
        truth.push(EpochTruth { epoch_ms: t, receiver: rx, clock_bias: tb, tag_on, satellites: epoch_truth });
    }

    let set = MeasurementSet::new(rows, lambda)?;
    Ok((set, TruthRecord { tag, svids: sats.iter().map(|s| s.svid).collect(), epochs: truth }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagdetect::SwitchingPattern;

    pub(crate) fn basic(output: OutputMode) -> Scenario {
        let sky = [(0.0, 70.0), (70.0, 35.0), (140.0, 50.0), (210.0, 25.0), (290.0, 45.0)];
        Scenario {
            schema: 1,
            seed: 5,
            epochs: EpochSpec { start_ms: 0, step_ms: 1000, count: 60 },
            satellites: sky
                .iter()
                .enumerate()
                .map(|(i, &(az, el))| SatelliteSpec {
                    svid: i as u32 + 1,
                    kind: SatelliteKind::Sky(SkySpec { az_deg: az, el_deg: el, radius_m: 2.656e7 }),
                })
                .collect(),
            tag: TagSpec {
                position: PointSpec::Geodetic { lat_deg: 30.0, lon_deg: 114.0, height_m: 10.0 },
                processing_delay_s: 0.0,
                pattern: SwitchingPattern::default(),
                gain_db: 9.0,
            },
            receiver: ReceiverSpec::TagOffset([3.0, 4.0, -1.0]),
            clock: ClockSpec { bias_s: 2e-4, drift: 0.0 },
            noise: NoiseSpec::zero(),
            cn0_model: Cn0Model::default(),
            elevation_mask_deg: 5.0,
            blocked: vec![],
            output,
            wavelength_m: crate::measurements::L1_WAVELENGTH,
        }
    }

    #[test]
    fn zero_noise_ranges_are_exact() {
        let sc = basic(OutputMode::Paired);
        let (set, truth) = generate(&sc).unwrap();
        for m in set.measurements() {
            let et = truth.epoch(m.epoch_ms).unwrap();
            let st = et.satellite(m.svid).unwrap();
            let want = match m.scattered {
                PathClass::Direct => st.direct_range,
                _ => st.scattered_range,
            } + SPEED_OF_LIGHT * et.clock_bias;
            assert_eq!(m.pseudorange, want);
        }
    }

    #[test]
    fn off_epochs_have_no_scattered_rows() {
        let sc = basic(OutputMode::Paired);
        let (set, truth) = generate(&sc).unwrap();
        let mut saw_scattered = false;
        for m in set.measurements() {
            if m.scattered == PathClass::Scattered {
                assert!(truth.epoch(m.epoch_ms).unwrap().tag_on);
                saw_scattered = true;
            }
        }
        assert!(saw_scattered);
    }

    #[test]
    fn blind_mode_has_one_unlabeled_row_per_satellite() {
        let sc = basic(OutputMode::Blind);
        let (set, _) = generate(&sc).unwrap();
        assert_eq!(set.len(), 60 * 5);
        assert!(set.measurements().iter().all(|m| m.scattered == PathClass::Unknown));
    }

    #[test]
    fn delays_are_nonnegative_and_virtual_range_is_exact() {
        let mut sc = basic(OutputMode::Paired);
        sc.tag.processing_delay_s = 3e-8;
        let (_, truth) = generate(&sc).unwrap();
        for e in &truth.epochs {
            for s in &e.satellites {
                assert!(s.t_s >= 0.0 && s.t_s_virtual >= 0.0);
                let vs = make_virtual_satellite(s.svid, s.position, truth.tag).unwrap();
                let lhs = s.scattered_range + SPEED_OF_LIGHT * 3e-8 - SPEED_OF_LIGHT * s.t_s_virtual;
                assert!((lhs - range(vs.position, e.receiver)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn visibility_cases() {
        let rx = EcefPoint::new(EARTH_RADIUS, 0.0, 0.0);
        assert!(visibility(EcefPoint::new(2.6e7, 0.0, 0.0), rx, 5f64.to_radians()));
        assert!(!visibility(EcefPoint::new(-2.6e7, 0.0, 0.0), rx, 5f64.to_radians()));
        let mut sc = basic(OutputMode::Paired);
        sc.blocked = vec![2];
        let (set, _) = generate(&sc).unwrap();
        assert!(!set.measurements().iter().any(|m| m.svid == 2 && m.scattered == PathClass::Direct));
        assert!(set.measurements().iter().any(|m| m.svid == 2 && m.scattered == PathClass::Scattered));
    }

    #[test]
    fn coverage_profile() {
        let m = Cn0Model::default();
        assert!((m.scatter_gain(9.0, 2.0) - 9.0).abs() < 1e-12);
        assert!(m.scatter_gain(9.0, 27.7) >= 3.0);
        assert!((m.scatter_gain(9.0, 27.7) - 4.0).abs() < 1e-9);
        assert_eq!(m.scatter_gain(9.0, 1e6), 0.0);
    }

    #[test]
    fn seed_determinism() {
        let mut sc = basic(OutputMode::Paired);
        sc.noise = NoiseSpec::default();
        let (a, _) = generate(&sc).unwrap();
        let (b, _) = generate(&sc).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        sc.seed += 1;
        let (c, _) = generate(&sc).unwrap();
        assert_ne!(a.to_csv_string(), c.to_csv_string());
    }

    #[test]
    fn scenario_json_round_trip() {
        let sc = basic(OutputMode::Blind);
        let back = Scenario::from_json(&sc.to_json()).unwrap();
        assert_eq!(back, sc);
        let mut bad = sc.clone();
        bad.schema = 2;
        assert!(matches!(Scenario::from_json(&bad.to_json()), Err(SimError::InvalidScenario(_))));
    }
}
