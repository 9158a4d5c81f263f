#![allow(dead_code)]

use std::collections::BTreeMap;

use mirrorfix_core::geodesy::EcefPoint;
use mirrorfix_core::measurements::{Measurement, PathClass, L1_WAVELENGTH};
use mirrorfix_core::simulator::{
    ClockSpec, Cn0Model, EpochSpec, NoiseSpec, OutputMode, PointSpec, ReceiverSpec, SatelliteKind, SatelliteSpec,
    Scenario, SimRng, SkySpec, TagSpec, TruthRecord,
};
use mirrorfix_core::tagdetect::SwitchingPattern;

pub const GPS_RADIUS: f64 = 2.656e7;

/// Static scenario with sky-placed satellites numbered from 1.
pub fn sky_scenario(seed: u64, sky: &[(f64, f64)], offset: [f64; 3]) -> Scenario {
    Scenario {
        schema: 1,
        seed,
        epochs: EpochSpec { start_ms: 0, step_ms: 1000, count: 1 },
        satellites: sky
            .iter()
            .enumerate()
            .map(|(i, &(az, el))| SatelliteSpec {
                svid: i as u32 + 1,
                kind: SatelliteKind::Sky(SkySpec { az_deg: az, el_deg: el, radius_m: GPS_RADIUS }),
            })
            .collect(),
        tag: TagSpec {
            position: PointSpec::Geodetic { lat_deg: 30.5, lon_deg: 114.3, height_m: 12.0 },
            processing_delay_s: 2e-8,
            pattern: SwitchingPattern::default(),
            gain_db: 9.0,
        },
        receiver: ReceiverSpec::TagOffset(offset),
        clock: ClockSpec { bias_s: 1.5e-4, drift: 0.0 },
        noise: NoiseSpec::zero(),
        cn0_model: Cn0Model::default(),
        elevation_mask_deg: 5.0,
        blocked: vec![],
        output: OutputMode::Paired,
        wavelength_m: L1_WAVELENGTH,
    }
}

/// `n` sky directions spread in azimuth with elevations in [15°, 80°].
pub fn random_sky(rng: &mut SimRng, n: usize) -> Vec<(f64, f64)> {
    let start = 360.0 * rng.uniform();
    (0..n)
        .map(|i| {
            let az = (start + 360.0 * i as f64 / n as f64 + 20.0 * (rng.uniform() - 0.5)).rem_euclid(360.0);
            let el = 15.0 + 65.0 * rng.uniform();
            (az, el)
        })
        .collect()
}

pub fn random_offset(rng: &mut SimRng, horizontal: f64, vertical: f64) -> [f64; 3] {
    [
        horizontal * (2.0 * rng.uniform() - 1.0),
        horizontal * (2.0 * rng.uniform() - 1.0),
        vertical * (2.0 * rng.uniform() - 1.0),
    ]
}

pub fn random_site(rng: &mut SimRng) -> PointSpec {
    PointSpec::Geodetic {
        lat_deg: -70.0 + 140.0 * rng.uniform(),
        lon_deg: -180.0 + 360.0 * rng.uniform(),
        height_m: 200.0 * rng.uniform(),
    }
}

pub fn satellites_at(truth: &TruthRecord, epoch_ms: i64) -> BTreeMap<u32, EcefPoint> {
    truth.epoch(epoch_ms).unwrap().satellites.iter().map(|s| (s.svid, s.position)).collect()
}

pub fn rows_of(rows: &[Measurement], class: PathClass) -> Vec<Measurement> {
    rows.iter().filter(|m| m.scattered == class).copied().collect()
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
