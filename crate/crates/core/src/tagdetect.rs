//! ON-OFF keying detection on per-satellite C/N0 series.
//!
//! The tag toggles its amplifier with a known period and duty cycle, so a
//! scattered satellite shows a square wave in C/N0. The detector correlates
//! the series against that square wave at every sample-aligned phase and
//! labels each epoch from the best phase.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measurements::{Measurement, MeasurementError, MeasurementSet, PathClass};

/// Coverage criterion: the tag must strengthen C/N0 by at least 3 dB.
pub const COVERAGE_THRESHOLD_DB: f64 = 3.0;
/// Minimum normalized correlation for a detection.
pub const DEFAULT_SCORE_MIN: f64 = 0.6;
/// Default switching period (20 s at 1 Hz sampling).
pub const DEFAULT_PERIOD_MS: i64 = 20_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectError {
    #[error("series spans {span_ms} ms, need at least two periods ({needed_ms} ms)")]
    InsufficientSpan { span_ms: i64, needed_ms: i64 },
    #[error("epochs must be strictly increasing")]
    NonMonotoneEpochs,
    #[error("invalid switching pattern: {0}")]
    InvalidPattern(&'static str),
    #[error("empty input")]
    EmptyInput,
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
}

/// Tag switching schedule. `phase_ms` is the offset of the ON start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingPattern {
    pub period_ms: i64,
    pub duty: f64,
    #[serde(default)]
    pub phase_ms: i64,
}

impl Default for SwitchingPattern {
    fn default() -> Self {
        Self { period_ms: DEFAULT_PERIOD_MS, duty: 0.5, phase_ms: 0 }
    }
}

impl SwitchingPattern {
    pub fn validate(&self) -> Result<(), DetectError> {
        if self.period_ms <= 0 {
            return Err(DetectError::InvalidPattern("period must be positive"));
        }
        if !(self.duty > 0.0 && self.duty < 1.0) {
            return Err(DetectError::InvalidPattern("duty must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Whether the tag is ON at `t_ms`.
    pub fn is_on(&self, t_ms: i64) -> bool {
        let pos = (t_ms - self.phase_ms).rem_euclid(self.period_ms);
        (pos as f64) < self.duty * self.period_ms as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub threshold_db: f64,
    pub score_min: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self { threshold_db: COVERAGE_THRESHOLD_DB, score_min: DEFAULT_SCORE_MIN }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub detected: bool,
    /// ON minus OFF mean C/N0, present only when detected.
    pub gain_db: Option<f64>,
    pub phase_ms: i64,
    /// Pearson correlation with the square wave, in [-1, 1].
    pub score: f64,
    pub labels: Vec<PathClass>,
}

/// Correlate `series` against the pattern (its `phase_ms` is ignored) at every
/// sample-aligned phase and keep the best one.
pub fn detect_pattern(
    series: &[(i64, f64)],
    pattern: SwitchingPattern,
    config: DetectConfig,
) -> Result<DetectionResult, DetectError> {
    pattern.validate()?;
    if series.len() < 2 {
        return Err(DetectError::InsufficientSpan { span_ms: 0, needed_ms: 2 * pattern.period_ms });
    }
    if series.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(DetectError::NonMonotoneEpochs);
    }
    let step = series.windows(2).map(|w| w[1].0 - w[0].0).min().unwrap_or(1);
    let span = series[series.len() - 1].0 - series[0].0 + step;
    if span < 2 * pattern.period_ms {
        return Err(DetectError::InsufficientSpan { span_ms: span, needed_ms: 2 * pattern.period_ms });
    }

    let n = series.len() as f64;
    let mean = series.iter().map(|s| s.1).sum::<f64>() / n;
    let var = series.iter().map(|s| (s.1 - mean).powi(2)).sum::<f64>();

    let mut best_phase = 0;
    let mut best_score = f64::NEG_INFINITY;
    let mut phase = 0;
    while phase < pattern.period_ms {
        let p = SwitchingPattern { phase_ms: phase, ..pattern };
        let score = pearson(series, &p, mean, var);
        if score > best_score {
            best_score = score;
            best_phase = phase;
        }
        phase += step;
    }

    let best = SwitchingPattern { phase_ms: best_phase, ..pattern };
    let labels: Vec<PathClass> = series
        .iter()
        .map(|&(t, _)| if best.is_on(t) { PathClass::Scattered } else { PathClass::Direct })
        .collect();
    let on: Vec<f64> = series.iter().filter(|s| best.is_on(s.0)).map(|s| s.1).collect();
    let off: Vec<f64> = series.iter().filter(|s| !best.is_on(s.0)).map(|s| s.1).collect();
    let gain = coverage_gain(&on, &off).ok();
    let detected = matches!(gain, Some(g) if g >= config.threshold_db) && best_score >= config.score_min;
    Ok(DetectionResult {
        detected,
        gain_db: if detected { gain } else { None },
        phase_ms: best_phase,
        score: best_score,
        labels,
    })
}

/// Pearson correlation of the series with the ±1 square wave; 0 when either
/// side has no variance.
fn pearson(series: &[(i64, f64)], pattern: &SwitchingPattern, mean: f64, var: f64) -> f64 {
    let n = series.len() as f64;
    let wave: Vec<f64> = series.iter().map(|s| if pattern.is_on(s.0) { 1.0 } else { -1.0 }).collect();
    let wmean = wave.iter().sum::<f64>() / n;
    let wvar = wave.iter().map(|w| (w - wmean).powi(2)).sum::<f64>();
    if var <= 0.0 || wvar <= 0.0 {
        return 0.0;
    }
    let cov: f64 = series.iter().zip(&wave).map(|(s, w)| (s.1 - mean) * (w - wmean)).sum();
    (cov / (var * wvar).sqrt()).clamp(-1.0, 1.0)
}

/// Mean C/N0 difference between ON and OFF samples, dB.
pub fn coverage_gain(series_on: &[f64], series_off: &[f64]) -> Result<f64, DetectError> {
    if series_on.is_empty() || series_off.is_empty() {
        return Err(DetectError::EmptyInput);
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Ok(mean(series_on) - mean(series_off))
}

/// Per-svid detection over a measurement set.
#[derive(Debug, Clone, PartialEq)]
pub struct SetDetection {
    pub per_svid: BTreeMap<u32, Result<DetectionResult, DetectError>>,
    /// Input set with `U` rows of detected satellites relabeled.
    pub labeled: MeasurementSet,
}

/// Run the detector on the unlabeled (`U`) rows of every satellite.
///
/// Rows of satellites where the pattern is not detected are labeled direct;
/// rows already carrying a label are left alone.
pub fn detect_set(
    set: &MeasurementSet,
    pattern: SwitchingPattern,
    config: DetectConfig,
) -> Result<SetDetection, DetectError> {
    let mut per_svid = BTreeMap::new();
    let mut relabel: BTreeMap<(u32, i64), PathClass> = BTreeMap::new();
    for (svid, rows) in set.by_svid() {
        let series: Vec<(i64, f64)> = rows
            .iter()
            .filter(|m| m.scattered == PathClass::Unknown)
            .map(|m| (m.epoch_ms, m.cn0))
            .collect();
        if series.is_empty() {
            continue;
        }
        let result = detect_pattern(&series, pattern, config);
        for (i, &(t, _)) in series.iter().enumerate() {
            let class = match &result {
                Ok(r) if r.detected => r.labels[i],
                _ => PathClass::Direct,
            };
            relabel.insert((svid, t), class);
        }
        per_svid.insert(svid, result);
    }
    let rows: Vec<Measurement> = set
        .measurements()
        .iter()
        .map(|m| {
            let mut m = *m;
            if m.scattered == PathClass::Unknown {
                if let Some(c) = relabel.get(&(m.svid, m.epoch_ms)) {
                    m.scattered = *c;
                }
            }
            m
        })
        .collect();
    Ok(SetDetection { per_svid, labeled: MeasurementSet::new(rows, set.wavelength)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(on_db: f64, off_db: f64, pattern: SwitchingPattern, n: usize) -> Vec<(i64, f64)> {
        (0..n)
            .map(|i| {
                let t = i as i64 * 1000;
                (t, if pattern.is_on(t) { on_db } else { off_db })
            })
            .collect()
    }

    #[test]
    fn aligned_square_wave() {
        let truth = SwitchingPattern { phase_ms: 0, ..Default::default() };
        let series = square(44.5, 35.5, truth, 100);
        let r = detect_pattern(&series, truth, DetectConfig::default()).unwrap();
        assert!(r.detected);
        assert!((r.gain_db.unwrap() - 9.0).abs() < 1e-12);
        assert_eq!(r.phase_ms, 0);
        assert!((r.score - 1.0).abs() < 1e-12);
        for (i, (t, _)) in series.iter().enumerate() {
            let want = if truth.is_on(*t) { PathClass::Scattered } else { PathClass::Direct };
            assert_eq!(r.labels[i], want);
        }
    }

    #[test]
    fn recovers_generating_phase() {
        for phase in [0, 3000, 7000, 13000, 19000] {
            let truth = SwitchingPattern { phase_ms: phase, ..Default::default() };
            let series = square(40.0, 36.0, truth, 60);
            let r = detect_pattern(&series, truth, DetectConfig::default()).unwrap();
            assert_eq!(r.phase_ms, phase);
        }
    }

    #[test]
    fn constant_series_is_not_detected() {
        let series: Vec<(i64, f64)> = (0..80).map(|i| (i * 1000, 38.0)).collect();
        let r = detect_pattern(&series, SwitchingPattern::default(), DetectConfig::default()).unwrap();
        assert!(!r.detected);
        assert_eq!(r.gain_db, None);
        assert_eq!(r.score, 0.0);
    }

    #[test]
    fn span_and_order_checks() {
        let series: Vec<(i64, f64)> = (0..39).map(|i| (i * 1000, 38.0)).collect();
        assert!(matches!(
            detect_pattern(&series, SwitchingPattern::default(), DetectConfig::default()),
            Err(DetectError::InsufficientSpan { span_ms: 39000, needed_ms: 40000 })
        ));
        let series = vec![(0, 1.0), (0, 2.0)];
        assert_eq!(
            detect_pattern(&series, SwitchingPattern::default(), DetectConfig::default()),
            Err(DetectError::NonMonotoneEpochs)
        );
        let bad = SwitchingPattern { duty: 1.0, ..Default::default() };
        assert!(matches!(
            detect_pattern(&square(1.0, 0.0, bad, 10), bad, DetectConfig::default()),
            Err(DetectError::InvalidPattern(_))
        ));
    }

    #[test]
    fn labels_partition_epochs() {
        let truth = SwitchingPattern { phase_ms: 5000, duty: 0.3, period_ms: 10_000 };
        let series = square(41.0, 37.0, truth, 50);
        let r = detect_pattern(&series, truth, DetectConfig::default()).unwrap();
        assert_eq!(r.labels.len(), series.len());
        assert!(r.labels.iter().all(|l| matches!(l, PathClass::Scattered | PathClass::Direct)));
    }

    #[test]
    fn offset_invariance() {
        let truth = SwitchingPattern { phase_ms: 4000, ..Default::default() };
        let mut series = square(40.0, 35.0, truth, 80);
        for (i, s) in series.iter_mut().enumerate() {
            s.1 += ((i * 7919) % 13) as f64 * 0.1;
        }
        let a = detect_pattern(&series, truth, DetectConfig::default()).unwrap();
        let shifted: Vec<(i64, f64)> = series.iter().map(|&(t, c)| (t, c + 12.5)).collect();
        let b = detect_pattern(&shifted, truth, DetectConfig::default()).unwrap();
        assert_eq!(a.phase_ms, b.phase_ms);
        assert!((a.gain_db.unwrap() - b.gain_db.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn coverage_gain_examples() {
        assert_eq!(coverage_gain(&[40.0, 41.0], &[40.0, 41.0]).unwrap(), 0.0);
        assert_eq!(coverage_gain(&[44.0, 45.0], &[35.0, 36.0]).unwrap(), 9.0);
        assert_eq!(coverage_gain(&[], &[1.0]), Err(DetectError::EmptyInput));
        assert_eq!(COVERAGE_THRESHOLD_DB, 3.0);
    }

    #[test]
    fn gain_below_threshold_is_not_detected() {
        let truth = SwitchingPattern::default();
        let series = square(37.0, 35.0, truth, 80);
        let r = detect_pattern(&series, truth, DetectConfig::default()).unwrap();
        assert!(!r.detected);
        assert!(r.score > 0.99);
    }
}
