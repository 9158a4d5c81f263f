//! Tunnel-diode reflection amplifier design calculator.
//!
//! Covers the reflection coefficient and gain of a load against an antenna,
//! LC resonance and quality factor, reduction of the packaged diode to an
//! equivalent parallel capacitance, IV-curve fitting and the noise-figure
//! driven bias search.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reported gain for a perfectly matched (zero reflection) load.
pub const GAIN_FLOOR_DB: f64 = -200.0;

/// Default bias grid step for the noise-figure search, volts.
pub const DEFAULT_BIAS_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RfError {
    #[error("singular denominator: load impedance equals the negated antenna impedance")]
    SingularDenominator,
    #[error("non-positive input: {0}")]
    NonPositiveInput(&'static str),
    #[error("circuit is net-inductive at the given frequency (Im(Y) = {imag_admittance:e} S)")]
    InductiveEquivalent { imag_admittance: f64 },
    #[error("rank-deficient IV fit: {0}")]
    RankDeficient(String),
    #[error("zero IV slope at {bias} V")]
    ZeroSlope { bias: f64 },
    #[error("operating frequency {f} Hz is at or above the cutoff {f_r0} Hz")]
    AboveCutoff { f: f64, f_r0: f64 },
    #[error("cutoff frequency f_r0 is required for noise-figure computation")]
    MissingCutoff,
    #[error("zero negative resistance")]
    ZeroResistance,
    #[error("no negative-resistance region inside [{lo}, {hi}] V")]
    NoNegativeResistanceRegion { lo: f64, hi: f64 },
    #[error("bias range [{lo}, {hi}] V is outside the fitted IV domain [{dom_lo}, {dom_hi}] V")]
    OutsideFitDomain { lo: f64, hi: f64, dom_lo: f64, dom_hi: f64 },
}

/// Complex impedance, ohms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Impedance {
    pub real: f64,
    pub imag: f64,
}

impl Impedance {
    pub const fn new(real: f64, imag: f64) -> Self {
        Self { real, imag }
    }

    pub fn as_complex(self) -> Complex64 {
        Complex64::new(self.real, self.imag)
    }
}

/// Γ = (Z_L − Z_A*) / (Z_L + Z_A).
pub fn reflection_coefficient(z_load: Impedance, z_antenna: Impedance) -> Result<Complex64, RfError> {
    let zl = z_load.as_complex();
    let za = z_antenna.as_complex();
    let den = zl + za;
    if den.norm() == 0.0 {
        return Err(RfError::SingularDenominator);
    }
    Ok((zl - za.conj()) / den)
}

/// Reflection gain 10·log10(|Γ|²), floored at [`GAIN_FLOOR_DB`].
pub fn reflection_gain_db(z_load: Impedance, z_antenna: Impedance) -> Result<f64, RfError> {
    let g = reflection_coefficient(z_load, z_antenna)?;
    let p = g.norm_sqr();
    if p == 0.0 {
        return Ok(GAIN_FLOOR_DB);
    }
    Ok((10.0 * p.log10()).max(GAIN_FLOOR_DB))
}

/// f_c = 1 / (2π√(LC)).
pub fn resonant_frequency(l: f64, c: f64) -> Result<f64, RfError> {
    if !(l > 0.0) {
        return Err(RfError::NonPositiveInput("inductance"));
    }
    if !(c > 0.0) {
        return Err(RfError::NonPositiveInput("capacitance"));
    }
    Ok(1.0 / (2.0 * PI * (l * c).sqrt()))
}

/// Inductance resonating with `c` at `f_c`: L = 1 / ((2π f_c)² C).
pub fn solve_inductance(f_c: f64, c: f64) -> Result<f64, RfError> {
    if !(f_c > 0.0) {
        return Err(RfError::NonPositiveInput("frequency"));
    }
    if !(c > 0.0) {
        return Err(RfError::NonPositiveInput("capacitance"));
    }
    let w = 2.0 * PI * f_c;
    Ok(1.0 / (w * w * c))
}

/// Series LC resonator with its parasitic resistance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorSpec {
    pub l: f64,
    pub c: f64,
    pub r_parasitic: f64,
    pub f_center: f64,
}

impl ResonatorSpec {
    pub fn new(l: f64, c: f64, r_parasitic: f64) -> Result<Self, RfError> {
        let f_center = resonant_frequency(l, c)?;
        Ok(Self { l, c, r_parasitic, f_center })
    }
}

/// Q = 2π f_c L / R.
pub fn quality_factor(spec: &ResonatorSpec) -> Result<f64, RfError> {
    if !(spec.r_parasitic > 0.0) {
        return Err(RfError::NonPositiveInput("parasitic resistance"));
    }
    if !(spec.l > 0.0) {
        return Err(RfError::NonPositiveInput("inductance"));
    }
    if !(spec.f_center > 0.0) {
        return Err(RfError::NonPositiveInput("frequency"));
    }
    Ok(2.0 * PI * spec.f_center * spec.l / spec.r_parasitic)
}

/// Packaged tunnel diode: parasitics, IV data and noise parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiodeModel {
    /// Junction capacitance, F.
    pub c_j: f64,
    /// Package capacitance, F.
    pub c_p: f64,
    /// Package inductance, H.
    pub l_p: f64,
    /// Series resistance, Ω.
    pub r: f64,
    /// (bias V, current A), strictly increasing bias.
    pub iv_samples: Vec<(f64, f64)>,
    pub fit_degree: usize,
    /// Noise factor K_a.
    pub k_a: f64,
    /// Cutoff frequency, Hz. No default exists for it.
    pub f_r0: Option<f64>,
}

impl Default for DiodeModel {
    /// MBD1057 datasheet parasitics with K_a = 1.2.
    fn default() -> Self {
        Self {
            c_j: 0.1e-12,
            c_p: 0.3e-12,
            l_p: 1.2e-9,
            r: 6.0,
            iv_samples: Vec::new(),
            fit_degree: 9,
            k_a: 1.2,
            f_r0: None,
        }
    }
}

impl DiodeModel {
    pub fn fit(&self) -> Result<IvFit, RfError> {
        fit_iv_curve(&self.iv_samples, self.fit_degree)
    }
}

/// Equivalent parallel capacitance of the packaged diode at `f_c`.
///
/// Topology: C_p in parallel with [r + jωL_p in series with (C_j ∥ R_NR)].
/// Returns Im(Y)/ω of the total admittance.
pub fn equivalent_parallel_capacitance(diode: &DiodeModel, r_nr: f64, f_c: f64) -> Result<f64, RfError> {
    if !(r_nr < 0.0) {
        return Err(RfError::NonPositiveInput("negative resistance must be < 0"));
    }
    if !(f_c > 0.0) {
        return Err(RfError::NonPositiveInput("frequency"));
    }
    let w = 2.0 * PI * f_c;
    let j = Complex64::i();
    let y_junction = j * w * diode.c_j + 1.0 / r_nr;
    let z_branch = diode.r + j * w * diode.l_p + 1.0 / y_junction;
    let y_total = j * w * diode.c_p + 1.0 / z_branch;
    if y_total.im <= 0.0 {
        return Err(RfError::InductiveEquivalent { imag_admittance: y_total.im });
    }
    Ok(y_total.im / w)
}

/// Polynomial in a normalized variable `u = (v - shift) / scale`.
///
/// Fitting in the normalized variable keeps the Vandermonde system
/// well-conditioned for the degree-9 fits used on tunnel-diode curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    /// Ascending powers of `u`.
    pub coeffs: Vec<f64>,
    pub shift: f64,
    pub scale: f64,
}

impl Polynomial {
    /// Plain polynomial in `v` with ascending coefficients.
    pub fn from_ascending(coeffs: Vec<f64>) -> Self {
        Self { coeffs, shift: 0.0, scale: 1.0 }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, v: f64) -> f64 {
        let u = (v - self.shift) / self.scale;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    /// dF/dv.
    pub fn derivative(&self, v: f64) -> f64 {
        let u = (v - self.shift) / self.scale;
        // Horner over k·c_k·u^(k-1)
        let mut d = 0.0;
        for k in (1..self.coeffs.len()).rev() {
            d = d * u + k as f64 * self.coeffs[k];
        }
        d / self.scale
    }

    /// Coefficients in plain powers of `v`, ascending.
    pub fn monomial_coefficients(&self) -> Vec<f64> {
        // p(v) = Σ c_k ((v - s)/a)^k, expanded binomially.
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        for (k, &c) in self.coeffs.iter().enumerate() {
            let ck = c / self.scale.powi(k as i32);
            let mut binom = 1.0;
            for i in 0..=k {
                // term: binom(k, i) v^i (-s)^(k-i)
                out[i] += ck * binom * (-self.shift).powi((k - i) as i32);
                binom = binom * (k - i) as f64 / (i + 1) as f64;
            }
        }
        out
    }
}

/// Result of a least-squares IV fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvFit {
    pub poly: Polynomial,
    pub residual_rms: f64,
    /// Bias interval covered by the samples.
    pub domain: (f64, f64),
}

/// Least-squares polynomial fit of current against bias.
///
/// `degree = n - 1` interpolates; `degree >= n` is rejected.
pub fn fit_iv_curve(samples: &[(f64, f64)], degree: usize) -> Result<IvFit, RfError> {
    let n = samples.len();
    if n < degree + 1 {
        return Err(RfError::RankDeficient(format!(
            "{n} samples cannot determine a degree-{degree} polynomial"
        )));
    }
    if samples.iter().any(|(v, i)| !v.is_finite() || !i.is_finite()) {
        return Err(RfError::RankDeficient("non-finite sample".into()));
    }
    let mut biases: Vec<f64> = samples.iter().map(|s| s.0).collect();
    biases.sort_by(f64::total_cmp);
    if biases.windows(2).any(|w| w[0] == w[1]) {
        return Err(RfError::RankDeficient("bias values are not distinct".into()));
    }
    let lo = biases[0];
    let hi = biases[n - 1];
    let shift = 0.5 * (lo + hi);
    let scale = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };

    let cols = degree + 1;
    let mut a = DMatrix::<f64>::zeros(n, cols);
    let mut y = DVector::<f64>::zeros(n);
    for (row, &(v, i)) in samples.iter().enumerate() {
        let u = (v - shift) / scale;
        let mut p = 1.0;
        for col in 0..cols {
            a[(row, col)] = p;
            p *= u;
        }
        y[row] = i;
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-13) {
        return Err(RfError::RankDeficient(format!(
            "Vandermonde matrix is numerically singular (σmin/σmax = {:e})",
            smin / smax
        )));
    }
    let coeffs = svd
        .solve(&y, 0.0)
        .map_err(|e| RfError::RankDeficient(e.to_string()))?;
    let resid = &a * &coeffs - &y;
    let residual_rms = (resid.norm_squared() / n as f64).sqrt();
    Ok(IvFit {
        poly: Polynomial { coeffs: coeffs.iter().copied().collect(), shift, scale },
        residual_rms,
        domain: (lo, hi),
    })
}

/// Slopes below this magnitude (A/V) are treated as an IV extremum.
const MIN_SLOPE: f64 = 1e-12;

/// R_NR = 1 / (dF/dV) at `bias`.
pub fn negative_resistance(fit: &Polynomial, bias: f64) -> Result<f64, RfError> {
    let slope = fit.derivative(bias);
    if !(slope.abs() > MIN_SLOPE) {
        return Err(RfError::ZeroSlope { bias });
    }
    Ok(1.0 / slope)
}

/// NF = (1 + K_a) / [(1 − r/R_NR)(1 − f/f_r0)], linear.
pub fn noise_figure(diode: &DiodeModel, r_nr: f64, f: f64) -> Result<f64, RfError> {
    let f_r0 = diode.f_r0.ok_or(RfError::MissingCutoff)?;
    noise_figure_with(diode.r, diode.k_a, f_r0, r_nr, f)
}

/// Same as [`noise_figure`] with explicit parameters.
pub fn noise_figure_with(r: f64, k_a: f64, f_r0: f64, r_nr: f64, f: f64) -> Result<f64, RfError> {
    if r_nr == 0.0 || !r_nr.is_finite() {
        return Err(RfError::ZeroResistance);
    }
    if !(f_r0 > 0.0) {
        return Err(RfError::NonPositiveInput("cutoff frequency"));
    }
    if f < 0.0 {
        return Err(RfError::NonPositiveInput("frequency"));
    }
    if f >= f_r0 {
        return Err(RfError::AboveCutoff { f, f_r0 });
    }
    Ok((1.0 + k_a) / ((1.0 - r / r_nr) * (1.0 - f / f_r0)))
}

/// Chosen operating point from the bias scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    pub bias: f64,
    pub nf: f64,
    pub r_nr: f64,
}

/// Grid-search the bias minimizing NF, restricted to R_NR < 0. Step 1 mV.
pub fn minimize_noise_figure(diode: &DiodeModel, bias_range: (f64, f64), f: f64) -> Result<BiasPoint, RfError> {
    minimize_noise_figure_with_step(diode, bias_range, f, DEFAULT_BIAS_STEP)
}

pub fn minimize_noise_figure_with_step(
    diode: &DiodeModel,
    bias_range: (f64, f64),
    f: f64,
    step: f64,
) -> Result<BiasPoint, RfError> {
    let fit = diode.fit()?;
    let f_r0 = diode.f_r0.ok_or(RfError::MissingCutoff)?;
    scan_noise_figure(&fit, diode.r, diode.k_a, f_r0, bias_range, f, step)
}

/// Grid search over an already fitted IV polynomial.
pub fn scan_noise_figure(
    fit: &IvFit,
    r: f64,
    k_a: f64,
    f_r0: f64,
    (lo, hi): (f64, f64),
    f: f64,
    step: f64,
) -> Result<BiasPoint, RfError> {
    if !(step > 0.0) {
        return Err(RfError::NonPositiveInput("bias step"));
    }
    if !(lo <= hi) {
        return Err(RfError::NonPositiveInput("bias range must satisfy lo <= hi"));
    }
    let (dom_lo, dom_hi) = fit.domain;
    let slack = 1e-12 * (dom_hi - dom_lo).abs().max(1.0);
    if lo < dom_lo - slack || hi > dom_hi + slack {
        return Err(RfError::OutsideFitDomain { lo, hi, dom_lo, dom_hi });
    }
    let steps = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut best: Option<BiasPoint> = None;
    for i in 0..=steps {
        let bias = lo + i as f64 * step;
        let Ok(r_nr) = negative_resistance(&fit.poly, bias) else {
            continue;
        };
        if r_nr >= 0.0 {
            continue;
        }
        let nf = noise_figure_with(r, k_a, f_r0, r_nr, f)?;
        if best.map_or(true, |b| nf < b.nf) {
            best = Some(BiasPoint { bias, nf, r_nr });
        }
    }
    best.ok_or(RfError::NoNegativeResistanceRegion { lo, hi })
}

/// Parse the two-column `bias_v,current_a` CSV.
pub fn parse_iv_csv<R: std::io::Read>(reader: R) -> Result<Vec<(f64, f64)>, crate::measurements::MeasurementError> {
    use crate::measurements::{MeasurementError, RowError};
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| MeasurementError::Io(e.to_string()))?.clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != ["bias_v", "current_a"] {
        return Err(MeasurementError::SchemaMismatch {
            expected: "bias_v,current_a".into(),
            found: got.join(","),
        });
    }
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 2;
        let parsed = rec.map_err(|e| e.to_string()).and_then(|r| {
            if r.len() != 2 {
                return Err(format!("expected 2 fields, found {}", r.len()));
            }
            let v: f64 = r[0].trim().parse().map_err(|_| format!("bad bias '{}'", &r[0]))?;
            let i: f64 = r[1].trim().parse().map_err(|_| format!("bad current '{}'", &r[1]))?;
            Ok((v, i))
        });
        match parsed {
            Ok(s) => out.push(s),
            Err(message) => errors.push(RowError { line, message }),
        }
    }
    if !errors.is_empty() {
        return Err(MeasurementError::Malformed(errors));
    }
    if out.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(MeasurementError::Malformed(vec![RowError {
            line: 0,
            message: "bias values must be strictly increasing".into(),
        }]));
    }
    Ok(out)
}
