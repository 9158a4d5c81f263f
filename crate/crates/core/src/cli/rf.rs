//! `mirrorfix rf ...`: reflection-amplifier calculator. Results are JSON on
//! stdout and, with `--out`, also `result.json` plus a manifest.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::rfdesign::{
    equivalent_parallel_capacitance, fit_iv_curve, negative_resistance, noise_figure_with, parse_iv_csv,
    quality_factor, reflection_coefficient, reflection_gain_db, resonant_frequency, scan_noise_figure,
    solve_inductance, DiodeModel, Impedance, ResonatorSpec, DEFAULT_BIAS_STEP,
};

use super::manifest::{OutDir, RunManifest};
use super::{data_err, parse_pair, CliError};

#[derive(Debug, Subcommand)]
pub enum RfCommand {
    /// Reflection coefficient and gain for a load and antenna impedance.
    Gamma(GammaArgs),
    /// Resonant frequency from L and C, or the inductance for a target frequency.
    Resonance(ResonanceArgs),
    /// Quality factor 2π f_c L / R.
    Q(QArgs),
    /// Equivalent parallel capacitance of the packaged diode.
    Ceq(CeqArgs),
    /// Noise figure of the reflection amplifier.
    Nf(NfArgs),
    /// Fit an IV curve and grid-search the bias with the lowest noise figure.
    BiasScan(BiasScanArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GammaArgs {
    /// Load impedance `re,im` in ohms.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub zl: [f64; 2],
    /// Antenna impedance `re,im` in ohms.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub za: [f64; 2],
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ResonanceArgs {
    /// Inductance, H.
    #[arg(long, conflicts_with = "f")]
    pub l: Option<f64>,
    /// Capacitance, F.
    #[arg(long)]
    pub c: f64,
    /// Target frequency, Hz; solves for L.
    #[arg(long)]
    pub f: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct QArgs {
    /// Inductance, H.
    #[arg(long)]
    pub l: f64,
    /// Capacitance, F; sets f_c when --f is absent.
    #[arg(long, required_unless_present = "f")]
    pub c: Option<f64>,
    /// Center frequency, Hz.
    #[arg(long)]
    pub f: Option<f64>,
    /// Parasitic resistance, ohms.
    #[arg(long)]
    pub r: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct DiodeArgs {
    #[arg(long, default_value_t = 0.1e-12)]
    pub cj: f64,
    #[arg(long, default_value_t = 0.3e-12)]
    pub cp: f64,
    #[arg(long, default_value_t = 1.2e-9)]
    pub lp: f64,
    /// Series resistance, ohms.
    #[arg(long, default_value_t = 6.0)]
    pub r: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct CeqArgs {
    #[command(flatten)]
    pub diode: DiodeArgs,
    /// Negative resistance, ohms (< 0).
    #[arg(long, allow_hyphen_values = true)]
    pub r_nr: f64,
    #[arg(long, default_value_t = 1.57542e9)]
    pub f: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct NfArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub r_nr: f64,
    #[arg(long, default_value_t = 1.57542e9)]
    pub f: f64,
    /// Cutoff frequency, Hz. Required: no default exists.
    #[arg(long)]
    pub f_r0: f64,
    #[arg(long, default_value_t = 6.0)]
    pub r: f64,
    #[arg(long, default_value_t = 1.2)]
    pub ka: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BiasScanArgs {
    /// `bias_v,current_a` CSV.
    #[arg(long)]
    pub iv: PathBuf,
    #[arg(long, default_value_t = 1.57542e9)]
    pub f: f64,
    #[arg(long)]
    pub f_r0: f64,
    #[arg(long, default_value_t = 9)]
    pub degree: usize,
    /// Scan range start, V; defaults to the first sample.
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<f64>,
    /// Scan range end, V; defaults to the last sample.
    #[arg(long, allow_hyphen_values = true)]
    pub hi: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_BIAS_STEP)]
    pub step: f64,
    #[arg(long, default_value_t = 6.0)]
    pub r: f64,
    #[arg(long, default_value_t = 1.2)]
    pub ka: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn emit<A: Serialize>(
    name: &str,
    args: &A,
    out: &Option<PathBuf>,
    result: serde_json::Value,
    extra: Option<(&str, String)>,
    inputs: &[&PathBuf],
) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(&result).map_err(|e| data_err!("{e}"))?);
    if let Some(dir) = out {
        let mut manifest = RunManifest::new(name, serde_json::to_value(args).unwrap_or_default());
        for p in inputs {
            manifest.add_input(p)?;
        }
        let mut o = OutDir::create(dir)?;
        o.write_json("result.json", &result)?;
        if let Some((file, body)) = extra {
            o.write(file, body.as_bytes())?;
        }
        o.finish(manifest)?;
    }
    Ok(())
}

pub fn run(cmd: &RfCommand) -> Result<(), CliError> {
    let rf = |e: crate::rfdesign::RfError| data_err!("{e}");
    match cmd {
        RfCommand::Gamma(a) => {
            let zl = Impedance::new(a.zl[0], a.zl[1]);
            let za = Impedance::new(a.za[0], a.za[1]);
            let g = reflection_coefficient(zl, za).map_err(rf)?;
            let result = json!({
                "gamma_re": g.re,
                "gamma_im": g.im,
                "gamma_abs": g.norm(),
                "gain": g.norm_sqr(),
                "gain_db": reflection_gain_db(zl, za).map_err(rf)?,
            });
            emit("rf gamma", a, &a.out, result, None, &[])
        }
        RfCommand::Resonance(a) => {
            let result = match (a.l, a.f) {
                (Some(l), None) => json!({ "l_h": l, "c_f": a.c, "f_c_hz": resonant_frequency(l, a.c).map_err(rf)? }),
                (None, Some(f)) => json!({ "l_h": solve_inductance(f, a.c).map_err(rf)?, "c_f": a.c, "f_c_hz": f }),
                _ => return Err(CliError::Usage("give exactly one of --l or --f".into())),
            };
            emit("rf resonance", a, &a.out, result, None, &[])
        }
        RfCommand::Q(a) => {
            let spec = match (a.f, a.c) {
                (Some(f), c) => ResonatorSpec { l: a.l, c: c.unwrap_or(f64::NAN), r_parasitic: a.r, f_center: f },
                (None, Some(c)) => ResonatorSpec::new(a.l, c, a.r).map_err(rf)?,
                (None, None) => return Err(CliError::Usage("give --f or --c".into())),
            };
            let result = json!({ "q": quality_factor(&spec).map_err(rf)?, "f_c_hz": spec.f_center });
            emit("rf q", a, &a.out, result, None, &[])
        }
        RfCommand::Ceq(a) => {
            let diode = DiodeModel { c_j: a.diode.cj, c_p: a.diode.cp, l_p: a.diode.lp, r: a.diode.r, ..Default::default() };
            let c = equivalent_parallel_capacitance(&diode, a.r_nr, a.f).map_err(rf)?;
            emit("rf ceq", a, &a.out, json!({ "c_eq_f": c, "f_hz": a.f }), None, &[])
        }
        RfCommand::Nf(a) => {
            let nf = noise_figure_with(a.r, a.ka, a.f_r0, a.r_nr, a.f).map_err(rf)?;
            emit("rf nf", a, &a.out, json!({ "nf": nf, "nf_db": 10.0 * nf.log10() }), None, &[])
        }
        RfCommand::BiasScan(a) => {
            let file = std::fs::File::open(&a.iv).map_err(|e| data_err!("{}: {e}", a.iv.display()))?;
            let samples = parse_iv_csv(file).map_err(|e| data_err!("{}: {e}", a.iv.display()))?;
            let fit = fit_iv_curve(&samples, a.degree).map_err(rf)?;
            let lo = a.lo.unwrap_or(fit.domain.0);
            let hi = a.hi.unwrap_or(fit.domain.1);
            let best = scan_noise_figure(&fit, a.r, a.ka, a.f_r0, (lo, hi), a.f, a.step).map_err(rf)?;
            let mut scan = String::from("bias_v,r_nr_ohm,nf\n");
            let steps = ((hi - lo) / a.step + 1e-9).floor() as usize;
            for i in 0..=steps {
                let bias = lo + i as f64 * a.step;
                if let Ok(r_nr) = negative_resistance(&fit.poly, bias) {
                    let nf = if r_nr < 0.0 { noise_figure_with(a.r, a.ka, a.f_r0, r_nr, a.f).ok() } else { None };
                    let _ = writeln!(scan, "{bias},{r_nr},{}", nf.map(|v| v.to_string()).unwrap_or_default());
                }
            }
            let result = json!({
                "bias_v": best.bias,
                "nf": best.nf,
                "nf_db": 10.0 * best.nf.log10(),
                "r_nr_ohm": best.r_nr,
                "fit_residual_rms": fit.residual_rms,
            });
            emit("rf bias-scan", a, &a.out, result, Some(("scan.csv", scan)), &[&a.iv])
        }
    }
}
