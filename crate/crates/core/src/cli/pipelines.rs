//! Subcommand bodies and the multi-epoch solving pipelines they use.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use clap::ValueEnum;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geodesy::{EcefPoint, Ephemeris};
use crate::measurements::{
    encode_raw_rows, parse_measurement_csv, read_raw_log, write_raw_log, ClockModel, Measurement, MeasurementSet,
    PathClass,
};
use crate::simulator::{generate, Scenario};
use crate::solver_abs::{
    estimate_delays_per_svid, pair_delay_samples, solve_position, DelayReference, DirectFix, PositionSolution,
    ScatterDelayEstimator, SolveError, SolveOptions, TagConfig, Weighting,
};
use crate::solver_diff::{
    apply_floor_plan, build_phase_pairs, default_b_init, recover_position, solve_base_vector, BaseVectorSolution,
    DiffError, DiffOptions, FloorPlanConstraint, FloorPlanVerdict, PhasePair, RangeMode,
};
use crate::tagdetect::{detect_set, DetectConfig, SwitchingPattern};

use super::manifest::{OutDir, RunManifest};
use super::report::{cdf, join_errors, read_positions, summarize};
use super::{data_err, CliError, ConvertArgs, DetectArgs, ReportArgs, SimulateArgs, SolveAbsArgs, SolveDiffArgs, SEED_ENV};

/// GPS week used when writing raw-log files.
pub const RAW_LOG_WEEK: i64 = 2200;

/// Scatter-delay handling for `solve-abs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TsMode {
    /// Same delay for every satellite, seconds.
    Known(f64),
    /// Per-satellite delays from direct fixes paired with scattered rows.
    Estimate,
    /// Separate direct and scattered clock biases per epoch.
    Joint,
}

pub fn parse_ts_mode(s: &str) -> Result<TsMode, String> {
    match s {
        "estimate" => Ok(TsMode::Estimate),
        "joint" => Ok(TsMode::Joint),
        _ => {
            let v = s
                .strip_prefix("known:")
                .ok_or_else(|| format!("expected known:<seconds>, estimate or joint, got '{s}'"))?;
            let t: f64 = v.parse().map_err(|_| format!("'{v}' is not a number"))?;
            if !(t >= 0.0) || !t.is_finite() {
                return Err("scatter delay must be a nonnegative number".into());
            }
            Ok(TsMode::Known(t))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightArg {
    Cn0,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffModeArg {
    Phase,
    Pseudorange,
    /// Phase when every row has carrier lock, else pseudorange.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockModelArg {
    Simple,
}

fn config_of<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).unwrap_or(serde_json::Value::Null)
}

fn load_set(path: &Path) -> Result<MeasurementSet, CliError> {
    parse_measurement_csv(path).map_err(|e| data_err!("{}: {e}", path.display()))
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    Scenario::load(path).map_err(|e| data_err!("{e}"))
}

/// Scenario seed, replaced by `MIRRORFIX_SEED` when set.
pub fn effective_seed(scenario_seed: u64) -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Usage(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(scenario_seed),
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut scenario = load_scenario(&args.scenario)?;
    scenario.seed = effective_seed(scenario.seed)?;
    let (set, truth) = generate(&scenario).map_err(|e| data_err!("{e}"))?;

    let mut manifest = RunManifest::new("simulate", config_of(args));
    manifest.add_input(&args.scenario)?;
    manifest.config["seed"] = serde_json::json!(scenario.seed);
    manifest.config["rng"] = serde_json::json!(crate::simulator::rng::ALGORITHM);

    let mut out = OutDir::create(&args.out)?;
    out.write("measurements.csv", set.to_csv_string().as_bytes())?;
    let mut truth_csv = Vec::new();
    truth.write_csv(&mut truth_csv).map_err(|e| data_err!("{e}"))?;
    out.write("truth.csv", &truth_csv)?;
    out.write_json("truth.json", &truth)?;
    if args.raw_log {
        let mut raw = Vec::new();
        write_raw_log(&encode_raw_rows(&set, RAW_LOG_WEEK), &mut raw).map_err(|e| data_err!("{e}"))?;
        out.write("raw_log.csv", &raw)?;
    }
    out.finish(manifest)
}

pub fn detect(args: &DetectArgs) -> Result<(), CliError> {
    let set = load_set(&args.input)?;
    let pattern = SwitchingPattern { period_ms: args.period_ms, duty: args.duty, phase_ms: 0 };
    pattern.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let config = DetectConfig { threshold_db: args.threshold_db, score_min: args.score_min };
    let result = detect_set(&set, pattern, config).map_err(|e| data_err!("{e}"))?;

    let per_svid: BTreeMap<String, serde_json::Value> = result
        .per_svid
        .iter()
        .map(|(svid, r)| {
            let v = match r {
                Ok(d) => serde_json::to_value(d).unwrap_or_default(),
                Err(e) => serde_json::json!({ "error": e.to_string() }),
            };
            (svid.to_string(), v)
        })
        .collect();

    let mut manifest = RunManifest::new("detect", config_of(args));
    manifest.add_input(&args.input)?;
    let mut out = OutDir::create(&args.out)?;
    out.write_json("detection.json", &per_svid)?;
    out.write("labeled.csv", result.labeled.to_csv_string().as_bytes())?;
    out.finish(manifest)
}

/// Per-epoch outcome of `solve-abs`.
#[derive(Debug, Clone, Serialize)]
pub struct EpochSolution {
    pub epoch_ms: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<PositionSolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct AbsPipelineConfig {
    pub ts: TsMode,
    pub options: SolveOptions,
    pub weighting: Weighting,
    pub alpha: f64,
    pub window_ms: i64,
}

fn satellites_at(ephemeris: &dyn Ephemeris, rows: &[Measurement], epoch_ms: i64) -> BTreeMap<u32, EcefPoint> {
    rows.iter()
        .filter_map(|m| ephemeris.satellite_position(m.svid, epoch_ms).map(|p| (m.svid, p)))
        .collect()
}

/// Direct-only fixes for every epoch with at least four direct rows.
pub fn direct_fixes(
    set: &MeasurementSet,
    ephemeris: &dyn Ephemeris,
    options: &SolveOptions,
    weighting: &Weighting,
) -> Vec<DirectFix> {
    let mut fixes = Vec::new();
    for (epoch, rows) in set.by_epoch() {
        let direct: Vec<Measurement> = rows.iter().filter(|m| m.scattered != PathClass::Scattered).copied().collect();
        if direct.len() < 4 {
            continue;
        }
        let sats = satellites_at(ephemeris, &direct, epoch);
        let w = restrict_weighting(weighting, rows, &direct);
        let opts = SolveOptions { joint_ts: false, ..*options };
        if let Ok(sol) = solve_position(&direct, &sats, &TagConfig::default(), &w, &opts) {
            if let Some(tb) = sol.clock_bias_direct {
                fixes.push(DirectFix { epoch_ms: epoch, position: sol.position, clock_bias: tb });
            }
        }
    }
    fixes
}

fn restrict_weighting(weighting: &Weighting, all: &[Measurement], subset: &[Measurement]) -> Weighting {
    match weighting {
        Weighting::Variances(v) => Weighting::Variances(
            subset
                .iter()
                .map(|m| all.iter().position(|a| a == m).map(|i| v[i]).unwrap_or(1.0))
                .collect(),
        ),
        w => w.clone(),
    }
}

/// Solve every epoch of `set` against the scenario's tag and ephemeris.
///
/// In estimate mode delays are learned causally: each epoch uses per-svid EMA
/// states fed with all samples up to and including that epoch. Scattered rows
/// of satellites with no estimate yet are left out of that epoch.
pub fn solve_abs_epochs(
    set: &MeasurementSet,
    ephemeris: &dyn Ephemeris,
    tag: EcefPoint,
    config: &AbsPipelineConfig,
) -> Result<Vec<EpochSolution>, SolveError> {
    let samples = match config.ts {
        TsMode::Estimate => {
            let fixes = direct_fixes(set, ephemeris, &config.options, &config.weighting);
            let mut s = pair_delay_samples(
                &fixes,
                set.measurements(),
                ephemeris,
                tag,
                DelayReference::Virtual,
                config.window_ms,
            )?;
            s.sort_by_key(|x| (x.epoch_ms, x.svid));
            s
        }
        _ => Vec::new(),
    };
    ScatterDelayEstimator::new(config.alpha)?;

    let mut estimators: BTreeMap<u32, ScatterDelayEstimator> = BTreeMap::new();
    let mut next_sample = 0;
    let mut out = Vec::new();
    for (epoch, rows) in set.by_epoch() {
        while next_sample < samples.len() && samples[next_sample].epoch_ms <= epoch {
            let s = &samples[next_sample];
            let est = estimators.entry(s.svid).or_insert_with(|| ScatterDelayEstimator::new(config.alpha).unwrap());
            est.update(s.t_s());
            next_sample += 1;
        }
        let (tag_cfg, joint) = match config.ts {
            TsMode::Known(t) => (TagConfig::with_delay(tag, t), false),
            TsMode::Joint => (TagConfig::new(tag), true),
            TsMode::Estimate => {
                // A noisy estimate can dip below zero; the delay itself cannot.
                let delays = estimators.iter().filter_map(|(k, e)| e.estimate().map(|v| (*k, v.max(0.0)))).collect();
                (TagConfig::with_delays(tag, delays), false)
            }
        };
        let used: Vec<Measurement> = rows
            .iter()
            .filter(|m| joint || m.scattered != PathClass::Scattered || tag_cfg.delay_for(m.svid).is_some())
            .copied()
            .collect();
        let sats = satellites_at(ephemeris, &used, epoch);
        let weighting = restrict_weighting(&config.weighting, rows, &used);
        let opts = SolveOptions { joint_ts: joint, ..config.options };
        let result = solve_position(&used, &sats, &tag_cfg, &weighting, &opts);
        out.push(match result {
            Ok(sol) => EpochSolution { epoch_ms: epoch, solution: Some(sol), error: None },
            Err(e) => EpochSolution { epoch_ms: epoch, solution: None, error: Some(e.to_string()) },
        });
    }
    Ok(out)
}

/// Per-svid final delay estimates, for reporting.
pub fn final_delays(
    set: &MeasurementSet,
    ephemeris: &dyn Ephemeris,
    tag: EcefPoint,
    config: &AbsPipelineConfig,
) -> Result<BTreeMap<u32, f64>, SolveError> {
    let fixes = direct_fixes(set, ephemeris, &config.options, &config.weighting);
    let samples =
        pair_delay_samples(&fixes, set.measurements(), ephemeris, tag, DelayReference::Virtual, config.window_ms)?;
    if samples.is_empty() {
        return Ok(BTreeMap::new());
    }
    Ok(estimate_delays_per_svid(&samples, config.alpha)?
        .into_iter()
        .filter_map(|(k, e)| e.estimate().map(|v| (k, v)))
        .collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn solve_abs(args: &SolveAbsArgs) -> Result<(), CliError> {
    let set = load_set(&args.input)?;
    let scenario = load_scenario(&args.scenario)?;
    if !(args.tol > 0.0) || args.max_iter == 0 {
        return Err(CliError::Usage("--tol must be positive and --max-iter nonzero".into()));
    }
    let window_ms = args.window_ms.unwrap_or(2 * scenario.tag.pattern.period_ms);
    let config = AbsPipelineConfig {
        ts: args.ts,
        options: SolveOptions {
            tol: args.tol,
            max_iter: args.max_iter,
            joint_ts: false,
            warm_start: args.warm_start.map(|p| EcefPoint::new(p[0], p[1], p[2])),
        },
        weighting: match args.weights {
            WeightArg::Cn0 => Weighting::Cn0,
            WeightArg::Identity => Weighting::Identity,
        },
        alpha: args.alpha,
        window_ms,
    };
    let tag = scenario.tag_position();
    let solutions = solve_abs_epochs(&set, &scenario, tag, &config).map_err(|e| match e {
        SolveError::InvalidOption(m) => CliError::Usage(m),
        e => data_err!("{e}"),
    })?;
    if !solutions.iter().any(|s| s.solution.is_some()) {
        return Err(data_err!("no epoch could be solved (first error: {})", first_error(&solutions)));
    }

    let mut csv = String::from("epoch_ms,x,y,z,clock_bias_direct,clock_bias_scattered,dop,iterations,residual_rms\n");
    for s in &solutions {
        if let Some(sol) = &s.solution {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{}",
                s.epoch_ms,
                sol.position.x,
                sol.position.y,
                sol.position.z,
                fmt_opt(sol.clock_bias_direct),
                fmt_opt(sol.clock_bias_scattered),
                sol.dop,
                sol.iterations,
                sol.residual_rms
            );
        }
    }
    let mut manifest = RunManifest::new("solve-abs", config_of(args));
    manifest.add_input(&args.input)?;
    manifest.add_input(&args.scenario)?;
    let mut out = OutDir::create(&args.out)?;
    out.write_json("solutions.json", &solutions)?;
    out.write("trajectory.csv", csv.as_bytes())?;
    if args.ts == TsMode::Estimate {
        let delays = final_delays(&set, &scenario, tag, &config).map_err(|e| data_err!("{e}"))?;
        let delays: BTreeMap<String, f64> = delays.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        out.write_json("scatter_delays.json", &delays)?;
    }
    out.finish(manifest)
}

fn first_error(solutions: &[EpochSolution]) -> String {
    solutions.iter().find_map(|s| s.error.clone()).unwrap_or_else(|| "no epochs".into())
}

/// One differential fix.
#[derive(Debug, Clone, Serialize)]
pub struct DiffFix {
    /// Latest scattered epoch in the group.
    pub epoch_ms: i64,
    pub mode: RangeMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<BaseVectorSolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<EcefPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub floor_plan: Option<FloorPlanVerdict>,
    pub positioned: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct DiffPipelineConfig {
    pub mode: DiffModeArg,
    pub window_ms: i64,
    pub epochs_per_fix: usize,
    pub b_init: Vector3<f64>,
    pub options: DiffOptions,
    pub floor_plan: Option<FloorPlanConstraint>,
}

fn pick_mode(set: &MeasurementSet, mode: DiffModeArg) -> RangeMode {
    match mode {
        DiffModeArg::Phase => RangeMode::Phase,
        DiffModeArg::Pseudorange => RangeMode::Pseudorange,
        DiffModeArg::Auto => {
            let labeled = set.measurements().iter().filter(|m| m.scattered != PathClass::Unknown);
            if labeled.clone().count() > 0 && labeled.into_iter().all(|m| m.adr_valid) {
                RangeMode::Phase
            } else {
                RangeMode::Pseudorange
            }
        }
    }
}

/// Build pairs, pool `epochs_per_fix` consecutive scattered epochs per fix,
/// solve, filter by the floor plan and recover positions.
pub fn solve_diff_epochs(
    set: &MeasurementSet,
    ephemeris: &dyn Ephemeris,
    tag: EcefPoint,
    config: &DiffPipelineConfig,
) -> Result<Vec<DiffFix>, DiffError> {
    if config.epochs_per_fix == 0 {
        return Err(DiffError::InvalidOption("epochs_per_fix must be positive".into()));
    }
    let mode = pick_mode(set, config.mode);
    let pairs = build_phase_pairs(set, ephemeris, tag, config.window_ms, mode)?;
    let mut by_epoch: BTreeMap<i64, Vec<PhasePair>> = BTreeMap::new();
    for p in pairs {
        by_epoch.entry(p.t2).or_default().push(p);
    }
    let epochs: Vec<i64> = by_epoch.keys().copied().collect();
    let mut fixes = Vec::new();
    for chunk in epochs.chunks(config.epochs_per_fix) {
        let group: Vec<PhasePair> = chunk.iter().flat_map(|e| by_epoch[e].iter().copied()).collect();
        let epoch_ms = *chunk.last().expect("chunks are nonempty");
        let mut fix =
            DiffFix { epoch_ms, mode, solution: None, position: None, floor_plan: None, positioned: false, error: None };
        match solve_base_vector(&group, config.b_init, None, &config.options) {
            Ok(sol) => {
                let verdict = match &config.floor_plan {
                    Some(plan) => Some(apply_floor_plan(tag, &sol, plan)?),
                    None => None,
                };
                let accepted = !matches!(verdict, Some(FloorPlanVerdict::Rejected(_)));
                if accepted {
                    fix.position = Some(recover_position(tag, &sol)?);
                    fix.positioned = true;
                }
                fix.floor_plan = verdict;
                fix.solution = Some(sol);
            }
            Err(e) => fix.error = Some(e.to_string()),
        }
        fixes.push(fix);
    }
    Ok(fixes)
}

pub fn solve_diff(args: &SolveDiffArgs) -> Result<(), CliError> {
    let set = load_set(&args.input)?;
    let scenario = load_scenario(&args.scenario)?;
    if args.epochs_per_fix == 0 || !(args.tol > 0.0) || args.max_iter == 0 {
        return Err(CliError::Usage("--epochs-per-fix, --tol and --max-iter must be positive".into()));
    }
    let floor_plan = match &args.floor_plan {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| data_err!("{}: {e}", p.display()))?;
            let plan: FloorPlanConstraint =
                serde_json::from_str(&text).map_err(|e| data_err!("{}: {e}", p.display()))?;
            plan.validate().map_err(|e| data_err!("{}: {e}", p.display()))?;
            Some(plan)
        }
        None => None,
    };
    let config = DiffPipelineConfig {
        mode: args.mode,
        window_ms: args.window_ms.unwrap_or(2 * scenario.tag.pattern.period_ms),
        epochs_per_fix: args.epochs_per_fix,
        b_init: args.b_init.map(Vector3::from).unwrap_or_else(default_b_init),
        options: DiffOptions { tol: args.tol, max_iter: args.max_iter },
        floor_plan,
    };
    let tag = scenario.tag_position();
    let fixes = solve_diff_epochs(&set, &scenario, tag, &config).map_err(|e| data_err!("{e}"))?;

    let mut csv = String::from("epoch_ms,x,y,z,b_x,b_y,b_z,delta_t\n");
    for f in &fixes {
        if let (Some(p), Some(s)) = (f.position, &f.solution) {
            let _ = writeln!(csv, "{},{},{},{},{},{},{},{}", f.epoch_ms, p.x, p.y, p.z, s.b.x, s.b.y, s.b.z, s.delta_t);
        }
    }
    let mut manifest = RunManifest::new("solve-diff", config_of(args));
    manifest.add_input(&args.input)?;
    manifest.add_input(&args.scenario)?;
    if let Some(p) = &args.floor_plan {
        manifest.add_input(p)?;
    }
    let mut out = OutDir::create(&args.out)?;
    out.write_json("solutions.json", &fixes)?;
    out.write("positions.csv", csv.as_bytes())?;
    out.finish(manifest)
}

pub fn convert(args: &ConvertArgs) -> Result<(), CliError> {
    let file = std::fs::File::open(&args.input).map_err(|e| data_err!("{}: {e}", args.input.display()))?;
    let clock = match args.clock_model {
        ClockModelArg::Simple => ClockModel::Simple,
    };
    let report = read_raw_log(file, clock).map_err(|e| data_err!("{}: {e}", args.input.display()))?;
    let mut manifest = RunManifest::new("convert", config_of(args));
    manifest.add_input(&args.input)?;
    let mut out = OutDir::create(&args.out)?;
    out.write("measurements.csv", report.set.to_csv_string().as_bytes())?;
    out.write_json("skipped.json", &report.skipped)?;
    out.finish(manifest)
}

pub fn report(args: &ReportArgs) -> Result<(), CliError> {
    let read = |p: &Path| {
        let f = std::fs::File::open(p).map_err(|e| data_err!("{}: {e}", p.display()))?;
        read_positions(f).map_err(|e| data_err!("{}: {e}", p.display()))
    };
    let solutions = read(&args.solutions)?;
    let truth = read(&args.truth)?;
    let errors = join_errors(&solutions, &truth).map_err(|e| data_err!("{e}"))?;
    let summary = summarize(&errors).map_err(|e| data_err!("{e}"))?;

    let mut err_csv = String::from("epoch_ms,error_m\n");
    for e in &errors {
        let _ = writeln!(err_csv, "{},{}", e.epoch_ms, e.error_m);
    }
    let mut cdf_csv = String::from("error_m,cdf\n");
    for (e, p) in cdf(&errors) {
        let _ = writeln!(cdf_csv, "{e},{p}");
    }
    let mut manifest = RunManifest::new("report", config_of(args));
    manifest.add_input(&args.solutions)?;
    manifest.add_input(&args.truth)?;
    let mut out = OutDir::create(&args.out)?;
    out.write("errors.csv", err_csv.as_bytes())?;
    out.write("cdf.csv", cdf_csv.as_bytes())?;
    out.write_json("summary.json", &summary)?;
    out.finish(manifest)
}
