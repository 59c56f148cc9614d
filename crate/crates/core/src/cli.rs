//! Command-line runner. Each subcommand reads an optional JSON scenario,
//! writes `t,value` curves as CSV and a `report.json` into `--out`.
//!
//! Exit codes: 0 pass, 1 input error, 2 verification failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::aggregation::{
    aggregate_survival, mechanism_average_hazard, observable_hazard, observable_hazard_logderiv,
    selection_gap, Curve, TimeGrid,
};
use crate::classical_bridge::{
    aft_build_distribution, aft_error_cdf, aft_sample, audit_hazard_ratios, clustering_distribution,
    frailty_distribution, frailty_marginal_survival_with, ph_shape_recovery, AFTSpec,
    ClusteringSpec, FrailtySpec, PHScenario,
};
use crate::distribution::{CovariateValue, MechanismDistribution, QuadratureSpec};
use crate::error::HazardError;
use crate::hazard::{HazardShape, Mechanism};
use crate::nonidentifiability::{demonstrate, t_exp_direction, CounterexampleSpec, PerturbationFamily};
use crate::simulate::{
    dkw_bound, empirical_survival, generate_dataset, kaplan_meier, ks_distance,
    verify_representation, write_dataset_csv, Censoring, Cohort, Scenario,
};

pub const SPEC_VERSION: &str = "1.0";
pub const THREADS_ENV: &str = "HAZARDLAB_THREADS";

const DEFAULT_T_MAX: f64 = 10.0;
const DEFAULT_STEP: f64 = 0.01;

#[derive(Parser, Debug)]
#[command(name = "hazardlab", version, about = "Latent hazard mechanism demonstrations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Scenario JSON file
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Output directory (created if missing)
    #[arg(long, global = true, default_value = "hazardlab-out")]
    pub out: PathBuf,
    /// Grid end; overrides the scenario grid
    #[arg(long = "t-max", global = true)]
    pub t_max: Option<f64>,
    /// Grid step; overrides the scenario grid
    #[arg(long, global = true)]
    pub step: Option<f64>,
    /// Seed for sampling commands; overrides the scenario seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Tolerance override, repeatable
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE", value_parser = parse_tol)]
    pub tol: Vec<(String, f64)>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Aggregate survival and observable hazard of one distribution
    Aggregate,
    /// Mechanism-average minus observable hazard
    Gap,
    /// Distinct mechanism distributions with one aggregate survival
    Counterexample,
    /// Hazard ratio constancy across covariate points
    PhAudit,
    /// Recover component scales and shared shape from mixed hazards
    PhRecover,
    /// Gamma frailty quadrature against its closed form
    FrailtyCheck,
    /// AFT sampling and its induced error law
    AftCheck,
    /// Softmax covariate-dependent mixtures
    Clustering,
    /// Simulate a dataset
    Simulate,
    /// Kaplan-Meier of simulated data against the analytic aggregate
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Aggregate => "aggregate",
            Command::Gap => "gap",
            Command::Counterexample => "counterexample",
            Command::PhAudit => "ph-audit",
            Command::PhRecover => "ph-recover",
            Command::FrailtyCheck => "frailty-check",
            Command::AftCheck => "aft-check",
            Command::Clustering => "clustering",
            Command::Simulate => "simulate",
            Command::Verify => "verify",
        }
    }

    /// Tolerances a command accepts, with defaults.
    fn tolerances(self) -> &'static [(&'static str, f64)] {
        match self {
            Command::Counterexample => &[
                ("max_deviation", 1e-10),
                ("hazard_deviation", 1e-8),
                ("negative_control", 1e-4),
            ],
            Command::PhAudit => &[("proportional", 1e-9)],
            Command::PhRecover => &[("recovery", 1e-8)],
            Command::FrailtyCheck => &[("frailty", 1e-6)],
            Command::AftCheck => &[("alpha", 0.001), ("quadrature", 1e-5)],
            _ => &[],
        }
    }
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let v: f64 = value
        .parse()
        .map_err(|e| format!("tolerance `{name}`: {e}"))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(format!("tolerance `{name}` must be positive, got {v}"));
    }
    Ok((name.to_string(), v))
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Verification(String),
}

impl From<HazardError> for CliError {
    fn from(e: HazardError) -> Self {
        match e {
            HazardError::ConsistencyFailure(m) => CliError::Verification(m),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(format!("i/o: {e}"))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Grid block accepted in every scenario: either `t_max`/`step` or explicit
/// `points`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
struct GridEcho {
    t_max: f64,
    step: Option<f64>,
    n_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<Vec<f64>>,
}

fn resolve_grid(common: &CommonArgs, spec: Option<&GridSpec>) -> CliResult<(TimeGrid, GridEcho)> {
    let spec = spec.cloned().unwrap_or_default();
    let cli_override = common.t_max.is_some() || common.step.is_some();
    if let (Some(points), false) = (&spec.points, cli_override) {
        if spec.t_max.is_some() || spec.step.is_some() {
            return Err(CliError::Input("grid: give either points or t_max/step, not both".into()));
        }
        let grid = TimeGrid::new(points.clone()).map_err(|e| CliError::Input(format!("grid.points: {e}")))?;
        let echo = GridEcho {
            t_max: grid.t_max(),
            step: None,
            n_points: grid.len(),
            points: Some(points.clone()),
        };
        return Ok((grid, echo));
    }
    let t_max = common.t_max.or(spec.t_max).unwrap_or(DEFAULT_T_MAX);
    let step = common.step.or(spec.step).unwrap_or(DEFAULT_STEP);
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(CliError::Input(format!("t_max must be positive, got {t_max}")));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(CliError::Input(format!("step must be positive, got {step}")));
    }
    let grid = TimeGrid::uniform(t_max, step).map_err(|e| CliError::Input(format!("grid: {e}")))?;
    let echo = GridEcho {
        t_max: grid.t_max(),
        step: Some(step),
        n_points: grid.len(),
        points: None,
    };
    Ok((grid, echo))
}

fn resolve_tolerances(command: Command, overrides: &[(String, f64)]) -> CliResult<BTreeMap<String, f64>> {
    let known = command.tolerances();
    let mut out: BTreeMap<String, f64> = known.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (name, v) in overrides {
        if !out.contains_key(name) {
            let names: Vec<&str> = known.iter().map(|(k, _)| *k).collect();
            return Err(CliError::Input(format!(
                "unknown tolerance `{name}` for {}; accepted: [{}]",
                command.name(),
                names.join(", ")
            )));
        }
        out.insert(name.clone(), *v);
    }
    Ok(out)
}

/// Parses `text` as `T`, reporting the JSON path of the offending field.
pub fn parse_scenario<T: DeserializeOwned>(text: &str) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Input(format!("scenario field `{path}`: {}", e.into_inner()))
    })
}

fn load<T: DeserializeOwned>(path: Option<&Path>) -> CliResult<Option<T>> {
    match path {
        None => Ok(None),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Input(format!("reading {}: {e}", p.display())))?;
            parse_scenario(&text).map(Some)
        }
    }
}

fn require<T: DeserializeOwned>(common: &CommonArgs, command: Command) -> CliResult<T> {
    load(common.scenario.as_deref())?
        .ok_or_else(|| CliError::Input(format!("{} needs --scenario", command.name())))
}

#[derive(Serialize)]
struct ConfigEcho {
    command: &'static str,
    scenario_path: Option<String>,
    output_dir: String,
    grid: GridEcho,
    seed: Option<u64>,
    tolerances: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct Report {
    spec_version: &'static str,
    library_version: &'static str,
    config: ConfigEcho,
    input: serde_json::Value,
    pass: bool,
    warnings: Vec<String>,
    notes: Vec<String>,
    result: serde_json::Value,
}

struct Outcome {
    pass: bool,
    input: serde_json::Value,
    result: serde_json::Value,
    seed: Option<u64>,
    warnings: Vec<String>,
    notes: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, input: &impl Serialize, result: &impl Serialize) -> CliResult<Self> {
        Ok(Self {
            pass,
            input: to_json(input)?,
            result: to_json(result)?,
            seed: None,
            warnings: Vec::new(),
            notes: Vec::new(),
        })
    }
}

fn to_json(v: &impl Serialize) -> CliResult<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| CliError::Input(format!("serializing report: {e}")))
}

struct Output<'a> {
    dir: &'a Path,
}

impl Output<'_> {
    fn curve(&self, name: &str, c: &Curve) -> CliResult<()> {
        c.save_csv(&self.dir.join(name))?;
        Ok(())
    }
}

const DEGENERATE_WARNING: &str = "every distribution is a point mass: observable and mechanism-average hazards coincide and the selection gap is identically zero";
const GAP_NOTE: &str = "the mechanism-average hazard (and so the gap) uses the true mechanism distribution, which is known only in simulation; survival data identify the observable hazard alone";

/// Parses arguments, runs, and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli.command, &cli.common) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed; see {}", cli.common.out.join("report.json").display());
            ExitCode::from(2)
        }
        Err(CliError::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Verification(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got `{v}`"))?;
    // A pool may already exist when embedded in tests; keep it then.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs one command, writing artifacts. `Ok(pass)` on completion.
pub fn run(command: Command, common: &CommonArgs) -> CliResult<bool> {
    let tolerances = resolve_tolerances(command, &common.tol)?;
    fs::create_dir_all(&common.out)
        .map_err(|e| CliError::Input(format!("creating {}: {e}", common.out.display())))?;
    let out = Output { dir: &common.out };
    let (outcome, grid_echo) = match command {
        Command::Aggregate => cmd_aggregate(common, &out)?,
        Command::Gap => cmd_gap(common, &out)?,
        Command::Counterexample => cmd_counterexample(common, &out, &tolerances)?,
        Command::PhAudit => cmd_ph_audit(common, &out, &tolerances)?,
        Command::PhRecover => cmd_ph_recover(common, &out, &tolerances)?,
        Command::FrailtyCheck => cmd_frailty(common, &out, &tolerances)?,
        Command::AftCheck => cmd_aft(common, &out, &tolerances)?,
        Command::Clustering => cmd_clustering(common, &out)?,
        Command::Simulate => cmd_simulate(common, &out)?,
        Command::Verify => cmd_verify(common, &out)?,
    };
    let report = Report {
        spec_version: SPEC_VERSION,
        library_version: env!("CARGO_PKG_VERSION"),
        config: ConfigEcho {
            command: command.name(),
            scenario_path: common.scenario.as_ref().map(|p| p.display().to_string()),
            output_dir: common.out.display().to_string(),
            grid: grid_echo,
            seed: outcome.seed,
            tolerances,
        },
        input: outcome.input,
        pass: outcome.pass,
        warnings: outcome.warnings,
        notes: outcome.notes,
        result: outcome.result,
    };
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Input(format!("serializing report: {e}")))?;
    text.push('\n');
    fs::write(common.out.join("report.json"), text)?;
    Ok(report.pass)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistributionInput {
    distribution: MechanismDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<GridSpec>,
}

fn cmd_aggregate(common: &CommonArgs, out: &Output) -> CliResult<(Outcome, GridEcho)> {
    let input: DistributionInput = require(common, Command::Aggregate)?;
    let (grid, echo) = resolve_grid(common, input.grid.as_ref())?;
    let d = &input.distribution;
    let s = aggregate_survival(d, &grid)?;
    let h = observable_hazard(d, &grid)?;
    let h_fd = observable_hazard_logderiv(d, &grid)?;
    out.curve("survival.csv", &s)?;
    out.curve("observable_hazard.csv", &h)?;
    out.curve("observable_hazard_logderiv.csv", &h_fd)?;
    let (route_gap, route_gap_t) = h.sup_distance(&h_fd)?;
    let result = serde_json::json!({
        "atoms": d.len(),
        "survival_at_t_max": s.values()[s.values().len() - 1],
        "hazard_route_discrepancy": route_gap,
        "hazard_route_discrepancy_t": route_gap_t,
    });
    let mut o = Outcome::new(true, &input, &result)?;
    if d.is_point_mass() {
        o.warnings.push(DEGENERATE_WARNING.into());
    }
    o.notes.push("hazard_route_discrepancy compares the posterior-weighted hazard with finite differences of -log S; it shrinks with the grid step".into());
    Ok((o, echo))
}

fn cmd_gap(common: &CommonArgs, out: &Output) -> CliResult<(Outcome, GridEcho)> {
    let input: DistributionInput = require(common, Command::Gap)?;
    let (grid, echo) = resolve_grid(common, input.grid.as_ref())?;
    let d = &input.distribution;
    let gap = selection_gap(d, &grid)?;
    out.curve("gap.csv", &gap)?;
    out.curve("observable_hazard.csv", &observable_hazard(d, &grid)?)?;
    out.curve("mechanism_average_hazard.csv", &mechanism_average_hazard(d, &grid)?)?;
    let (sup_gap, argmax_t) = gap
        .times()
        .iter()
        .zip(gap.values())
        .fold((0.0f64, 0.0), |(m, at), (&t, &v)| if v.abs() > m { (v.abs(), t) } else { (m, at) });
    let result = serde_json::json!({
        "sup_abs_gap": sup_gap,
        "argmax_t": argmax_t,
        "gap_at_zero": gap.values()[0],
    });
    let mut o = Outcome::new(true, &input, &result)?;
    if d.is_point_mass() {
        o.warnings.push(DEGENERATE_WARNING.into());
    }
    o.notes.push(GAP_NOTE.into());
    Ok((o, echo))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum Direction {
    /// `amplitude · t · e^{−rate·t}`
    TExp { amplitude: f64, rate: f64 },
    /// Values on the grid points.
    Values { values: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CounterexampleInput {
    theta0: Mechanism,
    mu0: MechanismDistribution,
    g: Direction,
    delta: f64,
    alpha: f64,
    eta: f64,
    epsilons: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<GridSpec>,
}

impl Default for CounterexampleInput {
    fn default() -> Self {
        let theta0 = Mechanism::new("theta0", HazardShape::exponential(1.0)).expect("valid");
        let fast = Mechanism::new("fast", HazardShape::exponential(2.0)).expect("valid");
        let mu0 = MechanismDistribution::finite_mixture(vec![(theta0.clone(), 0.6), (fast, 0.4)]).expect("valid");
        Self {
            theta0,
            mu0,
            g: Direction::TExp {
                amplitude: 0.5,
                rate: 1.0,
            },
            delta: 0.5,
            alpha: 0.25,
            eta: 0.2,
            epsilons: vec![0.4, 0.3, 0.2, 0.1, 0.05],
            grid: None,
        }
    }
}

fn cmd_counterexample(
    common: &CommonArgs,
    out: &Output,
    tol: &BTreeMap<String, f64>,
) -> CliResult<(Outcome, GridEcho)> {
    let input: CounterexampleInput = load(common.scenario.as_deref())?.unwrap_or_default();
    let (grid, echo) = resolve_grid(common, input.grid.as_ref())?;
    let g = match &input.g {
        Direction::TExp { amplitude, rate } => t_exp_direction(&grid, *amplitude, *rate),
        Direction::Values { values } => values.clone(),
    };
    let family = PerturbationFamily::new(input.theta0.clone(), g, input.delta, grid.clone())?;
    let spec = CounterexampleSpec::new(input.mu0.clone(), family, input.alpha, input.eta, input.epsilons.clone())?;
    let demo = demonstrate(&spec, &grid)?;
    for (k, c) in demo.survival_curves.iter().enumerate() {
        out.curve(&format!("survival_{k}.csv"), c)?;
    }
    let r = &demo.report;
    let control_ok = r.negative_control_deviation > tol["negative_control"];
    let pass = r.max_deviation <= tol["max_deviation"]
        && r.observable_hazard_max_deviation <= tol["hazard_deviation"]
        && r.min_tv_distance >= r.tv_lower_bound
        && control_ok;
    let mut o = Outcome::new(pass, &input, r)?;
    o.notes.push(
        "survival_0.csv is mu0; survival_k.csv is the k-th epsilon's mass replacement".into(),
    );
    o.notes.push(format!(
        "perturbation validity is checked on the grid up to t = {}; beyond it g is held at its last value",
        r.verified_horizon
    ));
    o.notes.push("negative_control_deviation pairs the first epsilon with epsilon'/2; it must exceed the negative_control tolerance".into());
    Ok((o, echo))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum AuditMode {
    /// Prior weights re-weighted by survival (what data show).
    #[default]
    SurvivorUpdated,
    /// Rows of `W` held fixed over time.
    Stylized,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointInput {
    covariate: CovariateValue,
    distribution: MechanismDistribution,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhAuditInput {
    #[serde(default)]
    mode: AuditMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ph_scenario: Option<PHScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<PointInput>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<GridSpec>,
}

fn cmd_ph_audit(
    common: &CommonArgs,
    out: &Output,
    tol: &BTreeMap<String, f64>,
) -> CliResult<(Outcome, GridEcho)> {
    let input: PhAuditInput = require(common, Command::PhAudit)?;
    let (grid, echo) = resolve_grid(common, input.grid.as_ref())?;
    let points: Vec<(CovariateValue, MechanismDistribution)> = match (&input.ph_scenario, &input.points) {
        (Some(s), None) => s.distributions()?,
        (None, Some(p)) => p.iter().map(|p| (p.covariate.clone(), p.distribution.clone())).collect(),
        _ => {
            return Err(CliError::Input(
                "ph-audit: give exactly one of `ph_scenario` or `points`".into(),
            ))
        }
    };
    if input.mode == AuditMode::Stylized && input.ph_scenario.is_none() {
        return Err(CliError::Input("ph-audit: stylized mode needs `ph_scenario`".into()));
    }
    let curves = points
        .iter()
        .map(|(x, d)| {
            let h = match input.mode {
                AuditMode::SurvivorUpdated => observable_hazard(d, &grid)?,
                AuditMode::Stylized => mechanism_average_hazard(d, &grid)?,
            };
            Ok((x.clone(), h))
        })
        .collect::<CliResult<Vec<_>>>()?;
    for (j, (_, h)) in curves.iter().enumerate() {
        out.curve(&format!("hazard_{j}.csv"), h)?;
    }
    let report = audit_hazard_ratios(&curves)?;
    let proportional = report.worst_max_over_min <= 1.0 + tol["proportional"];
    let result = serde_json::json!({ "audit": report, "proportional": proportional });
    let mut o = Outcome::new(true, &input, &result)?;
    if input.mode == AuditMode::Stylized {
        o.notes.push("stylized mode holds mixture weights fixed in time; observable hazards re-weight by survival and generally are not proportional".into());
    }
    if points.iter().all(|(_, d)| d.is_point_mass()) {
        o.warnings.push(DEGENERATE_WARNING.into());
    }
    Ok((o, echo))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhRecoverInput {
    ph_scenario: PHScenario,
    #[serde(default = "one")]
    t_ref: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<GridSpec>,
}

fn one() -> f64 {
    1.0
}

fn cmd_ph_recover(
    common: &CommonArgs,
    out: &Output,
    tol: &BTreeMap<String, f64>,
) -> CliResult<(Outcome, GridEcho)> {
    let input: PhRecoverInput = require(common, Command::PhRecover)?;
    let (grid, echo) = resolve_grid(common, input.grid.as_ref())?;
    let s = &input.ph_scenario;
    let r = ph_shape_recovery(s, &grid, input.t_ref)?;
    let c0 = s.scale_factors[0];
    let true_scales: Vec<f64> = s.scale_factors.iter().map(|c| c / c0).collect();
    let scale_err = r
        .scales
        .iter()
        .zip(&true_scales)
        .map(|(a, b)| ((a - b) / b).abs())
        .fold(0.0, f64::max);
    let h_ref = s.shared_shape.hazard_at(input.t_ref)?;
    let mut shape_err = 0.0f64;
    let mut truth = Vec::with_capacity(grid.len());
    for (&t, &v) in grid.points().iter().zip(r.shape.values()) {
        let want = s.shared_shape.hazard_at(t)? / h_ref;
        truth.push(want);
        let e = if want != 0.0 && want.is_finite() { ((v - want) / want).abs() } else if want == 0.0 { v.abs() } else { 0.0 };
        shape_err = shape_err.max(e);
    }
    out.curve("recovered_shape.csv", &r.shape)?;
    out.curve("true_shape.csv", &Curve::new(grid.clone(), truth, crate::aggregation::CurveKind::Hazard)?)?;
    let pass = scale_err <= tol["recovery"] && shape_err <= tol["recovery"];
    let result = serde_json::json!({
        "recovered_scales": r.scales,
        "true_scales": true_scales,
        "scale_max_rel_error": scale_err,
        "shape_max_rel_error": shape_err,
        "condition_number": r.condition_number,
        "t_ref": input.t_ref,
    });
    let mut o = Outcome::new(pass, &input, &result)?;
    o.notes.push("scales are relative to the first component; the shape is normalized to 1 at t_ref".into());
    Ok((o, echo))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrailtyInput {
    frailty: FrailtySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    covariate: Option<CovariateValue>,
    #[serde(default)]
    quadrature: QuadratureSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<GridSpec>,
}

fn zero_covariate(dim: usize) -> CliResult<CovariateValue> {
    Ok(CovariateValue::new(vec![0.0; dim.max(1)])?)
}

fn cmd_frailty(
    common: &CommonArgs,
    out: &Output,
    tol: &BTreeMap<String, f64>,
) -> CliResult<(Outcome, GridEcho)> {
    let mut input: FrailtyInput = require(common, Command::FrailtyCheck)?;
    let (grid, echo) = resolve_grid(common, input.grid.as_ref())?;
    let x = match &input.covariate {
        Some(x) => x.clone(),
        None => zero_covariate(input.frailty.beta.len())?,
    };
    input.covariate = Some(x.clone());
    let check = frailty_marginal_survival_with(&input.frailty, &x, &grid, &input.quadrature)?;
    let d = frailty_distribution(&input.frailty, &x, &input.quadrature)?;
    let h = observable_hazard(&d, &grid)?;
    let decreasing = h.values().windows(2).all(|w| w[1] < w[0]);
    out.curve("survival.csv", &check.curve)?;
    out.curve("oracle.csv", &check.oracle)?;
    out.curve("observable_hazard.csv", &h)?;
    let pass = check.max_discrepancy <= tol["frailty"];
    let result = serde_json::json!({
        "max_discrepancy": check.max_discrepancy,
        "argmax_t": check.argmax_t,
        "atoms": d.len(),
        "observable_hazard_strictly_decreasing": decreasing,
    });
    let mut o = Outcome::new(pass, &input, &result)?;
    o.notes.push("oracle.csv is the closed form (1 + v H0(t) exp(beta'x))^(-1/v)".into());
    Ok((o, echo))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AftInput {
    aft: AFTSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    covariate: Option<CovariateValue>,
    #[serde(default = "default_n")]
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default)]
    quadrature: QuadratureSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<GridSpec>,
}

fn default_n() -> usize {
    100_000
}

fn cmd_aft(common: &CommonArgs, out: &Output, tol: &BTreeMap<String, f64>) -> CliResult<(Outcome, GridEcho)> {
    let mut input: AftInput = require(common, Command::AftCheck)?;
    let (grid, echo) = resolve_grid(common, input.grid.as_ref())?;
    let seed = common.seed.or(input.seed).unwrap_or(0);
    input.seed = Some(seed);
    let x = match &input.covariate {
        Some(x) => x.clone(),
        None => zero_covariate(input.aft.beta.len())?,
    };
    input.covariate = Some(x.clone());
    let sample = aft_sample(&input.aft, &x, input.n, seed)?;
    let mut errors = sample.errors();
    let ks = ks_distance(&mut errors, |z| aft_error_cdf(&input.aft, z))?;
    let bound = dkw_bound(input.n, tol["alpha"]);

    let d = aft_build_distribution(&input.aft, &x, &input.quadrature)?;
    let quad = aggregate_survival(&d, &grid)?;
    let emp = empirical_survival(&sample.t, &grid)?;
    let (surv_gap, surv_gap_t) = quad.sup_distance(&emp)?;
    out.curve("aggregate_survival.csv", &quad)?;
    out.curve("empirical_survival.csv", &emp)?;

    let pass = ks <= bound && surv_gap <= bound + tol["quadrature"];
    let result = serde_json::json!({
        "acceleration": sample.acceleration,
        "error_law_ks_distance": ks,
        "survival_gap": surv_gap,
        "survival_gap_t": surv_gap_t,
        "dkw_bound": bound,
        "atoms": d.len(),
    });
    let mut o = Outcome::new(pass, &input, &result)?;
    o.seed = Some(seed);
    o.notes.push("error_law_ks_distance compares log T - log a(x) - log U with 1 - S0(e^z)".into());
    Ok((o, echo))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClusteringInput {
    clustering: ClusteringSpec,
    covariates: Vec<CovariateValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<GridSpec>,
}

fn cmd_clustering(common: &CommonArgs, out: &Output) -> CliResult<(Outcome, GridEcho)> {
    let input: ClusteringInput = require(common, Command::Clustering)?;
    let (grid, echo) = resolve_grid(common, input.grid.as_ref())?;
    if input.covariates.is_empty() {
        return Err(CliError::Input("clustering: `covariates` is empty".into()));
    }
    let mut rows = Vec::new();
    let mut all_point = true;
    for (j, x) in input.covariates.iter().enumerate() {
        let d = clustering_distribution(&input.clustering, x)?;
        all_point &= d.is_point_mass();
        let gap = selection_gap(&d, &grid)?;
        out.curve(&format!("survival_{j}.csv"), &aggregate_survival(&d, &grid)?)?;
        out.curve(&format!("observable_hazard_{j}.csv"), &observable_hazard(&d, &grid)?)?;
        out.curve(&format!("gap_{j}.csv"), &gap)?;
        let weights: BTreeMap<&str, f64> = d.atoms().iter().map(|a| (a.mechanism.label.as_str(), a.weight)).collect();
        rows.push(serde_json::json!({ "covariate": x, "weights": weights, "sup_abs_gap": gap.sup_norm() }));
    }
    let mut o = Outcome::new(true, &input, &rows)?;
    if all_point {
        o.warnings.push(DEGENERATE_WARNING.into());
    }
    o.notes.push(GAP_NOTE.into());
    Ok((o, echo))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationInput {
    cohorts: Vec<Cohort>,
    #[serde(default)]
    censoring: Censoring,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<GridSpec>,
}

impl SimulationInput {
    fn scenario(&mut self, common: &CommonArgs) -> CliResult<Scenario> {
        let seed = common.seed.or(self.seed).unwrap_or(0);
        self.seed = Some(seed);
        let s = Scenario {
            cohorts: self.cohorts.clone(),
            censoring: self.censoring,
            seed,
        };
        s.validate()?;
        Ok(s)
    }
}

fn cmd_simulate(common: &CommonArgs, out: &Output) -> CliResult<(Outcome, GridEcho)> {
    let mut input: SimulationInput = require(common, Command::Simulate)?;
    let (grid, echo) = resolve_grid(common, input.grid.as_ref())?;
    let s = input.scenario(common)?;
    let records = generate_dataset(&s)?;
    let file = fs::File::create(out.dir.join("dataset.csv"))?;
    write_dataset_csv(&records, std::io::BufWriter::new(file))?;
    let mut start = 0;
    let mut cohorts = Vec::new();
    for (k, c) in s.cohorts.iter().enumerate() {
        let slice = &records[start..start + c.count];
        start += c.count;
        out.curve(&format!("km_{k}.csv"), &kaplan_meier(slice)?.on_grid(&grid)?)?;
        let mut labels: BTreeMap<&str, usize> = BTreeMap::new();
        for r in slice {
            *labels.entry(r.mechanism_label.as_str()).or_default() += 1;
        }
        cohorts.push(serde_json::json!({
            "covariate": c.covariate,
            "n": c.count,
            "events": slice.iter().filter(|r| r.event).count(),
            "label_counts": labels,
        }));
    }
    let result = serde_json::json!({ "records": records.len(), "cohorts": cohorts });
    let mut o = Outcome::new(true, &input, &result)?;
    o.seed = Some(s.seed);
    o.notes.push("mechanism_label is simulation ground truth and is not observable in real data".into());
    Ok((o, echo))
}

fn cmd_verify(common: &CommonArgs, out: &Output) -> CliResult<(Outcome, GridEcho)> {
    let mut input: SimulationInput = require(common, Command::Verify)?;
    let (grid, echo) = resolve_grid(common, input.grid.as_ref())?;
    let s = input.scenario(common)?;
    let report = verify_representation(&s, &grid)?;
    let records = generate_dataset(&s)?;
    let mut start = 0;
    for (k, c) in s.cohorts.iter().enumerate() {
        let slice = &records[start..start + c.count];
        start += c.count;
        let analytic = aggregate_survival(&c.distribution, &grid)?;
        out.curve(&format!("km_{k}.csv"), &kaplan_meier(slice)?.on_grid(&grid)?)?;
        out.curve(&format!("analytic_{k}.csv"), &analytic)?;
    }
    let pass = !report.strict || report.pass;
    let mut o = Outcome::new(pass, &input, &report)?;
    o.seed = Some(s.seed);
    if !report.strict {
        o.notes.push("censored data: the DKW band does not apply, so the comparison is qualitative and never fails the run".into());
    }
    Ok((o, echo))
}
