//! Command line front end: check → trace → beam → verify → sweep.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{assemble_field, Axis};
use crate::beam::{build_beam, trace_tube, BeamSolution};
use crate::config::{Scenario, ScenarioConfig};
use crate::error::{CgoError, Result};
use crate::geometry::Tube;
use crate::output::{self, OutputDir};
use crate::system::{check_assumptions, AssumptionReport};
use crate::verify::checks::{beam_diagnostics, gouy_phase, BeamDiagnostics};
use crate::verify::rate::EXACT_THRESHOLD;
use crate::verify::sweep::{MISMATCH_EXACT, RESIDUAL_EXACT};
use crate::verify::{run_sweep, Rate, SweepResult};

#[derive(Debug, Parser)]
#[command(name = "cgoptics", version, about = "Gaussian beams for linear symmetric hyperbolic systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check hermiticity, the spectral gap and the boundary speed condition.
    Check(Options),
    /// Trace the rays and normal frames of every component.
    Trace(Options),
    /// Build the beams and write phase, amplitude and field snapshots.
    Beam(Options),
    /// Check positivity, frames, polarization, eikonal order and the Gouy phase.
    Verify(Options),
    /// Run the ε sweep against the residual, the initial mismatch and the reference solver.
    Sweep(Options),
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// Bundled scenario name or path to a TOML file.
    #[arg(long)]
    pub config: String,
    /// Output directory; defaults to the scenario's `output` or `cgoptics_out/<name>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated ε values replacing the scenario list.
    #[arg(long, value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    /// Time step of rays, Riccati and transport.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Check,
    Trace,
    Beam,
    Verify,
    Sweep,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Check => "check",
            Stage::Trace => "trace",
            Stage::Beam => "beam",
            Stage::Verify => "verify",
            Stage::Sweep => "sweep",
        };
        f.write_str(s)
    }
}

impl Command {
    pub fn split(&self) -> (Stage, &Options) {
        match self {
            Command::Check(o) => (Stage::Check, o),
            Command::Trace(o) => (Stage::Trace, o),
            Command::Beam(o) => (Stage::Beam, o),
            Command::Verify(o) => (Stage::Verify, o),
            Command::Sweep(o) => (Stage::Sweep, o),
        }
    }
}

/// Pipeline error tagged with the stage that raised it.
#[derive(Debug, Clone, PartialEq)]
pub struct StageError {
    pub stage: &'static str,
    pub error: CgoError,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {}

fn at<T>(stage: &'static str, r: Result<T>) -> std::result::Result<T, StageError> {
    r.map_err(|error| StageError { stage, error })
}

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

/// Thresholds applied by `verify`.
pub const FRAME_TOL: f64 = 1e-8;
pub const POLARIZATION_TOL: f64 = 1e-6;
pub const DEFECT_SLOPE_MIN: f64 = 2.8;
pub const GOUY_TOL: f64 = 1e-4;
/// Refinement of the Gouy phase oracle relative to the transport step.
pub const GOUY_REFINE: usize = 16;
/// Thresholds applied by `sweep`.
pub const SLOPE_MIN: f64 = 0.45;
pub const STDERR_MAX: f64 = 0.1;

/// One thresholded quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Criterion {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
        }
    }

    fn above(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value > threshold,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TubeReport {
    pub component: usize,
    pub mode: usize,
    pub rays: usize,
    pub steps: usize,
    pub chart_radius: f64,
    pub frame_deviation: f64,
    pub max_chart_condition: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamReport {
    pub component: usize,
    pub cutoff_radius: f64,
    pub diagnostics: BeamDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GouyReport {
    pub component: usize,
    pub ray: usize,
    /// Phase of `a` relative to the transport solution without the localization term, at `T`.
    pub final_phase: f64,
    /// Largest gap between that phase and `−∫g`.
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenario: String,
    pub stage: Stage,
    pub passed: bool,
    pub check: AssumptionReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub tubes: Vec<TubeReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub beams: Vec<BeamReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub gouy: Vec<GouyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepResult>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub criteria: Vec<Criterion>,
}

/// Wall-clock times, written next to the report.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timing {
    pub stages: Vec<(String, f64)>,
    pub sweep_entries: Vec<(f64, f64)>,
}

/// Loads the scenario and applies the command line overrides.
pub fn load_scenario(opts: &Options) -> Result<Scenario> {
    let mut config = ScenarioConfig::load(&opts.config)?;
    if let Some(eps) = &opts.eps_list {
        config.eps = eps.clone();
    }
    if let Some(dt) = opts.dt {
        if !(dt > 0.0 && dt <= config.domain.t_final) {
            return Err(CgoError::Config(format!("--dt {dt} must lie in (0, T]")));
        }
        config.beam.steps = (config.domain.t_final / dt).round().max(1.0) as usize;
    }
    if config.eps.is_empty() || config.eps.iter().any(|e| !(*e > 0.0)) {
        return Err(CgoError::Config("eps: values must be positive and the list non-empty".into()));
    }
    config.build()
}

fn snapshot_axes(scenario: &Scenario, t: f64) -> Result<Vec<Axis>> {
    let domain = &scenario.spec.domain;
    let rad = domain.radius_at(t);
    let n = if scenario.spec.dim == 1 { 801 } else { 101 };
    domain.center.iter().map(|c| Axis::new(c - rad, c + rad, n)).collect()
}

fn tube_report(c: usize, tube: &Tube) -> TubeReport {
    TubeReport {
        component: c,
        mode: tube.mode,
        rays: tube.n_rays(),
        steps: tube.grid.steps,
        chart_radius: tube.chart_radius,
        frame_deviation: tube.frame_deviation,
        max_chart_condition: tube.max_condition(),
    }
}

/// `exact_level` is the error bound that classified the rate as exact.
fn rate_criteria(name: &str, rate: &Rate, exact_level: f64) -> Vec<Criterion> {
    match rate {
        Rate::Exact { max_error } => vec![Criterion::at_most(format!("{name} exact"), *max_error, exact_level)],
        Rate::Fit(fit) => vec![
            Criterion::at_least(format!("{name} slope"), fit.slope, SLOPE_MIN),
            Criterion::at_most(format!("{name} slope stderr"), fit.stderr, STDERR_MAX),
        ],
        Rate::Unavailable { .. } => vec![Criterion {
            name: format!("{name} rate available"),
            value: f64::NAN,
            threshold: f64::NAN,
            passed: false,
        }],
    }
}

struct Timer {
    start: Instant,
    timing: Timing,
}

impl Timer {
    fn lap(&mut self, stage: &str) {
        self.timing.stages.push((stage.into(), self.start.elapsed().as_secs_f64()));
        self.start = Instant::now();
    }
}

/// Runs the pipeline up to `stage`, writing every output file.
pub fn run_stage(stage: Stage, opts: &Options) -> std::result::Result<Report, StageError> {
    let scenario = at("config", load_scenario(opts))?;
    let out_dir = opts
        .out
        .clone()
        .or_else(|| scenario.config.output.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("cgoptics_out").join(&scenario.config.name));
    let out = at("output", OutputDir::create(out_dir))?;
    let mut timer = Timer {
        start: Instant::now(),
        timing: Timing::default(),
    };
    let spec = &scenario.spec;
    let check = check_assumptions(spec, scenario.config.check);
    timer.lap("check");
    let mut report = Report {
        scenario: scenario.config.name.clone(),
        stage,
        passed: check.passed,
        check,
        tubes: Vec::new(),
        beams: Vec::new(),
        gouy: Vec::new(),
        sweep: None,
        criteria: Vec::new(),
    };
    let finish = |report: &Report, timing: &Timing| -> std::result::Result<(), StageError> {
        at("output", out.write_json("report.json", report))?;
        at("output", out.write_json("timing.json", timing))
    };
    if stage == Stage::Check || !report.passed {
        finish(&report, &timer.timing)?;
        return Ok(report);
    }
    let components = &scenario.initial.components;
    let params = &scenario.config.beam;

    if stage == Stage::Trace {
        let tubes = at(
            "trace",
            components.par_iter().map(|c| trace_tube(spec, c, params)).collect::<Result<Vec<_>>>(),
        )?;
        timer.lap("trace");
        report.tubes = tubes.iter().enumerate().map(|(c, t)| tube_report(c, t)).collect();
        at("output", out.write_table("rays.csv", &output::rays_table(&tubes.iter().collect::<Vec<_>>())))?;
        finish(&report, &timer.timing)?;
        return Ok(report);
    }

    let beams: Vec<BeamSolution> = at(
        "beam",
        components.par_iter().map(|c| build_beam(spec, c, params)).collect::<Result<Vec<_>>>(),
    )?;
    timer.lap("beam");
    report.tubes = beams.iter().enumerate().map(|(c, b)| tube_report(c, &b.tube)).collect();
    report.beams = at(
        "beam",
        beams
            .iter()
            .enumerate()
            .map(|(c, b)| {
                Ok(BeamReport {
                    component: c,
                    cutoff_radius: b.cutoff.radius,
                    diagnostics: beam_diagnostics(spec, b)?,
                })
            })
            .collect::<Result<Vec<_>>>(),
    )?;
    let tubes: Vec<&Tube> = beams.iter().map(|b| &b.tube).collect();
    at("output", out.write_table("rays.csv", &output::rays_table(&tubes)))?;
    at("output", out.write_table("phase.csv", &output::phase_table(&beams)))?;
    at("output", out.write_table("amplitude.csv", &output::amplitude_table(&beams)))?;
    let eps0 = scenario.config.eps[0];
    let t_final = spec.domain.t_final;
    for t in [0.0, 0.5 * t_final, t_final] {
        let axes = at("beam", snapshot_axes(&scenario, t))?;
        let grid = at("beam", assemble_field(&beams, eps0, &axes, t))?;
        at("output", out.write_table(&output::field_file_name(t), &output::field_table(&grid)))?;
    }
    timer.lap("beam output");
    if stage == Stage::Beam {
        finish(&report, &timer.timing)?;
        return Ok(report);
    }

    for b in &report.beams {
        let d = &b.diagnostics;
        let c = b.component;
        report.criteria.push(Criterion::above(format!("component {c}: min eig Im Φ"), d.min_im_eig, 0.0));
        report.criteria.push(Criterion::at_most(format!("component {c}: frame deviation"), d.frame_deviation, FRAME_TOL));
        report.criteria.push(Criterion::at_most(
            format!("component {c}: polarization violation"),
            d.max_polarization_violation,
            POLARIZATION_TOL,
        ));
        if let Some(slope) = d.eikonal_defect_slope {
            report.criteria.push(Criterion::at_least(format!("component {c}: eikonal defect slope"), slope, DEFECT_SLOPE_MIN));
        }
    }
    report.gouy = at(
        "verify",
        beams
            .par_iter()
            .enumerate()
            .map(|(c, b)| {
                let ray = b.tube.n_rays() / 2;
                let g = gouy_phase(spec, b, ray, GOUY_REFINE)?;
                let max_deviation = g.phase.iter().zip(&g.integrated).map(|(p, i)| (p - i).abs()).fold(0.0, f64::max);
                Ok(GouyReport {
                    component: c,
                    ray,
                    final_phase: *g.phase.last().unwrap_or(&0.0),
                    max_deviation,
                })
            })
            .collect::<Result<Vec<_>>>(),
    )?;
    for g in &report.gouy {
        report.criteria.push(Criterion::at_most(
            format!("component {}: Gouy phase against the oracle", g.component),
            g.max_deviation,
            GOUY_TOL,
        ));
    }
    timer.lap("verify");

    if stage == Stage::Sweep {
        let sweep = at(
            "sweep",
            run_sweep(spec, &scenario.initial, &beams, &scenario.config.eps, &scenario.config.verify),
        )?;
        timer.lap("sweep");
        timer.timing.sweep_entries = sweep.entries.iter().map(|e| (e.eps, e.runtime_s)).collect();
        let no_reference = spec.dim != 1 || !scenario.config.verify.l2;
        report.criteria.extend(rate_criteria("residual", &sweep.residual_rate, RESIDUAL_EXACT));
        report.criteria.extend(rate_criteria("mismatch", &sweep.mismatch_rate, MISMATCH_EXACT));
        match (&sweep.l2_rate, sweep.l2_within_reference) {
            (Rate::Exact { .. }, Some(true)) => {
                let ratio = sweep
                    .entries
                    .iter()
                    .filter_map(|e| Some(e.l2_sup()? / e.reference_error_sup()?))
                    .fold(0.0, f64::max);
                report.criteria.push(Criterion::at_most("L2 error / reference error estimate", ratio, 2.0));
            }
            (Rate::Unavailable { .. }, _) if no_reference => {}
            (rate, _) => report.criteria.extend(rate_criteria("L2 error", rate, EXACT_THRESHOLD)),
        }
        at("output", out.write_table("sweep.csv", &output::sweep_table(&sweep)))?;
        report.sweep = Some(sweep);
    }
    report.passed = report.check.passed && report.criteria.iter().all(|c| c.passed);
    finish(&report, &timer.timing)?;
    Ok(report)
}

/// Exit code for a finished run or an error.
pub fn exit_code(outcome: &std::result::Result<Report, StageError>) -> u8 {
    match outcome {
        Ok(r) if r.passed => EXIT_PASS,
        Ok(_) => EXIT_FAIL,
        Err(e) if e.error.is_config() => EXIT_CONFIG,
        Err(_) => EXIT_NUMERIC,
    }
}

fn summary(report: &Report) -> String {
    let mut lines = vec![format!(
        "{} {}: {}",
        report.stage,
        report.scenario,
        if report.passed { "PASS" } else { "FAIL" }
    )];
    if !report.check.passed {
        lines.push(format!(
            "  assumptions failed: hermitian {}, gap {}, boundary speed {}",
            report.check.hermitian_ok, report.check.gap_ok, report.check.boundary_speed_ok
        ));
    }
    for c in &report.criteria {
        lines.push(format!(
            "  [{}] {} = {:.3e} (threshold {:.3e})",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold
        ));
    }
    lines.join("\n")
}

/// Parses `args`, runs the requested stage and returns the process exit code.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS });
        }
    };
    let (stage, opts) = cli.command.split();
    let run = || run_stage(stage, opts);
    let outcome = match opts.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(e) => Err(StageError {
                stage: "config",
                error: CgoError::Config(format!("--threads {n}: {e}")),
            }),
        },
        None => run(),
    };
    match &outcome {
        Ok(report) => println!("{}", summary(report)),
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&outcome))
}
