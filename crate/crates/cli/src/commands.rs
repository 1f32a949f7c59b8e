//! Command definitions and their table outputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use evsim_core::actuation::{fit_friction_coefficient, holding_force_at, holding_torque, parse_sweep_csv, LockMode};
use evsim_core::equilibrium::EquilibriumError;
use evsim_core::kinematics::{spiral_outer_diameter, unrolled_spiral_length};
use evsim_core::process::{canonical_script, parse_script, run_sequence_from, wrap_scenario, ActionError, Trace};
use evsim_core::{load_config, MechanismConfig, MechanismState};
use rayon::prelude::*;
use thiserror::Error;

use crate::calibration::{calibrate, prototype_targets, CalibrationError, CalibrationReport};
use crate::experiments::{solve, Mode};
use crate::plot::render_svg;
use crate::table::{Cell, SweepTable, TableError};

#[derive(Debug, Parser)]
#[command(name = "evsim", version, about = "Everting membrane with articulated skeleton: statics and operation harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration; prototype defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving `<table>.csv` files instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Measured `tension_n,torque_nm` CSV for the holding-torque fit.
    #[arg(long, global = true)]
    pub measured: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    #[value(name = "csv+plot")]
    CsvPlot,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Jamming holding torque over wire tension and joint angle.
    HoldingTorque {
        #[arg(long, value_delimiter = ',', default_values_t = [50.0, 100.0, 150.0])]
        tensions: Vec<f64>,
        /// Joint angles in degrees.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 15.0, 30.0])]
        angles: Vec<f64>,
        /// Lever arm for the equivalent tip holding force, m.
        #[arg(long, default_value_t = 0.5)]
        lever: f64,
    },
    /// Tip deflection over pressure and weight for the three structures.
    Deflection {
        /// Pressures in Pa; scenario list when omitted.
        #[arg(long, value_delimiter = ',')]
        pressures: Option<Vec<f64>>,
        /// Weights in kg; scenario list when omitted.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
    },
    /// Fit clearance stiffness, backlash and membrane coefficient.
    Calibrate,
    /// Wrap the chain around a cylindrical target.
    Wrap {
        /// Target radii in m; scenario radius when omitted.
        #[arg(long, value_delimiter = ',')]
        radius: Option<Vec<f64>>,
        #[arg(long)]
        arc_fraction: Option<f64>,
    },
    /// Run an operation script and export its trace.
    Sequence {
        /// JSON action list; the demonstration script when omitted.
        #[arg(long)]
        script: Option<PathBuf>,
        /// JSON initial state; stowed when omitted.
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Spiral storage of the skeleton on a reel.
    Reel {
        #[arg(long)]
        length: Option<f64>,
        #[arg(long)]
        thickness: Option<f64>,
        #[arg(long)]
        inner_radius: Option<f64>,
    },
    /// Check a configuration and optionally a state.
    Validate {
        #[arg(long)]
        state: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Sequence(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Sequence(_) => 4,
        }
    }
}

impl From<TableError> for CliError {
    fn from(e: TableError) -> Self {
        CliError::Io(format!("table assembly: {e}"))
    }
}

impl From<EquilibriumError> for CliError {
    fn from(e: EquilibriumError) -> Self {
        match e {
            EquilibriumError::InvalidInput(_) | EquilibriumError::LoadBeyondTip { .. } => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Solver(e.to_string()),
        }
    }
}

/// Tables, side files and messages produced by a command. `error` is set when
/// the command failed after producing partial output.
#[derive(Debug, Default)]
pub struct Output {
    pub tables: Vec<SweepTable>,
    pub files: Vec<(String, String)>,
    pub messages: Vec<String>,
    pub error: Option<CliError>,
}

impl Output {
    fn table(table: SweepTable) -> Self {
        Self { tables: vec![table], ..Self::default() }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn load(cli: &Cli) -> Result<MechanismConfig, CliError> {
    match &cli.config {
        Some(path) => load_config(&read(path)?).map_err(|e| CliError::Validation(format!("{}: {e}", path.display()))),
        None => Ok(MechanismConfig::default()),
    }
}

/// Runs the parsed command and returns its output.
pub fn run(cli: &Cli) -> Result<Output, CliError> {
    let config = load(cli)?;
    match &cli.command {
        Command::HoldingTorque { tensions, angles, lever } => {
            let measured = cli.measured.as_deref().map(read).transpose()?;
            holding_torque_table(&config, tensions, angles, *lever, measured.as_deref()).map(Output::table)
        }
        Command::Deflection { pressures, weights } => {
            let pressures = pressures.clone().unwrap_or_else(|| config.scenario.pressures.clone());
            let weights = weights.clone().unwrap_or_else(|| config.scenario.weights.clone());
            deflection_table(&config, &pressures, &weights).map(Output::table)
        }
        Command::Calibrate => calibrate_output(&config),
        Command::Wrap { radius, arc_fraction } => {
            let radii = radius.clone().unwrap_or_else(|| vec![config.scenario.wrap_radius]);
            wrap_table(&config, &radii, arc_fraction.unwrap_or(config.scenario.arc_fraction)).map(Output::table)
        }
        Command::Sequence { script, state } => {
            let actions = match script {
                Some(p) => parse_script(&read(p)?).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?,
                None => canonical_script(&config),
            };
            let initial = match state {
                Some(p) => parse_state(&read(p)?, p)?,
                None => MechanismState::stowed(),
            };
            sequence_output(&config, initial, &actions)
        }
        Command::Reel { length, thickness, inner_radius } => reel_table(
            length.unwrap_or(config.scenario.reel_length),
            thickness.unwrap_or(config.chain.link.link_thickness),
            inner_radius.unwrap_or(config.scenario.reel_inner_radius),
        )
        .map(Output::table),
        Command::Validate { state } => {
            let state = state.as_deref().map(|p| read(p).and_then(|t| parse_state(&t, p))).transpose()?;
            validate_output(&config, state.as_ref())
        }
    }
}

fn parse_state(text: &str, path: &Path) -> Result<MechanismState, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn holding_torque_table(
    config: &MechanismConfig,
    tensions: &[f64],
    angles: &[f64],
    lever: f64,
    measured: Option<&str>,
) -> Result<SweepTable, CliError> {
    if let Some(t) = tensions.iter().find(|t| !(**t >= 0.0)) {
        return Err(CliError::Validation(format!("tension must be ≥ 0, got {t}")));
    }
    let link = &config.chain.link;
    let fitted = measured
        .map(|text| {
            let samples = parse_sweep_csv(text).map_err(|e| CliError::Validation(format!("measured CSV: {e}")))?;
            fit_friction_coefficient(&samples, link.jam_contact_radius)
                .map_err(|e| CliError::Validation(format!("measured CSV: {e}")))
        })
        .transpose()?;
    let mut headers = vec!["angle_deg", "tension_n", "torque_nm", "holding_force_n"];
    if fitted.is_some() {
        headers.push("fitted_mu");
    }
    let mut table = SweepTable::new("holding_torque", &headers)?
        .note("torque_nm", "friction coefficient × contact radius × jamming tension × angle derating")
        .note("holding_force_n", "torque divided by the lever arm")
        .with_plot("tension_n", "torque_nm", &["angle_deg"]);
    if fitted.is_some() {
        table = table.note("fitted_mu", "least-squares slope through the origin of the measured sweep");
    }
    for &angle in angles {
        for &tension in tensions {
            let torque = holding_torque(link.friction_coeff, link.jam_contact_radius, tension)
                * config.derating.factor(angle.to_radians());
            let force = holding_force_at(torque, lever).map_err(|e| CliError::Validation(e.to_string()))?;
            let mut row: Vec<Cell> = vec![angle.into(), tension.into(), torque.into(), force.into()];
            if let Some(mu) = fitted {
                row.push(mu.into());
            }
            table.push(row)?;
        }
    }
    Ok(table)
}

pub fn deflection_table(config: &MechanismConfig, pressures: &[f64], weights: &[f64]) -> Result<SweepTable, CliError> {
    if let Some(p) = pressures.iter().find(|p| !(**p >= 0.0)) {
        return Err(CliError::Validation(format!("pressure must be ≥ 0, got {p}")));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(CliError::Validation(format!("weight must be ≥ 0, got {w}")));
    }
    let mut points = Vec::new();
    for mode in Mode::ALL {
        for &w in weights {
            for &p in pressures {
                points.push((mode, w, p));
            }
        }
    }
    let solved: Vec<_> = points
        .par_iter()
        .map(|&(mode, w, p)| (solve(config, mode, w, p), solve(config, mode, 0.0, p)))
        .collect();

    let mut table = SweepTable::new(
        "deflection",
        &[
            "mode",
            "weight_kg",
            "pressure_pa",
            "status",
            "deflection_from_straight_m",
            "deflection_from_initial_m",
            "max_moment_nm",
            "wrinkled_joints",
            "slipping_joints",
        ],
    )?
    .note("deflection_from_straight_m", "downward tip displacement from the straight chain")
    .note("deflection_from_initial_m", "minus the unloaded deflection of the same structure at the same pressure")
    .note("status", "excessive deflection: a joint with no remaining stiffness carries moment")
    .with_plot("pressure_pa", "deflection_from_straight_m", &["mode", "weight_kg"]);
    for (&(mode, w, p), (loaded, base)) in points.iter().zip(solved) {
        let row: Vec<Cell> = match (loaded, base) {
            (Ok(r), Ok(b)) => {
                let status = if r.limit_violations.is_empty() { "ok" } else { "limit violation" };
                vec![
                    mode.as_str().into(),
                    w.into(),
                    p.into(),
                    status.into(),
                    r.tip_deflection.into(),
                    (r.tip_deflection - b.tip_deflection).into(),
                    r.max_moment().into(),
                    r.wrinkled.iter().filter(|x| **x).count().into(),
                    r.lock_states.iter().filter(|l| l.mode == LockMode::Slip).count().into(),
                ]
            }
            (Err(EquilibriumError::Collapse { .. }), _) | (_, Err(EquilibriumError::Collapse { .. })) => vec![
                mode.as_str().into(),
                w.into(),
                p.into(),
                "excessive deflection".into(),
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
            ],
            (Err(e), _) | (_, Err(e)) => return Err(e.into()),
        };
        table.push(row)?;
    }
    Ok(table)
}

fn calibration_tables(report: &CalibrationReport) -> Result<Vec<SweepTable>, TableError> {
    let mut targets = SweepTable::new(
        "calibrate",
        &[
            "target",
            "observable",
            "target_value",
            "tolerance",
            "predicted",
            "normalized_residual",
            "within_tolerance",
            "attainable",
        ],
    )?
    .note("normalized_residual", "(predicted − target) / tolerance")
    .note("attainable", "false when no grid point reached tolerance; excluded from the descent objective");
    for r in &report.results {
        targets.push(vec![
            r.target.description.as_str().into(),
            r.target.observable.name().into(),
            r.target.value.into(),
            r.target.tolerance.into(),
            r.predicted.into(),
            r.normalized_residual.into(),
            r.within_tolerance().into(),
            r.attainable.into(),
        ])?;
    }
    let mut params = SweepTable::new("calibrate_parameters", &["parameter", "value", "free"])?;
    for (p, v, free) in &report.parameters {
        params.push(vec![p.name().into(), (*v).into(), (*free).into()])?;
    }
    params.push(vec!["objective".into(), report.objective.into(), Cell::Empty])?;
    Ok(vec![targets, params])
}

pub fn calibrate_output(config: &MechanismConfig) -> Result<Output, CliError> {
    let (report, error) = match calibrate(config, &prototype_targets()) {
        Ok(r) => (r, None),
        Err(CalibrationError::Failed(r)) => {
            let msg = format!(
                "calibration failed: only {} of {} targets within tolerance",
                r.within_count(),
                r.results.len()
            );
            (*r, Some(CliError::Solver(msg)))
        }
        Err(e @ (CalibrationError::Underdetermined { .. } | CalibrationError::BadTolerance(_))) => {
            return Err(CliError::Validation(e.to_string()))
        }
        Err(e) => return Err(CliError::Solver(e.to_string())),
    };
    let messages = vec![format!(
        "{} of {} targets within tolerance after {} evaluations",
        report.within_count(),
        report.results.len(),
        report.evaluations
    )];
    Ok(Output {
        tables: calibration_tables(&report)?,
        files: vec![("calibrated_config.json".into(), report.config.to_json())],
        messages,
        error,
    })
}

pub fn wrap_table(config: &MechanismConfig, radii: &[f64], arc_fraction: f64) -> Result<SweepTable, CliError> {
    let mut table = SweepTable::new(
        "wrap",
        &[
            "target_radius_m",
            "min_radius_m",
            "feasible",
            "per_joint_yaw_deg",
            "wrapped_joints",
            "required_bend_tension_n",
            "hold_margin_nm",
        ],
    )?
    .note("min_radius_m", "circumradius of the polygon at the yaw limit")
    .note("required_bend_tension_n", "conforming stiffness × yaw / bend-wire radius")
    .note("hold_margin_nm", "derated holding torque minus the worst joint's reaction moment")
    .with_plot("target_radius_m", "hold_margin_nm", &[]);
    for &r in radii {
        let w = wrap_scenario(r, arc_fraction, config).map_err(|e| CliError::Validation(e.to_string()))?;
        table.push(vec![
            r.into(),
            w.min_radius.into(),
            w.feasible.into(),
            w.per_joint_yaw.to_degrees().into(),
            w.wrapped_joints.into(),
            w.required_bend_tension.into(),
            w.hold_margin.into(),
        ])?;
    }
    Ok(table)
}

fn trace_table(trace: &Trace) -> Result<SweepTable, TableError> {
    let mut table = SweepTable::new("sequence", &["step", "action", "deployed_m", "tip_sag_m", "locked"])?
        .note("tip_sag_m", "gravity sag of the tip after the step")
        .with_plot("step", "deployed_m", &[]);
    for (i, s) in trace.steps.iter().enumerate() {
        table.push(vec![
            i.into(),
            s.action.as_ref().map_or("initial", |a| a.name()).into(),
            s.state.deployed_length.into(),
            s.summary.tip_sag.into(),
            s.state.locked.into(),
        ])?;
    }
    Ok(table)
}

pub fn sequence_output(
    config: &MechanismConfig,
    initial: MechanismState,
    actions: &[evsim_core::process::Action],
) -> Result<Output, CliError> {
    let violations = config.validate_state(&initial);
    if !violations.is_empty() {
        let text: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(CliError::Validation(format!("initial state: {}", text.join("; "))));
    }
    let (trace, error) = match run_sequence_from(initial, actions, config) {
        Ok(t) => (t, None),
        Err(e) => {
            let msg = format!("step {}: {}", e.index, e);
            let err = match e.error {
                ActionError::Solver(_) => CliError::Solver(msg),
                _ => CliError::Sequence(msg),
            };
            (e.partial, Some(err))
        }
    };
    let messages = trace
        .steps
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.warnings.iter().map(move |w| format!("warning at step {i}: {w}")))
        .collect();
    Ok(Output { tables: vec![trace_table(&trace)?], files: Vec::new(), messages, error })
}

pub fn reel_table(length: f64, thickness: f64, inner_radius: f64) -> Result<SweepTable, CliError> {
    if !(length >= 0.0 && thickness > 0.0 && inner_radius > 0.0) {
        return Err(CliError::Validation("reel needs length ≥ 0, thickness > 0 and inner radius > 0".into()));
    }
    let diameter = spiral_outer_diameter(length, thickness, inner_radius);
    let unrolled = unrolled_spiral_length(inner_radius, diameter / 2.0, thickness);
    let error = if length > 0.0 { (unrolled - length).abs() / length } else { 0.0 };
    let mut table = SweepTable::new(
        "reel",
        &["length_m", "thickness_m", "inner_radius_m", "outer_diameter_m", "unrolled_length_m", "unrolled_relative_error"],
    )?
    .note("outer_diameter_m", "Archimedean spiral packing, 2·sqrt(r_in² + t·L/π)")
    .note("unrolled_length_m", "arc length of the spiral by quadrature");
    table.push(vec![
        length.into(),
        thickness.into(),
        inner_radius.into(),
        diameter.into(),
        unrolled.into(),
        error.into(),
    ])?;
    Ok(table)
}

pub fn validate_output(config: &MechanismConfig, state: Option<&MechanismState>) -> Result<Output, CliError> {
    let mut table = SweepTable::new("validate", &["scope", "field", "joint", "message"])?;
    if let Some(state) = state {
        for v in config.validate_state(state) {
            table.push(vec![
                "state".into(),
                v.field.into(),
                v.joint.map_or(Cell::Empty, |j| j.into()),
                v.message.into(),
            ])?;
        }
    }
    let error = if table.rows().is_empty() {
        None
    } else {
        Some(CliError::Validation(format!("{} state violation(s)", table.rows().len())))
    };
    let messages = vec![if error.is_none() { "configuration valid".to_string() } else { "state invalid".to_string() }];
    Ok(Output { tables: vec![table], files: Vec::new(), messages, error })
}

/// Writes the output to `--out` (or stdout) and returns the exit code.
pub fn emit(cli: &Cli, output: Output, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let result = write_output(cli, &output, stdout);
    for m in &output.messages {
        let _ = writeln!(stderr, "{m}");
    }
    match (result, output.error) {
        (Err(e), _) | (Ok(()), Some(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
        (Ok(()), None) => 0,
    }
}

fn write_output(cli: &Cli, output: &Output, stdout: &mut dyn Write) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            let put = |name: &str, text: &str| {
                let path = dir.join(name);
                fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
            };
            for t in &output.tables {
                put(&format!("{}.csv", t.name), &t.to_csv())?;
                if !t.notes.is_empty() {
                    put(&format!("{}_notes.txt", t.name), &t.notes_text())?;
                }
                if cli.format == Format::CsvPlot {
                    if let Some(svg) = render_svg(t)? {
                        put(&format!("{}.svg", t.name), &svg)?;
                    }
                }
            }
            for (name, text) in &output.files {
                put(name, text)?;
            }
        }
        None => {
            if cli.format == Format::CsvPlot {
                return Err(CliError::Validation("--format csv+plot requires --out".into()));
            }
            for (i, t) in output.tables.iter().enumerate() {
                if i > 0 {
                    writeln!(stdout).map_err(io)?;
                }
                stdout.write_all(t.to_csv().as_bytes()).map_err(io)?;
            }
        }
    }
    Ok(())
}

/// Parses, runs and emits; the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = write!(stderr, "{e}");
            return 2;
        }
        Err(e) => {
            let _ = write!(stdout, "{e}");
            return 0;
        }
    };
    match run(&cli) {
        Ok(output) => emit(&cli, output, stdout, stderr),
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
