//! Deflection observables shared by the sweep and calibration commands.

use evsim_core::equilibrium::{solve_pitch_deflection, DeflectionProblem, EquilibriumError, EquilibriumResult};
use evsim_core::{LoadCase, MechanismConfig};

/// Structural configuration of a deflection experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    MembraneOnly,
    Skeleton,
    SkeletonJammed,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::MembraneOnly, Mode::Skeleton, Mode::SkeletonJammed];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::MembraneOnly => "membrane",
            Mode::Skeleton => "skeleton",
            Mode::SkeletonJammed => "skeleton+jam",
        }
    }
}

/// Loads of a weight hung at the scenario load position.
pub fn weight_case(config: &MechanismConfig, mass: f64) -> LoadCase {
    let base = LoadCase::default().with_gravity(config.scenario.gravity);
    if mass > 0.0 {
        LoadCase { point_loads: LoadCase::single(config.scenario.load_position, mass).point_loads, ..base }
    } else {
        base
    }
}

/// Solves one experiment point.
pub fn solve(config: &MechanismConfig, mode: Mode, mass: f64, pressure: f64) -> Result<EquilibriumResult, EquilibriumError> {
    let loads = weight_case(config, mass);
    let mut problem = DeflectionProblem::from_config(config, &loads).pressure(pressure);
    match mode {
        Mode::MembraneOnly => problem = problem.membrane_only(),
        Mode::Skeleton => {}
        Mode::SkeletonJammed => problem = problem.jam_tension(config.scenario.jam_tension),
    }
    solve_pitch_deflection(&problem)
}

/// Tip displacement from the straight configuration.
pub fn deflection(config: &MechanismConfig, mode: Mode, mass: f64, pressure: f64) -> Result<f64, EquilibriumError> {
    solve(config, mode, mass, pressure).map(|r| r.tip_deflection)
}

/// Skeleton sag under its own weight, unpressurized.
pub fn self_weight_sag(config: &MechanismConfig) -> Result<f64, EquilibriumError> {
    deflection(config, Mode::Skeleton, 0.0, 0.0)
}

/// Relative drop in skeleton deflection at the operating pressure, averaged
/// over the scenario weights.
pub fn pressure_reduction(config: &MechanismConfig) -> Result<f64, EquilibriumError> {
    let s = &config.scenario;
    let mut total = 0.0;
    for &w in &s.weights {
        let d0 = deflection(config, Mode::Skeleton, w, 0.0)?;
        let d1 = deflection(config, Mode::Skeleton, w, s.operating_pressure)?;
        total += 1.0 - d1 / d0;
    }
    Ok(total / s.weights.len() as f64)
}

/// Relative drop in deflection from jamming for `mass`, averaged over the
/// scenario pressures.
pub fn jam_reduction(config: &MechanismConfig, mass: f64) -> Result<f64, EquilibriumError> {
    let s = &config.scenario;
    let mut total = 0.0;
    for &p in &s.pressures {
        let free = deflection(config, Mode::Skeleton, mass, p)?;
        let jammed = deflection(config, Mode::SkeletonJammed, mass, p)?;
        total += 1.0 - jammed / free;
    }
    Ok(total / s.pressures.len() as f64)
}
