//! Derivative-free fit of the joint stiffness parameters to deflection targets.
//!
//! The objective is the sum of squared normalized residuals
//! `((predicted − target) / tolerance)²`. A fixed grid over the free
//! parameters seeds a coordinate descent that tries steps in a fixed order and
//! halves them when no step improves. Both stages are deterministic.
//!
//! A target whose value lies outside the range the grid predicts (widened by
//! its tolerance) is reported but left out of the objective, so that its
//! constant penalty cannot pull the fit away from the targets the model can
//! reach.

use evsim_core::config::StiffnessParam;
use evsim_core::equilibrium::EquilibriumError;
use evsim_core::MechanismConfig;
use rayon::prelude::*;
use thiserror::Error;

use crate::experiments::{jam_reduction, pressure_reduction, self_weight_sag};

/// Solver output a target constrains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observable {
    /// Unpressurized, unloaded skeleton tip sag, m.
    SelfWeightSag,
    /// Fractional deflection drop at the operating pressure.
    PressureReduction,
    /// Fractional deflection drop from jamming with this mass attached.
    JamReduction { mass: f64 },
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::SelfWeightSag => "self_weight_sag_m".into(),
            Observable::PressureReduction => "pressure_reduction".into(),
            Observable::JamReduction { mass } => format!("jam_reduction_{}g", (mass * 1000.0).round()),
        }
    }

    pub fn evaluate(&self, config: &MechanismConfig) -> Result<f64, EquilibriumError> {
        match self {
            Observable::SelfWeightSag => self_weight_sag(config),
            Observable::PressureReduction => pressure_reduction(config),
            Observable::JamReduction { mass } => jam_reduction(config, *mass),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTarget {
    pub description: String,
    pub observable: Observable,
    pub value: f64,
    pub tolerance: f64,
}

impl CalibrationTarget {
    pub fn new(description: &str, observable: Observable, value: f64, tolerance: f64) -> Self {
        Self { description: description.into(), observable, value, tolerance }
    }
}

/// The prototype's measured behavior: about 100 mm of self-weight sag, a
/// 15–20% deflection drop at 10 kPa, and jamming reductions of 13.3% at 500 g
/// and 19.6% at 150 g.
pub fn prototype_targets() -> Vec<CalibrationTarget> {
    vec![
        CalibrationTarget::new("self-weight sag", Observable::SelfWeightSag, 0.100, 0.015),
        CalibrationTarget::new("pressure reduction at 10 kPa", Observable::PressureReduction, 0.175, 0.025),
        CalibrationTarget::new("jamming reduction at 500 g", Observable::JamReduction { mass: 0.5 }, 0.133, 0.03),
        CalibrationTarget::new("jamming reduction at 150 g", Observable::JamReduction { mass: 0.15 }, 0.196, 0.03),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
    pub log: bool,
    pub grid_points: usize,
}

impl Bounds {
    pub fn of(param: StiffnessParam) -> Self {
        match param {
            StiffnessParam::ClearanceStiffness => Bounds { lower: 50.0, upper: 1.0e5, log: true, grid_points: 12 },
            StiffnessParam::Backlash => Bounds { lower: 0.0, upper: 0.01, log: false, grid_points: 11 },
            StiffnessParam::PressureStiffnessCoeff => Bounds { lower: 1.0, upper: 1.0e5, log: true, grid_points: 6 },
        }
    }

    fn unit_of(self, x: f64) -> f64 {
        if self.log {
            (x.ln() - self.lower.ln()) / (self.upper.ln() - self.lower.ln())
        } else {
            (x - self.lower) / (self.upper - self.lower)
        }
    }

    fn value_at(self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if self.log {
            (self.lower.ln() + u * (self.upper.ln() - self.lower.ln())).exp()
        } else {
            self.lower + u * (self.upper - self.lower)
        }
    }
}

pub fn get_param(config: &MechanismConfig, param: StiffnessParam) -> f64 {
    match param {
        StiffnessParam::ClearanceStiffness => config.chain.link.clearance_stiffness,
        StiffnessParam::Backlash => config.chain.link.backlash,
        StiffnessParam::PressureStiffnessCoeff => config.membrane.pressure_stiffness_coeff,
    }
}

pub fn set_param(config: &mut MechanismConfig, param: StiffnessParam, value: f64) {
    match param {
        StiffnessParam::ClearanceStiffness => config.chain.link.clearance_stiffness = value,
        StiffnessParam::Backlash => config.chain.link.backlash = value,
        StiffnessParam::PressureStiffnessCoeff => config.membrane.pressure_stiffness_coeff = value,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetResult {
    pub target: CalibrationTarget,
    pub predicted: f64,
    /// Whether the grid's predictions bracket the target. Targets outside
    /// that range are left out of the descent objective.
    pub attainable: bool,
    /// `(predicted − target) / tolerance`.
    pub normalized_residual: f64,
}

impl TargetResult {
    pub fn within_tolerance(&self) -> bool {
        self.normalized_residual.abs() <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    /// Every stiffness parameter with its final value and whether it was free.
    pub parameters: Vec<(StiffnessParam, f64, bool)>,
    pub results: Vec<TargetResult>,
    /// Sum of squared normalized residuals over the attainable targets.
    pub objective: f64,
    pub evaluations: usize,
    /// Configuration with the fitted parameters applied.
    pub config: MechanismConfig,
}

impl CalibrationReport {
    pub fn within_count(&self) -> usize {
        self.results.iter().filter(|r| r.within_tolerance()).count()
    }
}

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("need at least as many targets ({targets}) as free parameters ({free})")]
    Underdetermined { targets: usize, free: usize },
    #[error("target `{0}` has a non-positive tolerance")]
    BadTolerance(String),
    #[error("only {} of {} targets within tolerance at the best parameters", .0.within_count(), .0.results.len())]
    Failed(Box<CalibrationReport>),
    #[error(transparent)]
    Solver(#[from] EquilibriumError),
}

/// Normalized residual of every target; infinite where the solve fails.
fn residuals(config: &MechanismConfig, targets: &[CalibrationTarget]) -> Vec<f64> {
    targets
        .iter()
        .map(|t| match t.observable.evaluate(config) {
            Ok(v) if v.is_finite() => (v - t.value) / t.tolerance,
            _ => f64::INFINITY,
        })
        .collect()
}

fn objective(residuals: &[f64], active: &[bool]) -> f64 {
    residuals.iter().zip(active).filter(|(_, a)| **a).map(|(r, _)| r * r).sum()
}

fn apply(base: &MechanismConfig, free: &[StiffnessParam], unit: &[f64]) -> MechanismConfig {
    let mut c = base.clone();
    for (p, u) in free.iter().zip(unit) {
        set_param(&mut c, *p, Bounds::of(*p).value_at(*u));
    }
    c
}

fn grid(free: &[StiffnessParam]) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for p in free {
        let n = Bounds::of(*p).grid_points;
        points = points
            .into_iter()
            .flat_map(|prefix| {
                (0..n).map(move |i| {
                    let mut v = prefix.clone();
                    v.push(i as f64 / (n - 1) as f64);
                    v
                })
            })
            .collect();
    }
    points
}

/// Evaluates every target at `config` without fitting.
pub fn evaluate_targets(config: &MechanismConfig, targets: &[CalibrationTarget]) -> Result<Vec<TargetResult>, EquilibriumError> {
    targets
        .iter()
        .map(|t| {
            let predicted = t.observable.evaluate(config)?;
            Ok(TargetResult {
                target: t.clone(),
                predicted,
                attainable: true,
                normalized_residual: (predicted - t.value) / t.tolerance,
            })
        })
        .collect()
}

/// Fits the parameters listed in `config.solver.calibration_free`.
///
/// Fails when fewer than half of the targets end within tolerance; the error
/// carries the best-found report.
pub fn calibrate(config: &MechanismConfig, targets: &[CalibrationTarget]) -> Result<CalibrationReport, CalibrationError> {
    let mut free: Vec<StiffnessParam> = Vec::new();
    for p in StiffnessParam::ALL {
        if config.solver.calibration_free.contains(&p) {
            free.push(p);
        }
    }
    if targets.len() < free.len() {
        return Err(CalibrationError::Underdetermined { targets: targets.len(), free: free.len() });
    }
    if let Some(t) = targets.iter().find(|t| !(t.tolerance > 0.0)) {
        return Err(CalibrationError::BadTolerance(t.description.clone()));
    }

    let mut evaluations = 0;
    let mut best_unit: Vec<f64> = free.iter().map(|p| Bounds::of(*p).unit_of(get_param(config, *p)).clamp(0.0, 1.0)).collect();
    let mut active = vec![true; targets.len()];
    if !free.is_empty() {
        let points = grid(&free);
        evaluations += points.len();
        let table: Vec<Vec<f64>> = points.par_iter().map(|u| residuals(&apply(config, &free, u), targets)).collect();
        // A target is attainable when the grid's predictions bracket it.
        for (k, a) in active.iter_mut().enumerate() {
            let finite = table.iter().map(|r| r[k]).filter(|r| r.is_finite());
            let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)));
            *a = lo <= 1.0 && hi >= -1.0;
        }
        if !active.iter().any(|a| *a) {
            active.iter_mut().for_each(|a| *a = true);
        }
        let mut best = f64::INFINITY;
        for (u, r) in points.iter().zip(&table) {
            let s = objective(r, &active);
            if s < best {
                best = s;
                best_unit = u.clone();
            }
        }

        let mut steps: Vec<f64> = free.iter().map(|p| 1.0 / (Bounds::of(*p).grid_points - 1) as f64).collect();
        while steps.iter().any(|&s| s > 1e-6) {
            let mut improved = false;
            for k in 0..free.len() {
                let candidates: Vec<Vec<f64>> = [-1.0, 1.0]
                    .iter()
                    .map(|dir| {
                        let mut u = best_unit.clone();
                        u[k] = (u[k] + dir * steps[k]).clamp(0.0, 1.0);
                        u
                    })
                    .filter(|u| u[k] != best_unit[k])
                    .collect();
                evaluations += candidates.len();
                let scores: Vec<f64> = candidates
                    .par_iter()
                    .map(|u| objective(&residuals(&apply(config, &free, u), targets), &active))
                    .collect();
                for (u, s) in candidates.into_iter().zip(scores) {
                    if s < best {
                        best = s;
                        best_unit = u;
                        improved = true;
                    }
                }
            }
            if !improved {
                steps.iter_mut().for_each(|s| *s *= 0.5);
            }
        }
    }

    let fitted = apply(config, &free, &best_unit);
    let mut results = evaluate_targets(&fitted, targets)?;
    for (r, a) in results.iter_mut().zip(&active) {
        r.attainable = *a;
    }
    evaluations += 1;
    let objective = results.iter().filter(|r| r.attainable).map(|r| r.normalized_residual.powi(2)).sum();
    let parameters = StiffnessParam::ALL.iter().map(|p| (*p, get_param(&fitted, *p), free.contains(p))).collect();
    let report = CalibrationReport { parameters, results, objective, evaluations, config: fitted };
    if report.within_count() * 2 < report.results.len() {
        return Err(CalibrationError::Failed(Box::new(report)));
    }
    Ok(report)
}
