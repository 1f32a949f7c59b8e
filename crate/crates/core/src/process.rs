//! Operation sequence state machine, wrap-around scenario and payload margin.

use std::fmt::Write as _;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actuation::{bend_moment, holding_torque};
use crate::config::MechanismConfig;
use crate::equilibrium::{
    buckling_check, retraction_tension, solve_pitch_deflection, BucklingReport, DeflectionProblem, EquilibriumError,
};
use crate::format::sig;
use crate::kinematics::{forward_kinematics, joints_in, min_wrap_radius, KinematicsError};
use crate::model::{LoadCase, MechanismState, Phase, PointLoad, Violation};

/// One operator command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", content = "value", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    /// Set the membrane pressure, Pa.
    Pressurize(f64),
    /// Pay out membrane, m.
    Feed(f64),
    /// Left and right side-wire tensions, N.
    SetBendTension(f64, f64),
    SetJamTension(f64),
    Lock,
    Unlock,
    ApplyLoad(LoadCase),
    /// Reel membrane back in, m.
    Retract(f64),
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Pressurize(_) => "pressurize",
            Action::Feed(_) => "feed",
            Action::SetBendTension(..) => "set_bend_tension",
            Action::SetJamTension(_) => "set_jam_tension",
            Action::Lock => "lock",
            Action::Unlock => "unlock",
            Action::ApplyLoad(_) => "apply_load",
            Action::Retract(_) => "retract",
        }
    }
}

/// Guards an action can violate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Guard {
    InsufficientPressure,
    RetractWhileLocked,
    ZeroJamTension,
    JamReleasedWhileLocked,
    NegativePayload,
    FeedBeyondSkeleton,
    RetractBeyondFeed,
}

impl Guard {
    pub fn as_str(self) -> &'static str {
        match self {
            Guard::InsufficientPressure => "insufficient pressure",
            Guard::RetractWhileLocked => "retract while locked",
            Guard::ZeroJamTension => "zero jam tension",
            Guard::JamReleasedWhileLocked => "jam released while locked",
            Guard::NegativePayload => "negative payload",
            Guard::FeedBeyondSkeleton => "feed beyond skeleton length",
            Guard::RetractBeyondFeed => "retract beyond feed",
        }
    }
}

impl std::fmt::Display for Guard {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum ActionError {
    #[error("guard violated: {guard} ({detail})")]
    Guard { guard: Guard, detail: String },
    #[error("retraction buckles the structure: {}", .0.cause)]
    Buckling(Box<BucklingReport>),
    #[error("resulting state is invalid: {}", join_violations(.0))]
    InvalidState(Vec<Violation>),
    #[error(transparent)]
    Solver(#[from] EquilibriumError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl ActionError {
    pub fn guard(&self) -> Option<Guard> {
        match self {
            ActionError::Guard { guard, .. } => Some(*guard),
            _ => None,
        }
    }
}

fn guard(guard: Guard, detail: impl Into<String>) -> ActionError {
    ActionError::Guard { guard, detail: detail.into() }
}

/// State after an action together with any non-fatal warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub state: MechanismState,
    pub warnings: Vec<String>,
}

fn bend_yaw(state: &MechanismState, config: &MechanismConfig, previous: f64) -> f64 {
    let link = &config.chain.link;
    let w = &state.wires;
    let moment = link.bend_wire_radius * (w.tension_left - w.tension_right);
    let k = config.membrane.pressure_stiffness_coeff * state.pressure * config.membrane.radius.powi(3);
    let deadband = if state.locked {
        holding_torque(link.friction_coeff, link.jam_contact_radius, w.tension_center)
    } else {
        0.0
    };
    let yaw = if k > 0.0 {
        let unbalanced = moment - k * previous;
        if unbalanced.abs() <= deadband {
            previous
        } else {
            (moment - deadband.copysign(unbalanced)) / k
        }
    } else if moment.abs() > deadband {
        if moment > 0.0 {
            link.yaw_max
        } else {
            link.yaw_min
        }
    } else {
        previous
    };
    yaw.clamp(link.yaw_min, link.yaw_max)
}

fn resize_joints(state: &mut MechanismState, config: &MechanismConfig) {
    let n = joints_in(state.deployed_length, config.chain.link.axis_spacing).min(config.chain.n_links);
    let yaw = state.yaw_angles.first().copied().unwrap_or(0.0);
    state.pitch_angles.resize(n, 0.0);
    state.yaw_angles.resize(n, yaw);
}

/// Applies one action, enforcing the sequence guards.
pub fn apply_action(state: &MechanismState, action: &Action, config: &MechanismConfig) -> Result<Outcome, ActionError> {
    let mut next = state.clone();
    let mut warnings = Vec::new();
    let total = config.chain.total_length;
    let nonneg = |v: f64, what: &str| -> Result<(), ActionError> {
        if v >= 0.0 {
            Ok(())
        } else {
            Err(ActionError::InvalidState(vec![Violation {
                field: "action",
                joint: None,
                message: format!("{what} must be ≥ 0, got {v}"),
            }]))
        }
    };
    match action {
        Action::Pressurize(p) => {
            nonneg(*p, "pressure")?;
            next.pressure = *p;
            if state.phase == Phase::Stowed {
                next.phase = Phase::Pressurized;
            }
        }
        Action::Feed(f) => {
            nonneg(*f, "feed")?;
            let min = config.membrane.min_extension_pressure;
            if state.pressure < min {
                return Err(guard(Guard::InsufficientPressure, format!("{} Pa < {} Pa", sig(state.pressure), sig(min))));
            }
            if state.deployed_length + f / 2.0 > total + 1e-12 {
                return Err(guard(
                    Guard::FeedBeyondSkeleton,
                    format!("deployed length would reach {} m > {} m", sig(state.deployed_length + f / 2.0), sig(total)),
                ));
            }
            next.feed = state.feed + f;
            next.deployed_length = state.deployed_length + f / 2.0;
            resize_joints(&mut next, config);
            next.phase = Phase::Extending;
        }
        Action::SetBendTension(left, right) => {
            nonneg(*left, "left tension")?;
            nonneg(*right, "right tension")?;
            next.wires.tension_left = *left;
            next.wires.tension_right = *right;
            let previous = state.yaw_angles.first().copied().unwrap_or(0.0);
            let yaw = bend_yaw(&next, config, previous);
            next.yaw_angles.iter_mut().for_each(|y| *y = yaw);
            next.phase = if matches!(state.phase, Phase::Unbending | Phase::Locked | Phase::Lifting) {
                Phase::Unbending
            } else {
                Phase::Bending
            };
        }
        Action::SetJamTension(t) => {
            nonneg(*t, "jam tension")?;
            if state.locked && *t <= 0.0 {
                return Err(guard(Guard::JamReleasedWhileLocked, "unlock before releasing the jamming wire"));
            }
            next.wires.tension_center = *t;
        }
        Action::Lock => {
            if !(state.wires.tension_center > 0.0) {
                return Err(guard(Guard::ZeroJamTension, "set a positive jamming tension before locking"));
            }
            next.locked = true;
            next.phase = Phase::Locked;
        }
        Action::Unlock => {
            next.locked = false;
            next.wires.tension_center = 0.0;
            next.phase = Phase::Unbending;
        }
        Action::ApplyLoad(loads) => {
            if loads.point_loads.iter().any(|p| !(p.mass >= 0.0)) {
                return Err(guard(Guard::NegativePayload, "point-load masses must be ≥ 0"));
            }
            next.loads = loads.clone();
            let lock = if state.locked {
                holding_torque(
                    config.chain.link.friction_coeff,
                    config.chain.link.jam_contact_radius,
                    state.wires.tension_center,
                )
            } else {
                0.0
            };
            let margin = payload_margin(lock, loads);
            if !state.locked {
                warnings.push(format!("load applied while unlocked: hold margin {} N·m", sig(margin.margin)));
            } else if margin.margin < 0.0 {
                warnings.push(format!("payload exceeds holding torque: hold margin {} N·m", sig(margin.margin)));
            }
            next.phase = Phase::Lifting;
        }
        Action::Retract(f) => {
            nonneg(*f, "retract")?;
            if state.locked {
                return Err(guard(Guard::RetractWhileLocked, "unlock before retracting"));
            }
            if *f > state.feed + 1e-12 {
                return Err(guard(
                    Guard::RetractBeyondFeed,
                    format!("retract {} m exceeds fed membrane {} m", sig(*f), sig(state.feed)),
                ));
            }
            let tension = retraction_tension(state.pressure, config.membrane.radius);
            let report = buckling_check(
                state,
                true,
                tension,
                &config.chain,
                &config.membrane,
                state.pressure,
                config.imperfection_offset(),
            );
            if report.buckles() {
                return Err(ActionError::Buckling(Box::new(report)));
            }
            next.loads = LoadCase { point_loads: Vec::new(), gravity: state.loads.gravity };
            next.feed = (state.feed - f).max(0.0);
            next.deployed_length = (state.deployed_length - f / 2.0).max(0.0);
            resize_joints(&mut next, config);
            next.phase = Phase::Retracting;
        }
    }
    let violations = config.validate_state(&next);
    if !violations.is_empty() {
        return Err(ActionError::InvalidState(violations));
    }
    Ok(Outcome { state: next, warnings })
}

/// Gravity-sag summary attached to each trace step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSummary {
    pub tip_sag: f64,
    pub max_moment: f64,
    pub iterations: usize,
}

fn summarize(state: &MechanismState, config: &MechanismConfig) -> Result<EquilibriumSummary, EquilibriumError> {
    let jam = if state.locked { state.wires.tension_center } else { 0.0 };
    let problem = DeflectionProblem::new(&config.chain, &config.membrane, &state.loads, state.deployed_length)
        .settings(&config.solver)
        .pressure(state.pressure)
        .jam_tension(jam);
    let r = solve_pitch_deflection(&problem)?;
    Ok(EquilibriumSummary { tip_sag: r.tip_deflection, max_moment: r.max_moment(), iterations: r.iterations })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    /// `None` for the initial state.
    pub action: Option<Action>,
    pub state: MechanismState,
    pub summary: EquilibriumSummary,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn final_state(&self) -> Option<&MechanismState> {
        self.steps.last().map(|s| &s.state)
    }

    /// CSV with columns `step,action,deployed_m,tip_sag_m,locked`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,action,deployed_m,tip_sag_m,locked\n");
        for (i, s) in self.steps.iter().enumerate() {
            let name = s.action.as_ref().map_or("initial", Action::name);
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                i,
                name,
                sig(s.state.deployed_length),
                sig(s.summary.tip_sag),
                s.state.locked
            );
        }
        out
    }
}

/// A sequence that stopped early.
#[derive(Debug, Error)]
#[error("action {index} ({action}) failed: {error}")]
pub struct SequenceError {
    /// Zero-based index of the failing action in the script.
    pub index: usize,
    pub action: &'static str,
    pub error: ActionError,
    /// Steps completed before the failure.
    pub partial: Trace,
}

/// Folds `apply_action` over the script starting from `initial`.
pub fn run_sequence_from(
    initial: MechanismState,
    actions: &[Action],
    config: &MechanismConfig,
) -> Result<Trace, Box<SequenceError>> {
    let mut trace = Trace::default();
    let fail = |index: usize, action: &'static str, error: ActionError, partial: Trace| {
        Box::new(SequenceError { index, action, error, partial })
    };
    let summary = summarize(&initial, config).map_err(|e| fail(0, "initial", e.into(), Trace::default()))?;
    trace.steps.push(TraceStep { action: None, state: initial, summary, warnings: Vec::new() });
    for (index, action) in actions.iter().enumerate() {
        let current = &trace.steps.last().expect("trace starts with the initial state").state;
        let outcome = match apply_action(current, action, config) {
            Ok(o) => o,
            Err(e) => return Err(fail(index, action.name(), e, trace)),
        };
        let summary = match summarize(&outcome.state, config) {
            Ok(s) => s,
            Err(e) => return Err(fail(index, action.name(), e.into(), trace)),
        };
        trace.steps.push(TraceStep {
            action: Some(action.clone()),
            state: outcome.state,
            summary,
            warnings: outcome.warnings,
        });
    }
    Ok(trace)
}

/// Runs a script from the stowed state.
pub fn run_sequence(actions: &[Action], config: &MechanismConfig) -> Result<Trace, Box<SequenceError>> {
    run_sequence_from(MechanismState::stowed(), actions, config)
}

/// Parses a JSON list of `{"action": ..., "value": ...}` objects.
pub fn parse_script(text: &str) -> Result<Vec<Action>, serde_json::Error> {
    serde_json::from_str(text)
}

/// The demonstration sequence: pressurize, extend, bend, jam, lift, unbend
/// and retract.
pub fn canonical_script(config: &MechanismConfig) -> Vec<Action> {
    let s = &config.scenario;
    let feed = 2.0 * s.deployed_length;
    let bend = 20.0;
    vec![
        Action::Pressurize(s.operating_pressure),
        Action::Feed(feed),
        Action::SetBendTension(bend, 0.0),
        Action::SetJamTension(s.jam_tension),
        Action::Lock,
        Action::ApplyLoad(LoadCase::single(s.load_position, s.weights.first().copied().unwrap_or(0.0))),
        Action::Unlock,
        Action::SetBendTension(0.0, bend),
        Action::Retract(feed),
    ]
}

/// Result of wrapping the chain around a cylindrical target.
#[derive(Debug, Clone, PartialEq)]
pub struct WrapReport {
    pub target_radius: f64,
    pub min_radius: f64,
    pub feasible: bool,
    /// Yaw each wrapped joint needs to follow the target, rad.
    pub per_joint_yaw: f64,
    pub wrapped_joints: usize,
    /// Side-wire tension difference needed to hold the wrap, N.
    pub required_bend_tension: f64,
    /// Holding torque minus the worst joint's reaction moment, N·m.
    pub hold_margin: f64,
    pub worst_joint: Option<usize>,
}

#[derive(Debug, Error, PartialEq)]
pub enum WrapError {
    #[error("target radius must be > 0, got {0}")]
    NonPositiveRadius(f64),
    #[error("arc fraction must lie in [0, 1], got {0}")]
    ArcFraction(f64),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Analyses wrapping the distal `arc_fraction` of the deployed chain around
/// a cylinder of radius `target_radius`.
///
/// The object pushes back on every wrapped node with an equal share of the
/// configured reaction force, directed away from the cylinder axis.
pub fn wrap_scenario(target_radius: f64, arc_fraction: f64, config: &MechanismConfig) -> Result<WrapReport, WrapError> {
    if !(target_radius > 0.0) {
        return Err(WrapError::NonPositiveRadius(target_radius));
    }
    if !(0.0..=1.0).contains(&arc_fraction) {
        return Err(WrapError::ArcFraction(arc_fraction));
    }
    let chain = &config.chain;
    let link = &chain.link;
    let s = &config.scenario;
    let min_radius = min_wrap_radius(chain)?;
    let half_chord = link.axis_spacing / (2.0 * target_radius);
    let per_joint_yaw = 2.0 * half_chord.min(1.0).asin();
    let feasible = target_radius >= min_radius;
    let moment = s.conforming_stiffness * per_joint_yaw;
    let required_bend_tension = moment / link.bend_wire_radius;
    let n = joints_in(s.deployed_length, link.axis_spacing).min(chain.n_links);
    let wrapped = ((arc_fraction * n as f64) + 1e-9).floor() as usize;
    let lock = holding_torque(link.friction_coeff, link.jam_contact_radius, s.jam_tension)
        * config.derating.factor(per_joint_yaw.min(link.yaw_max));

    if !feasible || wrapped == 0 || s.reaction_force == 0.0 {
        return Ok(WrapReport {
            target_radius,
            min_radius,
            feasible,
            per_joint_yaw,
            wrapped_joints: wrapped,
            required_bend_tension,
            hold_margin: lock,
            worst_joint: None,
        });
    }

    let first = n - wrapped;
    let mut yaw = vec![0.0; n];
    yaw[first..].iter_mut().for_each(|y| *y = per_joint_yaw);
    let pose = forward_kinematics(chain, &vec![0.0; n], &yaw)?;
    // Circle through the wrapped polygon, from its first chord.
    let a = pose.node(first);
    let b = pose.node(first + 1);
    let dir = (b - a) / link.axis_spacing;
    let left = Vector3::z().cross(&dir);
    let apothem = (target_radius.powi(2) - (link.axis_spacing / 2.0).powi(2)).max(0.0).sqrt();
    let center = (a + b) / 2.0 + left * apothem;
    let share = s.reaction_force / wrapped as f64;
    let forces: Vec<(Vector3<f64>, Vector3<f64>)> = (first + 1..=n)
        .map(|k| {
            let p = pose.node(k);
            (p, (p - center).normalize() * share)
        })
        .collect();
    let (worst_joint, worst) = (0..n)
        .map(|j| {
            let o = pose.node(j);
            let m: f64 = forces.iter().filter(|_| true).skip(j.saturating_sub(first)).map(|(p, f)| (p - o).cross(f).z).sum();
            (j, m.abs())
        })
        .fold((0, 0.0), |best, x| if x.1 > best.1 { x } else { best });
    Ok(WrapReport {
        target_radius,
        min_radius,
        feasible,
        per_joint_yaw,
        wrapped_joints: wrapped,
        required_bend_tension,
        hold_margin: lock - worst,
        worst_joint: Some(worst_joint),
    })
}

/// Moment demand of a payload against the lock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayloadMargin {
    pub required_moment: f64,
    pub margin: f64,
}

/// Worst-joint gravity moment of `load` on the straight chain and the
/// remaining margin of `lock_torque`. The worst joint is the base.
pub fn payload_margin(lock_torque: f64, load: &LoadCase) -> PayloadMargin {
    let required_moment: f64 = load
        .point_loads
        .iter()
        .map(|PointLoad { arc_position, mass }| mass * load.gravity * arc_position)
        .sum();
    PayloadMargin { required_moment, margin: lock_torque - required_moment }
}

/// Bend moment a tension pair produces, for reporting.
pub fn bend_moment_of(config: &MechanismConfig, left: f64, right: f64) -> Option<f64> {
    bend_moment(config.chain.link.bend_wire_radius, left, right).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn config() -> MechanismConfig {
        MechanismConfig::default()
    }

    #[test]
    fn feed_at_minimum_pressure_extends_half() {
        let c = config();
        let mut s = MechanismState::stowed();
        s.pressure = 4000.0;
        let out = apply_action(&s, &Action::Feed(0.2), &c).unwrap();
        assert_relative_eq!(out.state.deployed_length, 0.1, epsilon = 1e-15);
        assert_eq!(out.state.pitch_angles.len(), 3);
        assert_eq!(out.state.phase, Phase::Extending);
    }

    #[test]
    fn feed_unpressurized_is_rejected() {
        let err = apply_action(&MechanismState::stowed(), &Action::Feed(0.2), &config()).unwrap_err();
        assert_eq!(err.guard(), Some(Guard::InsufficientPressure));
        assert!(err.to_string().contains("insufficient pressure"));
    }

    #[test]
    fn lock_gains_holding_torque() {
        let c = config();
        let mut s = MechanismState::straight(&c.chain, 10, 1e4);
        s = apply_action(&s, &Action::SetJamTension(150.0), &c).unwrap().state;
        let s = apply_action(&s, &Action::Lock, &c).unwrap().state;
        assert!(s.locked);
        let l = &c.chain.link;
        assert_relative_eq!(holding_torque(l.friction_coeff, l.jam_contact_radius, s.wires.tension_center), 1.6, epsilon = 0.001);
    }

    #[test]
    fn lock_without_tension_is_rejected() {
        let c = config();
        let s = MechanismState::straight(&c.chain, 10, 1e4);
        assert_eq!(apply_action(&s, &Action::Lock, &c).unwrap_err().guard(), Some(Guard::ZeroJamTension));
    }

    #[test]
    fn canonical_script_completes() {
        let c = config();
        let trace = run_sequence(&canonical_script(&c), &c).unwrap();
        let last = trace.final_state().unwrap();
        assert_eq!(last.phase, Phase::Retracting);
        assert_eq!(last.deployed_length, 0.0);
        assert_eq!(trace.steps.len(), 10);
        for step in &trace.steps {
            assert!(c.validate_state(&step.state).is_empty());
        }
        let lifted = &trace.steps[6];
        assert_eq!(lifted.action.as_ref().unwrap().name(), "apply_load");
        assert!(lifted.warnings.is_empty());
        let bent = &trace.steps[3].state;
        assert!(bent.yaw_angles.iter().all(|&y| y > 0.0));
    }

    #[test]
    fn empty_script_is_initial_state_only() {
        let c = config();
        let t = run_sequence(&[], &c).unwrap();
        assert_eq!(t.steps.len(), 1);
        assert_eq!(t.to_csv(), "step,action,deployed_m,tip_sag_m,locked\n0,initial,0,0,false\n");
    }

    #[test]
    fn retract_before_unlock_fails_at_its_index() {
        let c = config();
        let mut script = canonical_script(&c);
        script.remove(6);
        script.remove(6);
        let err = run_sequence(&script, &c).unwrap_err();
        assert_eq!(err.index, 6);
        assert_eq!(err.error.guard(), Some(Guard::RetractWhileLocked));
        assert_eq!(err.partial.steps.len(), 7);
    }

    /// Guard model written independently of `apply_action`: tracks only the
    /// quantities the guards read.
    fn expected_guard(script: &[Action], c: &MechanismConfig) -> Option<(usize, Guard)> {
        let (mut p, mut jam, mut locked, mut fed) = (0.0, 0.0, false, 0.0);
        for (i, a) in script.iter().enumerate() {
            match a {
                Action::Pressurize(x) => p = *x,
                Action::Feed(f) => {
                    if p < c.membrane.min_extension_pressure {
                        return Some((i, Guard::InsufficientPressure));
                    }
                    fed += f;
                }
                Action::SetJamTension(t) => jam = *t,
                Action::Lock => {
                    if jam <= 0.0 {
                        return Some((i, Guard::ZeroJamTension));
                    }
                    locked = true;
                }
                Action::Unlock => {
                    locked = false;
                    jam = 0.0;
                }
                Action::Retract(f) => {
                    if locked {
                        return Some((i, Guard::RetractWhileLocked));
                    }
                    if *f > fed + 1e-12 {
                        return Some((i, Guard::RetractBeyondFeed));
                    }
                    fed -= f;
                }
                Action::SetBendTension(..) | Action::ApplyLoad(_) => {}
            }
        }
        None
    }

    #[test]
    fn every_transposition_matches_guard_model() {
        let c = config();
        let base = canonical_script(&c);
        let mut rejected = 0;
        for i in 0..base.len() {
            for j in i + 1..base.len() {
                let mut script = base.clone();
                script.swap(i, j);
                let expected = expected_guard(&script, &c);
                match run_sequence(&script, &c) {
                    Ok(_) => assert_eq!(expected, None, "swap {i},{j} accepted"),
                    Err(e) => match (e.error.guard(), expected) {
                        (Some(g), Some((idx, want))) => {
                            assert_eq!((e.index, g), (idx, want), "swap {i},{j}");
                            rejected += 1;
                        }
                        // Loads placed beyond the current tip are range errors,
                        // which may precede any guard.
                        (None, exp) => {
                            assert!(matches!(e.error, ActionError::InvalidState(_)), "swap {i},{j}: {e}");
                            assert!(exp.is_none_or(|(idx, _)| idx >= e.index), "swap {i},{j}");
                        }
                        (Some(_), None) => panic!("swap {i},{j} rejected unexpectedly: {e}"),
                    },
                }
            }
        }
        assert!(rejected > 10);
    }

    #[test]
    fn apply_load_unlocked_warns() {
        let c = config();
        let s = MechanismState::straight(&c.chain, 30, 1e4);
        let out = apply_action(&s, &Action::ApplyLoad(LoadCase::single(0.5, 0.3)), &c).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("unlocked"));
    }

    #[test]
    fn load_beyond_tip_is_range_error() {
        let c = config();
        let s = MechanismState::straight(&c.chain, 5, 1e4);
        let err = apply_action(&s, &Action::ApplyLoad(LoadCase::single(0.5, 0.3)), &c).unwrap_err();
        assert!(matches!(err, ActionError::InvalidState(_)));
    }

    #[test]
    fn script_json_round_trip() {
        let c = config();
        let script = canonical_script(&c);
        let text = serde_json::to_string(&script).unwrap();
        assert!(text.starts_with("[{\"action\":\"pressurize\",\"value\":10000"));
        assert_eq!(parse_script(&text).unwrap(), script);
        assert_eq!(parse_script(r#"[{"action":"lock"}]"#).unwrap(), vec![Action::Lock]);
        assert!(parse_script(r#"[{"action":"jump","value":1}]"#).is_err());
    }

    #[test]
    fn bending_unlocked_zero_pressure_goes_to_limit() {
        let c = config();
        let mut s = MechanismState::straight(&c.chain, 10, 0.0);
        s.pressure = 0.0;
        let s = apply_action(&s, &Action::SetBendTension(10.0, 0.0), &c).unwrap().state;
        assert!(s.yaw_angles.iter().all(|&y| y == c.chain.link.yaw_max));
    }

    #[test]
    fn locked_joints_hold_yaw_within_friction() {
        let c = config();
        let s = MechanismState::straight(&c.chain, 10, 1e4);
        let s = apply_action(&s, &Action::SetJamTension(150.0), &c).unwrap().state;
        let s = apply_action(&s, &Action::Lock, &c).unwrap().state;
        // 0.02 m × 50 N = 1.0 N·m < 1.6 N·m
        let s = apply_action(&s, &Action::SetBendTension(50.0, 0.0), &c).unwrap().state;
        assert!(s.yaw_angles.iter().all(|&y| y == 0.0));
    }

    #[test]
    fn wrap_examples() {
        let c = config();
        let r = wrap_scenario(0.10, 0.5, &c).unwrap();
        assert!(r.feasible);
        assert_relative_eq!(r.per_joint_yaw.to_degrees(), 15.5, epsilon = 0.05);
        assert_relative_eq!(r.per_joint_yaw, 2.0 * (0.027f64 / 0.2).asin(), epsilon = 1e-15);
        assert!(!wrap_scenario(0.04, 0.5, &c).unwrap().feasible);
        let far = wrap_scenario(1e9, 0.5, &c).unwrap();
        assert!(far.per_joint_yaw < 1e-9);
        assert!(far.required_bend_tension < 1e-7);
        assert!(matches!(wrap_scenario(0.0, 0.5, &c), Err(WrapError::NonPositiveRadius(_))));
    }

    #[test]
    fn wrap_boundary_is_min_radius() {
        let c = config();
        let min = min_wrap_radius(&c.chain).unwrap();
        let (mut lo, mut hi) = (0.01, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if wrap_scenario(mid, 0.5, &c).unwrap().feasible {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert_eq!(hi, min);
    }

    #[test]
    fn wrap_margin_decreases_with_reaction() {
        let mut c = config();
        let a = wrap_scenario(0.1, 0.5, &c).unwrap();
        c.scenario.reaction_force *= 2.0;
        let b = wrap_scenario(0.1, 0.5, &c).unwrap();
        assert!(b.hold_margin < a.hold_margin);
        assert!(a.worst_joint.is_some());
    }

    #[test]
    fn payload_examples() {
        let a = payload_margin(1.6, &LoadCase::single(0.5, 0.3));
        assert_relative_eq!(a.required_moment, 1.4715, epsilon = 1e-12);
        assert_relative_eq!(a.margin, 0.1285, epsilon = 1e-12);
        let b = payload_margin(1.6, &LoadCase::single(0.5, 0.5));
        assert_relative_eq!(b.required_moment, 2.4525, epsilon = 1e-12);
        assert!(b.margin < 0.0);
        assert_eq!(payload_margin(1.6, &LoadCase::default()).margin, 1.6);
    }
}
