//! Quasi-static gravity-plane deflection of the deployed chain.
//!
//! Every deployed pitch joint follows the same constitutive law. A joint
//! loaded by a sagging moment `M` first rotates freely through its backlash
//! `δ`. Jamming friction then carries up to `M_f`, and any excess is taken by
//! the clearance stiffness `k_c` in parallel with the membrane stiffness
//! `k_p`:
//!
//! ```text
//! sag = δ·[M ≠ 0] + max(0, |M| − M_f) / (k_c + k_p)
//! ```
//!
//! `k_p` is dropped at joints whose moment exceeds the membrane wrinkling
//! moment. Moments are evaluated on the deformed geometry, so the law is
//! solved by fixed-point iteration.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::Vector3;
use thiserror::Error;

use crate::actuation::{holding_torque, joint_lock_state, JointLockState, LockMode};
use crate::config::{MechanismConfig, SolverSettings};
use crate::format::sig;
use crate::kinematics::{fold_partition, forward_kinematics, ChainPose, KinematicsError};
use crate::model::{ChainSpec, LoadCase, MechanismState, MembraneSpec};

#[derive(Debug, Error, PartialEq)]
pub enum EquilibriumError {
    #[error("solver did not converge after {iterations} iterations (residual {residual:e} N·m)")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("joint {joint} collapses: moment {moment} N·m with no stiffness (excessive deflection)")]
    Collapse { joint: usize, moment: f64 },
    #[error("load at arc position {arc} m lies beyond the chain tip at {length} m")]
    LoadBeyondTip { arc: f64, length: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Joint compliance parameters of the deflection model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiffnessModel {
    /// Torsional stiffness past the pitch stop, N·m/rad.
    pub clearance_stiffness: f64,
    /// Free play per joint, rad.
    pub backlash: f64,
    /// Scale of the pressurized membrane's joint stiffness.
    pub membrane_coeff: f64,
    pub membrane_radius: f64,
}

impl StiffnessModel {
    pub fn from_specs(chain: &ChainSpec, membrane: &MembraneSpec) -> Self {
        Self {
            clearance_stiffness: chain.link.clearance_stiffness,
            backlash: chain.link.backlash,
            membrane_coeff: membrane.pressure_stiffness_coeff,
            membrane_radius: membrane.radius,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.clearance_stiffness > 0.0) {
            out.push("clearance_stiffness > 0".into());
        }
        if !(self.backlash >= 0.0) {
            out.push("backlash ≥ 0".into());
        }
        if !(self.membrane_coeff >= 0.0) {
            out.push("membrane_coeff ≥ 0".into());
        }
        if !(self.membrane_radius > 0.0) {
            out.push("membrane_radius > 0".into());
        }
        out
    }

    /// Joint stiffness added by the membrane at `pressure`: `c_p p r³`.
    pub fn membrane_stiffness(&self, pressure: f64) -> f64 {
        self.membrane_coeff * pressure * self.membrane_radius.powi(3)
    }
}

/// Joint stiffness contributed by the pressurized membrane, `c_p p r³`.
pub fn membrane_joint_stiffness(pressure: f64, membrane: &MembraneSpec) -> f64 {
    membrane.pressure_stiffness_coeff * pressure * membrane.radius.powi(3)
}

/// Bending moment at which a pressurized tube starts to wrinkle, `(π/2) p r³`.
pub fn wrinkle_moment(pressure: f64, radius: f64) -> f64 {
    PI / 2.0 * pressure * radius.powi(3)
}

/// Wire tension needed to retract against internal pressure, `p π r²`.
pub fn retraction_tension(pressure: f64, radius: f64) -> f64 {
    pressure * PI * radius * radius
}

struct MassPoint {
    arc: f64,
    position: Vector3<f64>,
    mass: f64,
}

fn mass_points(pose: &ChainPose, link_mass: f64, loads: &LoadCase, folded_tip_mass: f64) -> Result<Vec<MassPoint>, EquilibriumError> {
    let spacing = pose.axis_spacing;
    let length = pose.joint_count() as f64 * spacing;
    let mut points = Vec::with_capacity(pose.joint_count() + loads.point_loads.len() + 1);
    if link_mass > 0.0 {
        for i in 0..pose.joint_count() {
            points.push(MassPoint {
                arc: (i as f64 + 0.5) * spacing,
                position: (pose.node(i) + pose.node(i + 1)) / 2.0,
                mass: link_mass,
            });
        }
    }
    if folded_tip_mass > 0.0 {
        points.push(MassPoint { arc: length, position: pose.tip_position, mass: folded_tip_mass });
    }
    for load in &loads.point_loads {
        let position = pose
            .point_at_arc(load.arc_position)
            .ok_or(EquilibriumError::LoadBeyondTip { arc: load.arc_position, length })?;
        points.push(MassPoint { arc: load.arc_position, position, mass: load.mass });
    }
    Ok(points)
}

/// Sagging moment at every deployed joint from the link weights, the folded
/// links clustered at the tip, and the point loads.
///
/// The moment at joint `i` sums `m g` times the lever of every mass distal to
/// `i`, measured about the joint's pitch axis on the current geometry.
/// Positive moments sag the chain.
pub fn gravity_moments(pose: &ChainPose, chain: &ChainSpec, loads: &LoadCase, folded_tip_mass: f64) -> Result<Vec<f64>, EquilibriumError> {
    let points = mass_points(pose, chain.link.link_mass, loads, folded_tip_mass)?;
    Ok(moments_from_points(pose, &points, loads.gravity))
}

fn moments_from_points(pose: &ChainPose, points: &[MassPoint], gravity: f64) -> Vec<f64> {
    let spacing = pose.axis_spacing;
    (0..pose.joint_count())
        .map(|j| {
            let origin = pose.node(j);
            let pitch_axis = if j == 0 {
                Vector3::y()
            } else {
                pose.joint_frames[j - 1].orientation * Vector3::y()
            };
            let joint_arc = j as f64 * spacing;
            points
                .iter()
                .filter(|p| p.arc >= joint_arc)
                .map(|p| {
                    let force = Vector3::new(0.0, 0.0, -p.mass * gravity);
                    (p.position - origin).cross(&force).dot(&pitch_axis)
                })
                .sum()
        })
        .collect()
}

/// Inputs of one deflection solve.
#[derive(Debug, Clone)]
pub struct DeflectionProblem<'a> {
    pub chain: &'a ChainSpec,
    pub stiffness: StiffnessModel,
    pub loads: &'a LoadCase,
    pub pressure: f64,
    pub jam_tension: f64,
    pub deployed_length: f64,
    /// `false` solves the membrane alone: no link mass, backlash, clearance
    /// stiffness or jamming.
    pub skeleton: bool,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl<'a> DeflectionProblem<'a> {
    pub fn new(chain: &'a ChainSpec, membrane: &MembraneSpec, loads: &'a LoadCase, deployed_length: f64) -> Self {
        let settings = SolverSettings::default();
        Self {
            chain,
            stiffness: StiffnessModel::from_specs(chain, membrane),
            loads,
            pressure: 0.0,
            jam_tension: 0.0,
            deployed_length,
            skeleton: true,
            tolerance: settings.tolerance,
            max_iterations: settings.max_iterations,
        }
    }

    /// Problem at the configured scenario deployment and solver settings.
    pub fn from_config(config: &'a MechanismConfig, loads: &'a LoadCase) -> Self {
        Self::new(&config.chain, &config.membrane, loads, config.scenario.deployed_length)
            .settings(&config.solver)
    }

    pub fn settings(mut self, settings: &SolverSettings) -> Self {
        self.tolerance = settings.tolerance;
        self.max_iterations = settings.max_iterations;
        self
    }

    pub fn pressure(mut self, pressure: f64) -> Self {
        self.pressure = pressure;
        self
    }

    pub fn jam_tension(mut self, tension: f64) -> Self {
        self.jam_tension = tension;
        self
    }

    pub fn stiffness(mut self, stiffness: StiffnessModel) -> Self {
        self.stiffness = stiffness;
        self
    }

    pub fn membrane_only(mut self) -> Self {
        self.skeleton = false;
        self
    }

    /// Friction holding torque of every joint.
    pub fn holding_torque(&self) -> f64 {
        if self.skeleton {
            let l = &self.chain.link;
            holding_torque(l.friction_coeff, l.jam_contact_radius, self.jam_tension)
        } else {
            0.0
        }
    }

    fn validate(&self) -> Result<(), EquilibriumError> {
        let mut bad = self.stiffness.violations();
        if !self.skeleton {
            bad.retain(|v| !v.starts_with("clearance_stiffness"));
        }
        if !(self.pressure >= 0.0) {
            bad.push("pressure ≥ 0".into());
        }
        if !(self.jam_tension >= 0.0) {
            bad.push("jam_tension ≥ 0".into());
        }
        if !(self.loads.gravity >= 0.0) {
            bad.push("gravity ≥ 0".into());
        }
        if self.loads.point_loads.iter().any(|p| !(p.mass >= 0.0)) {
            bad.push("load mass ≥ 0".into());
        }
        if !(self.tolerance > 0.0) {
            bad.push("tolerance > 0".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(EquilibriumError::InvalidInput(bad.join("; ")))
        }
    }
}

/// Converged deflection state.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    /// Pitch angle of every deployed joint (negative = sagging).
    pub pitch_angles: Vec<f64>,
    pub tip_position: Vector3<f64>,
    /// Downward tip displacement from the straight chain.
    pub tip_deflection: f64,
    pub per_joint_moments: Vec<f64>,
    pub lock_states: Vec<JointLockState>,
    /// Joints where the membrane has wrinkled and lost its stiffness.
    pub wrinkled: Vec<bool>,
    /// Effective stiffness of each joint past the backlash.
    pub joint_stiffness: Vec<f64>,
    pub holding_torque: f64,
    pub backlash: f64,
    /// Largest moment-balance violation, N·m.
    pub residual: f64,
    pub iterations: usize,
    /// Joints whose angle left the physical range `[−π/2, pitch_max]`.
    pub limit_violations: Vec<usize>,
}

impl EquilibriumResult {
    /// Sag angle of joint `i` (positive downward).
    pub fn sag(&self, i: usize) -> f64 {
        -self.pitch_angles[i]
    }

    pub fn max_moment(&self) -> f64 {
        self.per_joint_moments.iter().fold(0.0, |m, &x| m.max(x.abs()))
    }

    /// Per-joint CSV: `joint_index,pitch_rad,moment_nm,lock_mode`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("joint_index,pitch_rad,moment_nm,lock_mode\n");
        for (i, ((p, m), l)) in self.pitch_angles.iter().zip(&self.per_joint_moments).zip(&self.lock_states).enumerate() {
            let _ = writeln!(out, "{},{},{},{}", i, sig(*p), sig(*m), l.mode.as_str());
        }
        out
    }
}

struct JointLaw {
    holding: f64,
    backlash: f64,
    clearance: f64,
    membrane: f64,
    wrinkle: f64,
}

impl JointLaw {
    fn stiffness(&self, moment: f64) -> (f64, bool) {
        let wrinkled = moment.abs() > self.wrinkle;
        (self.clearance + if wrinkled { 0.0 } else { self.membrane }, wrinkled)
    }

    /// Sag demanded by `moment`, or `None` when nothing resists it.
    fn sag(&self, moment: f64) -> Option<f64> {
        if moment == 0.0 {
            return Some(0.0);
        }
        let (k, _) = self.stiffness(moment);
        let excess = (moment.abs() - self.holding).max(0.0);
        let elastic = if excess > 0.0 {
            if k <= 0.0 {
                return None;
            }
            excess / k
        } else {
            0.0
        };
        Some((self.backlash + elastic).copysign(moment))
    }

    /// Moment imbalance of a joint sitting at `sag` under `moment`.
    fn residual(&self, moment: f64, sag: f64) -> f64 {
        let (k, _) = self.stiffness(moment);
        let compliant = sag.abs() - self.backlash;
        if compliant > 0.0 && moment != 0.0 {
            (moment.abs() - self.holding - k * compliant).abs()
        } else {
            (moment.abs() - self.holding).max(0.0)
        }
    }
}

/// Solves the deflection from the straight chain.
pub fn solve_pitch_deflection(problem: &DeflectionProblem<'_>) -> Result<EquilibriumResult, EquilibriumError> {
    solve_from(problem, None)
}

/// Solves the deflection starting from the given sag angles (one per deployed
/// joint, positive downward).
pub fn solve_from(problem: &DeflectionProblem<'_>, initial_sag: Option<&[f64]>) -> Result<EquilibriumResult, EquilibriumError> {
    problem.validate()?;
    let chain = problem.chain;
    let partition = fold_partition(problem.deployed_length, chain)?;
    let n = partition.deployed_count;
    let (link_mass, folded_mass) = if problem.skeleton {
        (chain.link.link_mass, chain.link.link_mass * partition.folded_count as f64)
    } else {
        (0.0, 0.0)
    };
    let s = &problem.stiffness;
    let law = JointLaw {
        holding: problem.holding_torque(),
        backlash: if problem.skeleton { s.backlash } else { 0.0 },
        clearance: if problem.skeleton { s.clearance_stiffness } else { 0.0 },
        membrane: s.membrane_stiffness(problem.pressure),
        wrinkle: wrinkle_moment(problem.pressure, s.membrane_radius),
    };

    let mut sag = match initial_sag {
        Some(init) if init.len() == n => init.to_vec(),
        Some(init) => {
            return Err(EquilibriumError::InvalidInput(format!("{} initial angles for {n} joints", init.len())))
        }
        None => vec![0.0; n],
    };
    let yaw = vec![0.0; n];

    let evaluate = |sag: &[f64]| -> Result<(ChainPose, Vec<f64>), EquilibriumError> {
        let pitch: Vec<f64> = sag.iter().map(|x| -x).collect();
        let pose = forward_kinematics(chain, &pitch, &yaw)?;
        let points = mass_points(&pose, link_mass, problem.loads, folded_mass)?;
        let moments = moments_from_points(&pose, &points, problem.loads.gravity);
        Ok((pose, moments))
    };

    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let (mut pose, mut moments) = evaluate(&sag)?;
    while iterations < problem.max_iterations {
        iterations += 1;
        let mut change: f64 = 0.0;
        for (j, m) in moments.iter().enumerate() {
            let next = law.sag(*m).ok_or(EquilibriumError::Collapse { joint: j, moment: *m })?;
            change = change.max((next - sag[j]).abs());
            sag[j] = next;
        }
        (pose, moments) = evaluate(&sag)?;
        residual = moments.iter().zip(&sag).fold(0.0, |r: f64, (m, x)| r.max(law.residual(*m, *x)));
        if change < problem.tolerance && residual <= problem.tolerance {
            break;
        }
        if iterations == problem.max_iterations {
            return Err(EquilibriumError::NonConvergence { iterations, residual });
        }
    }
    if n == 0 {
        residual = 0.0;
    }

    let pitch_angles: Vec<f64> = sag.iter().map(|x| -x).collect();
    let (joint_stiffness, wrinkled): (Vec<f64>, Vec<bool>) = moments.iter().map(|m| law.stiffness(*m)).unzip();
    let lock_states = moments.iter().map(|m| joint_lock_state(*m, law.holding)).collect();
    let limit_violations = pitch_angles
        .iter()
        .enumerate()
        .filter(|(_, &p)| !(p >= -PI / 2.0 && p <= chain.link.pitch_max))
        .map(|(i, _)| i)
        .collect();
    Ok(EquilibriumResult {
        tip_deflection: -pose.tip_position.z,
        tip_position: pose.tip_position,
        pitch_angles,
        per_joint_moments: moments,
        lock_states,
        wrinkled,
        joint_stiffness,
        holding_torque: law.holding,
        backlash: law.backlash,
        residual,
        iterations,
        limit_violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BucklingStatus {
    Ok,
    Buckles,
}

/// Outcome of the retraction buckling check with every input surfaced.
#[derive(Debug, Clone, PartialEq)]
pub struct BucklingReport {
    pub vertical: BucklingStatus,
    pub horizontal: BucklingStatus,
    pub cause: String,
    pub retract_tension: f64,
    /// Moment from the retraction tension acting through the lateral imperfection.
    pub induced_moment: f64,
    /// Static friction moment available at each joint.
    pub friction_moment: f64,
    /// Euler-type critical load of the membrane-only tube.
    pub critical_load: Option<f64>,
    /// Section bending stiffness of the membrane tube, N·m².
    pub membrane_bending_stiffness: Option<f64>,
}

impl BucklingReport {
    pub fn buckles(&self) -> bool {
        self.vertical == BucklingStatus::Buckles || self.horizontal == BucklingStatus::Buckles
    }
}

/// Checks whether retracting with `retract_tension` buckles the structure.
///
/// With the skeleton, vertical buckling is blocked by the pitch stops. The
/// retraction wire compresses the chain and so presses every joint face like
/// the jamming wire does; horizontal buckling occurs only if the moment of the
/// tension about the lateral imperfection exceeds that friction.
///
/// Without the skeleton the tube buckles when the tension exceeds
/// `π² EI / L²`. The membrane's bending stiffness `EI = k_p · axis_spacing` is
/// scaled by the wall pre-tension left after the axial load,
/// `1 − T / (p π r²)`.
pub fn buckling_check(
    state: &MechanismState,
    skeleton_present: bool,
    retract_tension: f64,
    chain: &ChainSpec,
    membrane: &MembraneSpec,
    pressure: f64,
    imperfection_offset: f64,
) -> BucklingReport {
    if skeleton_present {
        let link = &chain.link;
        let induced = retract_tension * imperfection_offset;
        let friction = holding_torque(
            link.friction_coeff,
            link.jam_contact_radius,
            state.wires.tension_center + retract_tension,
        );
        let horizontal = if induced <= friction { BucklingStatus::Ok } else { BucklingStatus::Buckles };
        let cause = match horizontal {
            BucklingStatus::Ok => "skeleton: pitch stops block vertical buckling; joint friction holds lateral imperfection".to_string(),
            BucklingStatus::Buckles => format!(
                "skeleton: lateral moment {} N·m exceeds joint friction {} N·m",
                sig(induced),
                sig(friction)
            ),
        };
        return BucklingReport {
            vertical: BucklingStatus::Ok,
            horizontal,
            cause,
            retract_tension,
            induced_moment: induced,
            friction_moment: friction,
            critical_load: None,
            membrane_bending_stiffness: None,
        };
    }

    let wall_load = retraction_tension(pressure, membrane.radius);
    let pretension = if wall_load > 0.0 { (1.0 - retract_tension / wall_load).max(0.0) } else { 0.0 };
    let ei = membrane_joint_stiffness(pressure, membrane) * chain.link.axis_spacing * pretension;
    let length = state.deployed_length;
    let critical = if length > 0.0 { PI * PI * ei / (length * length) } else { f64::INFINITY };
    let status = if retract_tension > critical { BucklingStatus::Buckles } else { BucklingStatus::Ok };
    let cause = match status {
        BucklingStatus::Ok => "membrane only: tension below critical load".to_string(),
        BucklingStatus::Buckles => format!(
            "membrane only: retraction tension {} N exceeds critical load {} N",
            sig(retract_tension),
            sig(critical)
        ),
    };
    BucklingReport {
        vertical: status,
        horizontal: status,
        cause,
        retract_tension,
        induced_moment: 0.0,
        friction_moment: 0.0,
        critical_load: Some(critical),
        membrane_bending_stiffness: Some(ei),
    }
}

/// Whether a joint state satisfies the stick/slip complementarity law.
pub fn complementarity_holds(result: &EquilibriumResult, tol: f64) -> bool {
    result.lock_states.iter().zip(&result.per_joint_moments).enumerate().all(|(i, (l, m))| match l.mode {
        LockMode::Stick => m.abs() <= result.holding_torque + tol && (l.transmitted_moment - m).abs() <= tol,
        LockMode::Slip => {
            (l.transmitted_moment.abs() - result.holding_torque).abs() <= tol && result.sag(i).abs() > result.backlash
        }
        LockMode::Free => result.holding_torque == 0.0 && l.transmitted_moment == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinkSpec, PointLoad};
    use approx::assert_relative_eq;

    fn uniform_chain(length: f64, n: usize, mass: f64) -> ChainSpec {
        let link = LinkSpec { axis_spacing: length / n as f64, link_mass: mass / n as f64, ..LinkSpec::default() };
        ChainSpec::new(link, n)
    }

    #[test]
    fn uniform_cantilever_base_moment() {
        let chain = uniform_chain(0.97, 36, 0.706);
        let pose = forward_kinematics(&chain, &[0.0; 36], &[0.0; 36]).unwrap();
        let m = gravity_moments(&pose, &chain, &LoadCase::default(), 0.0).unwrap();
        // Closed form w L² / 2 with w = m g / L.
        let oracle = 0.706 * 9.81 * 0.97 / 2.0;
        assert_relative_eq!(m[0], oracle, max_relative = 1e-12);
        assert_relative_eq!(m[0], 3.36, epsilon = 0.005);
        // Interior joint: remaining length squared.
        let rest = 0.97 * 26.0 / 36.0;
        assert_relative_eq!(m[10], 0.706 / 0.97 * 9.81 * rest * rest / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn point_load_base_moment() {
        let chain = uniform_chain(0.97, 36, 0.0);
        let pose = forward_kinematics(&chain, &[0.0; 36], &[0.0; 36]).unwrap();
        let m = gravity_moments(&pose, &chain, &LoadCase::single(0.4, 0.5), 0.0).unwrap();
        assert_relative_eq!(m[0], 1.962, max_relative = 1e-12);
        let j = 20; // beyond the load
        assert_eq!(m[j], 0.0);
    }

    #[test]
    fn zero_gravity_moments_vanish() {
        let chain = ChainSpec::default();
        let pose = forward_kinematics(&chain, &[-0.1; 10], &[0.0; 10]).unwrap();
        let loads = LoadCase::single(0.1, 1.0).with_gravity(0.0);
        assert!(gravity_moments(&pose, &chain, &loads, 0.3).unwrap().iter().all(|&m| m == 0.0));
    }

    #[test]
    fn load_beyond_tip_is_rejected() {
        let chain = ChainSpec::default();
        let pose = forward_kinematics(&chain, &[0.0; 10], &[0.0; 10]).unwrap();
        let err = gravity_moments(&pose, &chain, &LoadCase::single(0.3, 0.1), 0.0).unwrap_err();
        assert!(matches!(err, EquilibriumError::LoadBeyondTip { .. }));
    }

    #[test]
    fn sagged_geometry_shortens_levers() {
        let chain = uniform_chain(1.0, 10, 0.0);
        let loads = LoadCase::single(1.0, 1.0);
        let pose = forward_kinematics(&chain, &[-0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], &[0.0; 10]).unwrap();
        let m = gravity_moments(&pose, &chain, &loads, 0.0).unwrap();
        assert_relative_eq!(m[0], 9.81 * 0.5f64.cos(), max_relative = 1e-12);
    }

    #[test]
    fn membrane_laws() {
        let m = MembraneSpec { pressure_stiffness_coeff: 100.0, ..MembraneSpec::default() };
        assert_eq!(membrane_joint_stiffness(0.0, &m), 0.0);
        assert_relative_eq!(membrane_joint_stiffness(2e4, &m), 2.0 * membrane_joint_stiffness(1e4, &m));
        assert_relative_eq!(wrinkle_moment(1e4, 0.04), 1.005, epsilon = 5e-4);
        assert_eq!(wrinkle_moment(0.0, 0.04), 0.0);
        assert_relative_eq!(wrinkle_moment(4e3, 0.04), 0.402, epsilon = 5e-4);
        assert_relative_eq!(retraction_tension(4e3, 0.04), 20.1, epsilon = 0.05);
        assert_eq!(retraction_tension(0.0, 0.04), 0.0);
        assert_relative_eq!(retraction_tension(8e3, 0.04), 2.0 * retraction_tension(4e3, 0.04));
    }

    #[test]
    fn rigid_limit_has_no_deflection() {
        let mut chain = ChainSpec::default();
        chain.link.clearance_stiffness = 1e9;
        chain.link.backlash = 0.0;
        let m = MembraneSpec::default();
        let loads = LoadCase::default();
        let r = solve_pitch_deflection(&DeflectionProblem::new(&chain, &m, &loads, 0.97)).unwrap();
        assert!(r.tip_deflection.abs() < 1e-6, "{}", r.tip_deflection);
    }

    #[test]
    fn default_self_weight_sag_is_near_100mm() {
        let config = MechanismConfig::default();
        let loads = LoadCase::default();
        let r = solve_pitch_deflection(&DeflectionProblem::from_config(&config, &loads)).unwrap();
        assert!((r.tip_deflection - 0.100).abs() < 0.015, "{}", r.tip_deflection);
        assert!(r.residual <= config.solver.tolerance);
        assert!(r.limit_violations.is_empty());
    }

    #[test]
    fn zero_gravity_gives_zero_deflection() {
        let config = MechanismConfig::default();
        let loads = LoadCase::single(0.4, 0.5).with_gravity(0.0);
        let r = solve_pitch_deflection(&DeflectionProblem::from_config(&config, &loads).pressure(5e3)).unwrap();
        assert_eq!(r.tip_deflection, 0.0);
        assert!(r.pitch_angles.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn fixed_point_is_stable() {
        let config = MechanismConfig::default();
        let loads = LoadCase::single(0.4, 0.15);
        let p = DeflectionProblem::from_config(&config, &loads).pressure(5e3).jam_tension(150.0);
        let a = solve_pitch_deflection(&p).unwrap();
        let sag: Vec<f64> = a.pitch_angles.iter().map(|x| -x).collect();
        let b = solve_from(&p, Some(&sag)).unwrap();
        for (x, y) in a.pitch_angles.iter().zip(&b.pitch_angles) {
            assert!((x - y).abs() <= config.solver.tolerance);
        }
        assert!(b.iterations <= 2);
    }

    #[test]
    fn jamming_produces_stick_and_slip() {
        let config = MechanismConfig::default();
        let loads = LoadCase::single(0.4, 0.5);
        let r = solve_pitch_deflection(&DeflectionProblem::from_config(&config, &loads).jam_tension(150.0)).unwrap();
        assert!(r.lock_states.iter().any(|l| l.mode == LockMode::Slip));
        assert!(r.lock_states.iter().any(|l| l.mode == LockMode::Stick));
        assert!(complementarity_holds(&r, 1e-9));
        let free = solve_pitch_deflection(&DeflectionProblem::from_config(&config, &loads)).unwrap();
        assert!(free.lock_states.iter().all(|l| l.mode == LockMode::Free));
        assert!(r.tip_deflection < free.tip_deflection);
    }

    #[test]
    fn membrane_only_heavy_load_collapses() {
        let config = MechanismConfig::default();
        let loads = LoadCase::single(0.4, 0.5);
        let p = DeflectionProblem::from_config(&config, &loads).pressure(1e4).membrane_only();
        assert!(matches!(solve_pitch_deflection(&p), Err(EquilibriumError::Collapse { .. })));
        let light = LoadCase::single(0.4, 0.15);
        let p = DeflectionProblem::from_config(&config, &light).pressure(1e4).membrane_only();
        let r = solve_pitch_deflection(&p).unwrap();
        assert!(r.tip_deflection > 0.0);
        assert!(r.wrinkled.iter().all(|w| !w));
    }

    #[test]
    fn nonlinear_superposition() {
        let config = MechanismConfig::default();
        let solve = |mass: f64| {
            let loads = LoadCase::single(0.4, mass);
            let r = solve_pitch_deflection(&DeflectionProblem::from_config(&config, &loads).jam_tension(150.0)).unwrap();
            let base = LoadCase::default();
            let b = solve_pitch_deflection(&DeflectionProblem::from_config(&config, &base).jam_tension(150.0)).unwrap();
            r.tip_deflection - b.tip_deflection
        };
        let (a, b, c) = (solve(0.15), solve(0.35), solve(0.5));
        assert!((a + b - c).abs() > 1e-5, "{a} + {b} vs {c}");
    }

    #[test]
    fn csv_export_header_and_rows() {
        let chain = uniform_chain(0.1, 2, 0.1);
        let m = MembraneSpec::default();
        let loads = LoadCase::default();
        let r = solve_pitch_deflection(&DeflectionProblem::new(&chain, &m, &loads, 0.1)).unwrap();
        let csv = r.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "joint_index,pitch_rad,moment_nm,lock_mode");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,-"));
        assert!(lines[1].ends_with(",free"));
    }

    #[test]
    fn stowed_chain_solves_trivially() {
        let config = MechanismConfig::default();
        let loads = LoadCase::default();
        let r = solve_pitch_deflection(&DeflectionProblem::new(&config.chain, &config.membrane, &loads, 0.0)).unwrap();
        assert!(r.pitch_angles.is_empty());
        assert_eq!(r.tip_deflection, 0.0);
    }

    #[test]
    fn buckling_with_skeleton() {
        let config = MechanismConfig::default();
        let state = MechanismState::straight(&config.chain, 35, 1e4);
        let t = retraction_tension(1e4, 0.04);
        let r = buckling_check(&state, true, t, &config.chain, &config.membrane, 1e4, config.imperfection_offset());
        assert_eq!(r.vertical, BucklingStatus::Ok);
        assert_eq!(r.horizontal, BucklingStatus::Ok);
        let huge = buckling_check(&state, true, t, &config.chain, &config.membrane, 1e4, 1.0);
        assert_eq!(huge.vertical, BucklingStatus::Ok);
        assert_eq!(huge.horizontal, BucklingStatus::Buckles);
    }

    #[test]
    fn membrane_only_buckles_on_retraction() {
        let config = MechanismConfig::default();
        let mut state = MechanismState::straight(&config.chain, 35, 1e4);
        state.feed = 1.94;
        state.deployed_length = 0.97;
        let t = retraction_tension(1e4, 0.04);
        let r = buckling_check(&state, false, t, &config.chain, &config.membrane, 1e4, 0.0);
        assert!(r.buckles());
        assert!(r.critical_load.unwrap() < t);
        let none = buckling_check(&state, false, 0.0, &config.chain, &config.membrane, 1e4, 0.0);
        assert!(!none.buckles());
        let none = buckling_check(&state, true, 0.0, &config.chain, &config.membrane, 1e4, 0.0);
        assert!(!none.buckles());
    }

    #[test]
    fn folded_links_load_the_tip() {
        let config = MechanismConfig::default();
        let chain = config.chain;
        let pose = forward_kinematics(&chain, &[0.0; 5], &[0.0; 5]).unwrap();
        let with = gravity_moments(&pose, &chain, &LoadCase::default(), 0.5).unwrap();
        let without = gravity_moments(&pose, &chain, &LoadCase::default(), 0.0).unwrap();
        assert_relative_eq!(with[0] - without[0], 0.5 * 9.81 * 5.0 * 0.027, max_relative = 1e-12);
        let _ = PointLoad { arc_position: 0.0, mass: 0.0 };
    }
}
