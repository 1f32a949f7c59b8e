//! Mechanism data types and prototype defaults.
//!
//! Lengths are meters, masses kilograms, forces newtons, pressures pascals and
//! angles radians throughout.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Distance between consecutive rotation axes of the prototype skeleton.
pub const DEFAULT_AXIS_SPACING: f64 = 0.027;
/// Mass of the complete prototype skeleton.
pub const PROTOTYPE_SKELETON_MASS: f64 = 0.706;
/// Nominal skeleton length of the prototype ("about 1000 mm").
pub const PROTOTYPE_SKELETON_LENGTH: f64 = 1.0;
/// Number of links fitting in the nominal skeleton length.
pub const DEFAULT_N_LINKS: usize = 37;
/// Membrane tube radius (80 mm diameter).
pub const DEFAULT_MEMBRANE_RADIUS: f64 = 0.04;
/// Minimum internal pressure that still everts the membrane.
pub const DEFAULT_MIN_EXTENSION_PRESSURE: f64 = 4000.0;
/// Friction coefficient of the jammed joint faces.
pub const DEFAULT_FRICTION_COEFF: f64 = 0.7;
/// Contact radius giving 1.6 N·m at 150 N with μ = 0.7.
pub const DEFAULT_JAM_CONTACT_RADIUS: f64 = 0.01524;
/// Side bending wire offset. Free parameter, no measured value exists.
pub const DEFAULT_BEND_WIRE_RADIUS: f64 = 0.020;
/// Radial thickness of a link, used for reel packing.
pub const DEFAULT_LINK_THICKNESS: f64 = 0.020;
/// Joint free play from the pin clearance (calibrated).
pub const DEFAULT_BACKLASH: f64 = 0.004_341_415_41;
/// Torsional stiffness past the pitch stop (calibrated).
pub const DEFAULT_CLEARANCE_STIFFNESS: f64 = 1_167.283_80;
/// Pressure stiffness coefficient of the membrane (calibrated).
pub const DEFAULT_PRESSURE_STIFFNESS_COEFF: f64 = 1.0e5;
/// Standard gravity.
pub const DEFAULT_GRAVITY: f64 = 9.81;

/// Geometry, mass, limits and friction parameters of one skeleton link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub axis_spacing: f64,
    pub link_mass: f64,
    pub bend_wire_radius: f64,
    pub jam_contact_radius: f64,
    pub friction_coeff: f64,
    pub pitch_min: f64,
    pub pitch_max: f64,
    pub yaw_min: f64,
    pub yaw_max: f64,
    pub backlash: f64,
    pub clearance_stiffness: f64,
    pub link_thickness: f64,
}

impl Default for LinkSpec {
    fn default() -> Self {
        Self {
            axis_spacing: DEFAULT_AXIS_SPACING,
            link_mass: PROTOTYPE_SKELETON_MASS / DEFAULT_N_LINKS as f64,
            bend_wire_radius: DEFAULT_BEND_WIRE_RADIUS,
            jam_contact_radius: DEFAULT_JAM_CONTACT_RADIUS,
            friction_coeff: DEFAULT_FRICTION_COEFF,
            pitch_min: 0.0,
            pitch_max: FRAC_PI_2,
            yaw_min: -FRAC_PI_6,
            yaw_max: FRAC_PI_6,
            backlash: DEFAULT_BACKLASH,
            clearance_stiffness: DEFAULT_CLEARANCE_STIFFNESS,
            link_thickness: DEFAULT_LINK_THICKNESS,
        }
    }
}

impl LinkSpec {
    /// Returns every violated invariant as a human-readable string.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |ok: bool, what: &str| {
            if !ok {
                out.push(what.to_string());
            }
        };
        check(self.axis_spacing > 0.0, "axis_spacing > 0");
        check(self.link_mass >= 0.0, "link_mass ≥ 0");
        check(self.bend_wire_radius > 0.0, "bend_wire_radius > 0");
        check(self.jam_contact_radius > 0.0, "jam_contact_radius > 0");
        check(self.friction_coeff >= 0.0, "friction_coeff ≥ 0");
        check(self.pitch_min == 0.0, "pitch_min = 0");
        check(self.pitch_max >= self.pitch_min, "pitch_min ≤ pitch_max");
        check(self.yaw_max > 0.0, "yaw_max > 0");
        check(self.yaw_min == -self.yaw_max, "yaw_min = −yaw_max");
        check(self.backlash >= 0.0, "backlash ≥ 0");
        check(self.clearance_stiffness > 0.0, "clearance_stiffness > 0");
        check(self.link_thickness > 0.0, "link_thickness > 0");
        out
    }
}

/// The articulated skeleton: `n_links` identical links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub link: LinkSpec,
    pub n_links: usize,
    pub total_length: f64,
}

impl ChainSpec {
    pub fn new(link: LinkSpec, n_links: usize) -> Self {
        Self { link, n_links, total_length: n_links as f64 * link.axis_spacing }
    }

    pub fn total_mass(&self) -> f64 {
        self.link.link_mass * self.n_links as f64
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = self.link.violations();
        if self.n_links < 1 {
            out.push("n_links ≥ 1".to_string());
        }
        if (self.total_length - self.n_links as f64 * self.link.axis_spacing).abs() > 1e-9 {
            out.push("total_length = n_links × axis_spacing".to_string());
        }
        out
    }
}

impl Default for ChainSpec {
    fn default() -> Self {
        Self::new(LinkSpec::default(), DEFAULT_N_LINKS)
    }
}

/// Membrane tube parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembraneSpec {
    pub radius: f64,
    /// Fold-geometry constant `a` of the tip offset.
    pub offset_a: f64,
    /// Fold-geometry constant `b` of the tip offset.
    pub offset_b: f64,
    pub pressure_stiffness_coeff: f64,
    pub min_extension_pressure: f64,
    /// Reserved; membrane weight is not loaded onto the chain.
    pub areal_mass: f64,
}

impl Default for MembraneSpec {
    fn default() -> Self {
        Self {
            radius: DEFAULT_MEMBRANE_RADIUS,
            offset_a: 0.0,
            offset_b: 0.0,
            pressure_stiffness_coeff: DEFAULT_PRESSURE_STIFFNESS_COEFF,
            min_extension_pressure: DEFAULT_MIN_EXTENSION_PRESSURE,
            areal_mass: 0.0,
        }
    }
}

impl MembraneSpec {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |ok: bool, what: &str| {
            if !ok {
                out.push(what.to_string());
            }
        };
        check(self.radius > 0.0, "radius > 0");
        check(self.offset_a >= 0.0, "offset_a ≥ 0");
        check(self.offset_b >= 0.0, "offset_b ≥ 0");
        check(self.pressure_stiffness_coeff >= 0.0, "pressure_stiffness_coeff ≥ 0");
        check(self.min_extension_pressure >= 0.0, "min_extension_pressure ≥ 0");
        check(self.areal_mass >= 0.0, "areal_mass ≥ 0");
        out
    }
}

/// Tensions of the two side bending wires and the central jamming wire.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WireState {
    pub tension_left: f64,
    pub tension_right: f64,
    pub tension_center: f64,
}

/// Point mass hung on the chain at an arc position measured from the base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointLoad {
    pub arc_position: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadCase {
    #[serde(default)]
    pub point_loads: Vec<PointLoad>,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
}

fn default_gravity() -> f64 {
    DEFAULT_GRAVITY
}

impl Default for LoadCase {
    fn default() -> Self {
        Self { point_loads: Vec::new(), gravity: DEFAULT_GRAVITY }
    }
}

impl LoadCase {
    pub fn single(arc_position: f64, mass: f64) -> Self {
        Self { point_loads: vec![PointLoad { arc_position, mass }], gravity: DEFAULT_GRAVITY }
    }

    pub fn with_gravity(mut self, gravity: f64) -> Self {
        self.gravity = gravity;
        self
    }

    pub fn total_mass(&self) -> f64 {
        self.point_loads.iter().map(|p| p.mass).sum()
    }
}

/// Stage of the operation sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Stowed,
    Pressurized,
    Extending,
    Bending,
    Locked,
    Lifting,
    Unbending,
    Retracting,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Full quasi-static state of the mechanism between two actions.
///
/// `pitch_angles` are the commanded pitch angles of the deployed joints
/// (gravity sag lives in the equilibrium result, not here).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismState {
    pub feed: f64,
    pub deployed_length: f64,
    pub pressure: f64,
    pub pitch_angles: Vec<f64>,
    pub yaw_angles: Vec<f64>,
    pub wires: WireState,
    pub locked: bool,
    pub phase: Phase,
    #[serde(default)]
    pub loads: LoadCase,
}

impl Default for MechanismState {
    fn default() -> Self {
        Self::stowed()
    }
}

impl MechanismState {
    pub fn stowed() -> Self {
        Self {
            feed: 0.0,
            deployed_length: 0.0,
            pressure: 0.0,
            pitch_angles: Vec::new(),
            yaw_angles: Vec::new(),
            wires: WireState::default(),
            locked: false,
            phase: Phase::Stowed,
            loads: LoadCase::default(),
        }
    }

    /// A straight, pressurized state with `deployed_joints` joints out.
    pub fn straight(chain: &ChainSpec, deployed_joints: usize, pressure: f64) -> Self {
        let deployed_length = deployed_joints as f64 * chain.link.axis_spacing;
        Self {
            feed: 2.0 * deployed_length,
            deployed_length,
            pressure,
            pitch_angles: vec![0.0; deployed_joints],
            yaw_angles: vec![0.0; deployed_joints],
            phase: Phase::Extending,
            ..Self::stowed()
        }
    }
}

/// One failed state invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub joint: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.joint {
            Some(j) => write!(f, "{}[{}]: {}", self.field, j, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

/// Checks every `MechanismState` invariant against the chain limits.
///
/// Returns an empty list iff the state is admissible.
pub fn validate_state(state: &MechanismState, chain: &ChainSpec) -> Vec<Violation> {
    let link = &chain.link;
    let mut out = Vec::new();
    let mut push = |field, joint, message: String| out.push(Violation { field, joint, message });

    if !(state.feed >= 0.0) {
        push("feed", None, format!("feed {} must be ≥ 0", state.feed));
    }
    if !((state.deployed_length - state.feed / 2.0).abs() <= 1e-9) {
        push(
            "deployed_length",
            None,
            format!("deployed_length {} ≠ feed/2 = {}", state.deployed_length, state.feed / 2.0),
        );
    }
    if !(state.deployed_length <= chain.total_length + 1e-9) {
        push("deployed_length", None, format!("deployed_length {} exceeds skeleton length", state.deployed_length));
    }
    if !(state.pressure >= 0.0) {
        push("pressure", None, format!("pressure {} must be ≥ 0", state.pressure));
    }
    if state.pitch_angles.len() != state.yaw_angles.len() {
        push(
            "yaw_angles",
            None,
            format!("{} yaw angles for {} pitch angles", state.yaw_angles.len(), state.pitch_angles.len()),
        );
    }
    let pitch_lo = link.pitch_min - link.backlash;
    for (j, &p) in state.pitch_angles.iter().enumerate() {
        if !(p >= pitch_lo && p <= link.pitch_max) {
            push("pitch_angles", Some(j), format!("pitch {p} outside [{pitch_lo}, {}]", link.pitch_max));
        }
    }
    for (j, &y) in state.yaw_angles.iter().enumerate() {
        if !(y >= link.yaw_min && y <= link.yaw_max) {
            push("yaw_angles", Some(j), format!("yaw {y} outside [{}, {}]", link.yaw_min, link.yaw_max));
        }
    }
    let w = &state.wires;
    for (name, t) in [
        ("wires.tension_left", w.tension_left),
        ("wires.tension_right", w.tension_right),
        ("wires.tension_center", w.tension_center),
    ] {
        if !(t >= 0.0) {
            push(name, None, format!("tension {t} must be ≥ 0"));
        }
    }
    if state.locked && !(w.tension_center > 0.0) {
        push("locked", None, "locked requires tension_center > 0".to_string());
    }
    for (j, load) in state.loads.point_loads.iter().enumerate() {
        if !(load.arc_position >= 0.0 && load.arc_position <= state.deployed_length + 1e-9) {
            push("loads", Some(j), format!("arc position {} outside [0, deployed_length]", load.arc_position));
        }
        if !(load.mass >= 0.0) {
            push("loads", Some(j), format!("mass {} must be ≥ 0", load.mass));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_chain_matches_prototype() {
        let chain = ChainSpec::default();
        assert_eq!(chain.n_links, 37);
        assert!((chain.total_length - 0.999).abs() < 1e-12);
        assert!((chain.link.link_mass - 0.0191).abs() < 1e-4);
        assert!((chain.total_mass() - 0.706).abs() < 1e-12);
        assert!((chain.link.yaw_max.to_degrees() - 30.0).abs() < 1e-12);
        assert!((chain.link.pitch_max.to_degrees() - 90.0).abs() < 1e-12);
        assert!(chain.violations().is_empty());
        assert!(MembraneSpec::default().violations().is_empty());
    }

    #[test]
    fn straight_state_is_valid() {
        let chain = ChainSpec::default();
        assert!(validate_state(&MechanismState::stowed(), &chain).is_empty());
        assert!(validate_state(&MechanismState::straight(&chain, 20, 4000.0), &chain).is_empty());
    }

    #[test]
    fn yaw_breach_names_joint() {
        let chain = ChainSpec::default();
        let mut s = MechanismState::straight(&chain, 5, 0.0);
        s.yaw_angles[3] = 0.6;
        let v = validate_state(&s, &chain);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "yaw_angles");
        assert_eq!(v[0].joint, Some(3));
    }

    #[test]
    fn lock_without_tension_is_flagged() {
        let chain = ChainSpec::default();
        let mut s = MechanismState::straight(&chain, 5, 0.0);
        s.locked = true;
        let v = validate_state(&s, &chain);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "locked");
    }

    #[test]
    fn pitch_tolerates_backlash_margin() {
        let chain = ChainSpec::default();
        let mut s = MechanismState::straight(&chain, 2, 0.0);
        s.pitch_angles[0] = -chain.link.backlash;
        assert!(validate_state(&s, &chain).is_empty());
        s.pitch_angles[0] = -chain.link.backlash - 1e-6;
        assert_eq!(validate_state(&s, &chain).len(), 1);
    }
}
