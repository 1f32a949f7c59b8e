//! JSON configuration loading and validation.
//!
//! The document has five optional top-level sections: `chain`, `membrane`,
//! `wires`, `solver` and `scenario`. Every absent field takes the prototype
//! default. Angles must carry an explicit unit, `{"deg": x}` or `{"rad": x}`;
//! all other quantities are SI.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actuation::DeratingTable;
use crate::model::{self, ChainSpec, LinkSpec, MechanismState, MembraneSpec, Violation, WireState};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid configuration: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

/// Angle with an explicit unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Angle {
    #[serde(rename = "deg")]
    Deg(f64),
    #[serde(rename = "rad")]
    Rad(f64),
}

impl Angle {
    pub fn radians(self) -> f64 {
        match self {
            Angle::Deg(d) => d.to_radians(),
            Angle::Rad(r) => r,
        }
    }
}

/// Stiffness parameters the calibrator may adjust.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StiffnessParam {
    ClearanceStiffness,
    Backlash,
    PressureStiffnessCoeff,
}

impl StiffnessParam {
    pub const ALL: [StiffnessParam; 3] =
        [StiffnessParam::ClearanceStiffness, StiffnessParam::Backlash, StiffnessParam::PressureStiffnessCoeff];

    pub fn name(self) -> &'static str {
        match self {
            StiffnessParam::ClearanceStiffness => "clearance_stiffness",
            StiffnessParam::Backlash => "backlash",
            StiffnessParam::PressureStiffnessCoeff => "pressure_stiffness_coeff",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    /// Fixed-point convergence tolerance on joint angles (rad) and moments (N·m).
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Lateral imperfection used by the horizontal buckling check; `None`
    /// means one backlash angle times the axis spacing.
    pub imperfection_offset: Option<f64>,
    /// Parameters left free during calibration.
    pub calibration_free: Vec<StiffnessParam>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 10_000,
            imperfection_offset: None,
            calibration_free: StiffnessParam::ALL.to_vec(),
        }
    }
}

/// Experiment and scenario parameters used by the harness commands.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Deployed length of the deflection experiments.
    pub deployed_length: f64,
    pub gravity: f64,
    /// Arc position of the test weights.
    pub load_position: f64,
    pub weights: Vec<f64>,
    pub pressures: Vec<f64>,
    /// Jamming tension of the "jammed" deflection mode.
    pub jam_tension: f64,
    pub wrap_radius: f64,
    pub arc_fraction: f64,
    /// Object reaction force spread over the wrapped arc.
    pub reaction_force: f64,
    /// Yaw moment per radian needed to conform the membrane to an object.
    pub conforming_stiffness: f64,
    pub reel_length: f64,
    pub reel_inner_radius: f64,
    /// Pressure used by the demonstration sequence.
    pub operating_pressure: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            deployed_length: 0.97,
            gravity: model::DEFAULT_GRAVITY,
            load_position: 0.4,
            weights: vec![0.15, 0.5],
            pressures: vec![0.0, 2500.0, 5000.0, 7500.0, 10_000.0],
            jam_tension: 150.0,
            wrap_radius: 0.10,
            arc_fraction: 0.5,
            reaction_force: 10.0,
            conforming_stiffness: 1.0,
            reel_length: 0.97,
            reel_inner_radius: 0.04,
            operating_pressure: 10_000.0,
        }
    }
}

/// Validated mechanism configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MechanismConfig {
    pub chain: ChainSpec,
    pub membrane: MembraneSpec,
    pub wires: WireState,
    pub derating: DeratingTable,
    pub solver: SolverSettings,
    pub scenario: Scenario,
}

impl MechanismConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = self.chain.violations();
        out.extend(self.membrane.violations());
        out.extend(self.derating.violations());
        let w = &self.wires;
        if !(w.tension_left >= 0.0 && w.tension_right >= 0.0 && w.tension_center >= 0.0) {
            out.push("wire tensions ≥ 0".into());
        }
        let s = &self.solver;
        if !(s.tolerance > 0.0) {
            out.push("solver.tolerance > 0".into());
        }
        if s.max_iterations < 1 {
            out.push("solver.max_iterations ≥ 1".into());
        }
        if let Some(o) = s.imperfection_offset {
            if !(o >= 0.0) {
                out.push("solver.imperfection_offset ≥ 0".into());
            }
        }
        let sc = &self.scenario;
        let mut check = |ok: bool, what: &str| {
            if !ok {
                out.push(what.to_string());
            }
        };
        check(
            sc.deployed_length >= 0.0 && sc.deployed_length <= self.chain.total_length + 1e-9,
            "0 ≤ scenario.deployed_length ≤ total_length",
        );
        check(sc.gravity >= 0.0, "scenario.gravity ≥ 0");
        check(
            sc.load_position >= 0.0 && sc.load_position <= sc.deployed_length,
            "0 ≤ scenario.load_position ≤ scenario.deployed_length",
        );
        check(sc.weights.iter().all(|&w| w >= 0.0), "scenario.weights ≥ 0");
        check(sc.pressures.iter().all(|&p| p >= 0.0), "scenario.pressures ≥ 0");
        check(sc.jam_tension >= 0.0, "scenario.jam_tension ≥ 0");
        check(sc.wrap_radius > 0.0, "scenario.wrap_radius > 0");
        check((0.0..=1.0).contains(&sc.arc_fraction), "0 ≤ scenario.arc_fraction ≤ 1");
        check(sc.reaction_force >= 0.0, "scenario.reaction_force ≥ 0");
        check(sc.conforming_stiffness >= 0.0, "scenario.conforming_stiffness ≥ 0");
        check(sc.reel_length >= 0.0, "scenario.reel_length ≥ 0");
        check(sc.reel_inner_radius > 0.0, "scenario.reel_inner_radius > 0");
        check(sc.operating_pressure >= 0.0, "scenario.operating_pressure ≥ 0");
        out
    }

    /// Checks a state against this configuration's limits.
    pub fn validate_state(&self, state: &MechanismState) -> Vec<Violation> {
        model::validate_state(state, &self.chain)
    }

    pub fn imperfection_offset(&self) -> f64 {
        self.solver
            .imperfection_offset
            .unwrap_or(self.chain.link.backlash * self.chain.link.axis_spacing)
    }

    /// Serializes to a complete JSON document that loads back to `self`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ConfigDocument::from(self)).expect("config document serializes")
    }
}

/// Parses and validates a JSON configuration document.
///
/// An empty (or whitespace-only) document yields the prototype defaults.
pub fn load_config(text: &str) -> Result<MechanismConfig, ConfigError> {
    let text = if text.trim().is_empty() { "{}" } else { text };
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ConfigDocument = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let config = doc.into_config();
    let violations = config.violations();
    if violations.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Invalid(violations))
    }
}

// Raw document layer. Everything optional, unknown keys rejected.

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chain: Option<ChainDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    membrane: Option<MembraneDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wires: Option<WiresDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    solver: Option<SolverDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scenario: Option<ScenarioDoc>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainDoc {
    axis_spacing: Option<f64>,
    link_mass: Option<f64>,
    n_links: Option<usize>,
    bend_wire_radius: Option<f64>,
    jam_contact_radius: Option<f64>,
    friction_coeff: Option<f64>,
    pitch_min: Option<Angle>,
    pitch_max: Option<Angle>,
    yaw_min: Option<Angle>,
    yaw_max: Option<Angle>,
    backlash: Option<Angle>,
    clearance_stiffness: Option<f64>,
    link_thickness: Option<f64>,
    derating: Option<Vec<DeratingPoint>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeratingPoint {
    angle: Angle,
    factor: f64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MembraneDoc {
    radius: Option<f64>,
    offset_a: Option<f64>,
    offset_b: Option<f64>,
    pressure_stiffness_coeff: Option<f64>,
    min_extension_pressure: Option<f64>,
    areal_mass: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WiresDoc {
    tension_left: Option<f64>,
    tension_right: Option<f64>,
    tension_center: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverDoc {
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    imperfection_offset: Option<f64>,
    calibration_free: Option<Vec<StiffnessParam>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    deployed_length: Option<f64>,
    gravity: Option<f64>,
    load_position: Option<f64>,
    weights: Option<Vec<f64>>,
    pressures: Option<Vec<f64>>,
    jam_tension: Option<f64>,
    wrap_radius: Option<f64>,
    arc_fraction: Option<f64>,
    reaction_force: Option<f64>,
    conforming_stiffness: Option<f64>,
    reel_length: Option<f64>,
    reel_inner_radius: Option<f64>,
    operating_pressure: Option<f64>,
}

impl ConfigDocument {
    fn into_config(self) -> MechanismConfig {
        let d = LinkSpec::default();
        let c = self.chain.unwrap_or_default();
        let ang = |a: Option<Angle>, def: f64| a.map(Angle::radians).unwrap_or(def);
        let yaw_max = ang(c.yaw_max, d.yaw_max);
        let link = LinkSpec {
            axis_spacing: c.axis_spacing.unwrap_or(d.axis_spacing),
            link_mass: c.link_mass.unwrap_or(d.link_mass),
            bend_wire_radius: c.bend_wire_radius.unwrap_or(d.bend_wire_radius),
            jam_contact_radius: c.jam_contact_radius.unwrap_or(d.jam_contact_radius),
            friction_coeff: c.friction_coeff.unwrap_or(d.friction_coeff),
            pitch_min: ang(c.pitch_min, d.pitch_min),
            pitch_max: ang(c.pitch_max, d.pitch_max),
            yaw_min: ang(c.yaw_min, -yaw_max),
            yaw_max,
            backlash: ang(c.backlash, d.backlash),
            clearance_stiffness: c.clearance_stiffness.unwrap_or(d.clearance_stiffness),
            link_thickness: c.link_thickness.unwrap_or(d.link_thickness),
        };
        let chain = ChainSpec::new(link, c.n_links.unwrap_or(model::DEFAULT_N_LINKS));
        let derating = DeratingTable::new(
            c.derating.unwrap_or_default().into_iter().map(|p| (p.angle.radians(), p.factor)).collect(),
        );

        let dm = MembraneSpec::default();
        let m = self.membrane.unwrap_or_default();
        let membrane = MembraneSpec {
            radius: m.radius.unwrap_or(dm.radius),
            offset_a: m.offset_a.unwrap_or(dm.offset_a),
            offset_b: m.offset_b.unwrap_or(dm.offset_b),
            pressure_stiffness_coeff: m.pressure_stiffness_coeff.unwrap_or(dm.pressure_stiffness_coeff),
            min_extension_pressure: m.min_extension_pressure.unwrap_or(dm.min_extension_pressure),
            areal_mass: m.areal_mass.unwrap_or(dm.areal_mass),
        };

        let w = self.wires.unwrap_or_default();
        let wires = WireState {
            tension_left: w.tension_left.unwrap_or(0.0),
            tension_right: w.tension_right.unwrap_or(0.0),
            tension_center: w.tension_center.unwrap_or(0.0),
        };

        let ds = SolverSettings::default();
        let s = self.solver.unwrap_or_default();
        let solver = SolverSettings {
            tolerance: s.tolerance.unwrap_or(ds.tolerance),
            max_iterations: s.max_iterations.unwrap_or(ds.max_iterations),
            imperfection_offset: s.imperfection_offset,
            calibration_free: s.calibration_free.unwrap_or(ds.calibration_free),
        };

        let dsc = Scenario::default();
        let sc = self.scenario.unwrap_or_default();
        let scenario = Scenario {
            deployed_length: sc.deployed_length.unwrap_or(dsc.deployed_length),
            gravity: sc.gravity.unwrap_or(dsc.gravity),
            load_position: sc.load_position.unwrap_or(dsc.load_position),
            weights: sc.weights.unwrap_or(dsc.weights),
            pressures: sc.pressures.unwrap_or(dsc.pressures),
            jam_tension: sc.jam_tension.unwrap_or(dsc.jam_tension),
            wrap_radius: sc.wrap_radius.unwrap_or(dsc.wrap_radius),
            arc_fraction: sc.arc_fraction.unwrap_or(dsc.arc_fraction),
            reaction_force: sc.reaction_force.unwrap_or(dsc.reaction_force),
            conforming_stiffness: sc.conforming_stiffness.unwrap_or(dsc.conforming_stiffness),
            reel_length: sc.reel_length.unwrap_or(dsc.reel_length),
            reel_inner_radius: sc.reel_inner_radius.unwrap_or(dsc.reel_inner_radius),
            operating_pressure: sc.operating_pressure.unwrap_or(dsc.operating_pressure),
        };

        MechanismConfig { chain, membrane, wires, derating, solver, scenario }
    }
}

impl From<&MechanismConfig> for ConfigDocument {
    fn from(c: &MechanismConfig) -> Self {
        let l = &c.chain.link;
        ConfigDocument {
            chain: Some(ChainDoc {
                axis_spacing: Some(l.axis_spacing),
                link_mass: Some(l.link_mass),
                n_links: Some(c.chain.n_links),
                bend_wire_radius: Some(l.bend_wire_radius),
                jam_contact_radius: Some(l.jam_contact_radius),
                friction_coeff: Some(l.friction_coeff),
                pitch_min: Some(Angle::Rad(l.pitch_min)),
                pitch_max: Some(Angle::Rad(l.pitch_max)),
                yaw_min: Some(Angle::Rad(l.yaw_min)),
                yaw_max: Some(Angle::Rad(l.yaw_max)),
                backlash: Some(Angle::Rad(l.backlash)),
                clearance_stiffness: Some(l.clearance_stiffness),
                link_thickness: Some(l.link_thickness),
                derating: Some(
                    c.derating
                        .points()
                        .iter()
                        .map(|&(a, f)| DeratingPoint { angle: Angle::Rad(a), factor: f })
                        .collect(),
                ),
            }),
            membrane: Some(MembraneDoc {
                radius: Some(c.membrane.radius),
                offset_a: Some(c.membrane.offset_a),
                offset_b: Some(c.membrane.offset_b),
                pressure_stiffness_coeff: Some(c.membrane.pressure_stiffness_coeff),
                min_extension_pressure: Some(c.membrane.min_extension_pressure),
                areal_mass: Some(c.membrane.areal_mass),
            }),
            wires: Some(WiresDoc {
                tension_left: Some(c.wires.tension_left),
                tension_right: Some(c.wires.tension_right),
                tension_center: Some(c.wires.tension_center),
            }),
            solver: Some(SolverDoc {
                tolerance: Some(c.solver.tolerance),
                max_iterations: Some(c.solver.max_iterations),
                imperfection_offset: c.solver.imperfection_offset,
                calibration_free: Some(c.solver.calibration_free.clone()),
            }),
            scenario: Some(ScenarioDoc {
                deployed_length: Some(c.scenario.deployed_length),
                gravity: Some(c.scenario.gravity),
                load_position: Some(c.scenario.load_position),
                weights: Some(c.scenario.weights.clone()),
                pressures: Some(c.scenario.pressures.clone()),
                jam_tension: Some(c.scenario.jam_tension),
                wrap_radius: Some(c.scenario.wrap_radius),
                arc_fraction: Some(c.scenario.arc_fraction),
                reaction_force: Some(c.scenario.reaction_force),
                conforming_stiffness: Some(c.scenario.conforming_stiffness),
                reel_length: Some(c.scenario.reel_length),
                reel_inner_radius: Some(c.scenario.reel_inner_radius),
                operating_pressure: Some(c.scenario.operating_pressure),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_document_is_prototype() {
        for text in ["", "  \n", "{}"] {
            let c = load_config(text).unwrap();
            assert_eq!(c.chain.link.axis_spacing, 0.027);
            assert_eq!(c.chain.n_links, 37);
            assert_eq!(c.membrane.radius, 0.04);
            assert_eq!(c, MechanismConfig::default());
        }
    }

    #[test]
    fn zero_links_is_invalid() {
        let err = load_config(r#"{"chain": {"n_links": 0}}"#).unwrap_err();
        match err {
            ConfigError::Invalid(v) => assert!(v.iter().any(|s| s == "n_links ≥ 1"), "{v:?}"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn single_override() {
        let c = load_config(r#"{"chain": {"friction_coeff": 0.5}}"#).unwrap();
        let mut expected = MechanismConfig::default();
        expected.chain.link.friction_coeff = 0.5;
        assert_eq!(c, expected);
    }

    #[test]
    fn angles_need_units() {
        let c = load_config(r#"{"chain": {"yaw_max": {"deg": 45}}}"#).unwrap();
        assert!((c.chain.link.yaw_max - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert_eq!(c.chain.link.yaw_min, -c.chain.link.yaw_max);
        let err = load_config(r#"{"chain": {"yaw_max": 45}}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Schema { ref path, .. } if path == "chain.yaw_max"), "{err}");
    }

    #[test]
    fn schema_errors_name_the_field() {
        let err = load_config(r#"{"chain": {"n_links": "many"}}"#).unwrap_err();
        assert!(err.to_string().contains("chain.n_links"), "{err}");
        let err = load_config(r#"{"membrane": {"colour": 1}}"#).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
        let err = load_config(r#"{"bogus": {}}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Schema { .. }));
    }

    #[test]
    fn asymmetric_yaw_is_invalid() {
        let err = load_config(r#"{"chain": {"yaw_min": {"deg": -10}}}"#).unwrap_err();
        assert!(err.to_string().contains("yaw_min = −yaw_max"), "{err}");
    }

    #[test]
    fn default_round_trips() {
        let c = MechanismConfig::default();
        assert_eq!(load_config(&c.to_json()).unwrap(), c);
    }

    proptest! {
        #[test]
        fn round_trip(
            spacing in 0.005..0.1f64,
            n in 1usize..80,
            mu in 0.0..1.5f64,
            yaw_deg in 1.0..80.0f64,
            backlash in 0.0..0.02f64,
            kc in 1.0..1e5f64,
            radius in 0.01..0.2f64,
            cp in 0.0..1e5f64,
            jam in 0.0..300.0f64,
            deploy_frac in 0.0..1.0f64,
            pressures in proptest::collection::vec(0.0..2e4f64, 0..6),
            derate in proptest::collection::vec((0.0..40.0f64, 0.0..1.0f64), 0..4),
            offset in proptest::option::of(0.0..1e-3f64),
        ) {
            let deployed = deploy_frac * spacing * n as f64;
            let derating: Vec<_> = derate
                .iter()
                .map(|(a, f)| format!(r#"{{"angle": {{"deg": {a}}}, "factor": {f}}}"#))
                .collect();
            let offset = offset.map(|o| format!(r#", "imperfection_offset": {o}"#)).unwrap_or_default();
            let doc = format!(
                r#"{{
                    "chain": {{"axis_spacing": {spacing}, "n_links": {n}, "friction_coeff": {mu},
                              "yaw_max": {{"deg": {yaw_deg}}}, "backlash": {{"rad": {backlash}}},
                              "clearance_stiffness": {kc}, "derating": [{}]}},
                    "membrane": {{"radius": {radius}, "pressure_stiffness_coeff": {cp}}},
                    "wires": {{"tension_center": {jam}}},
                    "solver": {{"max_iterations": 500{offset}}},
                    "scenario": {{"deployed_length": {deployed}, "load_position": {}, "pressures": {:?}}}
                }}"#,
                derating.join(","),
                deployed / 2.0,
                pressures,
            );
            let cfg = load_config(&doc).unwrap();
            let again = load_config(&cfg.to_json()).unwrap();
            prop_assert_eq!(again, cfg);
        }
    }
}
