//! Wire statics of the skeleton.
//!
//! Side wires at radius `r_b` bend the chain with `M_b = r_b (T_left − T_right)`.
//! Pulling the central wire presses neighbouring joint faces together so each
//! joint resists rotation by Coulomb friction up to `M_f = μ r_f T_f`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ActuationError {
    #[error("wire tension must be ≥ 0, got {0}")]
    NegativeTension(f64),
    #[error("lever arm must be > 0, got {0}")]
    NonPositiveLever(f64),
    #[error("friction fit needs at least one sample")]
    NoSamples,
    #[error("friction fit is degenerate: all tensions are zero")]
    DegenerateSamples,
    #[error("contact radius must be > 0, got {0}")]
    NonPositiveRadius(f64),
    #[error("sweep CSV: {0}")]
    Csv(String),
}

/// Signed yaw moment of the side wires, positive toward the left wire.
pub fn bend_moment(bend_wire_radius: f64, tension_left: f64, tension_right: f64) -> Result<f64, ActuationError> {
    for t in [tension_left, tension_right] {
        if !(t >= 0.0) {
            return Err(ActuationError::NegativeTension(t));
        }
    }
    Ok(bend_wire_radius * (tension_left - tension_right))
}

/// Friction holding torque `μ r_f T_f` of one jammed joint.
pub fn holding_torque(friction_coeff: f64, contact_radius: f64, tension_center: f64) -> f64 {
    friction_coeff * contact_radius * tension_center
}

/// Force that a holding torque can resist at the given lever arm.
pub fn holding_force_at(holding_torque: f64, lever: f64) -> Result<f64, ActuationError> {
    if !(lever > 0.0) {
        return Err(ActuationError::NonPositiveLever(lever));
    }
    Ok(holding_torque / lever)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LockMode {
    Stick,
    Slip,
    Free,
}

impl LockMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LockMode::Stick => "stick",
            LockMode::Slip => "slip",
            LockMode::Free => "free",
        }
    }
}

/// Coulomb state of one joint and the moment carried by friction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLockState {
    pub mode: LockMode,
    pub transmitted_moment: f64,
}

/// Classifies a joint under `external_moment` given its holding torque.
pub fn joint_lock_state(external_moment: f64, holding_torque: f64) -> JointLockState {
    if holding_torque <= 0.0 {
        JointLockState { mode: LockMode::Free, transmitted_moment: 0.0 }
    } else if external_moment.abs() <= holding_torque {
        JointLockState { mode: LockMode::Stick, transmitted_moment: external_moment }
    } else {
        JointLockState { mode: LockMode::Slip, transmitted_moment: holding_torque.copysign(external_moment) }
    }
}

/// One `(tension, torque)` measurement of a holding-torque sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorqueSample {
    pub tension_n: f64,
    pub torque_nm: f64,
}

/// Least-squares friction coefficient through the origin:
/// `μ = Σ T·M / (r_f Σ T²)`.
pub fn fit_friction_coefficient(samples: &[TorqueSample], contact_radius: f64) -> Result<f64, ActuationError> {
    if samples.is_empty() {
        return Err(ActuationError::NoSamples);
    }
    if !(contact_radius > 0.0) {
        return Err(ActuationError::NonPositiveRadius(contact_radius));
    }
    let (tm, tt) = samples
        .iter()
        .fold((0.0, 0.0), |(tm, tt), s| (tm + s.tension_n * s.torque_nm, tt + s.tension_n * s.tension_n));
    if tt == 0.0 {
        return Err(ActuationError::DegenerateSamples);
    }
    Ok(tm / (contact_radius * tt))
}

/// Parses a sweep CSV with header `tension_n,torque_nm`.
pub fn parse_sweep_csv(text: &str) -> Result<Vec<TorqueSample>, ActuationError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| ActuationError::Csv(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["tension_n", "torque_nm"] {
        return Err(ActuationError::Csv(format!(
            "expected header \"tension_n,torque_nm\", found \"{}\"",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    reader
        .deserialize()
        .map(|row| row.map_err(|e| ActuationError::Csv(e.to_string())))
        .collect()
}

/// Multiplicative holding-torque derating as a function of joint angle.
///
/// Points are `(angle_rad, factor)` and are linearly interpolated, clamped at
/// both ends. An empty table is the identity.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DeratingTable {
    points: Vec<(f64, f64)>,
}

impl DeratingTable {
    pub fn identity() -> Self {
        Self::default()
    }

    /// Builds a table, sorting points by angle.
    pub fn new(mut points: Vec<(f64, f64)>) -> Self {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { points }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn factor(&self, angle: f64) -> f64 {
        let angle = angle.abs();
        match self.points.as_slice() {
            [] => 1.0,
            [only] => only.1,
            pts => {
                if angle <= pts[0].0 {
                    return pts[0].1;
                }
                for w in pts.windows(2) {
                    let ((a0, f0), (a1, f1)) = (w[0], w[1]);
                    if angle <= a1 {
                        if a1 == a0 {
                            return f1;
                        }
                        return f0 + (f1 - f0) * (angle - a0) / (a1 - a0);
                    }
                }
                pts[pts.len() - 1].1
            }
        }
    }

    pub fn violations(&self) -> Vec<String> {
        if self.points.iter().all(|&(a, f)| a.is_finite() && f >= 0.0) {
            Vec::new()
        } else {
            vec!["derating factors ≥ 0".to_string()]
        }
    }
}
