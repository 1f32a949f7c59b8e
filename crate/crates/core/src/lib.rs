//! Quasi-static simulation of an inflated tip-extension (eversion) cantilever
//! reinforced by an articulated inner skeleton.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`] and [`config`]: mechanism data types, prototype defaults and
//!   JSON configuration loading.
//! - [`kinematics`]: chain forward kinematics, eversion feed kinematics,
//!   membrane sizing, wrap and reel geometry.
//! - [`actuation`]: wire statics (bending moment, friction holding torque,
//!   stick/slip) and friction-coefficient fitting.
//! - [`equilibrium`]: gravity-plane deflection solver with backlash, clearance
//!   compliance, membrane stiffness and jamming friction, plus buckling checks.
//! - [`process`]: operation-sequence state machine and scenario analyses.

pub mod actuation;
pub mod config;
pub mod equilibrium;
pub mod format;
pub mod kinematics;
pub mod model;
pub mod process;

pub use config::{load_config, MechanismConfig};
pub use model::{ChainSpec, LinkSpec, LoadCase, MechanismState, MembraneSpec, Phase, PointLoad, WireState};
