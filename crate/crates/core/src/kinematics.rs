//! Chain forward kinematics, eversion feed kinematics, fold partition,
//! membrane sizing and wrap/reel geometry.
//!
//! Base frame: `x` along the straight chain, `y` to the left, `z` up. Each link
//! applies its pitch rotation (positive lifts the chain, about the local `−y`
//! axis), then its yaw rotation (positive turns left, about the local `z` axis),
//! then translates by `axis_spacing` along its local `x`.

use std::f64::consts::PI;

use nalgebra::{Rotation3, Unit, Vector3};
use thiserror::Error;

use crate::model::{ChainSpec, MembraneSpec};

#[derive(Debug, Error, PartialEq)]
pub enum KinematicsError {
    #[error("angle lists differ: {pitch} pitch vs {yaw} yaw angles")]
    LengthMismatch { pitch: usize, yaw: usize },
    #[error("{joints} joints requested but the chain has {n_links} links")]
    TooManyJoints { joints: usize, n_links: usize },
    #[error("feed must be ≥ 0, got {0}")]
    NegativeFeed(f64),
    #[error("deployed length must be ≥ 0, got {0}")]
    NegativeLength(f64),
    #[error("skeleton exhausted: deployed length {requested} exceeds total length {total}")]
    SkeletonExhausted { requested: f64, total: f64 },
    #[error("fold offset constants must be ≥ 0 (a = {a}, b = {b})")]
    NegativeOffset { a: f64, b: f64 },
    #[error("yaw_max = 0: a straight-only chain has an infinite wrap radius")]
    StraightOnlyChain,
    #[error("inner radius {inner} is below the minimum curl radius {min}")]
    InnerRadiusTooSmall { inner: f64, min: f64 },
    #[error("link thickness must be > 0, got {0}")]
    NonPositiveThickness(f64),
}

/// Pose of a joint: origin and the orientation of the link it drives.
#[derive(Debug, Clone, PartialEq)]
pub struct JointFrame {
    pub position: Vector3<f64>,
    pub orientation: Rotation3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainPose {
    /// Frame of every deployed joint, base first.
    pub joint_frames: Vec<JointFrame>,
    pub tip_position: Vector3<f64>,
    pub axis_spacing: f64,
}

impl ChainPose {
    pub fn joint_count(&self) -> usize {
        self.joint_frames.len()
    }

    /// Origin of joint `i`; `i == joint_count()` is the tip.
    pub fn node(&self, i: usize) -> Vector3<f64> {
        if i < self.joint_frames.len() {
            self.joint_frames[i].position
        } else {
            self.tip_position
        }
    }

    /// Point at arc length `s` from the base along the deformed chain.
    ///
    /// Returns `None` when `s` lies outside `[0, joint_count × axis_spacing]`.
    pub fn point_at_arc(&self, s: f64) -> Option<Vector3<f64>> {
        let len = self.joint_frames.len() as f64 * self.axis_spacing;
        if !(s >= 0.0 && s <= len + 1e-12) {
            return None;
        }
        if self.joint_frames.is_empty() {
            return Some(self.tip_position);
        }
        let k = ((s / self.axis_spacing).floor() as usize).min(self.joint_frames.len() - 1);
        let frame = &self.joint_frames[k];
        let along = s - k as f64 * self.axis_spacing;
        Some(frame.position + frame.orientation * Vector3::x() * along)
    }
}

fn pitch_axis() -> Unit<Vector3<f64>> {
    -Vector3::y_axis()
}

/// Forward kinematics of the deployed joints.
pub fn forward_kinematics(chain: &ChainSpec, pitch_angles: &[f64], yaw_angles: &[f64]) -> Result<ChainPose, KinematicsError> {
    if pitch_angles.len() != yaw_angles.len() {
        return Err(KinematicsError::LengthMismatch { pitch: pitch_angles.len(), yaw: yaw_angles.len() });
    }
    if pitch_angles.len() > chain.n_links {
        return Err(KinematicsError::TooManyJoints { joints: pitch_angles.len(), n_links: chain.n_links });
    }
    let spacing = chain.link.axis_spacing;
    let mut position = Vector3::zeros();
    let mut orientation = Rotation3::identity();
    let mut joint_frames = Vec::with_capacity(pitch_angles.len());
    for (&pitch, &yaw) in pitch_angles.iter().zip(yaw_angles) {
        orientation = orientation
            * Rotation3::from_axis_angle(&pitch_axis(), pitch)
            * Rotation3::from_axis_angle(&Vector3::z_axis(), yaw);
        joint_frames.push(JointFrame { position, orientation });
        position += orientation * Vector3::x() * spacing;
    }
    Ok(ChainPose { joint_frames, tip_position: position, axis_spacing: spacing })
}

/// Everted length produced by a membrane feed: half the feed.
pub fn eversion_extension(feed: f64) -> Result<f64, KinematicsError> {
    if !(feed >= 0.0) {
        return Err(KinematicsError::NegativeFeed(feed));
    }
    Ok(feed / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoldPartition {
    pub deployed_count: usize,
    pub folded_count: usize,
}

/// Relative slack applied before flooring, so exact multiples of the spacing
/// are not lost to rounding (0.27 / 0.027 is 9.999… in binary).
const FLOOR_SLACK: f64 = 1e-9;

/// Number of whole joints a length covers.
pub fn joints_in(length: f64, axis_spacing: f64) -> usize {
    (length / axis_spacing + FLOOR_SLACK).floor().max(0.0) as usize
}

/// Splits the skeleton into deployed links and links still folded at the tip.
pub fn fold_partition(deployed_length: f64, chain: &ChainSpec) -> Result<FoldPartition, KinematicsError> {
    if !(deployed_length >= 0.0) {
        return Err(KinematicsError::NegativeLength(deployed_length));
    }
    if deployed_length > chain.total_length + 1e-9 {
        return Err(KinematicsError::SkeletonExhausted { requested: deployed_length, total: chain.total_length });
    }
    let deployed_count = joints_in(deployed_length, chain.link.axis_spacing).min(chain.n_links);
    Ok(FoldPartition { deployed_count, folded_count: chain.n_links - deployed_count })
}

/// Membrane length offset at the tip fold, `2a + 2b`.
pub fn membrane_offset(a: f64, b: f64) -> Result<f64, KinematicsError> {
    if !(a >= 0.0 && b >= 0.0) {
        return Err(KinematicsError::NegativeOffset { a, b });
    }
    Ok(2.0 * a + 2.0 * b)
}

/// Membrane length tying the skeleton at the tip without swelling: the
/// membrane folds back on itself, so twice the skeleton plus the fold offset.
pub fn required_membrane_length(chain: &ChainSpec, membrane: &MembraneSpec) -> Result<f64, KinematicsError> {
    Ok(2.0 * chain.total_length + membrane_offset(membrane.offset_a, membrane.offset_b)?)
}

/// Circumradius of the regular polygon traced with every joint at `angle`.
pub fn polygon_radius(axis_spacing: f64, angle: f64) -> f64 {
    axis_spacing / (2.0 * (angle / 2.0).sin())
}

/// Tightest uniform wrap radius, reached with every joint at `yaw_max`.
pub fn min_wrap_radius(chain: &ChainSpec) -> Result<f64, KinematicsError> {
    if !(chain.link.yaw_max > 0.0) {
        return Err(KinematicsError::StraightOnlyChain);
    }
    Ok(polygon_radius(chain.link.axis_spacing, chain.link.yaw_max))
}

/// Smallest radius the chain can be curled to in pitch.
pub fn min_curl_radius(chain: &ChainSpec) -> f64 {
    polygon_radius(chain.link.axis_spacing, chain.link.pitch_max)
}

/// Outer diameter of an Archimedean spiral packing `length` of material of
/// the given thickness around a core of `inner_radius` (area equivalence).
pub fn spiral_outer_diameter(length: f64, thickness: f64, inner_radius: f64) -> f64 {
    2.0 * (inner_radius * inner_radius + thickness * length / PI).sqrt()
}

/// Outer diameter of the whole skeleton reeled onto a core.
pub fn reel_storage_diameter(chain: &ChainSpec, inner_radius: f64) -> Result<f64, KinematicsError> {
    reel_diameter_for_length(chain, chain.total_length, inner_radius)
}

/// As [`reel_storage_diameter`] for an explicit skeleton length.
pub fn reel_diameter_for_length(chain: &ChainSpec, length: f64, inner_radius: f64) -> Result<f64, KinematicsError> {
    let thickness = chain.link.link_thickness;
    if !(thickness > 0.0) {
        return Err(KinematicsError::NonPositiveThickness(thickness));
    }
    let min = min_curl_radius(chain);
    if !(inner_radius >= min) {
        return Err(KinematicsError::InnerRadiusTooSmall { inner: inner_radius, min });
    }
    Ok(spiral_outer_diameter(length, thickness, inner_radius))
}

/// Arc length of the Archimedean spiral `r(φ) = r_in + t φ / 2π` between the
/// inner and outer radius, by composite Simpson quadrature.
pub fn unrolled_spiral_length(inner_radius: f64, outer_radius: f64, thickness: f64) -> f64 {
    if outer_radius <= inner_radius {
        return 0.0;
    }
    let growth = thickness / (2.0 * PI);
    let phi_end = (outer_radius - inner_radius) / growth;
    let speed = |phi: f64| {
        let r = inner_radius + growth * phi;
        (r * r + growth * growth).sqrt()
    };
    let n = 4096;
    let h = phi_end / n as f64;
    let mut sum = speed(0.0) + speed(phi_end);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * speed(i as f64 * h);
    }
    sum * h / 3.0
}
