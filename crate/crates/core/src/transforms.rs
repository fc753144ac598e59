//! Coordinate harmonization between device conventions and the Z-up world.
//!
//! Composition order for the gesture path is fixed: mirror the left-handed
//! pose into a right-handed Y-up frame first, then rotate Y-up into Z-up.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::model::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chirality {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpAxis {
    Y,
    Z,
}

/// The three coordinate conventions the gateway knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisConvention {
    /// Browser XR runtime: right-handed, Y-up.
    WebXr,
    /// Native engine runtime: left-handed, Y-up.
    PicoUnity,
    /// Simulator world: right-handed, Z-up.
    Isaac,
}

impl BasisConvention {
    pub fn chirality(self) -> Chirality {
        match self {
            BasisConvention::PicoUnity => Chirality::Left,
            _ => Chirality::Right,
        }
    }

    pub fn up_axis(self) -> UpAxis {
        match self {
            BasisConvention::Isaac => UpAxis::Z,
            _ => UpAxis::Y,
        }
    }
}

/// Y-up to Z-up basis change. Device forward (-Z) becomes world +X, device
/// up (+Y) becomes world +Z.
pub const YUP_TO_ZUP: [[f64; 3]; 3] = [[0.0, 0.0, -1.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];

/// Quaternion `[x, y, z, w]` of [`YUP_TO_ZUP`].
const YUP_TO_ZUP_QUAT: [f64; 4] = [0.5, -0.5, -0.5, 0.5];

pub fn yup_to_zup_matrix() -> Matrix3<f64> {
    let m = YUP_TO_ZUP;
    Matrix3::new(
        m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
    )
}

fn basis_rotation() -> UnitQuaternion<f64> {
    let [x, y, z, w] = YUP_TO_ZUP_QUAT;
    UnitQuaternion::new_unchecked(Quaternion::new(w, x, y, z))
}

/// Mirrors a left-handed Y-up pose through the z = 0 plane into a
/// right-handed Y-up pose.
pub fn mirror_lh_to_rh(pose: &Pose) -> Pose {
    let [x, y, z] = pose.position;
    let [qx, qy, qz, qw] = pose.orientation;
    // Sign flips keep the norm, so no renormalization: the map is an exact
    // involution.
    Pose {
        position: [x, y, -z],
        orientation: [-qx, -qy, qz, qw],
    }
}

/// Right-handed Y-up to right-handed Z-up. Positions are rotated, and
/// orientations are conjugated so device-local axes keep their meaning.
pub fn yup_to_zup(pose: &Pose) -> Pose {
    change_basis(pose, &yup_to_zup_matrix(), basis_rotation())
}

/// Inverse of [`yup_to_zup`].
pub fn zup_to_yup(pose: &Pose) -> Pose {
    change_basis(pose, &yup_to_zup_matrix().transpose(), basis_rotation().inverse())
}

// The basis matrix is a signed permutation, so positions go through it
// exactly; the quaternion handles the orientation conjugation.
fn change_basis(pose: &Pose, m: &Matrix3<f64>, r: UnitQuaternion<f64>) -> Pose {
    let p = m * pose.translation();
    let q = r * pose.rotation() * r.inverse();
    let mut out = Pose::from_parts(p, q);
    out.orientation = Pose::new([0.0; 3], out.orientation).orientation;
    out
}

/// Brings a pose from `source` into the world convention.
pub fn normalize_to_world(pose: &Pose, source: BasisConvention) -> Pose {
    match source {
        BasisConvention::Isaac => *pose,
        BasisConvention::WebXr => yup_to_zup(pose),
        BasisConvention::PicoUnity => yup_to_zup(&mirror_lh_to_rh(pose)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizationPolicy {
    /// Step size in meters.
    pub resolution: f64,
}

impl Default for QuantizationPolicy {
    fn default() -> Self {
        Self { resolution: 0.001 }
    }
}

impl QuantizationPolicy {
    pub fn new(resolution: f64) -> Option<Self> {
        (resolution > 0.0 && resolution.is_finite()).then_some(Self { resolution })
    }

    pub fn quantize(&self, value: f64) -> f64 {
        // For unit-fraction steps such as 1 mm, dividing by the integer
        // 1/resolution lands on the double nearest the decimal grid point.
        let inverse = 1.0 / self.resolution;
        if (inverse - inverse.round()).abs() < 1e-9 * inverse {
            let inverse = inverse.round();
            round_half_away(value * inverse) / inverse
        } else {
            self.resolution * round_half_away(value / self.resolution)
        }
    }
}

/// Round half away from zero. Quotients within a few ulps of a half step are
/// treated as exact ties, so decimal inputs such as `1.0005 / 0.001` (which
/// evaluates to `1000.4999999999999`) round the way the decimal value would.
fn round_half_away(v: f64) -> f64 {
    let floor = v.abs().floor();
    let frac = v.abs() - floor;
    let tie_window = 8.0 * f64::EPSILON * v.abs().max(1.0);
    let r = if (frac - 0.5).abs() <= tie_window {
        floor + 1.0
    } else {
        v.abs().round()
    };
    r.copysign(v)
}

/// Snaps every position component to the policy grid. Orientation is left
/// untouched.
pub fn quantize_position(pose: &Pose, policy: &QuantizationPolicy) -> Pose {
    Pose {
        position: pose.position.map(|c| policy.quantize(c)),
        orientation: pose.orientation,
    }
}
