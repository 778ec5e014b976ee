//! Rigid poses with an optional lever-arm coupling between rotation and
//! translation.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::so3::{defect_so3, dist_so3, project_so3, Rotation};
use crate::error::{Error, Result};

/// A rotation block in ambient space paired with a translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbientPose {
    pub rot: Matrix3<f64>,
    pub trans: Vector3<f64>,
}

/// A pose whose rotation block lies on SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rot: Rotation,
    pub trans: Vector3<f64>,
}

impl From<Pose> for AmbientPose {
    fn from(p: Pose) -> Self {
        AmbientPose {
            rot: p.rot.into_inner(),
            trans: p.trans,
        }
    }
}

/// Holonomic coupling `p = anchor + length · R e₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeverArm {
    pub length: f64,
    pub anchor: [f64; 3],
}

impl LeverArm {
    pub fn tip(&self, rot: &Matrix3<f64>) -> Vector3<f64> {
        Vector3::from(self.anchor) + rot.column(0) * self.length
    }
}

impl AmbientPose {
    pub fn is_finite(&self) -> bool {
        self.rot.iter().chain(self.trans.iter()).all(|v| v.is_finite())
    }
}

/// Projects the rotational block; with a lever arm the translation is then
/// placed on the arm tip of the projected rotation.
pub fn project_se3(p: &AmbientPose, lever: Option<&LeverArm>) -> Result<Pose> {
    if !p.is_finite() {
        return Err(Error::non_finite("project_se3 input"));
    }
    let rot = project_so3(&p.rot)?;
    let trans = match lever {
        Some(arm) => arm.tip(rot.matrix()),
        None => p.trans,
    };
    Ok(Pose { rot, trans })
}

/// Translational violation: zero without a lever arm, otherwise the distance
/// from the arm tip of the projected rotation.
pub fn translation_defect(p: &AmbientPose, lever: Option<&LeverArm>) -> Result<f64> {
    match lever {
        None => Ok(0.0),
        Some(arm) => {
            let rot = project_so3(&p.rot)?;
            Ok((p.trans - arm.tip(rot.matrix())).norm())
        }
    }
}

/// `d(A, SO(3)) + α · d_trans(p)`.
pub fn defect_se3(p: &AmbientPose, alpha: f64, lever: Option<&LeverArm>) -> Result<f64> {
    if !p.is_finite() {
        return Err(Error::non_finite("defect_se3 input"));
    }
    let rot = defect_so3(&p.rot)?;
    let trans = if lever.is_some() {
        translation_defect(p, lever)?
    } else {
        0.0
    };
    Ok(rot + alpha * trans)
}

/// Weighted product metric `ρ_SO(3)(R₁, R₂) + α ‖p₁ − p₂‖`.
pub fn dist_se3(p1: &AmbientPose, p2: &AmbientPose, alpha: f64) -> Result<f64> {
    Ok(dist_so3(&p1.rot, &p2.rot)? + alpha * (p1.trans - p2.trans).norm())
}
