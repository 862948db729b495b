use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::solver::PoseSolution;
use crate::error::{Error, Result};

/// Head rotation relative to the frontal reference, in degrees.
///
/// The rotation is `Rz(roll) * Ry(yaw) * Rx(pitch)` in camera axes, so yaw
/// turns the head about the vertical axis, pitch nods it and roll tilts it
/// in the image plane. Each angle lies in `(-180, 180]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PoseAngles {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

fn wrap_degrees(a: f64) -> f64 {
    if a <= -180.0 {
        a + 360.0
    } else {
        a
    }
}

/// Rotation matrix for the given angles.
pub fn rotation_from_angles(angles: &PoseAngles) -> Matrix3<f64> {
    let (y, p, r) = (angles.yaw.to_radians(), angles.pitch.to_radians(), angles.roll.to_radians());
    let rz = Matrix3::new(r.cos(), -r.sin(), 0.0, r.sin(), r.cos(), 0.0, 0.0, 0.0, 1.0);
    let ry = Matrix3::new(y.cos(), 0.0, y.sin(), 0.0, 1.0, 0.0, -y.sin(), 0.0, y.cos());
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, p.cos(), -p.sin(), 0.0, p.sin(), p.cos());
    rz * ry * rx
}

/// Inverse of [`rotation_from_angles`] for a proper rotation matrix.
pub(crate) fn angles_from_rotation(rot: &Matrix3<f64>) -> PoseAngles {
    let yaw = (-rot[(2, 0)]).atan2(rot[(2, 1)].hypot(rot[(2, 2)]));
    let roll = rot[(1, 0)].atan2(rot[(0, 0)]);
    let pitch = rot[(2, 1)].atan2(rot[(2, 2)]);
    PoseAngles {
        yaw: wrap_degrees(yaw.to_degrees()),
        pitch: wrap_degrees(pitch.to_degrees()),
        roll: wrap_degrees(roll.to_degrees()),
    }
}

/// Yaw, pitch and roll of a solved triangle.
///
/// The head frame has `x` along `R - L`, `z` along the face normal and
/// `y = z × x`. In the frontal reference the face looks at the camera, so
/// `x0 = (1, 0, 0)`, `z0 = (0, 0, -1)` and `y0 = (0, -1, 0)`.
pub fn pose_angles(solution: &PoseSolution) -> Result<PoseAngles> {
    let l = Vector3::from(solution.l);
    let r = Vector3::from(solution.r);
    let across = r - l;
    let scale = l.norm().max(r.norm()).max(1.0);
    if across.norm() <= 1e-12 * scale {
        return Err(Error::PoseDegenerate("eye points coincide".into()));
    }
    let z = solution.normal_vector().normalize();
    // remove any component along the normal left by rounding
    let x = (across - z * z.dot(&across)).normalize();
    let y = z.cross(&x);
    let head = Matrix3::from_columns(&[x, y, z]);
    let reference = Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0);
    Ok(angles_from_rotation(&(head * reference.transpose())))
}
