//! Triangle pose from a single perspective view.
//!
//! Three image points `M'`, `L'`, `R'` and the known side lengths of the 3D
//! triangle `MLR` fix the depths of its vertices along the camera rays up to
//! at most four discrete solutions. The camera sits at the origin with X
//! right, Y down and Z forward; image coordinates share the X/Y directions.

mod angles;
mod quartic;
mod select;
mod solver;

pub use angles::{pose_angles, rotation_from_angles, PoseAngles};
pub use quartic::{eval as eval_polynomial, polynomial_real_roots, quartic_real_roots, DEFAULT_ROOT_TOLERANCE};
pub use select::{select_pose, shift_vector, ShiftVector, DEFAULT_NEAR_FRONTAL_THRESHOLD};
pub use solver::{solve_triangle_pose, PoseSolution, DEFAULT_SOLVER_TOLERANCE};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole camera with square pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    /// Focal length in pixels.
    pub focal_length: f64,
    pub principal_point: (f64, f64),
}

impl CameraModel {
    pub fn new(focal_length: f64, principal_point: (f64, f64)) -> Result<Self> {
        if !(focal_length.is_finite() && focal_length > 0.0) {
            return Err(Error::InvalidParameter(format!("focal length {focal_length}")));
        }
        if !(principal_point.0.is_finite() && principal_point.1.is_finite()) {
            return Err(Error::InvalidParameter("non-finite principal point".into()));
        }
        Ok(Self { focal_length, principal_point })
    }

    /// Camera whose principal point is the center of a `width x height` image.
    /// Pixel coordinates refer to pixel centers, so the center of a 320-wide
    /// image is at x = 159.5.
    pub fn centered(focal_length: f64, width: usize, height: usize) -> Result<Self> {
        Self::new(focal_length, ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0))
    }

    /// Unit ray through an image point.
    pub fn ray(&self, pixel: (f64, f64)) -> Vector3<f64> {
        Vector3::new(pixel.0 - self.principal_point.0, pixel.1 - self.principal_point.1, self.focal_length).normalize()
    }

    /// Image position of a camera-frame point; `None` at or behind the camera plane.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        (p.z > 0.0).then(|| {
            (
                self.principal_point.0 + self.focal_length * p.x / p.z,
                self.principal_point.1 + self.focal_length * p.y / p.z,
            )
        })
    }
}

/// Side lengths of the feature triangle: `ml = |ML|`, `mr = |MR|`, `lr = |LR|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleModel {
    pub ml: f64,
    pub mr: f64,
    pub lr: f64,
}

impl TriangleModel {
    pub fn new(ml: f64, mr: f64, lr: f64) -> Result<Self> {
        let t = Self { ml, mr, lr };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b, c) = (self.ml, self.mr, self.lr);
        if ![a, b, c].iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(Error::InvalidParameter(format!("triangle sides {a}, {b}, {c}")));
        }
        if a + b <= c || a + c <= b || b + c <= a {
            return Err(Error::InvalidParameter(format!("sides {a}, {b}, {c} violate the triangle inequality")));
        }
        Ok(())
    }

    pub fn perimeter(&self) -> f64 {
        self.ml + self.mr + self.lr
    }
}
