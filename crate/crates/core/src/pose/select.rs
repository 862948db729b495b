use serde::Serialize;

use super::solver::PoseSolution;
use crate::error::{Error, Result};
use crate::imaging::SilhouetteMask;

/// Shifts shorter than this many pixels count as a frontal view.
pub const DEFAULT_NEAR_FRONTAL_THRESHOLD: f64 = 2.0;

/// Image-plane displacement of the feature centroid from its expected frontal spot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftVector {
    pub s: (f64, f64),
    pub near_frontal: bool,
}

impl ShiftVector {
    pub fn new(s: (f64, f64), threshold: f64) -> Self {
        Self { s, near_frontal: s.0.hypot(s.1) < threshold }
    }

    /// The default used when nothing is known about the shift.
    pub fn frontal() -> Self {
        Self { s: (0.0, 0.0), near_frontal: true }
    }
}

/// `centroid(points) - (centroid(silhouette) + frontal_offset)`.
pub fn shift_vector(
    points: &[(f64, f64)],
    silhouette: &SilhouetteMask,
    frontal_offset: (f64, f64),
    threshold: f64,
) -> Result<ShiftVector> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("shift vector needs at least one point".into()));
    }
    let (sx, sy) = silhouette.centroid().ok_or(Error::EmptySilhouette)?;
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.1).sum::<f64>() / n;
    Ok(ShiftVector::new((cx - (sx + frontal_offset.0), cy - (sy + frontal_offset.1)), threshold))
}

fn selection_score(solution: &PoseSolution, shift: &ShiftVector) -> f64 {
    let [nx, ny, nz] = solution.normal;
    if shift.near_frontal {
        return -nz;
    }
    let projected = nx.hypot(ny);
    let len = shift.s.0.hypot(shift.s.1);
    if projected < 1e-9 {
        return -1.0;
    }
    (nx * shift.s.0 + ny * shift.s.1) / (projected * len)
}

/// Index of the solution whose normal, projected onto the image, points most
/// nearly along the shift. For a near-frontal shift the solution facing the
/// camera most directly wins. Ties go to the smaller residual, then to the
/// earlier solution.
pub fn select_pose(solutions: &[PoseSolution], shift: &ShiftVector) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in solutions.iter().enumerate() {
        let score = selection_score(s, shift);
        best = match best {
            None => Some((i, score)),
            Some((j, b)) => {
                if score > b || (score == b && s.residual < solutions[j].residual) {
                    Some((i, score))
                } else {
                    Some((j, b))
                }
            }
        };
    }
    best.map(|(i, _)| i).ok_or(Error::NoSolutions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::PoseAngles;

    fn with_normal(normal: [f64; 3], residual: f64) -> PoseSolution {
        PoseSolution {
            m: [0.0; 3],
            l: [0.0; 3],
            r: [0.0; 3],
            depths: [1.0; 3],
            normal,
            residual,
            angles: PoseAngles::default(),
        }
    }

    #[test]
    fn shift_arithmetic() {
        let sil = SilhouetteMask::from_fn(321, 241, |x, y| x == 160 && y == 120);
        let s = shift_vector(&[(150.0, 125.0), (170.0, 125.0)], &sil, (0.0, 5.0), 2.0).unwrap();
        assert_eq!(s.s, (0.0, 0.0));
        assert!(s.near_frontal);
        let s = shift_vector(&[(170.0, 120.0)], &sil, (0.0, 0.0), 2.0).unwrap();
        assert_eq!(s.s, (10.0, 0.0));
        assert!(!s.near_frontal);
    }

    #[test]
    fn empty_silhouette() {
        let sil = SilhouetteMask::from_fn(4, 4, |_, _| false);
        assert!(matches!(shift_vector(&[(1.0, 1.0)], &sil, (0.0, 0.0), 2.0), Err(Error::EmptySilhouette)));
    }

    #[test]
    fn codirectional_wins() {
        let sols = [with_normal([-0.5, 0.0, -0.866], 0.0), with_normal([0.5, 0.0, -0.866], 0.0)];
        let shift = ShiftVector { s: (1.0, 0.0), near_frontal: false };
        assert_eq!(select_pose(&sols, &shift).unwrap(), 1);
    }

    #[test]
    fn near_frontal_prefers_facing_camera() {
        let sols = [with_normal([0.6, 0.0, -0.8], 0.0), with_normal([0.0, 0.0, -1.0], 0.0)];
        assert_eq!(select_pose(&sols, &ShiftVector::frontal()).unwrap(), 1);
    }

    #[test]
    fn ties_use_residual_then_order() {
        let sols = [
            with_normal([1.0, 0.0, 0.0], 1e-9),
            with_normal([1.0, 0.0, 0.0], 1e-12),
            with_normal([1.0, 0.0, 0.0], 1e-12),
        ];
        assert_eq!(select_pose(&sols, &ShiftVector::new((5.0, 0.0), 2.0)).unwrap(), 1);
    }

    #[test]
    fn flat_normal_scores_low_unless_frontal() {
        let sols = [with_normal([0.0, 0.0, -1.0], 0.0), with_normal([0.2, 0.0, -0.98], 0.0)];
        assert_eq!(select_pose(&sols, &ShiftVector::new((5.0, 0.0), 2.0)).unwrap(), 1);
        assert_eq!(select_pose(&sols, &ShiftVector::frontal()).unwrap(), 0);
    }

    #[test]
    fn single_and_empty() {
        let sols = [with_normal([-1.0, 0.0, 0.0], 0.0)];
        assert_eq!(select_pose(&sols, &ShiftVector::new((5.0, 0.0), 2.0)).unwrap(), 0);
        assert!(matches!(select_pose(&[], &ShiftVector::frontal()), Err(Error::NoSolutions)));
    }
}
