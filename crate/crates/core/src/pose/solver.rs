use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use super::angles::{pose_angles, PoseAngles};
use super::quartic::polynomial_real_roots;
use super::{CameraModel, TriangleModel};
use crate::error::{Error, Result};

/// Relative tolerance on the three distance equations.
pub const DEFAULT_SOLVER_TOLERANCE: f64 = 1e-9;

// Rays whose triple product falls below this are treated as coplanar, i.e.
// the image points are collinear.
const COLLINEAR_TOLERANCE: f64 = 1e-10;
const ROOT_TOLERANCE: f64 = 1e-10;
const NEWTON_STEPS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoseSolution {
    pub m: [f64; 3],
    pub l: [f64; 3],
    pub r: [f64; 3],
    /// Distances from the camera along the unit rays, in `M, L, R` order.
    pub depths: [f64; 3],
    /// Unit normal of the plane `MLR`, oriented toward the camera (`n_z <= 0`).
    pub normal: [f64; 3],
    /// Largest absolute error of the three side lengths.
    pub residual: f64,
    pub angles: PoseAngles,
}

impl PoseSolution {
    pub fn normal_vector(&self) -> Vector3<f64> {
        Vector3::from(self.normal)
    }
}

// ascending-order polynomial helpers (index = power)
fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64], scale_b: f64) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, y) in b.iter().enumerate() {
        out[i] += scale_b * y;
    }
    out
}

fn poly_eval(a: &[f64], x: f64) -> f64 {
    a.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

struct System {
    rays: [Vector3<f64>; 3],
    // cosines between rays ML, MR, LR
    cos_ml: f64,
    cos_mr: f64,
    cos_lr: f64,
    sides: [f64; 3],
}

impl System {
    fn residuals(&self, t: &Vector3<f64>) -> Vector3<f64> {
        let [a, b, c] = self.sides;
        Vector3::new(
            t[0] * t[0] + t[1] * t[1] - 2.0 * t[0] * t[1] * self.cos_ml - a * a,
            t[0] * t[0] + t[2] * t[2] - 2.0 * t[0] * t[2] * self.cos_mr - b * b,
            t[1] * t[1] + t[2] * t[2] - 2.0 * t[1] * t[2] * self.cos_lr - c * c,
        )
    }

    fn jacobian(&self, t: &Vector3<f64>) -> Matrix3<f64> {
        let (m, l, r) = (t[0], t[1], t[2]);
        Matrix3::new(
            2.0 * (m - l * self.cos_ml),
            2.0 * (l - m * self.cos_ml),
            0.0,
            2.0 * (m - r * self.cos_mr),
            0.0,
            2.0 * (r - m * self.cos_mr),
            0.0,
            2.0 * (l - r * self.cos_lr),
            2.0 * (r - l * self.cos_lr),
        )
    }

    /// Newton iterations on the squared-distance equations, keeping the best iterate.
    fn refine(&self, mut t: Vector3<f64>) -> Vector3<f64> {
        let mut best = self.residuals(&t).amax();
        for _ in 0..NEWTON_STEPS {
            let Some(inv) = self.jacobian(&t).try_inverse() else { break };
            let next = t - inv * self.residuals(&t);
            let err = self.residuals(&next).amax();
            if !(err < best) {
                break;
            }
            t = next;
            best = err;
        }
        t
    }

    fn side_error(&self, t: &Vector3<f64>) -> f64 {
        let [qm, ql, qr] = self.rays;
        let (m, l, r) = (qm * t[0], ql * t[1], qr * t[2]);
        let [a, b, c] = self.sides;
        ((m - l).norm() - a).abs().max(((m - r).norm() - b).abs()).max(((l - r).norm() - c).abs())
    }
}

/// All admissible poses of the triangle given its projections `M'`, `L'`, `R'`.
///
/// Points are written as `t * q` with unit rays `q`; with `u = t_L / t_M` and
/// `v = t_R / t_M` the three law-of-cosines equations reduce to a quartic in
/// `u`. Each real root is back-substituted, refined with Newton's method and
/// kept when every depth is positive and every side is reproduced within
/// `tol * (a + b + c)`.
pub fn solve_triangle_pose(
    projections: [(f64, f64); 3],
    camera: &CameraModel,
    tri: &TriangleModel,
    tol: f64,
) -> Result<Vec<PoseSolution>> {
    tri.validate()?;
    let [qm, ql, qr] = projections.map(|p| camera.ray(p));
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let (pi, pj) = (projections[i], projections[j]);
        if pi == pj || [qm, ql, qr][i].cross(&[qm, ql, qr][j]).norm() < COLLINEAR_TOLERANCE {
            return Err(Error::PoseDegenerate("coincident image points".into()));
        }
    }
    if qm.dot(&ql.cross(&qr)).abs() < COLLINEAR_TOLERANCE {
        return Err(Error::PoseDegenerate("collinear image points".into()));
    }
    let (a, b, c) = (tri.ml, tri.mr, tri.lr);
    let sys =
        System { rays: [qm, ql, qr], cos_ml: qm.dot(&ql), cos_mr: qm.dot(&qr), cos_lr: ql.dot(&qr), sides: [a, b, c] };

    let k1 = (b * b) / (a * a);
    let k2 = (c * c) / (a * a);
    let k = k2 - k1;
    // A(u) = t_M^-2 |M - L|^2 ; N(u) / D(u) = v
    let big_a = [1.0, -2.0 * sys.cos_ml, 1.0];
    let big_n = [k + 1.0, -2.0 * sys.cos_ml * k, k - 1.0];
    let big_d = [2.0 * sys.cos_mr, -2.0 * sys.cos_lr];
    let d2 = poly_mul(&big_d, &big_d);
    let mut quartic = poly_add(&d2, &poly_mul(&big_n, &big_n), 1.0);
    quartic = poly_add(&quartic, &poly_mul(&big_n, &big_d), -2.0 * sys.cos_mr);
    quartic = poly_add(&quartic, &poly_mul(&big_a, &d2), -k1);
    let descending: Vec<f64> = quartic.iter().rev().copied().collect();
    let roots = match polynomial_real_roots(&descending, ROOT_TOLERANCE) {
        Ok(r) => r,
        Err(Error::ZeroPolynomial) => Vec::new(),
        Err(e) => return Err(e),
    };

    let mut seeds = Vec::new();
    for u in roots {
        let au = poly_eval(&big_a, u);
        if !(au > 0.0) {
            continue;
        }
        let tm = a / au.sqrt();
        let du = poly_eval(&big_d, u);
        if du != 0.0 {
            seeds.push(Vector3::new(tm, u * tm, poly_eval(&big_n, u) / du * tm));
        }
        // N/D loses all precision where both vanish (isosceles views), so the
        // two v that satisfy the MR equation, v² - 2 cos_mr v + 1 - k1 A(u) = 0,
        // are seeded as well; refinement and the residual test sort them out
        let disc = sys.cos_mr * sys.cos_mr - 1.0 + k1 * au;
        if disc >= 0.0 {
            for v in [sys.cos_mr - disc.sqrt(), sys.cos_mr + disc.sqrt()] {
                seeds.push(Vector3::new(tm, u * tm, v * tm));
            }
        }
    }

    let limit = tol * tri.perimeter();
    let mut solutions: Vec<PoseSolution> = Vec::new();
    for seed in seeds {
        let t = sys.refine(seed);
        if !(t.iter().all(|&d| d > 0.0 && d.is_finite())) {
            continue;
        }
        let residual = sys.side_error(&t);
        if !(residual <= limit) {
            continue;
        }
        let duplicate = solutions.iter().any(|s| {
            let d = Vector3::from(s.depths);
            (d - t).amax() <= 1e-9 * t.amax()
        });
        if duplicate {
            continue;
        }
        solutions.push(build_solution(&sys, t, residual)?);
    }
    if solutions.is_empty() {
        return Err(Error::NoPositiveDepth);
    }
    if solutions.len() > 4 {
        solutions.sort_by(|x, y| x.residual.total_cmp(&y.residual));
        solutions.truncate(4);
    }
    Ok(solutions)
}

fn build_solution(sys: &System, t: Vector3<f64>, residual: f64) -> Result<PoseSolution> {
    let [qm, ql, qr] = sys.rays;
    let (m, l, r) = (qm * t[0], ql * t[1], qr * t[2]);
    let mut n = (l - m).cross(&(r - m)).normalize();
    if n.z > 0.0 {
        n = -n;
    }
    let mut solution = PoseSolution {
        m: m.into(),
        l: l.into(),
        r: r.into(),
        depths: t.into(),
        normal: n.into(),
        residual,
        angles: PoseAngles::default(),
    };
    solution.angles = pose_angles(&solution)?;
    Ok(solution)
}
