//! Real roots of polynomials up to degree four.
//!
//! Roots are isolated between consecutive critical points, which are found
//! recursively from the derivative. On each monotone piece a sign change is
//! located by bisection. A critical point where `|p|` is zero up to rounding,
//! or falls under the tolerance without any neighboring sign change, is itself
//! reported as a (multiple) root, which keeps repeated roots from being lost.

use crate::error::{Error, Result};

/// Default residual bound relative to the largest coefficient.
pub const DEFAULT_ROOT_TOLERANCE: f64 = 1e-12;

const MERGE_DISTANCE: f64 = 1e-9;
// Values this small relative to the evaluation scale are indistinguishable from zero.
const ROUNDING: f64 = 16.0 * f64::EPSILON;

/// Real roots of `a4 x⁴ + a3 x³ + a2 x² + a1 x + a0` given as `[a4, a3, a2, a1, a0]`,
/// highest first. Leading zero coefficients reduce the degree.
pub fn quartic_real_roots(coeffs: [f64; 5], tol: f64) -> Result<Vec<f64>> {
    polynomial_real_roots(&coeffs, tol)
}

/// Same as [`quartic_real_roots`] for any degree, highest coefficient first.
pub fn polynomial_real_roots(coeffs: &[f64], tol: f64) -> Result<Vec<f64>> {
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("non-finite polynomial coefficient".into()));
    }
    let first = coeffs.iter().position(|&c| c != 0.0).ok_or(Error::ZeroPolynomial)?;
    let scale = coeffs[first..].iter().fold(0.0f64, |m, c| m.max(c.abs()));
    // scaled so the largest coefficient has magnitude 1
    let poly: Vec<f64> = coeffs[first..].iter().map(|c| c / scale).collect();
    if poly.len() == 1 {
        return Ok(Vec::new());
    }
    let mut roots = isolate(&poly, tol);
    for r in roots.iter_mut() {
        *r = polish(&poly, *r);
    }
    roots.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = Vec::with_capacity(roots.len());
    for r in roots {
        match merged.last() {
            Some(&last) if (r - last).abs() <= MERGE_DISTANCE * last.abs().max(1.0) => {}
            _ => merged.push(r),
        }
    }
    Ok(merged
        .into_iter()
        .filter(|&r| eval(&poly, r).abs() <= tol.max(f64::EPSILON) * 8.0 * magnitude(&poly, r).max(1.0))
        .collect())
}

/// Horner evaluation, highest coefficient first.
pub fn eval(poly: &[f64], x: f64) -> f64 {
    poly.iter().fold(0.0, |acc, &c| acc * x + c)
}

/// `Σ |c_i| |x|^i`, the rounding scale of a Horner evaluation at `x`.
fn magnitude(poly: &[f64], x: f64) -> f64 {
    poly.iter().fold(0.0, |acc, &c| acc * x.abs() + c.abs())
}

fn derivative(poly: &[f64]) -> Vec<f64> {
    let n = poly.len() - 1;
    poly[..n].iter().enumerate().map(|(i, &c)| c * (n - i) as f64).collect()
}

/// Cauchy bound on the magnitude of every root.
fn root_bound(poly: &[f64]) -> f64 {
    let lead = poly[0].abs();
    1.0 + poly[1..].iter().fold(0.0f64, |m, c| m.max(c.abs() / lead))
}

fn isolate(poly: &[f64], tol: f64) -> Vec<f64> {
    match poly.len() {
        0 | 1 => Vec::new(),
        2 => vec![-poly[1] / poly[0]],
        _ => {
            let d = derivative(poly);
            let dscale = d.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            let dnorm: Vec<f64> = d.iter().map(|c| c / dscale).collect();
            let mut critical = isolate(&dnorm, tol);
            critical.sort_by(f64::total_cmp);
            let bound = root_bound(poly);
            critical.retain(|c| c.abs() < bound);

            let mut roots = Vec::new();
            // sign at each breakpoint; 0 marks a critical point on the axis
            let mut points = vec![(-bound, sign(eval(poly, -bound)))];
            let mut near = Vec::new();
            for &c in &critical {
                let v = eval(poly, c);
                let scale = magnitude(poly, c).max(1.0);
                if v.abs() <= ROUNDING * scale {
                    roots.push(c);
                    points.push((c, 0));
                } else {
                    if v.abs() <= tol * scale {
                        near.push(points.len());
                    }
                    points.push((c, sign(v)));
                }
            }
            points.push((bound, sign(eval(poly, bound))));
            let mut bracketed = vec![false; points.len()];
            for (i, pair) in points.windows(2).enumerate() {
                let ((lo, slo), (hi, shi)) = (pair[0], pair[1]);
                if slo * shi < 0 {
                    roots.push(bisect(poly, lo, hi, slo));
                    bracketed[i] = true;
                    bracketed[i + 1] = true;
                }
            }
            // an extremum that only grazes the axis is a double root lost to rounding
            for i in near {
                if !bracketed[i] {
                    roots.push(points[i].0);
                }
            }
            roots
        }
    }
}

fn sign(v: f64) -> i32 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Bisection on a bracket whose left end has sign `slo`.
fn bisect(poly: &[f64], mut lo: f64, mut hi: f64, slo: i32) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = sign(eval(poly, mid));
        if s == 0 {
            return mid;
        }
        if s == slo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// A few Newton steps, each kept only if it lowers the residual.
fn polish(poly: &[f64], mut x: f64) -> f64 {
    let d = derivative(poly);
    let mut fx = eval(poly, x).abs();
    for _ in 0..4 {
        let slope = eval(&d, x);
        if slope == 0.0 || fx == 0.0 {
            break;
        }
        let next = x - eval(poly, x) / slope;
        let fnext = eval(poly, next).abs();
        if !(fnext < fx) {
            break;
        }
        x = next;
        fx = fnext;
    }
    x
}
