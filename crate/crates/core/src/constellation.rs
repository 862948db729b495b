//! Best-arrangement search over per-feature candidate peaks.
//!
//! Each arrangement is ranked by `r = p * Σ c_j`, where `p` is the normal
//! density of its mutual-distance vector `v` with mean `λ L̄` and covariance
//! `λ² Σ`, and `c_j` are the candidates' peak scores. `λ = ‖v‖ / ‖L̄‖`, which
//! makes the ranking order invariant under a common similarity transform.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::peaks::Peak;

/// Feature order used for the three-feature face constellation.
pub const DEFAULT_FEATURE_NAMES: [&str; 3] = ["left_eye", "right_eye", "mouth"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConstellationModelFile", into = "ConstellationModelFile")]
pub struct ConstellationModel {
    feature_names: Vec<String>,
    mean_distances: Vec<f64>,
    covariance: Vec<f64>,
    chirality_check: bool,
    cholesky: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct ConstellationModelFile {
    feature_names: Vec<String>,
    mean_distances: Vec<f64>,
    /// Row-major.
    covariance: Vec<f64>,
    #[serde(default = "default_true")]
    chirality_check: bool,
}

fn default_true() -> bool {
    true
}

impl TryFrom<ConstellationModelFile> for ConstellationModel {
    type Error = Error;

    fn try_from(f: ConstellationModelFile) -> Result<Self> {
        ConstellationModel::new(f.feature_names, f.mean_distances, f.covariance, f.chirality_check)
    }
}

impl From<ConstellationModel> for ConstellationModelFile {
    fn from(m: ConstellationModel) -> Self {
        Self {
            feature_names: m.feature_names,
            mean_distances: m.mean_distances,
            covariance: m.covariance,
            chirality_check: m.chirality_check,
        }
    }
}

impl ConstellationModel {
    pub fn new(
        feature_names: Vec<String>,
        mean_distances: Vec<f64>,
        covariance: Vec<f64>,
        chirality_check: bool,
    ) -> Result<Self> {
        let k = feature_names.len();
        if k < 2 {
            return Err(Error::InvalidParameter(format!("{k} features (need at least 2)")));
        }
        let d = k * (k - 1) / 2;
        if mean_distances.len() != d {
            return Err(Error::InvalidParameter(format!(
                "{} mean distances for {k} features (expected {d})",
                mean_distances.len()
            )));
        }
        if mean_distances.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::InvalidParameter("mean distances must be positive".into()));
        }
        if covariance.len() != d * d {
            return Err(Error::InvalidParameter(format!(
                "{} covariance entries (expected {})",
                covariance.len(),
                d * d
            )));
        }
        let sigma = DMatrix::from_row_slice(d, d, &covariance);
        for i in 0..d {
            for j in 0..i {
                let (a, b) = (sigma[(i, j)], sigma[(j, i)]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidParameter("covariance is not symmetric".into()));
                }
            }
        }
        if chirality_check && k != 3 {
            return Err(Error::InvalidParameter("the chirality check needs exactly three features".into()));
        }
        let cholesky = sigma.cholesky().ok_or(Error::NotPositiveDefinite)?.unpack();
        Ok(Self { feature_names, mean_distances, covariance, chirality_check, cholesky })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn mean_distances(&self) -> &[f64] {
        &self.mean_distances
    }

    pub fn covariance(&self) -> &[f64] {
        &self.covariance
    }

    pub fn chirality_check(&self) -> bool {
        self.chirality_check
    }

    pub fn dimension(&self) -> usize {
        self.mean_distances.len()
    }

    fn mean_norm(&self) -> f64 {
        self.mean_distances.iter().map(|l| l * l).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constellation {
    pub positions: Vec<(f64, f64)>,
    pub peak_scores: Vec<f64>,
    pub distances: Vec<f64>,
    pub scale: f64,
    pub density: f64,
    pub rank: f64,
    /// Index into each feature's candidate list.
    pub candidate_indices: Vec<usize>,
}

/// Pairwise distances in order (0,1), (0,2), ..., (1,2), ...
pub fn mutual_distances(positions: &[(f64, f64)]) -> Result<Vec<f64>> {
    if positions.len() < 2 {
        return Err(Error::InvalidParameter("need at least two positions".into()));
    }
    let mut out = Vec::with_capacity(positions.len() * (positions.len() - 1) / 2);
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let (a, b) = (positions[i], positions[j]);
            out.push((a.0 - b.0).hypot(a.1 - b.1));
        }
    }
    Ok(out)
}

/// `λ = ‖v‖ / ‖L̄‖`.
pub fn estimate_scale(distances: &[f64], model: &ConstellationModel) -> Result<f64> {
    if distances.len() != model.dimension() {
        return Err(Error::DimensionMismatch(format!(
            "{} distances for a {}-dimensional model",
            distances.len(),
            model.dimension()
        )));
    }
    let norm = distances.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::CoincidentConstellation);
    }
    Ok(norm / model.mean_norm())
}

/// Natural log of `N(v; λ L̄, λ² Σ)`.
pub fn log_constellation_density(distances: &[f64], scale: f64, model: &ConstellationModel) -> Result<f64> {
    let d = model.dimension();
    if distances.len() != d {
        return Err(Error::DimensionMismatch(format!("{} distances for a {d}-dimensional model", distances.len())));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidParameter(format!("scale {scale}")));
    }
    let residual =
        DVector::from_iterator(d, distances.iter().zip(&model.mean_distances).map(|(v, l)| (v - scale * l) / scale));
    // L z = residual / λ, so ‖z‖² is the Mahalanobis term under λ²Σ
    let z = model.cholesky.solve_lower_triangular(&residual).ok_or(Error::NotPositiveDefinite)?;
    let log_det_sigma: f64 = (0..d).map(|i| model.cholesky[(i, i)].ln()).sum::<f64>() * 2.0;
    let log_det = log_det_sigma + 2.0 * d as f64 * scale.ln();
    Ok(-0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + z.norm_squared()))
}

pub fn constellation_density(distances: &[f64], scale: f64, model: &ConstellationModel) -> Result<f64> {
    Ok(log_constellation_density(distances, scale, model)?.exp())
}

/// `r = p * Σ c_j`.
pub fn rank_constellation(density: f64, peak_scores: &[f64]) -> f64 {
    density * peak_scores.iter().sum::<f64>()
}

/// Twice the signed area of `(left, right, bottom)` in image coordinates;
/// positive for the upright frontal layout (y grows downward).
pub fn signed_area(left: (f64, f64), right: (f64, f64), bottom: (f64, f64)) -> f64 {
    (right.0 - left.0) * (bottom.1 - left.1) - (right.1 - left.1) * (bottom.0 - left.0)
}

/// A candidate position for one feature with its peak score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub position: (f64, f64),
    pub score: f64,
}

impl From<&Peak> for Candidate {
    fn from(p: &Peak) -> Self {
        Self { position: (p.x as f64, p.y as f64), score: p.score }
    }
}

/// [`best_arrangement`] over peak lists.
pub fn best_constellation(candidates: &[Vec<Peak>], model: &ConstellationModel) -> Result<Constellation> {
    let lists: Vec<Vec<Candidate>> = candidates.iter().map(|list| list.iter().map(Candidate::from).collect()).collect();
    best_arrangement(&lists, model)
}

/// Exhaustive search over the Cartesian product of candidate lists. Returns
/// the arrangement with the highest rank; ties keep the lexicographically
/// first index tuple.
pub fn best_arrangement(candidates: &[Vec<Candidate>], model: &ConstellationModel) -> Result<Constellation> {
    let k = model.feature_names.len();
    if candidates.len() != k {
        return Err(Error::DimensionMismatch(format!("{} candidate lists for {k} features", candidates.len())));
    }
    for (list, name) in candidates.iter().zip(&model.feature_names) {
        if list.is_empty() {
            return Err(Error::NoCandidates(name.clone()));
        }
    }

    let mut indices = vec![0usize; k];
    // (log rank, indices); log rank is -inf for zero-density arrangements
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let positions: Vec<(f64, f64)> = indices.iter().zip(candidates).map(|(&i, list)| list[i].position).collect();
        let admissible = !model.chirality_check || signed_area(positions[0], positions[1], positions[2]) > 0.0;
        if admissible {
            let score_sum: f64 = indices.iter().zip(candidates).map(|(&i, list)| list[i].score).sum();
            let log_rank = match arrangement_log_density(&positions, model)? {
                Some(log_p) if score_sum > 0.0 => log_p + score_sum.ln(),
                _ => f64::NEG_INFINITY,
            };
            if best.as_ref().is_none_or(|(b, _)| log_rank > *b) {
                best = Some((log_rank, indices.clone()));
            }
        }
        if !advance(&mut indices, candidates) {
            break;
        }
    }

    let (_, indices) = best.ok_or(Error::AllConstellationsRejected)?;
    evaluate(&indices, candidates, model)
}

/// Log density of an arrangement, `None` when it is coincident.
fn arrangement_log_density(positions: &[(f64, f64)], model: &ConstellationModel) -> Result<Option<f64>> {
    let v = mutual_distances(positions)?;
    match estimate_scale(&v, model) {
        Ok(scale) => Ok(Some(log_constellation_density(&v, scale, model)?)),
        Err(Error::CoincidentConstellation) => Ok(None),
        Err(e) => Err(e),
    }
}

fn evaluate(indices: &[usize], candidates: &[Vec<Candidate>], model: &ConstellationModel) -> Result<Constellation> {
    let chosen: Vec<&Candidate> = indices.iter().zip(candidates).map(|(&i, list)| &list[i]).collect();
    let positions: Vec<(f64, f64)> = chosen.iter().map(|c| c.position).collect();
    let peak_scores: Vec<f64> = chosen.iter().map(|c| c.score).collect();
    let distances = mutual_distances(&positions)?;
    let (scale, density) = match estimate_scale(&distances, model) {
        Ok(scale) => (scale, constellation_density(&distances, scale, model)?),
        Err(Error::CoincidentConstellation) => (0.0, 0.0),
        Err(e) => return Err(e),
    };
    Ok(Constellation {
        rank: rank_constellation(density, &peak_scores),
        positions,
        peak_scores,
        distances,
        scale,
        density,
        candidate_indices: indices.to_vec(),
    })
}

/// Odometer increment with the last feature varying fastest.
fn advance(indices: &mut [usize], candidates: &[Vec<Candidate>]) -> bool {
    for slot in (0..indices.len()).rev() {
        indices[slot] += 1;
        if indices[slot] < candidates[slot].len() {
            return true;
        }
        indices[slot] = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_model(mean: [f64; 3], chirality: bool) -> ConstellationModel {
        ConstellationModel::new(
            DEFAULT_FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            mean.to_vec(),
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            chirality,
        )
        .unwrap()
    }

    fn peak(x: usize, y: usize, score: f64) -> Peak {
        Peak { x, y, score, raw_distance: 0.0 }
    }

    #[test]
    fn distance_vectors() {
        assert_eq!(mutual_distances(&[(0.0, 0.0), (3.0, 0.0), (0.0, 4.0)]).unwrap(), vec![3.0, 4.0, 5.0]);
        assert_eq!(mutual_distances(&[(2.0, 2.0); 3]).unwrap(), vec![0.0; 3]);
        assert_eq!(mutual_distances(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]).unwrap(), vec![1.0, 2.0, 1.0]);
    }

    #[test]
    fn scale_estimates() {
        let m = identity_model([3.0, 4.0, 5.0], false);
        assert_eq!(estimate_scale(&[3.0, 4.0, 5.0], &m).unwrap(), 1.0);
        assert!((estimate_scale(&[6.0, 8.0, 10.0], &m).unwrap() - 2.0).abs() < 1e-15);
        let unit = identity_model([1.0, 1e-300, 1e-300], false);
        assert!((estimate_scale(&[3.0, 4.0, 0.0], &unit).unwrap() - 5.0).abs() < 1e-12);
        assert!(matches!(estimate_scale(&[0.0; 3], &m), Err(Error::CoincidentConstellation)));
    }

    #[test]
    fn density_at_the_mean() {
        let m = identity_model([3.0, 4.0, 5.0], false);
        // (2π)^(-3/2) = 0.063493635934240...
        let p = constellation_density(&[3.0, 4.0, 5.0], 1.0, &m).unwrap();
        assert!((p - 0.063_493_635_934_240_97).abs() < 1e-15, "{p}");
        let p2 = constellation_density(&[6.0, 8.0, 10.0], 2.0, &m).unwrap();
        assert!((p2 - 0.063_493_635_934_240_97 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn density_one_unit_off_the_mean() {
        let m = identity_model([3.0, 4.0, 5.0], false);
        let p = constellation_density(&[4.0, 4.0, 5.0], 1.0, &m).unwrap();
        assert!((p - 0.038_510_836_890_748_94).abs() < 1e-15, "{p}");
    }

    #[test]
    fn density_is_bounded_by_its_peak() {
        let m = identity_model([3.0, 4.0, 5.0], false);
        for v in [[1.0, 2.0, 3.0], [10.0, 0.5, 7.0], [3.0, 4.0, 5.0]] {
            let lambda = estimate_scale(&v, &m).unwrap();
            let p = constellation_density(&v, lambda, &m).unwrap();
            let bound = (2.0 * std::f64::consts::PI).powf(-1.5) / lambda.powi(3);
            assert!(p > 0.0 && p <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn rank_is_density_times_score_sum() {
        assert_eq!(rank_constellation(0.0, &[1.0, 2.0, 3.0]), 0.0);
        assert!((rank_constellation(0.1, &[1.0, 2.0, 3.0]) - 0.6).abs() < 1e-15);
        assert_eq!(rank_constellation(0.4, &[0.0; 3]), 0.0);
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let err = ConstellationModel::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![1.0, 1.0, 1.0],
            vec![1.0, 2.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite));
    }

    #[test]
    fn single_candidates_give_the_only_arrangement() {
        let m = identity_model([40.0, 50.0, 50.0], true);
        let c = vec![vec![peak(10, 10, 1.0)], vec![peak(50, 10, 1.0)], vec![peak(30, 50, 1.0)]];
        let best = best_constellation(&c, &m).unwrap();
        assert_eq!(best.candidate_indices, vec![0, 0, 0]);
        assert_eq!(best.positions[2], (30.0, 50.0));
    }

    #[test]
    fn higher_score_sum_wins_for_equal_geometry() {
        let m = identity_model([40.0, 50.0, 50.0], false);
        // both mouth candidates give the same distance vector by mirror symmetry
        let c = vec![vec![peak(10, 30, 1.0)], vec![peak(50, 30, 1.0)], vec![peak(30, 60, 1.0), peak(30, 0, 3.0)]];
        let best = best_constellation(&c, &m).unwrap();
        assert_eq!(best.candidate_indices, vec![0, 0, 1]);
    }

    #[test]
    fn matching_geometry_beats_outlier() {
        // exact 3-4-5 triangle vs. a far-off mouth
        let m = identity_model([3.0, 4.0, 5.0], false);
        let c = vec![vec![peak(0, 0, 1.0)], vec![peak(3, 0, 1.0)], vec![peak(40, 90, 1.0), peak(0, 4, 1.0)]];
        let best = best_constellation(&c, &m).unwrap();
        assert_eq!(best.candidate_indices, vec![0, 0, 1]);
        assert_eq!(best.scale, 1.0);
    }

    #[test]
    fn chirality_rejects_mirrored_layouts() {
        let m = identity_model([40.0, 50.0, 50.0], true);
        // left eye to the right of the right eye
        let c = vec![vec![peak(50, 10, 1.0)], vec![peak(10, 10, 1.0)], vec![peak(30, 50, 1.0)]];
        assert!(matches!(best_constellation(&c, &m), Err(Error::AllConstellationsRejected)));
        let off = identity_model([40.0, 50.0, 50.0], false);
        assert!(best_constellation(&c, &off).is_ok());
    }

    #[test]
    fn empty_candidate_list() {
        let m = identity_model([3.0, 4.0, 5.0], false);
        let c = vec![vec![peak(0, 0, 1.0)], vec![], vec![peak(0, 4, 1.0)]];
        assert!(matches!(best_constellation(&c, &m), Err(Error::NoCandidates(ref n)) if n == "right_eye"));
    }

    #[test]
    fn model_json_round_trip() {
        let m = identity_model([3.0, 4.0, 5.0], true);
        let text = serde_json::to_string(&m).unwrap();
        let back: ConstellationModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        let bad = text.replace("[1.0,0.0,0.0,0.0,1.0,0.0,0.0,0.0,1.0]", "[1.0,0.0,0.0,0.0,-1.0,0.0,0.0,0.0,1.0]");
        assert!(serde_json::from_str::<ConstellationModel>(&bad).is_err());
    }
}
