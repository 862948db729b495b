use rayon::prelude::*;

use super::histogram::{distance, normalize_histogram, Measure, SignatureHistogram};
use super::model::FeatureModel;
use crate::error::{Error, Result};
use crate::imaging::{in_region, EdgePool, SilhouetteMask};

/// Distance from the local signature to the model at every anchor position.
/// Smaller values mean the feature is more likely there.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodMap {
    width: usize,
    height: usize,
    values: Vec<Option<f64>>,
}

impl LikelihoodMap {
    pub fn new(width: usize, height: usize, values: Vec<Option<f64>>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!("{} map cells for a {width}x{height} frame", values.len())));
        }
        Ok(Self { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `None` where the position is not a valid anchor.
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        self.values[y * self.width + x]
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Position and value of the smallest entry, first in raster order on ties.
    pub fn argmin(&self) -> Option<((usize, usize), f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.values.iter().enumerate() {
            if let Some(v) = *v {
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((i, v));
                }
            }
        }
        best.map(|(i, v)| ((i % self.width, i / self.width), v))
    }
}

/// Scans the model's mask over every anchor inside `region` whose footprint
/// stays inside the frame, recording the histogram distance at each one.
pub fn build_likelihood_map(
    edges: &EdgePool,
    region: Option<&SilhouetteMask>,
    model: &FeatureModel,
    measure: Measure,
) -> Result<LikelihoodMap> {
    let (w, h) = (edges.width(), edges.height());
    if let Some(mask) = region {
        mask.check_frame(w, h)?;
    }
    let template = &model.signature;
    let cells = bin_cells(edges, template);
    let mask = &model.mask;

    let rows: Vec<Vec<Option<f64>>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = vec![None; w];
            let mut hist = template.map_bins(|_| 0.0);
            for (x, slot) in row.iter_mut().enumerate() {
                let (ax, ay) = (x as i64, y as i64);
                if !in_region(region, ax, ay) || !mask.fits(ax, ay, w, h) {
                    continue;
                }
                hist.clear();
                for &(dx, dy) in mask.offsets() {
                    let cell = &cells[(ay + dy as i64) as usize * w + (ax + dx as i64) as usize];
                    if cell.is_empty() {
                        hist.add_non_edge(1.0);
                    } else {
                        for &bin in cell {
                            hist.add_edge_at(bin as usize, 1.0);
                        }
                    }
                }
                let observed = normalize_histogram(&hist)?;
                *slot = Some(distance(measure, &observed, template)?);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    LikelihoodMap::new(w, h, rows.into_iter().flatten().collect())
}

/// Edge-bin indices of every pooled entry, per pixel.
fn bin_cells(edges: &EdgePool, shape: &SignatureHistogram) -> Vec<Vec<u16>> {
    let (w, h) = (edges.width(), edges.height());
    let mut cells = vec![Vec::new(); w * h];
    for y in 0..h {
        for x in 0..w {
            cells[y * w + x] = edges.at(x, y).map(|p| shape.edge_index(p.normal_angle, p.brightness) as u16).collect();
        }
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{collect_signature, train_model, FeatureMask, TrainingSample, DEFAULT_MODEL_FLOOR};
    use crate::imaging::{detect_color_edges, Image};

    fn scene() -> Image {
        Image::from_fn(24, 20, 1, |x, y, _| {
            if (8..12).contains(&x) && (6..9).contains(&y) {
                30
            } else if (15..18).contains(&x) && (12..16).contains(&y) {
                220
            } else {
                120
            }
        })
        .unwrap()
    }

    #[test]
    fn self_distance_is_the_global_minimum() {
        let img = scene();
        let pool = detect_color_edges(&img, None, &[30.0]).unwrap();
        // the stencil exactly covers the blob and its edge ring, so any shift loses edges
        let mask = FeatureMask::rectangle("blob", 6, 5).unwrap();
        let model =
            train_model(&[TrainingSample { edges: &pool, anchor: (10, 7) }], &mask, 8, 8, DEFAULT_MODEL_FLOOR).unwrap();
        for measure in [Measure::L1, Measure::Kullback] {
            let map = build_likelihood_map(&pool, None, &model, measure).unwrap();
            let ((x, y), v) = map.argmin().unwrap();
            assert_eq!((x, y), (10, 7), "{measure:?}");
            assert!(v.abs() < 1e-4);
        }
    }

    #[test]
    fn empty_pool_against_non_edge_model() {
        let pool = EdgePool::empty(10, 10);
        let mask = FeatureMask::rectangle("r", 3, 3).unwrap();
        let sig = collect_signature(&pool, &mask, (5, 5), 4, 4).unwrap();
        let model = crate::features::model_from_signatures(mask, &[sig], DEFAULT_MODEL_FLOOR).unwrap();
        let map = build_likelihood_map(&pool, None, &model, Measure::L1).unwrap();
        assert_eq!(map.valid_count(), 64);
        for v in map.values().iter().flatten() {
            assert!(*v < 1e-4);
        }
        assert_eq!(map.get(0, 0), None);
    }

    #[test]
    fn region_limits_anchors() {
        let pool = EdgePool::empty(10, 10);
        let mask = FeatureMask::rectangle("r", 3, 3).unwrap();
        let sig = collect_signature(&pool, &mask, (5, 5), 4, 4).unwrap();
        let model = crate::features::model_from_signatures(mask, &[sig], DEFAULT_MODEL_FLOOR).unwrap();
        let region = SilhouetteMask::from_fn(10, 10, |x, y| x < 3 && y < 3);
        let map = build_likelihood_map(&pool, Some(&region), &model, Measure::Kullback).unwrap();
        // anchors (1..3, 1..3) only
        assert_eq!(map.valid_count(), 4);
        assert!(map.get(1, 1).is_some());
        assert!(map.get(3, 1).is_none());
    }

    #[test]
    fn frame_mismatch() {
        let pool = EdgePool::empty(10, 10);
        let mask = FeatureMask::rectangle("r", 3, 3).unwrap();
        let sig = collect_signature(&pool, &mask, (5, 5), 4, 4).unwrap();
        let model = crate::features::model_from_signatures(mask, &[sig], DEFAULT_MODEL_FLOOR).unwrap();
        let region = SilhouetteMask::full(9, 10);
        assert!(build_likelihood_map(&pool, Some(&region), &model, Measure::L1).is_err());
    }
}
