use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NORMALIZED_TOLERANCE: f64 = 1e-9;

/// Histogram distance used to score a signature against a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    L1,
    #[default]
    Kullback,
}

impl std::str::FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Measure::L1),
            "kullback" | "kl" => Ok(Measure::Kullback),
            other => Err(Error::InvalidParameter(format!("unknown measure {other:?}"))),
        }
    }
}

/// Non-edge count plus an angle x brightness grid of edge counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureHistogram {
    angle_bins: usize,
    brightness_bins: usize,
    /// Row-major `[angle][brightness]`.
    edge_bins: Vec<f64>,
    non_edge: f64,
    normalized: bool,
}

impl SignatureHistogram {
    pub fn zeros(angle_bins: usize, brightness_bins: usize) -> Result<Self> {
        if angle_bins == 0 || brightness_bins == 0 {
            return Err(Error::HistogramShape(format!("{angle_bins}x{brightness_bins} edge grid")));
        }
        Ok(Self {
            angle_bins,
            brightness_bins,
            edge_bins: vec![0.0; angle_bins * brightness_bins],
            non_edge: 0.0,
            normalized: false,
        })
    }

    /// Builds a histogram from raw weights. The `normalized` flag is set when
    /// the weights already sum to one.
    pub fn from_bins(angle_bins: usize, brightness_bins: usize, non_edge: f64, edge_bins: Vec<f64>) -> Result<Self> {
        let mut h = Self::zeros(angle_bins, brightness_bins)?;
        if edge_bins.len() != h.edge_bins.len() {
            return Err(Error::HistogramShape(format!(
                "{} edge bins for a {angle_bins}x{brightness_bins} grid",
                edge_bins.len()
            )));
        }
        if let Some(w) = std::iter::once(&non_edge).chain(&edge_bins).find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidParameter(format!("histogram weight {w}")));
        }
        h.non_edge = non_edge;
        h.edge_bins = edge_bins;
        h.normalized = (h.total() - 1.0).abs() <= NORMALIZED_TOLERANCE;
        Ok(h)
    }

    pub fn angle_bins(&self) -> usize {
        self.angle_bins
    }

    pub fn brightness_bins(&self) -> usize {
        self.brightness_bins
    }

    pub fn non_edge(&self) -> f64 {
        self.non_edge
    }

    pub fn edge_bins(&self) -> &[f64] {
        &self.edge_bins
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn edge(&self, angle_bin: usize, brightness_bin: usize) -> f64 {
        self.edge_bins[angle_bin * self.brightness_bins + brightness_bin]
    }

    /// Number of bins including the non-edge bin.
    pub fn len(&self) -> usize {
        self.edge_bins.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All weights, non-edge bin first.
    pub fn bins(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.non_edge).chain(self.edge_bins.iter().copied())
    }

    pub fn total(&self) -> f64 {
        self.bins().sum()
    }

    pub fn edge_total(&self) -> f64 {
        self.edge_bins.iter().sum()
    }

    /// Flat index of the edge bin for a normal angle and a brightness level.
    pub fn edge_index(&self, angle: f64, brightness: u8) -> usize {
        let a = ((angle.rem_euclid(TAU) * self.angle_bins as f64 / TAU) as usize).min(self.angle_bins - 1);
        let b = (brightness as usize * self.brightness_bins) / 256;
        a * self.brightness_bins + b
    }

    pub fn add_non_edge(&mut self, weight: f64) {
        self.non_edge += weight;
        self.normalized = false;
    }

    pub fn add_edge(&mut self, angle: f64, brightness: u8, weight: f64) {
        let i = self.edge_index(angle, brightness);
        self.add_edge_at(i, weight);
    }

    pub(crate) fn add_edge_at(&mut self, index: usize, weight: f64) {
        self.edge_bins[index] += weight;
        self.normalized = false;
    }

    pub(crate) fn clear(&mut self) {
        self.edge_bins.iter_mut().for_each(|w| *w = 0.0);
        self.non_edge = 0.0;
        self.normalized = false;
    }

    pub(crate) fn map_bins(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            angle_bins: self.angle_bins,
            brightness_bins: self.brightness_bins,
            edge_bins: self.edge_bins.iter().map(|&w| f(w)).collect(),
            non_edge: f(self.non_edge),
            normalized: false,
        }
    }

    pub(crate) fn same_shape(&self, other: &Self) -> Result<()> {
        if self.angle_bins != other.angle_bins || self.brightness_bins != other.brightness_bins {
            return Err(Error::HistogramShape(format!(
                "{}x{} vs {}x{}",
                self.angle_bins, self.brightness_bins, other.angle_bins, other.brightness_bins
            )));
        }
        Ok(())
    }
}

/// Divides every bin by the total weight.
pub fn normalize_histogram(h: &SignatureHistogram) -> Result<SignatureHistogram> {
    if h.normalized {
        return Ok(h.clone());
    }
    let total = h.total();
    if !(total > 0.0) {
        return Err(Error::EmptyHistogram);
    }
    let mut out = h.map_bins(|w| w / total);
    out.normalized = true;
    Ok(out)
}

/// Sum of absolute bin differences, in `[0, 2]` for probability vectors.
pub fn distance_l1(s: &SignatureHistogram, m: &SignatureHistogram) -> Result<f64> {
    s.same_shape(m)?;
    if !s.normalized || !m.normalized {
        return Err(Error::NotNormalized);
    }
    Ok(s.bins().zip(m.bins()).map(|(a, b)| (a - b).abs()).sum())
}

/// Relative entropy `Σ s_i ln(s_i / m_i)`; bins with `s_i = 0` contribute
/// nothing. Every model bin must be strictly positive.
pub fn distance_kullback(s: &SignatureHistogram, m: &SignatureHistogram) -> Result<f64> {
    s.same_shape(m)?;
    if !s.normalized || !m.normalized {
        return Err(Error::NotNormalized);
    }
    let mut d = 0.0;
    for (i, (si, mi)) in s.bins().zip(m.bins()).enumerate() {
        if mi <= 0.0 {
            return Err(Error::ZeroModelBin(i));
        }
        if si > 0.0 {
            d += si * (si / mi).ln();
        }
    }
    Ok(d)
}

pub fn distance(measure: Measure, s: &SignatureHistogram, m: &SignatureHistogram) -> Result<f64> {
    match measure {
        Measure::L1 => distance_l1(s, m),
        Measure::Kullback => distance_kullback(s, m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_bin(non_edge: f64, edge: f64) -> SignatureHistogram {
        SignatureHistogram::from_bins(1, 1, non_edge, vec![edge]).unwrap()
    }

    #[test]
    fn normalize_divides_by_total() {
        let h = two_bin(9.0, 1.0);
        let n = normalize_histogram(&h).unwrap();
        assert!(n.is_normalized());
        assert!((n.non_edge() - 0.9).abs() < 1e-15);
        assert!((n.edge(0, 0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn normalize_three_bins() {
        let h = SignatureHistogram::from_bins(2, 1, 4.0, vec![4.0, 2.0]).unwrap();
        let n = normalize_histogram(&h).unwrap();
        let bins: Vec<f64> = n.bins().collect();
        for (got, want) in bins.iter().zip([0.4, 0.4, 0.2]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_is_idempotent() {
        let n = normalize_histogram(&two_bin(3.0, 1.0)).unwrap();
        assert_eq!(normalize_histogram(&n).unwrap(), n);
    }

    #[test]
    fn normalize_rejects_empty() {
        let h = SignatureHistogram::zeros(2, 2).unwrap();
        assert!(matches!(normalize_histogram(&h), Err(Error::EmptyHistogram)));
    }

    #[test]
    fn zero_bin_counts_are_rejected() {
        assert!(SignatureHistogram::zeros(0, 4).is_err());
    }

    #[test]
    fn l1_examples() {
        let a = two_bin(0.5, 0.5);
        assert_eq!(distance_l1(&a, &a).unwrap(), 0.0);
        assert_eq!(distance_l1(&two_bin(1.0, 0.0), &two_bin(0.0, 1.0)).unwrap(), 2.0);
        assert!((distance_l1(&a, &two_bin(0.25, 0.75)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn l1_requires_normalized_input() {
        let raw = two_bin(3.0, 1.0);
        assert!(matches!(distance_l1(&raw, &raw), Err(Error::NotNormalized)));
    }

    #[test]
    fn shape_mismatch() {
        let a = SignatureHistogram::from_bins(1, 2, 0.5, vec![0.25, 0.25]).unwrap();
        let b = SignatureHistogram::from_bins(2, 1, 0.5, vec![0.25, 0.25]).unwrap();
        assert!(matches!(distance_l1(&a, &b), Err(Error::HistogramShape(_))));
        assert!(matches!(distance_kullback(&a, &b), Err(Error::HistogramShape(_))));
    }

    #[test]
    fn kullback_examples() {
        // 0.5 ln(0.5/0.25) + 0.5 ln(0.5/0.75) = 0.5 ln(4/3)
        let d = distance_kullback(&two_bin(0.5, 0.5), &two_bin(0.25, 0.75)).unwrap();
        assert!((d - 0.143_841_036_225_890_3).abs() < 1e-12, "{d}");
        let d = distance_kullback(&two_bin(1.0, 0.0), &two_bin(0.5, 0.5)).unwrap();
        assert!((d - std::f64::consts::LN_2).abs() < 1e-15);
        let m = two_bin(0.3, 0.7);
        assert_eq!(distance_kullback(&m, &m).unwrap(), 0.0);
    }

    #[test]
    fn kullback_rejects_zero_model_bin() {
        let d = distance_kullback(&two_bin(0.5, 0.5), &two_bin(1.0, 0.0));
        assert!(matches!(d, Err(Error::ZeroModelBin(1))));
    }

    #[test]
    fn edge_index_binning() {
        let h = SignatureHistogram::zeros(8, 8).unwrap();
        assert_eq!(h.edge_index(0.0, 0), 0);
        assert_eq!(h.edge_index(TAU - 1e-15, 255), 63);
        assert_eq!(h.edge_index(std::f64::consts::PI, 128), 4 * 8 + 4);
        assert_eq!(h.edge_index(0.1, 31), 0);
        assert_eq!(h.edge_index(0.1, 32), 1);
    }

    #[test]
    fn measure_parses() {
        assert_eq!("L1".parse::<Measure>().unwrap(), Measure::L1);
        assert_eq!("kullback".parse::<Measure>().unwrap(), Measure::Kullback);
        assert!("cosine".parse::<Measure>().is_err());
    }

    fn probability(raw: Vec<f64>) -> SignatureHistogram {
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let h = SignatureHistogram::from_bins(2, 2, probs[0], probs[1..].to_vec()).unwrap();
        normalize_histogram(&h).unwrap()
    }

    proptest! {
        #[test]
        fn l1_metric_axioms(
            a in proptest::collection::vec(0.01f64..1.0, 5),
            b in proptest::collection::vec(0.01f64..1.0, 5),
            c in proptest::collection::vec(0.01f64..1.0, 5),
        ) {
            let (a, b, c) = (probability(a), probability(b), probability(c));
            let ab = distance_l1(&a, &b).unwrap();
            let ba = distance_l1(&b, &a).unwrap();
            let ac = distance_l1(&a, &c).unwrap();
            let cb = distance_l1(&c, &b).unwrap();
            prop_assert!((ab - ba).abs() < 1e-15);
            prop_assert!((0.0..=2.0 + 1e-12).contains(&ab));
            prop_assert!(ab <= ac + cb + 1e-12);
            prop_assert!(distance_l1(&a, &a).unwrap() == 0.0);
        }
    }
}
