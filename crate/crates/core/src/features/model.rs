use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::histogram::{normalize_histogram, SignatureHistogram};
use super::mask::FeatureMask;
use crate::error::{Error, Result};
use crate::imaging::EdgePool;

/// Lower bound applied to every model bin before renormalizing.
pub const DEFAULT_MODEL_FLOOR: f64 = 1e-6;

const MODEL_FILE_VERSION: u32 = 1;

/// Counts the pixels under `mask` anchored at `at`: pixels with no pooled band
/// go to the non-edge bin, every pooled `(pixel, band)` entry goes to the edge
/// grid. The result is unnormalized.
pub fn collect_signature(
    edges: &EdgePool,
    mask: &FeatureMask,
    at: (i64, i64),
    angle_bins: usize,
    brightness_bins: usize,
) -> Result<SignatureHistogram> {
    if !mask.fits(at.0, at.1, edges.width(), edges.height()) {
        return Err(Error::MaskOutsideFrame { x: at.0, y: at.1 });
    }
    let mut hist = SignatureHistogram::zeros(angle_bins, brightness_bins)?;
    for &(dx, dy) in mask.offsets() {
        let x = (at.0 + dx as i64) as usize;
        let y = (at.1 + dy as i64) as usize;
        let mut any = false;
        for point in edges.at(x, y) {
            hist.add_edge(point.normal_angle, point.brightness, 1.0);
            any = true;
        }
        if !any {
            hist.add_non_edge(1.0);
        }
    }
    Ok(hist)
}

/// A trained feature: its mask and the floored, normalized model signature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureModel {
    pub mask: FeatureMask,
    pub signature: SignatureHistogram,
    pub training_count: usize,
}

/// One training observation: an edge pool and the feature's anchor in it.
#[derive(Debug, Clone, Copy)]
pub struct TrainingSample<'a> {
    pub edges: &'a EdgePool,
    pub anchor: (i64, i64),
}

/// Mean of the normalized signatures, floored bin-wise and renormalized.
pub fn model_from_signatures(mask: FeatureMask, signatures: &[SignatureHistogram], floor: f64) -> Result<FeatureModel> {
    let first = signatures.first().ok_or(Error::NoSamples)?;
    if !(floor.is_finite() && floor > 0.0) {
        return Err(Error::InvalidParameter(format!("model floor {floor}")));
    }
    let mut sum = SignatureHistogram::zeros(first.angle_bins(), first.brightness_bins())?;
    let mut sum_bins = vec![0.0; first.len()];
    for sig in signatures {
        sum.same_shape(sig)?;
        let normalized = normalize_histogram(sig)?;
        for (acc, w) in sum_bins.iter_mut().zip(normalized.bins()) {
            *acc += w;
        }
    }
    let n = signatures.len() as f64;
    let floored: Vec<f64> = sum_bins.iter().map(|w| (w / n).max(floor)).collect();
    sum =
        SignatureHistogram::from_bins(first.angle_bins(), first.brightness_bins(), floored[0], floored[1..].to_vec())?;
    Ok(FeatureModel { mask, signature: normalize_histogram(&sum)?, training_count: signatures.len() })
}

/// Averages the signatures collected at each sample's anchor.
pub fn train_model(
    samples: &[TrainingSample<'_>],
    mask: &FeatureMask,
    angle_bins: usize,
    brightness_bins: usize,
    floor: f64,
) -> Result<FeatureModel> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let signatures = samples
        .iter()
        .map(|s| collect_signature(s.edges, mask, s.anchor, angle_bins, brightness_bins))
        .collect::<Result<Vec<_>>>()?;
    model_from_signatures(mask.clone(), &signatures, floor)
}

#[derive(Serialize, Deserialize)]
struct MaskFile {
    width: usize,
    height: usize,
    anchor: [usize; 2],
    offsets: Vec<[i32; 2]>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    name: String,
    mask: MaskFile,
    angle_bins: usize,
    brightness_bins: usize,
    non_edge: f64,
    edge_bins: Vec<f64>,
    #[serde(default)]
    training_count: usize,
}

impl FeatureModel {
    pub fn name(&self) -> &str {
        self.mask.name()
    }

    pub fn to_json(&self) -> String {
        let mask = &self.mask;
        let file = ModelFile {
            version: MODEL_FILE_VERSION,
            name: mask.name().to_string(),
            mask: MaskFile {
                width: mask.width(),
                height: mask.height(),
                anchor: [mask.anchor().0, mask.anchor().1],
                offsets: mask.offsets().iter().map(|&(dx, dy)| [dx, dy]).collect(),
            },
            angle_bins: self.signature.angle_bins(),
            brightness_bins: self.signature.brightness_bins(),
            non_edge: self.signature.non_edge(),
            edge_bins: self.signature.edge_bins().to_vec(),
            training_count: self.training_count,
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, Error> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Config(format!("feature model: {e}")))?;
        if file.version != MODEL_FILE_VERSION {
            return Err(Error::Config(format!("unsupported model version {}", file.version)));
        }
        let mask = FeatureMask::new(
            file.name,
            file.mask.offsets.iter().map(|&[dx, dy]| (dx, dy)).collect(),
            (file.mask.anchor[0], file.mask.anchor[1]),
            file.mask.width,
            file.mask.height,
        )?;
        let signature =
            SignatureHistogram::from_bins(file.angle_bins, file.brightness_bins, file.non_edge, file.edge_bins)?;
        if !signature.is_normalized() {
            return Err(Error::Config("model signature does not sum to 1".into()));
        }
        if let Some(i) = signature.bins().position(|w| w <= 0.0) {
            return Err(Error::ZeroModelBin(i));
        }
        Ok(Self { mask, signature, training_count: file.training_count })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| Error::Write { path: path.to_path_buf(), source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}
