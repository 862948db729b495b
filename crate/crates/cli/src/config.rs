//! Pipeline configuration, read from a single JSON file.
//!
//! Every key is optional in the file; missing keys take the documented
//! defaults and command-line flags override both. Relative paths are resolved
//! against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use headpose::constellation::ConstellationModel;
use headpose::features::{Measure, DEFAULT_ANGLE_BINS, DEFAULT_BRIGHTNESS_BINS, DEFAULT_MODEL_FLOOR};
use headpose::imaging::DEFAULT_EDGE_THRESHOLD;
use headpose::pose::{CameraModel, TriangleModel, DEFAULT_NEAR_FRONTAL_THRESHOLD, DEFAULT_SOLVER_TOLERANCE};
use headpose::{Error, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_PEAKS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// One threshold per band, or a single value for every band.
    pub edge_thresholds: Option<Vec<f64>>,
    pub angle_bins: usize,
    pub brightness_bins: usize,
    pub measure: Measure,
    pub model_floor: f64,
    pub features: Vec<FeatureConfig>,
    pub constellation: Option<ConstellationModel>,
    pub camera: Option<CameraConfig>,
    pub triangle: Option<TriangleModel>,
    pub frontal_offset: [f64; 2],
    pub near_frontal_threshold: f64,
    pub solver_tolerance: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            edge_thresholds: None,
            angle_bins: DEFAULT_ANGLE_BINS,
            brightness_bins: DEFAULT_BRIGHTNESS_BINS,
            measure: Measure::default(),
            model_floor: DEFAULT_MODEL_FLOOR,
            features: Vec::new(),
            constellation: None,
            camera: None,
            triangle: None,
            frontal_offset: [0.0, 0.0],
            near_frontal_threshold: DEFAULT_NEAR_FRONTAL_THRESHOLD,
            solver_tolerance: DEFAULT_SOLVER_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub name: String,
    /// Model file written by `train` and read by `detect`.
    pub model: PathBuf,
    /// Stencil used when training; `detect` takes the mask from the model file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stencil: Option<StencilSpec>,
    /// Suppression radius; defaults to half the larger stencil side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<usize>,
    #[serde(default = "default_max_peaks")]
    pub max_peaks: usize,
}

fn default_max_peaks() -> usize {
    DEFAULT_MAX_PEAKS
}

/// A stencil image (P5, interior > 127) or a solid rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StencilSpec {
    Image(PathBuf),
    Rectangle { width: usize, height: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub focal_length: f64,
    /// Defaults to the image center.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub principal_point: Option<[f64; 2]>,
}

impl CameraConfig {
    pub fn camera(&self, image_size: Option<(usize, usize)>) -> Result<CameraModel> {
        match (self.principal_point, image_size) {
            (Some([cx, cy]), _) => CameraModel::new(self.focal_length, (cx, cy)),
            (None, Some((w, h))) => CameraModel::centered(self.focal_length, w, h),
            (None, None) => Err(Error::Config("camera.principal_point is required when there is no image".into())),
        }
    }
}

/// Flag values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub measure: Option<Measure>,
    pub top_k: Option<usize>,
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
        let mut config: Self =
            serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, overrides: &Overrides) -> Result<()> {
        if let Some(m) = overrides.measure {
            self.measure = m;
        }
        if let Some(k) = overrides.top_k {
            for f in &mut self.features {
                f.max_peaks = k;
            }
        }
        self.validate()
    }

    fn resolve_paths(&mut self, base: &Path) {
        for f in &mut self.features {
            f.model = base.join(&f.model);
            if let Some(StencilSpec::Image(p)) = &mut f.stencil {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if let Some(t) = &self.edge_thresholds {
            if t.is_empty() || t.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return bad("edge_thresholds must be non-negative numbers".into());
            }
        }
        if !(1..=360).contains(&self.angle_bins) || !(1..=256).contains(&self.brightness_bins) {
            return bad("angle_bins must be in 1..=360 and brightness_bins in 1..=256".into());
        }
        if !(self.model_floor > 0.0 && self.model_floor < 1.0) {
            return bad(format!("model_floor {} must be in (0, 1)", self.model_floor));
        }
        for (i, f) in self.features.iter().enumerate() {
            if f.name.is_empty() {
                return bad(format!("feature {i} has an empty name"));
            }
            if self.features[..i].iter().any(|g| g.name == f.name) {
                return bad(format!("feature {:?} is listed twice", f.name));
            }
            if f.max_peaks == 0 || f.radius == Some(0) {
                return bad(format!("feature {:?}: max_peaks and radius must be positive", f.name));
            }
        }
        if let Some(c) = &self.constellation {
            let names: Vec<&str> = self.features.iter().map(|f| f.name.as_str()).collect();
            let model: Vec<&str> = c.feature_names().iter().map(String::as_str).collect();
            if names != model {
                return bad(format!("constellation features {model:?} do not match the feature list {names:?}"));
            }
        }
        if let Some(cam) = &self.camera {
            let pp_ok = cam.principal_point.is_none_or(|p| p.iter().all(|v| v.is_finite()));
            if !(cam.focal_length.is_finite() && cam.focal_length > 0.0) || !pp_ok {
                return bad("camera.focal_length must be positive".into());
            }
        }
        if let Some(t) = &self.triangle {
            t.validate().map_err(|e| Error::Config(format!("triangle: {e}")))?;
        }
        if !self.frontal_offset.iter().all(|v| v.is_finite()) {
            return bad("frontal_offset must be finite".into());
        }
        if !(self.near_frontal_threshold >= 0.0) {
            return bad("near_frontal_threshold must be non-negative".into());
        }
        if !(self.solver_tolerance > 0.0 && self.solver_tolerance < 1.0) {
            return bad("solver_tolerance must be in (0, 1)".into());
        }
        Ok(())
    }

    /// Thresholds for an image with `bands` bands.
    pub fn thresholds(&self, bands: usize) -> Result<Vec<f64>> {
        match &self.edge_thresholds {
            None => Ok(vec![DEFAULT_EDGE_THRESHOLD; bands]),
            Some(t) if t.len() == 1 => Ok(vec![t[0]; bands]),
            Some(t) if t.len() == bands => Ok(t.clone()),
            Some(t) => Err(Error::Config(format!("{} edge thresholds for a {bands}-band image", t.len()))),
        }
    }

    pub fn require_camera(&self) -> Result<CameraConfig> {
        self.camera.ok_or_else(|| Error::Config("missing camera section".into()))
    }

    pub fn require_triangle(&self) -> Result<TriangleModel> {
        self.triangle.ok_or_else(|| Error::Config("missing triangle section".into()))
    }

    pub fn require_constellation(&self) -> Result<&ConstellationModel> {
        self.constellation.as_ref().ok_or_else(|| Error::Config("missing constellation section".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c: PipelineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert_eq!(c.measure, Measure::Kullback);
        assert_eq!(c.thresholds(3).unwrap(), vec![30.0; 3]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn stencil_forms() {
        let f: FeatureConfig =
            serde_json::from_str(r#"{"name": "e", "model": "e.json", "stencil": {"width": 5, "height": 3}}"#).unwrap();
        assert_eq!(f.stencil, Some(StencilSpec::Rectangle { width: 5, height: 3 }));
        assert_eq!(f.max_peaks, DEFAULT_MAX_PEAKS);
        let f: FeatureConfig = serde_json::from_str(r#"{"name": "e", "model": "e.json", "stencil": "e.pgm"}"#).unwrap();
        assert_eq!(f.stencil, Some(StencilSpec::Image("e.pgm".into())));
    }

    #[test]
    fn flags_override_file() {
        let mut c: PipelineConfig = serde_json::from_str(
            r#"{"measure": "l1", "features": [{"name": "a", "model": "a.json", "max_peaks": 2}]}"#,
        )
        .unwrap();
        c.apply(&Overrides { measure: Some(Measure::Kullback), top_k: Some(7) }).unwrap();
        assert_eq!(c.measure, Measure::Kullback);
        assert_eq!(c.features[0].max_peaks, 7);
        c.apply(&Overrides::default()).unwrap();
        assert_eq!(c.measure, Measure::Kullback);
    }

    #[test]
    fn thresholds_broadcast_and_arity() {
        let c = PipelineConfig { edge_thresholds: Some(vec![12.0]), ..Default::default() };
        assert_eq!(c.thresholds(3).unwrap(), vec![12.0; 3]);
        let c = PipelineConfig { edge_thresholds: Some(vec![1.0, 2.0]), ..Default::default() };
        assert!(c.thresholds(3).is_err());
    }

    #[test]
    fn constellation_must_match_features() {
        let text = r#"{
            "features": [{"name": "a", "model": "a"}, {"name": "b", "model": "b"}],
            "constellation": {"feature_names": ["b", "a"], "mean_distances": [1.0],
                              "covariance": [1.0], "chirality_check": false}
        }"#;
        let c: PipelineConfig = serde_json::from_str(text).unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn indefinite_covariance_is_rejected_at_load() {
        let text = r#"{"constellation": {"feature_names": ["a", "b"], "mean_distances": [1.0],
                       "covariance": [-1.0], "chirality_check": false}}"#;
        assert!(serde_json::from_str::<PipelineConfig>(text).is_err());
    }

    #[test]
    fn paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"features": [{"name": "a", "model": "models/a.json", "stencil": "a.pgm"}]}"#).unwrap();
        let c = PipelineConfig::load(&path).unwrap();
        assert_eq!(c.features[0].model, dir.path().join("models/a.json"));
        assert_eq!(c.features[0].stencil, Some(StencilSpec::Image(dir.path().join("a.pgm"))));
    }

    #[test]
    fn principal_point_defaults_to_center() {
        let cam = CameraConfig { focal_length: 300.0, principal_point: None };
        assert_eq!(cam.camera(Some((320, 240))).unwrap().principal_point, (159.5, 119.5));
        assert!(cam.camera(None).is_err());
    }
}
