//! The four subcommands as library functions, so they can be driven from
//! tests without spawning a process.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use headpose::constellation::{mutual_distances, ConstellationModel, DEFAULT_FEATURE_NAMES};
use headpose::features::{
    build_likelihood_map, load_mask_stencil, train_model, FeatureMask, FeatureModel, Measure, TrainingSample,
};
use headpose::imaging::{detect_color_edges, load_image, minmax_sharpen, save_image, EdgePool, Image, SilhouetteMask};
use headpose::peaks::{default_radius, invert_map, suppress_non_maxima};
use headpose::pose::{
    select_pose, shift_vector, solve_triangle_pose, CameraModel, PoseAngles, ShiftVector, TriangleModel,
};
use headpose::synth::{
    eye_template, generate_scene, mouth_template, random_fixture, render_fixture, Fixture, SceneRanges, SyntheticScene,
};
use headpose::{constellation::best_constellation, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{CameraConfig, FeatureConfig, PipelineConfig, StencilSpec};
use crate::report::{
    DetectionReport, FeaturePoint, FeatureReport, Metadata, PeakReport, PoseReport, ShiftReport, SolutionReport,
};

/// Labeled training images, as read from a samples file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSet {
    pub samples: Vec<SampleSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub image: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    /// Feature name to anchor pixel.
    pub anchors: BTreeMap<String, [i64; 2]>,
}

impl TrainingSet {
    pub fn load(path: &Path) -> headpose::Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
        let mut set: Self =
            serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for s in &mut set.samples {
            s.image = base.join(&s.image);
            if let Some(m) = &mut s.mask {
                *m = base.join(&*m);
            }
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainedFeature {
    pub name: String,
    pub model: PathBuf,
    pub training_count: usize,
}

/// Search region for an image: the mask file when given, else the whole frame.
pub fn load_region(image: &Image, mask: Option<&Path>) -> headpose::Result<SilhouetteMask> {
    let region = match mask {
        Some(path) => SilhouetteMask::from_image(&load_image(path)?)?,
        None => SilhouetteMask::full(image.width(), image.height()),
    };
    if region.width() != image.width() || region.height() != image.height() {
        return Err(Error::DimensionMismatch(format!(
            "mask is {}x{}, image is {}x{}",
            region.width(),
            region.height(),
            image.width(),
            image.height()
        )));
    }
    if region.count() == 0 {
        return Err(Error::EmptySilhouette);
    }
    Ok(region)
}

/// Sharpens inside the region and extracts its color edges.
pub fn extract_edges(config: &PipelineConfig, image: &Image, region: &SilhouetteMask) -> headpose::Result<EdgePool> {
    let sharp = minmax_sharpen(image, Some(region))?;
    detect_color_edges(&sharp, Some(region), &config.thresholds(image.bands())?)
}

fn feature_mask(feature: &FeatureConfig) -> anyhow::Result<FeatureMask> {
    match &feature.stencil {
        Some(StencilSpec::Image(path)) => {
            let img = load_image(path).with_context(|| format!("stencil of feature {:?}", feature.name))?;
            Ok(load_mask_stencil(feature.name.clone(), &img)?)
        }
        Some(StencilSpec::Rectangle { width, height }) => {
            Ok(FeatureMask::rectangle(feature.name.clone(), *width, *height)?)
        }
        None => Err(Error::Config(format!("feature {:?} has no stencil to train with", feature.name)).into()),
    }
}

/// Trains one model per configured feature and writes it to the feature's model path.
pub fn train(config: &PipelineConfig, set: &TrainingSet) -> anyhow::Result<Vec<TrainedFeature>> {
    if config.features.is_empty() {
        return Err(Error::Config("no features configured".into()).into());
    }
    let masks = config.features.iter().map(feature_mask).collect::<anyhow::Result<Vec<_>>>()?;
    let mut pools = Vec::with_capacity(set.samples.len());
    for s in &set.samples {
        let pool = (|| {
            let img = load_image(&s.image)?;
            let region = load_region(&img, s.mask.as_deref())?;
            extract_edges(config, &img, &region)
        })()
        .with_context(|| format!("sample {}", s.image.display()))?;
        pools.push(pool);
    }
    let mut trained = Vec::new();
    for (feature, mask) in config.features.iter().zip(&masks) {
        let mut samples = Vec::new();
        for (s, pool) in set.samples.iter().zip(&pools) {
            if let Some(&[x, y]) = s.anchors.get(&feature.name) {
                samples.push(TrainingSample { edges: pool, anchor: (x, y) });
            }
        }
        if samples.is_empty() {
            return Err(Error::NoSamples).with_context(|| format!("feature {:?}", feature.name));
        }
        let model = train_model(&samples, mask, config.angle_bins, config.brightness_bins, config.model_floor)
            .with_context(|| format!("feature {:?}", feature.name))?;
        if let Some(dir) = feature.model.parent() {
            fs::create_dir_all(dir).map_err(|source| Error::Write { path: dir.to_path_buf(), source })?;
        }
        model.save(&feature.model)?;
        trained.push(TrainedFeature {
            name: feature.name.clone(),
            model: feature.model.clone(),
            training_count: model.training_count,
        });
    }
    Ok(trained)
}

/// Relative spread assumed for every mean distance when estimating a
/// constellation model; it also keeps the covariance positive-definite when
/// there are few samples.
const CONSTELLATION_SPREAD: f64 = 0.1;

/// Estimates a constellation model from the anchors of every sample that
/// labels all configured features.
pub fn estimate_constellation(config: &PipelineConfig, set: &TrainingSet) -> anyhow::Result<ConstellationModel> {
    let names: Vec<String> = config.features.iter().map(|f| f.name.clone()).collect();
    let arrangements: Vec<Vec<(f64, f64)>> = set
        .samples
        .iter()
        .filter_map(|s| names.iter().map(|n| s.anchors.get(n).map(|&[x, y]| (x as f64, y as f64))).collect())
        .collect();
    Ok(fit_constellation(names, &arrangements, CONSTELLATION_SPREAD)?)
}

/// Mean and covariance of the unit-normalized mutual-distance vectors of
/// `arrangements`, with `(spread * mean level)^2` added to the diagonal.
fn fit_constellation(
    names: Vec<String>,
    arrangements: &[Vec<(f64, f64)>],
    spread: f64,
) -> headpose::Result<ConstellationModel> {
    let mut vectors = Vec::new();
    for points in arrangements {
        let v = mutual_distances(points)?;
        let norm = v.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm > 0.0 {
            vectors.push(v.iter().map(|d| d / norm).collect::<Vec<f64>>());
        }
    }
    if vectors.is_empty() {
        return Err(Error::NoSamples);
    }
    let d = vectors[0].len();
    let n = vectors.len() as f64;
    let mean: Vec<f64> = (0..d).map(|i| vectors.iter().map(|v| v[i]).sum::<f64>() / n).collect();
    let mean_level = mean.iter().sum::<f64>() / d as f64;
    let ridge = (spread * mean_level).powi(2);
    let mut cov = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let c: f64 = vectors.iter().map(|v| (v[i] - mean[i]) * (v[j] - mean[j])).sum::<f64>() / n;
            cov[i * d + j] = c + if i == j { ridge } else { 0.0 };
        }
    }
    ConstellationModel::new(names, mean, cov, d == 3)
}

/// Projected normal direction drawn on overlays, in pixels.
const OVERLAY_NORMAL_LENGTH: f64 = 40.0;

/// RGB copy of `image` with a cross on every constellation point and a line
/// from their centroid along the image projection of the normal.
pub fn render_overlay(image: &Image, points: &[(f64, f64)], normal: [f64; 3]) -> Image {
    let mut out = image.to_rgb();
    let mut plot = |x: i64, y: i64, rgb: [u8; 3]| {
        if out.contains(x, y) {
            for (b, v) in rgb.into_iter().enumerate() {
                out.set(x as usize, y as usize, b, v);
            }
        }
    };
    let n = points.len().max(1) as f64;
    let cx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.1).sum::<f64>() / n;
    let len = normal[0].hypot(normal[1]);
    if len > 1e-9 {
        let steps = OVERLAY_NORMAL_LENGTH as i64 * 2;
        for i in 0..=steps {
            let t = i as f64 / steps as f64 * OVERLAY_NORMAL_LENGTH * len;
            let x = cx + t * normal[0] / len;
            let y = cy + t * normal[1] / len;
            plot(x.round() as i64, y.round() as i64, [0, 255, 0]);
        }
    }
    for &(x, y) in points {
        let (x, y) = (x.round() as i64, y.round() as i64);
        for d in -3..=3 {
            plot(x + d, y, [255, 0, 0]);
            plot(x, y + d, [255, 0, 0]);
        }
    }
    out
}

/// Everything `detect` produces.
#[derive(Debug, Clone)]
pub struct Detection {
    pub report: PoseReport,
    pub image: Image,
}

impl Detection {
    pub fn overlay(&self) -> Image {
        let points: Vec<(f64, f64)> = self.report.constellation.iter().map(|p| (p.x, p.y)).collect();
        let normal = self.report.solutions[self.report.selected].normal;
        render_overlay(&self.image, &points, normal)
    }
}

fn three_features(config: &PipelineConfig) -> headpose::Result<()> {
    if config.features.len() != 3 {
        return Err(Error::Config(format!(
            "pose estimation needs exactly three features (left eye, right eye, mouth), found {}",
            config.features.len()
        )));
    }
    Ok(())
}

/// Full pipeline on one image.
pub fn detect(config: &PipelineConfig, image_path: &Path, mask_path: Option<&Path>) -> anyhow::Result<Detection> {
    three_features(config)?;
    let constellation_model = config.require_constellation()?;
    let camera_config = config.require_camera()?;
    let tri = config.require_triangle()?;
    let models = config
        .features
        .iter()
        .map(|f| FeatureModel::load(&f.model).with_context(|| format!("feature {:?}", f.name)))
        .collect::<anyhow::Result<Vec<_>>>()?;

    let image = load_image(image_path)?;
    let region = load_region(&image, mask_path)?;
    let camera = camera_config.camera(Some((image.width(), image.height())))?;
    let edges = extract_edges(config, &image, &region)?;
    if edges.is_empty() {
        return Err(Error::NoEdgePoints.into());
    }

    let mut candidates = Vec::new();
    let mut feature_reports = Vec::new();
    for (feature, model) in config.features.iter().zip(&models) {
        let map = build_likelihood_map(&edges, Some(&region), model, config.measure)?;
        let scores = match invert_map(&map) {
            Err(Error::NoValidEntries) => return Err(Error::NoValidPeak(feature.name.clone()).into()),
            other => other?,
        };
        let radius = feature.radius.unwrap_or_else(|| default_radius(&model.mask));
        let peaks = suppress_non_maxima(&scores, radius, feature.max_peaks)?;
        if peaks.is_empty() {
            return Err(Error::NoValidPeak(feature.name.clone()).into());
        }
        feature_reports.push(FeatureReport {
            name: feature.name.clone(),
            radius,
            peaks: peaks.iter().map(PeakReport::from).collect(),
        });
        candidates.push(peaks);
    }
    let best = best_constellation(&candidates, constellation_model)?;
    let positions = best.positions.clone();
    let offset = (config.frontal_offset[0], config.frontal_offset[1]);
    let shift = shift_vector(&positions, &region, offset, config.near_frontal_threshold)?;
    let (solutions, selected) = solve_and_select(&positions, &camera, &tri, config.solver_tolerance, &shift)?;

    let names: Vec<String> = config.features.iter().map(|f| f.name.clone()).collect();
    let metadata = Metadata::new("detect")
        .input("image", image_path.display())
        .input("mask", mask_path.map_or("(full frame)".into(), |p| p.display().to_string()))
        .input("measure", format!("{:?}", config.measure).to_lowercase());
    let report = PoseReport {
        detection: Some(DetectionReport::new(edges.len(), edges.dropped_zero_normal(), feature_reports, &best)),
        ..pose_report(&names, &positions, &solutions, selected, &shift, metadata)
    };
    Ok(Detection { report, image })
}

/// Solves for the triangle `(left, right, mouth)` and picks a solution.
fn solve_and_select(
    positions: &[(f64, f64)],
    camera: &CameraModel,
    tri: &TriangleModel,
    tol: f64,
    shift: &ShiftVector,
) -> headpose::Result<(Vec<headpose::pose::PoseSolution>, usize)> {
    let solutions = solve_triangle_pose([positions[2], positions[0], positions[1]], camera, tri, tol)?;
    let selected = select_pose(&solutions, shift)?;
    Ok((solutions, selected))
}

fn pose_report(
    names: &[String],
    positions: &[(f64, f64)],
    solutions: &[headpose::pose::PoseSolution],
    selected: usize,
    shift: &ShiftVector,
    metadata: Metadata,
) -> PoseReport {
    PoseReport {
        schema_version: crate::report::SCHEMA_VERSION,
        constellation: names
            .iter()
            .zip(positions)
            .map(|(n, p)| FeaturePoint { feature: n.clone(), x: p.0, y: p.1 })
            .collect(),
        solutions: solutions.iter().map(SolutionReport::from).collect(),
        selected,
        angles_deg: solutions[selected].angles,
        shift_vector: ShiftReport::from(shift),
        detection: None,
        metadata,
    }
}

/// Standalone pose query for image points of the left eye, right eye and mouth.
pub fn pose(
    config: &PipelineConfig,
    left: (f64, f64),
    right: (f64, f64),
    mouth: (f64, f64),
    shift: Option<(f64, f64)>,
) -> anyhow::Result<PoseReport> {
    let camera = config.require_camera()?.camera(None)?;
    let tri = config.require_triangle()?;
    let shift = shift.map_or_else(ShiftVector::frontal, |s| ShiftVector::new(s, config.near_frontal_threshold));
    let positions = [left, right, mouth];
    let (solutions, selected) = solve_and_select(&positions, &camera, &tri, config.solver_tolerance, &shift)?;
    let names: Vec<String> = if config.features.len() == 3 {
        config.features.iter().map(|f| f.name.clone()).collect()
    } else {
        DEFAULT_FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
    };
    let fmt = |p: (f64, f64)| format!("{},{}", p.0, p.1);
    let metadata = Metadata::new("pose")
        .input("left", fmt(left))
        .input("right", fmt(right))
        .input("mouth", fmt(mouth))
        .input("shift", shift.s.0.to_string() + "," + &shift.s.1.to_string());
    Ok(pose_report(&names, &positions, &solutions, selected, &shift, metadata))
}

/// Settings for `synth`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub seed: u64,
    pub noise: u8,
    pub canvas: (usize, usize),
    pub focal_length: f64,
    /// Fixed rotation; random within the fixture ranges when absent.
    pub angles: Option<PoseAngles>,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { seed: 0, noise: 0, canvas: (320, 240), focal_length: 300.0, angles: None }
    }
}

/// Ground truth written next to a synthetic image.
#[derive(Debug, Clone, Serialize)]
pub struct SynthTruth<'a> {
    pub scene: &'a headpose::synth::SyntheticScene,
    pub positions: BTreeMap<String, [i64; 2]>,
    pub silhouette: headpose::synth::Ellipse,
    pub noise: u8,
    pub seed: u64,
}

/// Feature stencils used for synthetic fixtures: each template plus this many
/// pixels on every side.
pub const SYNTH_STENCIL_MARGIN: usize = 1;

/// Renders a fixture for the options.
pub fn synth_fixture(options: &SynthOptions) -> headpose::Result<Fixture> {
    let (w, h) = options.canvas;
    let camera = CameraModel::centered(options.focal_length, w, h)?;
    let mut ranges = SceneRanges::fixture();
    ranges.frame = Some((w, h, 12.0));
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut fixture = match options.angles {
        None => random_fixture(&mut rng, &camera, options.canvas, &ranges, options.noise)?,
        Some(angles) => {
            let mut found = None;
            for _ in 0..1000 {
                let base = headpose::synth::random_scene(&mut rng, &camera, &ranges)?;
                let Ok(scene) = generate_scene(&base.tri, angles, base.translation, &camera) else { continue };
                let noise_seed = rng.gen();
                if let Ok(f) = render_fixture(&scene, options.canvas, options.noise, noise_seed) {
                    found = Some(f);
                    break;
                }
            }
            found.ok_or_else(|| Error::InvalidScene("no fixture fits the canvas at that rotation".into()))?
        }
    };
    fixture.scene.seed = Some(options.seed);
    Ok(fixture)
}

/// Poses drawn when fitting a fixture's constellation model.
const CONSTELLATION_POSES: usize = 2000;

/// Ridge for pose-sampled constellation models; the sampled spread already
/// covers the pose range, so this only absorbs pixel rounding.
const SAMPLED_SPREAD: f64 = 0.02;

/// Constellation model of the fixture's head seen at its placement under
/// rotations drawn from the fixture ranges.
fn pose_sampled_constellation(scene: &SyntheticScene, names: Vec<String>) -> headpose::Result<ConstellationModel> {
    let ranges = SceneRanges::fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut arrangements = Vec::with_capacity(CONSTELLATION_POSES);
    while arrangements.len() < CONSTELLATION_POSES {
        let angles = PoseAngles {
            yaw: rng.gen_range(-ranges.max_yaw..=ranges.max_yaw),
            pitch: rng.gen_range(-ranges.max_pitch..=ranges.max_pitch),
            roll: rng.gen_range(-ranges.max_roll..=ranges.max_roll),
        };
        if let Ok(s) = generate_scene(&scene.tri, angles, scene.translation, &scene.camera) {
            arrangements.push(s.feature_positions().to_vec());
        }
    }
    fit_constellation(names, &arrangements, SAMPLED_SPREAD)
}

/// Pipeline configuration matching a synthetic fixture, with model files
/// under `models/`.
pub fn synth_config(fixture: &Fixture) -> headpose::Result<PipelineConfig> {
    let scene = &fixture.scene;
    let (eye, mouth) = (eye_template(), mouth_template());
    let stencil = |t: &headpose::synth::Template| StencilSpec::Rectangle {
        width: t.width + 2 * SYNTH_STENCIL_MARGIN,
        height: t.height + 2 * SYNTH_STENCIL_MARGIN,
    };
    // both eye features match either eye, so they keep one spare candidate
    // beyond the two eyes; the mouth keeps one beyond itself
    let features: Vec<FeatureConfig> = [("left_eye", &eye, 3), ("right_eye", &eye, 3), ("mouth", &mouth, 2)]
        .into_iter()
        .map(|(name, t, max_peaks)| FeatureConfig {
            name: name.into(),
            model: PathBuf::from(format!("models/{name}.json")),
            stencil: Some(stencil(t)),
            radius: None,
            max_peaks,
        })
        .collect();
    let constellation = pose_sampled_constellation(scene, features.iter().map(|f| f.name.clone()).collect())?;
    let offset = headpose::synth::frontal_offset(scene)?;
    Ok(PipelineConfig {
        features,
        constellation: Some(constellation),
        camera: Some(CameraConfig {
            focal_length: scene.camera.focal_length,
            principal_point: Some([scene.camera.principal_point.0, scene.camera.principal_point.1]),
        }),
        triangle: Some(scene.tri),
        frontal_offset: [offset.0, offset.1],
        // the floored Kullback score punishes every noisy bin a clean model
        // never saw; L1 degrades gracefully
        measure: Measure::L1,
        ..PipelineConfig::default()
    })
}

/// Files written by [`synth`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthFiles {
    pub image: PathBuf,
    pub mask: PathBuf,
    pub truth: PathBuf,
    pub samples: PathBuf,
    pub config: PathBuf,
}

fn write_json(path: &Path, value: &impl Serialize) -> headpose::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Write { path: path.to_path_buf(), source })
}

/// Writes `image.ppm`, `mask.pgm`, `truth.json`, `samples.json` and
/// `config.json` for a fresh fixture into `out_dir`.
pub fn synth(options: &SynthOptions, out_dir: &Path) -> anyhow::Result<SynthFiles> {
    let fixture = synth_fixture(options)?;
    fs::create_dir_all(out_dir).map_err(|source| Error::Write { path: out_dir.to_path_buf(), source })?;
    let files = SynthFiles {
        image: out_dir.join("image.ppm"),
        mask: out_dir.join("mask.pgm"),
        truth: out_dir.join("truth.json"),
        samples: out_dir.join("samples.json"),
        config: out_dir.join("config.json"),
    };
    save_image(&fixture.image, &files.image)?;
    save_image(&fixture.mask.to_image(), &files.mask)?;
    let positions: BTreeMap<String, [i64; 2]> =
        DEFAULT_FEATURE_NAMES.iter().zip(fixture.positions).map(|(n, (x, y))| (n.to_string(), [x, y])).collect();
    write_json(
        &files.truth,
        &SynthTruth {
            scene: &fixture.scene,
            positions: positions.clone(),
            silhouette: fixture.silhouette,
            noise: options.noise,
            seed: options.seed,
        },
    )?;
    write_json(
        &files.samples,
        &TrainingSet {
            samples: vec![SampleSpec { image: "image.ppm".into(), mask: Some("mask.pgm".into()), anchors: positions }],
        },
    )?;
    write_json(&files.config, &synth_config(&fixture)?)?;
    Ok(files)
}
