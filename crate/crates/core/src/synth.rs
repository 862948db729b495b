//! Deterministic synthetic scenes and fixtures.
//!
//! A scene places a known triangle in front of a camera and records its exact
//! projections. A fixture additionally renders an image: a flat background, an
//! elliptical head silhouette and feature templates stamped at the projected
//! vertices.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::FeatureMask;
use crate::imaging::{Image, SilhouetteMask};
use crate::pose::{pose_angles, rotation_from_angles, CameraModel, PoseAngles, PoseSolution, TriangleModel};

/// Exact 3D configuration behind a scene, in camera coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub m: [f64; 3],
    pub l: [f64; 3],
    pub r: [f64; 3],
    /// Distances of `M`, `L`, `R` from the camera.
    pub depths: [f64; 3],
    pub normal: [f64; 3],
    pub angles: PoseAngles,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticScene {
    pub tri: TriangleModel,
    pub rotation: PoseAngles,
    pub translation: [f64; 3],
    pub camera: CameraModel,
    /// Exact projections of `M`, `L`, `R`.
    pub projections: [(f64, f64); 3],
    pub ground_truth: GroundTruth,
    pub seed: Option<u64>,
}

impl SyntheticScene {
    /// Projections in feature order: left eye, right eye, mouth.
    pub fn feature_positions(&self) -> [(f64, f64); 3] {
        let [m, l, r] = self.projections;
        [l, r, m]
    }

    /// Image-plane direction of the true normal, the ideal shift vector.
    pub fn normal_direction(&self) -> (f64, f64) {
        (self.ground_truth.normal[0], self.ground_truth.normal[1])
    }
}

/// Vertices of the frontal triangle in the head frame: `L` and `R` on the x
/// axis symmetric about the origin and `M` below them (`y > 0`).
pub fn frontal_triangle(tri: &TriangleModel) -> Result<[Vector3<f64>; 3]> {
    tri.validate()?;
    let (a, b, c) = (tri.ml, tri.mr, tri.lr);
    let xm = (a * a - b * b) / (2.0 * c);
    let ym = (a * a - (xm + c / 2.0).powi(2)).max(0.0).sqrt();
    Ok([Vector3::new(xm, ym, 0.0), Vector3::new(-c / 2.0, 0.0, 0.0), Vector3::new(c / 2.0, 0.0, 0.0)])
}

/// Rotates the frontal triangle, moves its origin to `translation` and projects it.
pub fn generate_scene(
    tri: &TriangleModel,
    rotation: PoseAngles,
    translation: [f64; 3],
    camera: &CameraModel,
) -> Result<SyntheticScene> {
    let rot = rotation_from_angles(&rotation);
    let t = Vector3::from(translation);
    let points = frontal_triangle(tri)?.map(|p| rot * p + t);
    let mut projections = [(0.0, 0.0); 3];
    for (slot, p) in projections.iter_mut().zip(&points) {
        *slot = camera
            .project(p)
            .ok_or_else(|| Error::InvalidScene(format!("vertex {p:?} is not in front of the camera")))?;
    }
    let [pm, pl, pr] = projections;
    let cross = (pl.0 - pm.0) * (pr.1 - pm.1) - (pl.1 - pm.1) * (pr.0 - pm.0);
    let span = [pm, pl, pr].iter().flat_map(|p| [(p.0 - pm.0).abs(), (p.1 - pm.1).abs()]).fold(0.0f64, f64::max);
    if cross.abs() <= 1e-9 * span * span {
        return Err(Error::InvalidScene("projections are collinear".into()));
    }
    let [m, l, r] = points;
    let mut n = (l - m).cross(&(r - m)).normalize();
    if n.z > 0.0 {
        n = -n;
    }
    Ok(SyntheticScene {
        tri: *tri,
        rotation,
        translation,
        camera: *camera,
        projections,
        ground_truth: GroundTruth {
            m: m.into(),
            l: l.into(),
            r: r.into(),
            depths: [m.norm(), l.norm(), r.norm()],
            normal: n.into(),
            angles: rotation,
        },
        seed: None,
    })
}

/// Sampling ranges for [`random_scene`].
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRanges {
    pub max_yaw: f64,
    pub max_pitch: f64,
    pub max_roll: f64,
    pub depth: (f64, f64),
    /// Eye distance as a fraction of the depth.
    pub eye_span: (f64, f64),
    /// Drop of the mouth below the eye line as a fraction of the eye distance.
    pub mouth_drop: (f64, f64),
    /// Largest sideways offset of the triangle as a fraction of the depth.
    pub offset: f64,
    /// Image frame the projections must stay inside, with a margin in pixels.
    pub frame: Option<(usize, usize, f64)>,
}

impl Default for SceneRanges {
    fn default() -> Self {
        Self {
            max_yaw: 45.0,
            max_pitch: 45.0,
            max_roll: 30.0,
            depth: (5.0, 50.0),
            eye_span: (0.25, 0.5),
            mouth_drop: (0.6, 1.2),
            offset: 0.15,
            frame: Some((320, 240, 0.0)),
        }
    }
}

impl SceneRanges {
    /// Moderate poses of a head filling a good part of a 320x240 frame, for
    /// rendered fixtures.
    pub fn fixture() -> Self {
        Self {
            max_yaw: 25.0,
            max_pitch: 20.0,
            max_roll: 15.0,
            depth: (20.0, 40.0),
            eye_span: (0.3, 0.36),
            mouth_drop: (1.0, 1.2),
            offset: 0.05,
            frame: Some((320, 240, 12.0)),
        }
    }
}

const SCENE_ATTEMPTS: usize = 10_000;

/// Draws a random scene from `ranges`, retrying until every vertex projects
/// inside the frame.
pub fn random_scene<R: Rng>(rng: &mut R, camera: &CameraModel, ranges: &SceneRanges) -> Result<SyntheticScene> {
    for _ in 0..SCENE_ATTEMPTS {
        let depth = rng.gen_range(ranges.depth.0..=ranges.depth.1);
        let c = depth * rng.gen_range(ranges.eye_span.0..=ranges.eye_span.1);
        let mx = c * rng.gen_range(-0.25..=0.25);
        let my = c * rng.gen_range(ranges.mouth_drop.0..=ranges.mouth_drop.1);
        let a = (mx + c / 2.0).hypot(my);
        let b = (mx - c / 2.0).hypot(my);
        let Ok(tri) = TriangleModel::new(a, b, c) else { continue };
        let sym = |rng: &mut R, max: f64| if max > 0.0 { rng.gen_range(-max..=max) } else { 0.0 };
        let rotation = PoseAngles {
            yaw: sym(rng, ranges.max_yaw),
            pitch: sym(rng, ranges.max_pitch),
            roll: sym(rng, ranges.max_roll),
        };
        let translation = [depth * sym(rng, ranges.offset), depth * sym(rng, ranges.offset) - my / 2.0, depth];
        let Ok(scene) = generate_scene(&tri, rotation, translation, camera) else { continue };
        let inside = match ranges.frame {
            None => true,
            Some((w, h, margin)) => scene.projections.iter().all(|p| {
                p.0 >= margin && p.1 >= margin && p.0 <= w as f64 - 1.0 - margin && p.1 <= h as f64 - 1.0 - margin
            }),
        };
        if inside {
            return Ok(scene);
        }
    }
    Err(Error::InvalidScene("no scene satisfies the sampling ranges".into()))
}

/// Same as [`random_scene`] with a seeded generator; the seed is recorded.
pub fn seeded_scene(seed: u64, camera: &CameraModel, ranges: &SceneRanges) -> Result<SyntheticScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene = random_scene(&mut rng, camera, ranges)?;
    scene.seed = Some(seed);
    Ok(scene)
}

/// Axis-aligned elliptical silhouette.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub radii: (f64, f64),
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let dx = (x - self.center.0) / self.radii.0;
        let dy = (y - self.center.1) / self.radii.1;
        dx * dx + dy * dy <= 1.0
    }

    pub fn to_mask(&self, width: usize, height: usize) -> SilhouetteMask {
        SilhouetteMask::from_fn(width, height, |x, y| self.contains(x as f64, y as f64))
    }
}

/// Small RGB pattern stamped with its anchor on a target pixel. `None` cells
/// are transparent.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub width: usize,
    pub height: usize,
    pub anchor: (usize, usize),
    pub pixels: Vec<Option<[u8; 3]>>,
}

impl Template {
    pub fn from_fn(width: usize, height: usize, f: impl Fn(i64, i64) -> Option<[u8; 3]>) -> Self {
        let anchor = (width / 2, height / 2);
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x as i64 - anchor.0 as i64, y as i64 - anchor.1 as i64));
            }
        }
        Self { width, height, anchor, pixels }
    }

    /// Offsets of the opaque cells relative to the anchor, with their colors.
    pub fn cells(&self) -> impl Iterator<Item = ((i64, i64), [u8; 3])> + '_ {
        self.pixels.iter().enumerate().filter_map(move |(i, p)| {
            p.map(|rgb| {
                (((i % self.width) as i64 - self.anchor.0 as i64, (i / self.width) as i64 - self.anchor.1 as i64), rgb)
            })
        })
    }

    /// Rectangular feature mask covering the template plus `margin` pixels on each side.
    pub fn feature_mask(&self, name: &str, margin: usize) -> Result<FeatureMask> {
        FeatureMask::rectangle(name, self.width + 2 * margin, self.height + 2 * margin)
    }
}

/// Dark almond with a bright glint.
pub fn eye_template() -> Template {
    Template::from_fn(13, 7, |dx, dy| {
        let r = (dx as f64 / 6.0).powi(2) + (dy as f64 / 3.0).powi(2);
        if dx.abs() <= 1 && dy.abs() <= 1 {
            Some([235, 235, 230])
        } else if r <= 1.0 {
            Some([45, 30, 25])
        } else {
            None
        }
    })
}

/// Wide reddish bar with a darker center line broken by a light gap.
pub fn mouth_template() -> Template {
    Template::from_fn(19, 5, |dx, dy| {
        if dy.abs() <= 1 && dx.abs() <= 2 {
            Some([235, 230, 220])
        } else if dy == 0 && dx.abs() <= 7 {
            Some([120, 30, 45])
        } else if dx.abs() <= 9 - (dy.abs() == 2) as i64 * 2 {
            Some([190, 75, 95])
        } else {
            None
        }
    })
}

/// Colors of the flat regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Palette {
    pub background: [u8; 3],
    pub silhouette: [u8; 3],
}

impl Default for Palette {
    fn default() -> Self {
        Self { background: [150, 185, 220], silhouette: [200, 160, 135] }
    }
}

/// Renders the silhouette and stamps `templates[i]` at `positions[i]`.
///
/// Every opaque template cell must land inside the silhouette. Noise, when
/// non-zero, adds an independent uniform integer in `[-noise, noise]` to every
/// sample and clamps to `[0, 255]`.
pub fn render_planted_template(
    canvas: (usize, usize),
    silhouette: &Ellipse,
    templates: &[&Template],
    positions: &[(i64, i64)],
    palette: &Palette,
    noise: u8,
    seed: u64,
) -> Result<(Image, SilhouetteMask)> {
    if templates.len() != positions.len() {
        return Err(Error::InvalidParameter(format!(
            "{} templates for {} positions",
            templates.len(),
            positions.len()
        )));
    }
    let (w, h) = canvas;
    let mask = silhouette.to_mask(w, h);
    let mut img = Image::from_fn(w, h, 3, |x, y, b| {
        if mask.contains(x as i64, y as i64) {
            palette.silhouette[b]
        } else {
            palette.background[b]
        }
    })?;
    for (i, (tpl, &(px, py))) in templates.iter().zip(positions).enumerate() {
        for ((dx, dy), rgb) in tpl.cells() {
            let (x, y) = (px + dx, py + dy);
            if !mask.contains(x, y) {
                return Err(Error::TemplateOutsideSilhouette(i));
            }
            for (b, v) in rgb.into_iter().enumerate() {
                img.set(x as usize, y as usize, b, v);
            }
        }
    }
    if noise > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amp = noise as i32;
        for y in 0..h {
            for x in 0..w {
                for b in 0..3 {
                    let v = img.get(x, y, b) as i32 + rng.gen_range(-amp..=amp);
                    img.set(x, y, b, v.clamp(0, 255) as u8);
                }
            }
        }
    }
    Ok((img, mask))
}

/// A rendered scene with everything needed to train and check the detector.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub scene: SyntheticScene,
    pub image: Image,
    pub mask: SilhouetteMask,
    pub silhouette: Ellipse,
    /// Planted anchors in feature order: left eye, right eye, mouth.
    pub positions: [(i64, i64); 3],
}

/// How far behind the feature plane the head center sits, relative to the eye distance.
const HEAD_DEPTH: f64 = 0.8;
// silhouette half-axes relative to the projected eye distance and mouth drop
const HEAD_WIDTH: f64 = 0.95;
const HEAD_HEIGHT: f64 = 1.15;
const TEMPLATE_CLEARANCE: f64 = 12.0;

/// Moves each vertex along the ray through its nearest pixel center, keeping
/// its depth, and rebuilds the scene from the moved triangle. The result
/// projects exactly onto integer pixels, so a rendered image carries its pose
/// without rounding loss.
pub fn snap_to_pixels(scene: &SyntheticScene) -> Result<SyntheticScene> {
    let camera = &scene.camera;
    let g = &scene.ground_truth;
    let points: Vec<Vector3<f64>> = scene
        .projections
        .iter()
        .zip(g.depths)
        .map(|(p, depth)| camera.ray((p.0.round(), p.1.round())) * depth)
        .collect();
    let (m, l, r) = (points[0], points[1], points[2]);
    let tri = TriangleModel::new((m - l).norm(), (m - r).norm(), (l - r).norm())?;
    let mut n = (l - m).cross(&(r - m)).normalize();
    if n.z > 0.0 {
        n = -n;
    }
    let frame = PoseSolution {
        m: m.into(),
        l: l.into(),
        r: r.into(),
        depths: [m.norm(), l.norm(), r.norm()],
        normal: n.into(),
        residual: 0.0,
        angles: PoseAngles::default(),
    };
    let rotation = pose_angles(&frame)?;
    let mut snapped = generate_scene(&tri, rotation, ((l + r) / 2.0).into(), camera)?;
    snapped.seed = scene.seed;
    Ok(snapped)
}

/// Head center behind the feature triangle and its image position.
fn head_center(scene: &SyntheticScene) -> Result<(Vector3<f64>, (f64, f64))> {
    let [m, l, r] = [scene.ground_truth.m, scene.ground_truth.l, scene.ground_truth.r].map(Vector3::from);
    let centroid = (m + l + r) / 3.0;
    let normal = Vector3::from(scene.ground_truth.normal);
    let head = centroid - normal * (HEAD_DEPTH * scene.tri.lr);
    let center =
        scene.camera.project(&head).ok_or_else(|| Error::InvalidScene("head center is behind the camera".into()))?;
    Ok((head, center))
}

/// Shift vector an ideal detector measures for `scene`: the feature centroid
/// relative to the silhouette center, less the frontal offset.
pub fn expected_shift(scene: &SyntheticScene) -> Result<(f64, f64)> {
    let (_, center) = head_center(scene)?;
    let (ox, oy) = frontal_offset(scene)?;
    let p = scene.projections;
    Ok(((p[0].0 + p[1].0 + p[2].0) / 3.0 - center.0 - ox, (p[0].1 + p[1].1 + p[2].1) / 3.0 - center.1 - oy))
}

/// Offset of the feature centroid from the silhouette center when the same
/// head faces the camera at the same placement. Off-axis placement alone
/// shifts the features by parallax; this is the calibration that removes it.
pub fn frontal_offset(scene: &SyntheticScene) -> Result<(f64, f64)> {
    let frontal = generate_scene(&scene.tri, PoseAngles::default(), scene.translation, &scene.camera)?;
    let (_, center) = head_center(&frontal)?;
    let p = frontal.projections;
    Ok(((p[0].0 + p[1].0 + p[2].0) / 3.0 - center.0, (p[0].1 + p[1].1 + p[2].1) / 3.0 - center.1))
}

/// Renders a fixture for `scene` after snapping it to the pixel grid: the
/// silhouette is an ellipse around the projected head center and the default
/// templates sit at the projections.
pub fn render_fixture(scene: &SyntheticScene, canvas: (usize, usize), noise: u8, seed: u64) -> Result<Fixture> {
    let scene = &snap_to_pixels(scene)?;
    let (head, center) = head_center(scene)?;
    let c = scene.tri.lr;
    let f = scene.camera.focal_length;
    let drop = frontal_triangle(&scene.tri)?[0].y;
    let radii =
        (HEAD_WIDTH * f * c / head.z + TEMPLATE_CLEARANCE, HEAD_HEIGHT * f * drop.max(c) / head.z + TEMPLATE_CLEARANCE);
    let silhouette = Ellipse { center, radii };
    let [pl, pr, pm] = scene.feature_positions().map(|p| (p.0.round() as i64, p.1.round() as i64));
    let positions = [pl, pr, pm];
    let (eye, mouth) = (eye_template(), mouth_template());
    let (image, mask) = render_planted_template(
        canvas,
        &silhouette,
        &[&eye, &eye, &mouth],
        &positions,
        &Palette::default(),
        noise,
        seed,
    )?;
    Ok(Fixture { scene: scene.clone(), image, mask, silhouette, positions })
}

/// Draws scenes from `ranges` until one renders with its whole silhouette
/// inside the canvas.
pub fn random_fixture<R: Rng>(
    rng: &mut R,
    camera: &CameraModel,
    canvas: (usize, usize),
    ranges: &SceneRanges,
    noise: u8,
) -> Result<Fixture> {
    for _ in 0..SCENE_ATTEMPTS {
        let scene = random_scene(rng, camera, ranges)?;
        let noise_seed = rng.gen();
        let Ok(fixture) = render_fixture(&scene, canvas, noise, noise_seed) else { continue };
        let Ellipse { center, radii } = fixture.silhouette;
        let inside = center.0 - radii.0 >= 0.0
            && center.1 - radii.1 >= 0.0
            && center.0 + radii.0 <= (canvas.0 - 1) as f64
            && center.1 + radii.1 <= (canvas.1 - 1) as f64;
        if inside {
            return Ok(fixture);
        }
    }
    Err(Error::InvalidScene("no fixture fits the canvas".into()))
}
