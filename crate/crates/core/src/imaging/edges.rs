use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use super::{in_region, Image, SilhouetteMask, EIGHT_NEIGHBORS};
use crate::error::{Error, Result};

/// The forward half of the 8-neighborhood. Scanning every pixel against these
/// four offsets visits each unordered adjacent pair exactly once.
pub const LOWER_HALF_NEIGHBORS: [(i64, i64); 4] = [(1, 0), (-1, 1), (0, 1), (1, 1)];

const MIN_NORMAL_NORM: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgePoint {
    pub x: u32,
    pub y: u32,
    pub band: u8,
    /// Direction from dark toward bright, radians in `[0, 2π)`, y downward.
    pub normal_angle: f64,
    /// Gray level of the point's own pixel.
    pub brightness: u8,
}

/// Per-band edge points plus a per-pixel index for constant-time membership.
#[derive(Debug, Clone)]
pub struct EdgePool {
    width: usize,
    height: usize,
    points: Vec<EdgePoint>,
    index: Vec<[Option<u32>; 3]>,
    dropped_zero_normal: usize,
}

impl EdgePool {
    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, points: Vec::new(), index: vec![[None; 3]; width * height], dropped_zero_normal: 0 }
    }

    /// Adds a point; a second point for the same `(x, y, band)` replaces nothing
    /// and returns `false`.
    pub fn insert(&mut self, point: EdgePoint) -> bool {
        let cell = &mut self.index[point.y as usize * self.width + point.x as usize];
        let slot = &mut cell[point.band as usize];
        if slot.is_some() {
            return false;
        }
        *slot = Some(self.points.len() as u32);
        self.points.push(point);
        true
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn points(&self) -> &[EdgePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points admitted by contrast but discarded for a vanishing local normal.
    pub fn dropped_zero_normal(&self) -> usize {
        self.dropped_zero_normal
    }

    pub fn is_edge(&self, x: usize, y: usize, band: usize) -> bool {
        band < 3 && x < self.width && y < self.height && self.index[y * self.width + x][band].is_some()
    }

    /// All pooled points at one pixel, in band order.
    pub fn at(&self, x: usize, y: usize) -> impl Iterator<Item = &EdgePoint> {
        self.index[y * self.width + x].iter().flatten().map(move |&i| &self.points[i as usize])
    }

    pub fn has_edge_at(&self, x: usize, y: usize) -> bool {
        self.index[y * self.width + x].iter().any(Option::is_some)
    }
}

/// Local edge normal at `(x, y)` in `band`: the sum of neighbor contrasts
/// times the unit offset vectors over in-bounds neighbors. Returns `None` when
/// the sum vanishes.
pub fn compute_edge_normal(img: &Image, x: usize, y: usize, band: usize) -> Result<Option<f64>> {
    if !img.contains(x as i64, y as i64) {
        return Err(Error::OutOfBounds { x: x as i64, y: y as i64, width: img.width(), height: img.height() });
    }
    if band >= img.bands() {
        return Err(Error::InvalidParameter(format!("band {band} of a {}-band image", img.bands())));
    }
    let center = img.get(x, y, band) as f64;
    let (mut nx, mut ny) = (0.0, 0.0);
    for (dx, dy) in EIGHT_NEIGHBORS {
        let (qx, qy) = (x as i64 + dx, y as i64 + dy);
        if !img.contains(qx, qy) {
            continue;
        }
        let diff = img.get(qx as usize, qy as usize, band) as f64 - center;
        let scale = if dx != 0 && dy != 0 { FRAC_1_SQRT_2 } else { 1.0 };
        nx += diff * dx as f64 * scale;
        ny += diff * dy as f64 * scale;
    }
    if nx.hypot(ny) < MIN_NORMAL_NORM {
        return Ok(None);
    }
    let mut angle = ny.atan2(nx);
    if angle < 0.0 {
        angle += TAU;
    }
    // atan2 of a tiny negative y can round up to exactly 2π
    if angle >= TAU {
        angle = 0.0;
    }
    Ok(Some(angle))
}

/// Two-sided color edge detection. Every pair of region pixels `(p, q)` with
/// `q` in the lower half-neighborhood of `p` whose band difference exceeds that
/// band's threshold puts both pixels into the pool for that band.
pub fn detect_color_edges(img: &Image, region: Option<&SilhouetteMask>, thresholds: &[f64]) -> Result<EdgePool> {
    let (w, h, bands) = (img.width(), img.height(), img.bands());
    if let Some(mask) = region {
        mask.check_frame(w, h)?;
    }
    if thresholds.len() != bands {
        return Err(Error::DimensionMismatch(format!("{} thresholds for a {bands}-band image", thresholds.len())));
    }
    if let Some(t) = thresholds.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::InvalidParameter(format!("edge threshold {t}")));
    }

    // bit b set = pixel admitted in band b
    let mut admitted = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            if !in_region(region, x as i64, y as i64) {
                continue;
            }
            for (dx, dy) in LOWER_HALF_NEIGHBORS {
                let (qx, qy) = (x as i64 + dx, y as i64 + dy);
                if !img.contains(qx, qy) || !in_region(region, qx, qy) {
                    continue;
                }
                let (qx, qy) = (qx as usize, qy as usize);
                for (b, &threshold) in thresholds.iter().enumerate() {
                    let diff = (img.get(x, y, b) as f64 - img.get(qx, qy, b) as f64).abs();
                    if diff > threshold {
                        admitted[y * w + x] |= 1 << b;
                        admitted[qy * w + qx] |= 1 << b;
                    }
                }
            }
        }
    }

    let mut pool = EdgePool::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            let bits = admitted[y * w + x];
            if bits == 0 {
                continue;
            }
            let brightness = img.brightness(x, y);
            for b in 0..bands {
                if bits & (1 << b) == 0 {
                    continue;
                }
                match compute_edge_normal(img, x, y, b)? {
                    Some(normal_angle) => {
                        pool.insert(EdgePoint { x: x as u32, y: y as u32, band: b as u8, normal_angle, brightness });
                    }
                    None => pool.dropped_zero_normal += 1,
                }
            }
        }
    }
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(w: usize, h: usize, samples: &[u8]) -> Image {
        Image::new(w, h, 1, samples.to_vec()).unwrap()
    }

    fn step_edge() -> Image {
        // columns 0..2 dark, 2..4 bright
        Image::from_fn(4, 3, 1, |x, _, _| if x < 2 { 0 } else { 255 }).unwrap()
    }

    #[test]
    fn constant_image_has_no_edges() {
        let img = Image::filled(6, 5, 3, 120).unwrap();
        for t in [0.0, 30.0] {
            assert!(detect_color_edges(&img, None, &[t; 3]).unwrap().is_empty());
        }
    }

    #[test]
    fn strong_pair_is_two_sided() {
        let pool = detect_color_edges(&gray(2, 1, &[0, 255]), None, &[50.0]).unwrap();
        assert_eq!(pool.len(), 2);
        assert!(pool.is_edge(0, 0, 0) && pool.is_edge(1, 0, 0));
        assert_eq!(pool.at(0, 0).next().unwrap().brightness, 0);
        assert_eq!(pool.at(1, 0).next().unwrap().brightness, 255);
    }

    #[test]
    fn weak_pair_is_ignored() {
        let pool = detect_color_edges(&gray(2, 1, &[100, 120]), None, &[50.0]).unwrap();
        assert!(pool.is_empty());
    }

    #[test]
    fn threshold_is_strict() {
        let pool = detect_color_edges(&gray(2, 1, &[100, 150]), None, &[50.0]).unwrap();
        assert!(pool.is_empty());
    }

    #[test]
    fn threshold_arity_mismatch() {
        let img = Image::filled(2, 2, 3, 0).unwrap();
        assert!(matches!(detect_color_edges(&img, None, &[30.0]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn per_band_thresholds() {
        let img = Image::new(2, 1, 3, vec![0, 0, 0, 40, 40, 40]).unwrap();
        let pool = detect_color_edges(&img, None, &[30.0, 50.0, 30.0]).unwrap();
        let bands: Vec<u8> = pool.at(0, 0).map(|p| p.band).collect();
        assert_eq!(bands, vec![0, 2]);
    }

    #[test]
    fn region_excludes_pairs() {
        let img = gray(2, 1, &[0, 255]);
        let region = SilhouetteMask::from_fn(2, 1, |x, _| x == 0);
        assert!(detect_color_edges(&img, Some(&region), &[50.0]).unwrap().is_empty());
    }

    #[test]
    fn normal_points_toward_bright() {
        let img = step_edge();
        let dark = compute_edge_normal(&img, 1, 1, 0).unwrap().unwrap();
        let bright = compute_edge_normal(&img, 2, 1, 0).unwrap().unwrap();
        assert!(dark.abs() < 1e-12, "{dark}");
        // the bright side sees the same dark-to-bright direction
        assert!(bright.abs() < 1e-12, "{bright}");
    }

    #[test]
    fn flat_interior_has_no_normal() {
        let img = Image::filled(3, 3, 1, 9).unwrap();
        assert_eq!(compute_edge_normal(&img, 1, 1, 0).unwrap(), None);
    }

    #[test]
    fn normal_out_of_bounds() {
        let img = Image::filled(3, 3, 1, 9).unwrap();
        assert!(matches!(compute_edge_normal(&img, 3, 0, 0), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn checkerboard_points_are_dropped() {
        let img = Image::from_fn(5, 5, 1, |x, y, _| if (x + y) % 2 == 0 { 0 } else { 200 }).unwrap();
        let pool = detect_color_edges(&img, None, &[30.0]).unwrap();
        // interior pixels see a symmetric neighborhood and cancel out
        assert!(pool.dropped_zero_normal() >= 9);
        assert!(!pool.is_edge(2, 2, 0));
    }
}
