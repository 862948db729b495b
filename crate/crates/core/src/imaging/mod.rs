//! Raster types, netpbm I/O, min-max sharpening and two-sided color edges.
//!
//! Coordinates are `x` rightward and `y` downward with the origin at the
//! top-left pixel. Samples are stored row-major and band-interleaved.

mod edges;
mod pnm;
mod sharpen;

pub use edges::{compute_edge_normal, detect_color_edges, EdgePoint, EdgePool, LOWER_HALF_NEIGHBORS};
pub use pnm::{load_image, read_pnm, save_image, write_pnm};
pub use sharpen::minmax_sharpen;

use crate::error::{Error, Result};

/// Offsets of the full 8-neighborhood, in raster order.
pub const EIGHT_NEIGHBORS: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Default per-band edge threshold.
pub const DEFAULT_EDGE_THRESHOLD: f64 = 30.0;

/// An 8-bit raster with one (gray) or three (RGB) bands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    bands: usize,
    samples: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, bands: usize, samples: Vec<u8>) -> Result<Self> {
        if bands != 1 && bands != 3 {
            return Err(Error::InvalidImage(format!("{bands} bands (expected 1 or 3)")));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("empty {width}x{height} frame")));
        }
        let expected = width * height * bands;
        if samples.len() != expected {
            return Err(Error::InvalidImage(format!(
                "{} samples for a {width}x{height}x{bands} image (expected {expected})",
                samples.len()
            )));
        }
        Ok(Self { width, height, bands, samples })
    }

    pub fn filled(width: usize, height: usize, bands: usize, value: u8) -> Result<Self> {
        Self::new(width, height, bands, vec![value; width * height * bands])
    }

    /// Builds an image by evaluating `f(x, y, band)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        bands: usize,
        mut f: impl FnMut(usize, usize, usize) -> u8,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(width * height * bands);
        for y in 0..height {
            for x in 0..width {
                for b in 0..bands {
                    samples.push(f(x, y, b));
                }
            }
        }
        Self::new(width, height, bands, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    #[inline]
    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, band: usize) -> u8 {
        self.samples[(y * self.width + x) * self.bands + band]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, band: usize, value: u8) {
        self.samples[(y * self.width + x) * self.bands + band] = value;
    }

    /// Gray level of a pixel: the sole band, or `round((R + G + B) / 3)`.
    pub fn brightness(&self, x: usize, y: usize) -> u8 {
        if self.bands == 1 {
            self.get(x, y, 0)
        } else {
            let sum: u32 = (0..3).map(|b| self.get(x, y, b) as u32).sum();
            // sum / 3 never lands on .5, so (sum + 1) / 3 rounds to nearest
            ((sum + 1) / 3) as u8
        }
    }

    /// Expands a gray image to three identical bands; RGB images are cloned.
    pub fn to_rgb(&self) -> Image {
        if self.bands == 3 {
            return self.clone();
        }
        let samples = self.samples.iter().flat_map(|&v| [v, v, v]).collect();
        Image { width: self.width, height: self.height, bands: 3, samples }
    }
}

/// Binary head-interior region. Masks are stored on disk as P5 images where a
/// sample above 127 marks the interior.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SilhouetteMask {
    width: usize,
    height: usize,
    inside: Vec<bool>,
}

impl SilhouetteMask {
    pub fn new(width: usize, height: usize, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != width * height {
            return Err(Error::DimensionMismatch(format!("{} mask cells for a {width}x{height} frame", inside.len())));
        }
        Ok(Self { width, height, inside })
    }

    /// A mask covering the whole frame.
    pub fn full(width: usize, height: usize) -> Self {
        Self { width, height, inside: vec![true; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut inside = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                inside.push(f(x, y));
            }
        }
        Self { width, height, inside }
    }

    pub fn from_image(img: &Image) -> Result<Self> {
        if img.bands() != 1 {
            return Err(Error::InvalidImage("silhouette masks must be single-band (P5)".into()));
        }
        let inside = img.samples().iter().map(|&v| v > 127).collect();
        Self::new(img.width(), img.height(), inside)
    }

    pub fn to_image(&self) -> Image {
        let samples = self.inside.iter().map(|&b| if b { 255 } else { 0 }).collect();
        Image::new(self.width, self.height, 1, samples).expect("mask dimensions are valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.inside[y as usize * self.width + x as usize]
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Mean position of the interior pixels, or `None` for an empty mask.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.inside[y * self.width + x] {
                    sx += x as f64;
                    sy += y as f64;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }

    /// Returns the mask shifted by `(tx, ty)`; cells shifted in from outside are exterior.
    pub fn translated(&self, tx: i64, ty: i64) -> Self {
        Self::from_fn(self.width, self.height, |x, y| self.contains(x as i64 - tx, y as i64 - ty))
    }

    pub(crate) fn check_frame(&self, width: usize, height: usize) -> Result<()> {
        if self.width != width || self.height != height {
            return Err(Error::DimensionMismatch(format!(
                "mask is {}x{}, image is {width}x{height}",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Membership test that treats a missing region as the whole frame.
#[inline]
pub(crate) fn in_region(region: Option<&SilhouetteMask>, x: i64, y: i64) -> bool {
    region.is_none_or(|m| m.contains(x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_band_count() {
        assert!(matches!(Image::new(1, 1, 2, vec![0, 0]), Err(Error::InvalidImage(_))));
    }

    #[test]
    fn rejects_sample_count_mismatch() {
        assert!(Image::new(2, 2, 1, vec![0; 3]).is_err());
    }

    #[test]
    fn brightness_rounds_mean() {
        let img = Image::new(1, 1, 3, vec![1, 1, 0]).unwrap();
        assert_eq!(img.brightness(0, 0), 1);
        let img = Image::new(1, 1, 3, vec![1, 0, 0]).unwrap();
        assert_eq!(img.brightness(0, 0), 0);
        let img = Image::new(1, 1, 3, vec![255, 255, 255]).unwrap();
        assert_eq!(img.brightness(0, 0), 255);
    }

    #[test]
    fn mask_threshold_is_above_127() {
        let img = Image::new(3, 1, 1, vec![127, 128, 255]).unwrap();
        let mask = SilhouetteMask::from_image(&img).unwrap();
        assert!(!mask.contains(0, 0));
        assert!(mask.contains(1, 0));
        assert!(mask.contains(2, 0));
        assert_eq!(mask.count(), 2);
    }

    #[test]
    fn mask_centroid() {
        let mask = SilhouetteMask::from_fn(4, 4, |x, y| x >= 2 && y >= 2);
        assert_eq!(mask.centroid(), Some((2.5, 2.5)));
        assert_eq!(SilhouetteMask::from_fn(2, 2, |_, _| false).centroid(), None);
    }
}
