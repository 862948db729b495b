use crate::error::{Error, Result};
use crate::imaging::Image;

/// Set of pixel offsets covered by a feature, relative to the stencil center.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMask {
    name: String,
    offsets: Vec<(i32, i32)>,
    anchor: (usize, usize),
    width: usize,
    height: usize,
    // (min dx, min dy, max dx, max dy) over the offsets
    extent: (i32, i32, i32, i32),
}

impl FeatureMask {
    /// `anchor` is the anchor's position inside the `width x height` stencil box.
    pub fn new(
        name: impl Into<String>,
        mut offsets: Vec<(i32, i32)>,
        anchor: (usize, usize),
        width: usize,
        height: usize,
    ) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::EmptyStencil);
        }
        if anchor.0 >= width || anchor.1 >= height {
            return Err(Error::InvalidParameter(format!("anchor {anchor:?} outside the {width}x{height} stencil")));
        }
        offsets.sort_by_key(|&(dx, dy)| (dy, dx));
        offsets.dedup();
        for &(dx, dy) in &offsets {
            let (sx, sy) = (anchor.0 as i64 + dx as i64, anchor.1 as i64 + dy as i64);
            if sx < 0 || sy < 0 || sx >= width as i64 || sy >= height as i64 {
                return Err(Error::InvalidParameter(format!(
                    "offset ({dx}, {dy}) outside the {width}x{height} stencil"
                )));
            }
        }
        let extent = offsets.iter().fold((i32::MAX, i32::MAX, i32::MIN, i32::MIN), |(x0, y0, x1, y1), &(dx, dy)| {
            (x0.min(dx), y0.min(dy), x1.max(dx), y1.max(dy))
        });
        Ok(Self { name: name.into(), offsets, anchor, width, height, extent })
    }

    /// Solid rectangle mask anchored at its center pixel.
    pub fn rectangle(name: impl Into<String>, width: usize, height: usize) -> Result<Self> {
        let anchor = (width / 2, height / 2);
        let offsets = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| (x as i32 - anchor.0 as i32, y as i32 - anchor.1 as i32))
            .collect();
        Self::new(name, offsets, anchor, width, height)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }

    pub fn anchor(&self) -> (usize, usize) {
        self.anchor
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Whether every covered pixel lands inside a `width x height` frame when
    /// the anchor sits at `(x, y)`.
    pub fn fits(&self, x: i64, y: i64, width: usize, height: usize) -> bool {
        let (x0, y0, x1, y1) = self.extent;
        x + x0 as i64 >= 0 && y + y0 as i64 >= 0 && x + (x1 as i64) < width as i64 && y + (y1 as i64) < height as i64
    }

    /// Largest side of the stencil box.
    pub fn max_side(&self) -> usize {
        self.width.max(self.height)
    }

    /// Stencil image: 255 at covered pixels, 0 elsewhere.
    pub fn to_stencil(&self) -> Image {
        let mut img = Image::filled(self.width, self.height, 1, 0).expect("stencil is non-empty");
        for &(dx, dy) in &self.offsets {
            let x = (self.anchor.0 as i64 + dx as i64) as usize;
            let y = (self.anchor.1 as i64 + dy as i64) as usize;
            img.set(x, y, 0, 255);
        }
        img
    }
}

/// Reads a mask from a single-band stencil: samples above 127 are covered and
/// offsets are taken relative to the pixel `(W/2, H/2)`.
pub fn load_mask_stencil(name: impl Into<String>, img: &Image) -> Result<FeatureMask> {
    if img.bands() != 1 {
        return Err(Error::InvalidImage("stencils must be single-band (P5)".into()));
    }
    let anchor = (img.width() / 2, img.height() / 2);
    let mut offsets = Vec::new();
    for y in 0..img.height() {
        for x in 0..img.width() {
            if img.get(x, y, 0) > 127 {
                offsets.push((x as i32 - anchor.0 as i32, y as i32 - anchor.1 as i32));
            }
        }
    }
    if offsets.is_empty() {
        return Err(Error::EmptyStencil);
    }
    FeatureMask::new(name, offsets, anchor, img.width(), img.height())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_square_stencil() {
        let mask = load_mask_stencil("sq", &Image::filled(3, 3, 1, 255).unwrap()).unwrap();
        assert_eq!(mask.len(), 9);
        assert_eq!(mask.anchor(), (1, 1));
    }

    #[test]
    fn center_only_stencil() {
        let mut img = Image::filled(3, 3, 1, 0).unwrap();
        img.set(1, 1, 0, 255);
        let mask = load_mask_stencil("dot", &img).unwrap();
        assert_eq!(mask.offsets(), &[(0, 0)]);
    }

    #[test]
    fn row_stencil_centers_on_middle() {
        let mask = load_mask_stencil("row", &Image::filled(3, 1, 1, 255).unwrap()).unwrap();
        assert_eq!(mask.offsets(), &[(-1, 0), (0, 0), (1, 0)]);
    }

    #[test]
    fn even_width_anchor() {
        let mask = load_mask_stencil("even", &Image::filled(4, 2, 1, 200).unwrap()).unwrap();
        assert_eq!(mask.anchor(), (2, 1));
        assert!(mask.offsets().contains(&(-2, -1)));
        assert!(mask.offsets().contains(&(1, 0)));
    }

    #[test]
    fn empty_stencil_is_rejected() {
        let img = Image::filled(3, 3, 1, 127).unwrap();
        assert!(matches!(load_mask_stencil("none", &img), Err(Error::EmptyStencil)));
    }

    #[test]
    fn stencil_round_trip() {
        let mut img = Image::filled(5, 3, 1, 0).unwrap();
        for (x, y) in [(0, 0), (2, 1), (4, 2), (3, 1)] {
            img.set(x, y, 0, 255);
        }
        let mask = load_mask_stencil("m", &img).unwrap();
        assert_eq!(mask.to_stencil(), img);
    }

    #[test]
    fn fit_test_uses_covered_pixels() {
        let mask = FeatureMask::rectangle("r", 3, 3).unwrap();
        assert!(mask.fits(1, 1, 3, 3));
        assert!(!mask.fits(0, 1, 3, 3));
        assert!(!mask.fits(2, 2, 3, 3));
        // only the right column is covered
        let col = FeatureMask::new("c", vec![(1, -1), (1, 0), (1, 1)], (1, 1), 3, 3).unwrap();
        assert!(col.fits(-1, 1, 3, 3));
        assert!(!col.fits(2, 1, 3, 3));
    }
}
