use super::{in_region, Image, SilhouetteMask, EIGHT_NEIGHBORS};
use crate::error::Result;

/// Min-max sharpening: every pixel in `region` snaps to whichever extreme of
/// its in-bounds 8-neighborhood (center excluded) it is closer to, per band.
/// Equidistant pixels take the maximum. Pixels outside `region` are copied.
pub fn minmax_sharpen(img: &Image, region: Option<&SilhouetteMask>) -> Result<Image> {
    if let Some(mask) = region {
        mask.check_frame(img.width(), img.height())?;
    }
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            if !in_region(region, x as i64, y as i64) {
                continue;
            }
            for band in 0..img.bands() {
                let mut lo = u8::MAX;
                let mut hi = u8::MIN;
                let mut any = false;
                for (dx, dy) in EIGHT_NEIGHBORS {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if img.contains(nx, ny) {
                        let v = img.get(nx as usize, ny as usize, band);
                        lo = lo.min(v);
                        hi = hi.max(v);
                        any = true;
                    }
                }
                if !any {
                    continue;
                }
                let v = img.get(x, y, band) as i16;
                let to_hi = (v - hi as i16).abs();
                let to_lo = (v - lo as i16).abs();
                out.set(x, y, band, if to_hi <= to_lo { hi } else { lo });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn three_by_three(center: u8, ring: [u8; 8]) -> Image {
        let mut samples = vec![0u8; 9];
        for (i, (dx, dy)) in EIGHT_NEIGHBORS.iter().enumerate() {
            samples[((1 + dy) * 3 + (1 + dx)) as usize] = ring[i];
        }
        samples[4] = center;
        Image::new(3, 3, 1, samples).unwrap()
    }

    #[test]
    fn constant_image_is_fixed() {
        let img = Image::filled(5, 4, 3, 77).unwrap();
        assert_eq!(minmax_sharpen(&img, None).unwrap(), img);
    }

    #[test]
    fn center_snaps_to_closer_min() {
        let img = three_by_three(4, [0, 0, 0, 0, 10, 10, 10, 10]);
        assert_eq!(minmax_sharpen(&img, None).unwrap().get(1, 1, 0), 0);
    }

    #[test]
    fn tie_goes_to_max() {
        let img = three_by_three(5, [0, 3, 7, 10, 2, 2, 8, 0]);
        assert_eq!(minmax_sharpen(&img, None).unwrap().get(1, 1, 0), 10);
    }

    #[test]
    fn outside_region_is_copied() {
        let img = three_by_three(4, [0, 0, 0, 0, 10, 10, 10, 10]);
        let region = SilhouetteMask::from_fn(3, 3, |x, y| !(x == 1 && y == 1));
        let out = minmax_sharpen(&img, Some(&region)).unwrap();
        assert_eq!(out.get(1, 1, 0), 4);
    }

    #[test]
    fn single_pixel_has_no_neighbors() {
        let img = Image::new(1, 1, 1, vec![42]).unwrap();
        assert_eq!(minmax_sharpen(&img, None).unwrap().get(0, 0, 0), 42);
    }

    #[test]
    fn region_size_mismatch() {
        let img = Image::filled(3, 3, 1, 0).unwrap();
        let region = SilhouetteMask::full(2, 3);
        assert!(matches!(minmax_sharpen(&img, Some(&region)), Err(Error::DimensionMismatch(_))));
    }
}
