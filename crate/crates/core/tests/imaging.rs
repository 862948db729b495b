use headpose::imaging::{
    compute_edge_normal, detect_color_edges, minmax_sharpen, read_pnm, write_pnm, Image, SilhouetteMask,
    EIGHT_NEIGHBORS,
};
use proptest::prelude::*;

fn neighborhood(img: &Image, x: usize, y: usize, band: usize) -> Vec<u8> {
    EIGHT_NEIGHBORS
        .iter()
        .map(|(dx, dy)| (x as i64 + dx, y as i64 + dy))
        .filter(|&(nx, ny)| img.contains(nx, ny))
        .map(|(nx, ny)| img.get(nx as usize, ny as usize, band))
        .collect()
}

fn image_strategy(max_side: usize) -> impl Strategy<Value = Image> {
    (2..=max_side, 2..=max_side, prop_oneof![Just(1usize), Just(3usize)]).prop_flat_map(|(w, h, b)| {
        proptest::collection::vec(any::<u8>(), w * h * b).prop_map(move |s| Image::new(w, h, b, s).unwrap())
    })
}

proptest! {
    #[test]
    fn sharpened_pixels_are_neighborhood_extremes(img in image_strategy(16)) {
        let out = minmax_sharpen(&img, None).unwrap();
        for y in 0..img.height() {
            for x in 0..img.width() {
                for b in 0..img.bands() {
                    let n = neighborhood(&img, x, y, b);
                    let (lo, hi) = (*n.iter().min().unwrap(), *n.iter().max().unwrap());
                    let v = out.get(x, y, b);
                    prop_assert!(v == lo || v == hi);
                }
            }
        }
    }

    #[test]
    fn sharpening_outside_region_copies(img in image_strategy(12)) {
        let region = SilhouetteMask::from_fn(img.width(), img.height(), |x, _| x % 2 == 0);
        let out = minmax_sharpen(&img, Some(&region)).unwrap();
        for y in 0..img.height() {
            for x in (1..img.width()).step_by(2) {
                for b in 0..img.bands() {
                    prop_assert_eq!(out.get(x, y, b), img.get(x, y, b));
                }
            }
        }
    }

    #[test]
    fn constant_images_are_fixed_points(w in 1usize..20, h in 1usize..20, v in any::<u8>()) {
        let img = Image::filled(w, h, 3, v).unwrap();
        prop_assert_eq!(minmax_sharpen(&img, None).unwrap(), img);
    }

    #[test]
    fn edge_pool_is_two_sided(img in image_strategy(12), t in 0.0f64..128.0) {
        let thresholds = vec![t; img.bands()];
        let pool = detect_color_edges(&img, None, &thresholds).unwrap();
        for p in pool.points() {
            let (x, y, b) = (p.x as usize, p.y as usize, p.band as usize);
            let v = img.get(x, y, b) as f64;
            let has_partner = EIGHT_NEIGHBORS.iter().any(|(dx, dy)| {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                img.contains(nx, ny) && (img.get(nx as usize, ny as usize, b) as f64 - v).abs() > t
            });
            prop_assert!(has_partner);
            prop_assert!((0.0..std::f64::consts::TAU).contains(&p.normal_angle));
            prop_assert_eq!(p.brightness, img.brightness(x, y));
        }
    }

    #[test]
    fn pnm_round_trip(img in image_strategy(9)) {
        prop_assert_eq!(read_pnm(&write_pnm(&img)).unwrap(), img);
    }
}

#[test]
fn ramp_normals_point_toward_brightness() {
    let right = Image::from_fn(9, 9, 1, |x, _, _| (x * 25) as u8).unwrap();
    let down = Image::from_fn(9, 9, 1, |_, y, _| (y * 25) as u8).unwrap();
    let left = Image::from_fn(9, 9, 1, |x, _, _| (250 - x * 25) as u8).unwrap();
    let cases = [(right, 0.0), (down, std::f64::consts::FRAC_PI_2), (left, std::f64::consts::PI)];
    for (img, expected) in cases {
        let angle = compute_edge_normal(&img, 4, 4, 0).unwrap().unwrap();
        assert!((angle - expected).abs() < 1e-12, "{angle} vs {expected}");
    }
}

#[test]
fn flat_neighborhood_has_no_normal() {
    let img = Image::filled(5, 5, 1, 9).unwrap();
    assert_eq!(compute_edge_normal(&img, 2, 2, 0).unwrap(), None);
}

#[test]
fn step_edge_marks_both_sides() {
    let img = Image::from_fn(8, 4, 1, |x, _, _| if x < 4 { 20 } else { 200 }).unwrap();
    let pool = detect_color_edges(&img, None, &[30.0]).unwrap();
    for y in 0..4 {
        for x in 0..8 {
            assert_eq!(pool.has_edge_at(x, y), x == 3 || x == 4, "({x}, {y})");
        }
    }
    // away from the frame both sides share the dark-to-bright direction
    let interior = pool.points().iter().filter(|p| (1..3).contains(&p.y));
    assert!(interior.map(|p| p.normal_angle).all(|a| a.abs() < 1e-12));
}

#[test]
fn thresholds_are_strict() {
    let img = Image::from_fn(4, 1, 1, |x, _, _| if x < 2 { 100 } else { 130 }).unwrap();
    assert!(detect_color_edges(&img, None, &[30.0]).unwrap().is_empty());
    assert_eq!(detect_color_edges(&img, None, &[29.0]).unwrap().len(), 2);
}
