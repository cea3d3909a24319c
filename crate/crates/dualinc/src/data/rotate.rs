//! Exact quarter-turn rotation via index permutation, bilinear rotation for
//! arbitrary angles, and the batch modification step.

use super::{Image, LabeledSample, ModifiedSample, OrientationSet};

/// Exact counter-clockwise rotation by 90k degrees. k=0 is the identity;
/// odd k requires a square image.
pub fn rotate_quarter(image: &Image, k: usize) -> Image {
    assert!(k < 4, "quarter-turn count must be in 0..4, got {k}");
    let (c, h, w) = (image.channels(), image.height(), image.width());
    if k % 2 == 1 {
        assert_eq!(h, w, "quarter turn by 90 or 270 degrees requires a square image ({h}x{w})");
    }
    match k {
        0 => image.clone(),
        1 => {
            // out[r][col] = in[col][W-1-r]
            let mut out = Image::zeros(c, w, h);
            for ci in 0..c {
                for r in 0..w {
                    for col in 0..h {
                        out.set(ci, r, col, image.get(ci, col, w - 1 - r));
                    }
                }
            }
            out
        }
        2 => {
            let mut out = Image::zeros(c, h, w);
            for ci in 0..c {
                for r in 0..h {
                    for col in 0..w {
                        out.set(ci, r, col, image.get(ci, h - 1 - r, w - 1 - col));
                    }
                }
            }
            out
        }
        3 => {
            // out[r][col] = in[H-1-col][r]
            let mut out = Image::zeros(c, w, h);
            for ci in 0..c {
                for r in 0..w {
                    for col in 0..h {
                        out.set(ci, r, col, image.get(ci, h - 1 - col, r));
                    }
                }
            }
            out
        }
        _ => unreachable!(),
    }
}

/// Counter-clockwise rotation about the image center with bilinear
/// interpolation; samples falling outside the input are filled with zero.
/// Multiples of 90 degrees delegate to [`rotate_quarter`] and are bit-exact.
pub fn rotate_bilinear(image: &Image, angle_deg: f32) -> Image {
    assert!((0.0..360.0).contains(&angle_deg), "angle {angle_deg} outside [0,360)");
    if angle_deg == 0.0 || angle_deg == 90.0 || angle_deg == 180.0 || angle_deg == 270.0 {
        return rotate_quarter(image, (angle_deg / 90.0) as usize);
    }
    let (c, h, w) = (image.channels(), image.height(), image.width());
    let theta = (angle_deg as f64).to_radians();
    let (sin_t, cos_t) = theta.sin_cos();
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let mut out = Image::zeros(c, h, w);
    for r in 0..h {
        for col in 0..w {
            let dr = r as f64 - cy;
            let dc = col as f64 - cx;
            // source coordinates: the inverse rotation applied to (dr, dc)
            let sr = dr * cos_t + dc * sin_t + cy;
            let sc = -dr * sin_t + dc * cos_t + cx;
            let r0 = sr.floor();
            let c0 = sc.floor();
            let fr = (sr - r0) as f32;
            let fc = (sc - c0) as f32;
            let taps = [
                (r0, c0, (1.0 - fr) * (1.0 - fc)),
                (r0, c0 + 1.0, (1.0 - fr) * fc),
                (r0 + 1.0, c0, fr * (1.0 - fc)),
                (r0 + 1.0, c0 + 1.0, fr * fc),
            ];
            for ci in 0..c {
                let mut v = 0.0f32;
                for &(tr, tc, weight) in &taps {
                    if tr >= 0.0 && tr < h as f64 && tc >= 0.0 && tc < w as f64 {
                        v += weight * image.get(ci, tr as usize, tc as usize);
                    }
                }
                out.set(ci, r, col, v);
            }
        }
    }
    out
}

/// Rotation by the angle of an orientation class; angle 0 is a clone.
pub fn rotate_by_angle(image: &Image, angle_deg: f32) -> Image {
    rotate_bilinear(image, angle_deg)
}

/// The batch modification step: every sample appears once per orientation
/// class, labeled with (original image class, orientation class). Output is
/// sample-major then orientation, so row i*M + j holds orientation j of
/// sample i.
pub fn modify_batch(batch: &[LabeledSample], orientations: &OrientationSet) -> Vec<ModifiedSample> {
    assert!(!batch.is_empty(), "modify_batch on an empty batch");
    let mut out = Vec::with_capacity(batch.len() * orientations.len());
    for sample in batch {
        for (j, &angle) in orientations.angles().iter().enumerate() {
            out.push(ModifiedSample {
                image: rotate_by_angle(&sample.image, angle),
                image_class: sample.image_class,
                orientation_class: j,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Image {
        let data = (0..c * h * w).map(|_| rng.gen_range(0.0..1.0)).collect();
        Image::new(c, h, w, data)
    }

    #[test]
    fn quarter_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = random_image(&mut rng, 3, 5, 5);
        assert_eq!(rotate_quarter(&img, 0), img);
    }

    #[test]
    fn quarter_one_matches_index_map() {
        // [[1,2],[3,4]] rotated CCW: [[2,4],[1,3]]
        let img = Image::new(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let rot = rotate_quarter(&img, 1);
        assert_eq!(rot.data(), &[2.0, 4.0, 1.0, 3.0]);
    }

    #[test]
    fn quarter_brute_force_index_oracle() {
        // (r,c) -> (W-1-c, r) for every source pixel
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img = random_image(&mut rng, 2, 4, 4);
        let rot = rotate_quarter(&img, 1);
        for ci in 0..2 {
            for r in 0..4 {
                for c in 0..4 {
                    assert_eq!(rot.get(ci, 4 - 1 - c, r), img.get(ci, r, c));
                }
            }
        }
    }

    #[test]
    fn quarter_two_is_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = random_image(&mut rng, 1, 3, 3);
        assert_eq!(rotate_quarter(&rotate_quarter(&img, 2), 2), img);
    }

    #[test]
    fn quarter_four_cycle_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let side = rng.gen_range(1..9);
            let img = random_image(&mut rng, 2, side, side);
            let mut cur = img.clone();
            for _ in 0..4 {
                cur = rotate_quarter(&cur, 1);
            }
            assert_eq!(cur, img);
        }
    }

    #[test]
    #[should_panic(expected = "square image")]
    fn quarter_odd_k_rejects_rectangles() {
        let img = Image::zeros(1, 2, 3);
        let _ = rotate_quarter(&img, 1);
    }

    #[test]
    fn bilinear_zero_is_identity_and_quarters_delegate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = random_image(&mut rng, 3, 6, 6);
        assert_eq!(rotate_bilinear(&img, 0.0), img);
        for (angle, k) in [(90.0, 1), (180.0, 2), (270.0, 3)] {
            assert_eq!(rotate_bilinear(&img, angle), rotate_quarter(&img, k));
        }
    }

    #[test]
    fn bilinear_center_pixel_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let img = random_image(&mut rng, 1, 5, 5);
        for angle in [30.0f32, 45.0, 60.0, 137.5] {
            let rot = rotate_bilinear(&img, angle);
            assert!((rot.get(0, 2, 2) - img.get(0, 2, 2)).abs() < 1e-6);
        }
    }

    #[test]
    fn bilinear_stays_in_unit_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let img = random_image(&mut rng, 1, 8, 8);
        let rot = rotate_bilinear(&img, 33.0);
        assert!(rot.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn modify_batch_orders_sample_major() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let batch: Vec<LabeledSample> = (0..3)
            .map(|i| LabeledSample { image: random_image(&mut rng, 1, 4, 4), image_class: i })
            .collect();
        let set = OrientationSet::new(vec![0.0, 90.0]);
        let out = modify_batch(&batch, &set);
        assert_eq!(out.len(), 6);
        let orient: Vec<usize> = out.iter().map(|s| s.orientation_class).collect();
        assert_eq!(orient, vec![0, 1, 0, 1, 0, 1]);
        let classes: Vec<usize> = out.iter().map(|s| s.image_class).collect();
        assert_eq!(classes, vec![0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn modify_batch_orientation_zero_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let batch: Vec<LabeledSample> = (0..2)
            .map(|i| LabeledSample { image: random_image(&mut rng, 3, 5, 5), image_class: i })
            .collect();
        let set = OrientationSet::new(vec![0.0, 90.0, 180.0]);
        let out = modify_batch(&batch, &set);
        for (i, sample) in batch.iter().enumerate() {
            assert_eq!(out[i * 3].image, sample.image);
        }
    }

    #[test]
    fn modify_batch_singleton_set_keeps_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let batch: Vec<LabeledSample> = (0..2)
            .map(|i| LabeledSample { image: random_image(&mut rng, 1, 3, 3), image_class: i })
            .collect();
        let set = OrientationSet::new(vec![0.0]);
        let out = modify_batch(&batch, &set);
        assert_eq!(out.len(), 2);
        for (m, s) in out.iter().zip(&batch) {
            assert_eq!(m.image, s.image);
            assert_eq!(m.image_class, s.image_class);
            assert_eq!(m.orientation_class, 0);
        }
    }
}
