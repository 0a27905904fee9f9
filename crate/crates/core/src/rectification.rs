//! Adversarial-region detection and rectification.
//!
//! The input and its regeneration are compared pixel by pixel; the L2 distance
//! map is box-blurred, flattened and split by exact 2-means. Pixels in the
//! high-distance cluster form the adversarial mask and are replaced by their
//! regenerated values, everything else is kept from the input.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::backend::InpainterBackend;
use crate::config::DefenseConfig;
use crate::error::DefenseError;
use crate::image::{compose, resize, BinaryMask, DistanceMap, Image, ImageError};
use crate::kmeans1d::two_means_1d;
use crate::regeneration::regenerate_full;

/// Gray level used by [`RectifyVariant::Gray`].
pub const GRAY_LEVEL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RectifyVariant {
    /// Flagged pixels take their regenerated value.
    #[default]
    Regenerated,
    /// Flagged pixels are painted mid-gray (removal ablation).
    Gray,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectifyParams {
    pub blur_kernel: usize,
    pub degeneracy_epsilon: f64,
    pub variant: RectifyVariant,
}

impl Default for RectifyParams {
    fn default() -> Self {
        Self {
            blur_kernel: 9,
            degeneracy_epsilon: 1e-6,
            variant: RectifyVariant::Regenerated,
        }
    }
}

fn same_dims(a: (usize, usize), b: (usize, usize)) -> Result<(), ImageError> {
    if a == b {
        Ok(())
    } else {
        Err(ImageError::DimensionMismatch {
            left_w: a.0,
            left_h: a.1,
            right_w: b.0,
            right_h: b.1,
        })
    }
}

#[inline]
fn rgb_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let (d0, d1, d2) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    (d0 * d0 + d1 * d1 + d2 * d2).sqrt()
}

/// Per-pixel Euclidean RGB distance.
pub fn distance_map(input: &Image, regen: &Image) -> Result<DistanceMap, ImageError> {
    same_dims(input.dims(), regen.dims())?;
    let values = input
        .pixels()
        .iter()
        .zip(regen.pixels())
        .map(|(&a, &b)| rgb_distance(a, b))
        .collect();
    DistanceMap::new(input.width(), input.height(), values)
}

/// Mean filter over a `kernel`×`kernel` window with replicated borders.
pub fn box_blur(map: &DistanceMap, kernel: usize) -> Result<DistanceMap, DefenseError> {
    if kernel == 0 || kernel % 2 == 0 {
        return Err(DefenseError::Config(format!(
            "blur kernel must be odd and >= 1 (got {kernel})"
        )));
    }
    if kernel == 1 {
        return Ok(map.clone());
    }
    let (w, h) = map.dims();
    let r = (kernel / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let src = map.values();
    let norm = 1.0 / kernel as f64;

    let mut horiz = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for dx in -r..=r {
                acc += row[clamp(x as isize + dx, w)];
            }
            horiz[y * w + x] = acc * norm;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in -r..=r {
                acc += horiz[clamp(y as isize + dy, h) * w + x];
            }
            out[y * w + x] = acc * norm;
        }
    }
    Ok(DistanceMap::new(w, h, out)?)
}

/// Adversarial mask: pixels whose blurred distance falls in the high cluster.
pub fn detect_adversarial(
    input: &Image,
    regen: &Image,
    params: &RectifyParams,
) -> Result<BinaryMask, DefenseError> {
    let blurred = box_blur(&distance_map(input, regen)?, params.blur_kernel)?;
    let clusters = two_means_1d(blurred.values(), params.degeneracy_epsilon)?;
    Ok(BinaryMask::new(
        input.width(),
        input.height(),
        clusters.assignment,
    )?)
}

/// Replaces flagged pixels of `input` according to `variant`.
pub fn rectify(
    input: &Image,
    regen: &Image,
    adv: &BinaryMask,
    variant: RectifyVariant,
) -> Result<Image, ImageError> {
    match variant {
        RectifyVariant::Regenerated => compose(regen, input, adv),
        RectifyVariant::Gray => {
            same_dims(input.dims(), regen.dims())?;
            let gray = Image::filled(input.width(), input.height(), [GRAY_LEVEL; 3]);
            compose(&gray, input, adv)
        }
    }
}

/// Mean per-pixel RGB distance between a patch and its regenerated counterpart.
pub fn mean_patch_distance(patch: &Image, regen: &Image) -> Result<f64, ImageError> {
    same_dims(patch.dims(), regen.dims())?;
    let n = patch.pixels().len();
    if n == 0 {
        return Err(ImageError::InvalidDimensions {
            width: patch.width(),
            height: patch.height(),
        });
    }
    let total: f64 = patch
        .pixels()
        .iter()
        .zip(regen.pixels())
        .map(|(&a, &b)| rgb_distance(a, b))
        .sum();
    Ok(total / n as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub resize: Duration,
    pub regeneration: Duration,
    pub rectification: Duration,
}

#[derive(Debug, Clone)]
pub struct DefenseOutput {
    /// Final image at the input resolution.
    pub output: Image,
    /// Adversarial mask at the input resolution.
    pub adv_mask: BinaryMask,
    /// Regenerated image upsampled to the input resolution.
    pub regen: Image,
    pub timings: StageTimings,
}

/// Runs the full defense on one image.
///
/// Detection happens at the canonical square resolution; the mask is brought
/// back with nearest-neighbour sampling and the final composite is done at the
/// input resolution against a bilinearly resized regeneration. With
/// rectification disabled the output is the resized regeneration and the mask
/// is all ones.
pub fn defend(
    image: &Image,
    cfg: &DefenseConfig,
    backend: &dyn InpainterBackend,
) -> Result<DefenseOutput, DefenseError> {
    cfg.validate()?;
    let (w, h) = image.dims();
    let size = cfg.canonical_size;

    let t0 = Instant::now();
    let canonical = resize(image, size, size)?;
    let t1 = Instant::now();
    let regen_c = regenerate_full(&canonical, cfg, backend)?;
    let t2 = Instant::now();

    let (output, adv_mask, regen) = if cfg.rectification_enabled {
        let mask_c = detect_adversarial(&canonical, &regen_c, &cfg.rectify_params())?;
        let adv_mask = mask_c.resize_nearest(w, h)?;
        let regen = resize(&regen_c, w, h)?;
        let output = rectify(image, &regen, &adv_mask, cfg.variant)?;
        (output, adv_mask, regen)
    } else {
        let regen = resize(&regen_c, w, h)?;
        (regen.clone(), BinaryMask::ones(w, h), regen)
    };
    let t3 = Instant::now();

    Ok(DefenseOutput {
        output,
        adv_mask,
        regen,
        timings: StageTimings {
            resize: t1 - t0,
            regeneration: t2 - t1,
            rectification: t3 - t2,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{HarmonicBackend, IdentityBackend};
    use proptest::prelude::*;

    /// Direct window mean with clamped coordinates.
    fn naive_blur(map: &DistanceMap, k: usize) -> Vec<f64> {
        let (w, h) = map.dims();
        let r = (k / 2) as isize;
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut acc = 0.0;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let xx = (x + dx).clamp(0, w as isize - 1) as usize;
                        let yy = (y + dy).clamp(0, h as isize - 1) as usize;
                        acc += map.get(xx, yy);
                    }
                }
                out.push(acc / (k * k) as f64);
            }
        }
        out
    }

    #[test]
    fn distance_examples() {
        let a = Image::new(3, 1, vec![[1.0, 0.0, 0.0], [1.0; 3], [0.3; 3]]).unwrap();
        let b = Image::new(3, 1, vec![[0.0; 3], [0.0; 3], [0.3; 3]]).unwrap();
        let d = distance_map(&a, &b).unwrap();
        assert_eq!(d.values()[0], 1.0);
        assert!((d.values()[1] - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(d.values()[2], 0.0);
        assert!(distance_map(&a, &Image::filled(2, 1, [0.0; 3])).is_err());
    }

    #[test]
    fn blur_identity_and_constant() {
        let m = DistanceMap::new(4, 3, (0..12).map(|v| v as f64).collect()).unwrap();
        assert_eq!(box_blur(&m, 1).unwrap(), m);
        let c = DistanceMap::new(5, 5, vec![0.7; 25]).unwrap();
        for v in box_blur(&c, 3).unwrap().values() {
            assert!((v - 0.7).abs() < 1e-15);
        }
        assert!(box_blur(&m, 4).is_err());
        assert!(box_blur(&m, 0).is_err());
    }

    #[test]
    fn blur_impulse_on_three_by_three() {
        // With replicated borders every 3x3 window of a 3x3 map contains the
        // center exactly once, so the whole map becomes 1/9.
        let mut v = vec![0.0; 9];
        v[4] = 1.0;
        let m = DistanceMap::new(3, 3, v).unwrap();
        for x in box_blur(&m, 3).unwrap().values() {
            assert!((x - 1.0 / 9.0).abs() < 1e-15);
        }
    }

    #[test]
    fn blur_impulse_in_larger_map() {
        let mut v = vec![0.0; 25];
        v[12] = 1.0;
        let m = DistanceMap::new(5, 5, v).unwrap();
        let b = box_blur(&m, 3).unwrap();
        for y in 0..5 {
            for x in 0..5 {
                let inside = (1..=3).contains(&x) && (1..=3).contains(&y);
                let expected = if inside { 1.0 / 9.0 } else { 0.0 };
                assert!((b.get(x, y) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn identical_images_give_empty_mask() {
        let img = Image::from_fn(16, 16, |x, y| [x as f64 / 16.0, y as f64 / 16.0, 0.5]);
        let m = detect_adversarial(&img, &img, &RectifyParams::default()).unwrap();
        assert_eq!(m.count_ones(), 0);
    }

    fn shifted_block(kernel: usize) -> (Image, Image, RectifyParams) {
        let regen = Image::filled(64, 64, [0.25; 3]);
        let input = Image::from_fn(64, 64, |x, y| {
            if (24..40).contains(&x) && (24..40).contains(&y) {
                [0.75; 3]
            } else {
                [0.25; 3]
            }
        });
        let params = RectifyParams {
            blur_kernel: kernel,
            ..Default::default()
        };
        (input, regen, params)
    }

    #[test]
    fn single_block_unblurred_is_exact() {
        let (input, regen, params) = shifted_block(1);
        let m = detect_adversarial(&input, &regen, &params).unwrap();
        for y in 0..64 {
            for x in 0..64 {
                let inside = (24..40).contains(&x) && (24..40).contains(&y);
                assert_eq!(m.get(x, y), inside, "({x},{y})");
            }
        }
    }

    #[test]
    fn single_block_blurred_stays_within_dilated_support() {
        // 9x9 blur: the block core is always flagged, nothing outside the
        // dilated support can be, and the low-overlap ring falls back to benign.
        let (input, regen, params) = shifted_block(9);
        let m = detect_adversarial(&input, &regen, &params).unwrap();
        for y in 0..64 {
            for x in 0..64 {
                let core = (28..36).contains(&x) && (28..36).contains(&y);
                let support = (20..44).contains(&x) && (20..44).contains(&y);
                if core {
                    assert!(m.get(x, y));
                }
                if !support {
                    assert!(!m.get(x, y));
                }
            }
        }
        assert!(!m.get(20, 20));
        assert!(m.count_ones() < 24 * 24);
    }

    #[test]
    fn rectify_variants() {
        let input = Image::filled(4, 4, [0.9, 0.1, 0.1]);
        let regen = Image::filled(4, 4, [0.2, 0.3, 0.4]);
        let none = BinaryMask::zeros(4, 4);
        let all = BinaryMask::ones(4, 4);
        assert_eq!(rectify(&input, &regen, &none, RectifyVariant::Regenerated).unwrap(), input);
        assert_eq!(rectify(&input, &regen, &none, RectifyVariant::Gray).unwrap(), input);
        assert_eq!(rectify(&input, &regen, &all, RectifyVariant::Regenerated).unwrap(), regen);
        let gray = rectify(&input, &regen, &all, RectifyVariant::Gray).unwrap();
        assert!(gray.pixels().iter().all(|p| *p == [0.5; 3]));
    }

    #[test]
    fn mean_distance_examples() {
        let a = Image::filled(2, 2, [1.0; 3]);
        let b = Image::filled(2, 2, [0.0; 3]);
        assert_eq!(mean_patch_distance(&a, &a).unwrap(), 0.0);
        assert!((mean_patch_distance(&a, &b).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        let half = Image::new(2, 1, vec![[1.0, 0.0, 0.0], [0.0; 3]]).unwrap();
        let zero = Image::filled(2, 1, [0.0; 3]);
        assert_eq!(mean_patch_distance(&half, &zero).unwrap(), 0.5);
        let empty = Image::new(0, 0, vec![]).unwrap();
        assert!(mean_patch_distance(&empty, &empty).is_err());
    }

    #[test]
    fn defend_with_identity_is_exact() {
        let img = Image::from_fn(37, 23, |x, y| [(x * y % 7) as f64 / 7.0, 0.2, x as f64 / 37.0]);
        let cfg = DefenseConfig {
            canonical_size: 64,
            n_grids: 8,
            ..Default::default()
        };
        let out = defend(&img, &cfg, &IdentityBackend).unwrap();
        assert_eq!(out.output, img);
        assert_eq!(out.adv_mask.count_ones(), 0);
    }

    #[test]
    fn defend_constant_with_harmonic() {
        let img = Image::filled(40, 30, [0.1, 0.5, 0.8]);
        let cfg = DefenseConfig {
            canonical_size: 64,
            n_grids: 8,
            ..Default::default()
        };
        let out = defend(&img, &cfg, &HarmonicBackend).unwrap();
        assert_eq!(out.output, img);
        assert_eq!(out.adv_mask.count_ones(), 0);
    }

    #[test]
    fn defend_without_rectification_returns_regen() {
        let img = Image::from_fn(32, 32, |x, _| [x as f64 / 31.0; 3]);
        let cfg = DefenseConfig {
            canonical_size: 32,
            n_grids: 4,
            rectification_enabled: false,
            backend: crate::config::BackendConfig::ConstantStub { value: 0.5 },
            ..Default::default()
        };
        let out = defend(&img, &cfg, &crate::backend::ConstantBackend { value: 0.5 }).unwrap();
        assert_eq!(out.output, out.regen);
        assert!(out.output.pixels().iter().all(|p| *p == [0.5; 3]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn blur_matches_naive_window(w in 1usize..12, h in 1usize..12, k in 0usize..4, seed in any::<u64>()) {
            let k = 2 * k + 1;
            let vals: Vec<f64> = (0..w * h).map(|i| ((seed >> (i % 60)) & 0xff) as f64 / 255.0).collect();
            let m = DistanceMap::new(w, h, vals).unwrap();
            let fast = box_blur(&m, k).unwrap();
            for (a, b) in fast.values().iter().zip(naive_blur(&m, k)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn distance_symmetric_and_bounded(seed in any::<u64>(), w in 1usize..8, h in 1usize..8) {
            let a = Image::from_fn(w, h, |x, y| [((seed >> (x % 50)) & 1) as f64, (y % 3) as f64 / 2.0, 0.1]);
            let b = Image::from_fn(w, h, |x, y| [((seed >> (y % 50)) & 1) as f64, (x % 4) as f64 / 3.0, 0.9]);
            let ab = distance_map(&a, &b).unwrap();
            let ba = distance_map(&b, &a).unwrap();
            prop_assert_eq!(ab.values(), ba.values());
            prop_assert!(ab.values().iter().all(|&v| (0.0..=3f64.sqrt() + 1e-12).contains(&v)));
            let mean = ab.values().iter().sum::<f64>() / ab.values().len() as f64;
            prop_assert!((mean_patch_distance(&a, &b).unwrap() - mean).abs() < 1e-12);
        }

        #[test]
        fn rectify_keeps_unflagged_pixels(seed in any::<u64>(), w in 1usize..10, h in 1usize..10) {
            let a = Image::from_fn(w, h, |x, y| [(x as f64 / 10.0), (y as f64 / 10.0), 0.3]);
            let b = Image::filled(w, h, [0.9, 0.8, 0.7]);
            let m = BinaryMask::from_fn(w, h, |x, y| (seed >> ((x + 3 * y) % 64)) & 1 == 1);
            for variant in [RectifyVariant::Regenerated, RectifyVariant::Gray] {
                let out = rectify(&a, &b, &m, variant).unwrap();
                for (i, &f) in m.bits().iter().enumerate() {
                    if !f {
                        prop_assert_eq!(out.pixels()[i], a.pixels()[i]);
                    }
                }
            }
        }
    }
}
