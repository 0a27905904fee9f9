//! Deterministic harmonic fill: masked pixels solve the discrete Laplace
//! equation with the unmasked pixels as Dirichlet boundary.
//!
//! Each 4-connected masked component is solved on its own with Gauss–Seidel.
//! The starting guess blends the nearest unmasked pixels left/right/up/down of
//! each masked pixel, weighted by inverse distance (exact for linear ramps);
//! pixels with no unmasked pixel on any axis start at the component's boundary
//! mean. Both the guess and every update are convex combinations of values
//! already inside the boundary range, so the maximum principle holds at every
//! iteration, not only at convergence.

use std::collections::VecDeque;

use super::{BackendCapabilities, BackendError, InpaintRequest, InpainterBackend};
use crate::image::Image;

/// Convergence threshold on the largest per-pixel update of a sweep.
pub const TOLERANCE: f64 = 1e-6;
/// Hard cap on Gauss–Seidel sweeps per component.
pub const MAX_SWEEPS: usize = 10_000;

const FULLY_MASKED_FILL: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default)]
pub struct HarmonicBackend;

impl InpainterBackend for HarmonicBackend {
    fn capabilities(&self) -> BackendCapabilities {
        BackendCapabilities {
            name: "native-harmonic".into(),
            deterministic: true,
            supports_seed: false,
            concurrent: true,
        }
    }

    fn inpaint(&self, req: &InpaintRequest) -> Result<Image, BackendError> {
        native_harmonic_inpaint(req)
    }
}

struct Component {
    /// Masked pixel indices in row-major order.
    pixels: Vec<usize>,
    boundary_mean: [f64; 3],
}

pub fn native_harmonic_inpaint(req: &InpaintRequest) -> Result<Image, BackendError> {
    req.validate()?;
    let (w, h) = req.image.dims();
    let mask = req.mask.bits();
    let mut out = req.image.clone();

    let n_masked = req.mask.count_ones();
    if n_masked == 0 {
        return Ok(out);
    }
    if n_masked == w * h {
        return Ok(Image::filled(w, h, [FULLY_MASKED_FILL; 3]));
    }

    let neighbors = |i: usize| -> ([usize; 4], usize) {
        let (x, y) = (i % w, i / w);
        let mut nb = [0usize; 4];
        let mut n = 0;
        if x > 0 {
            nb[n] = i - 1;
            n += 1;
        }
        if x + 1 < w {
            nb[n] = i + 1;
            n += 1;
        }
        if y > 0 {
            nb[n] = i - w;
            n += 1;
        }
        if y + 1 < h {
            nb[n] = i + w;
            n += 1;
        }
        (nb, n)
    };

    let components = label_components(w * h, mask, req.image.pixels(), &neighbors);
    let guess = axis_guess(w, h, mask, req.image.pixels());
    let px = out.pixels_mut();
    for comp in &components {
        for &i in &comp.pixels {
            px[i] = guess[i].unwrap_or(comp.boundary_mean);
        }
        let links: Vec<([usize; 4], usize)> = comp.pixels.iter().map(|&i| neighbors(i)).collect();
        for _ in 0..MAX_SWEEPS {
            let mut max_delta = 0.0f64;
            for (&i, &(nb, n)) in comp.pixels.iter().zip(&links) {
                let mut acc = [0.0; 3];
                let mut lo = [f64::INFINITY; 3];
                let mut hi = [f64::NEG_INFINITY; 3];
                for &j in &nb[..n] {
                    let v = px[j];
                    for c in 0..3 {
                        acc[c] += v[c];
                        lo[c] = lo[c].min(v[c]);
                        hi[c] = hi[c].max(v[c]);
                    }
                }
                let inv = 1.0 / n as f64;
                let old = px[i];
                let mut new = [0.0; 3];
                for c in 0..3 {
                    // clamp absorbs rounding so equal neighbours reproduce exactly
                    new[c] = (acc[c] * inv).clamp(lo[c], hi[c]);
                    max_delta = max_delta.max((new[c] - old[c]).abs());
                }
                px[i] = new;
            }
            if max_delta < TOLERANCE {
                break;
            }
        }
    }
    Ok(out)
}

/// Inverse-distance blend of the nearest unmasked pixel in each axis direction.
fn axis_guess(w: usize, h: usize, mask: &[bool], pixels: &[[f64; 3]]) -> Vec<Option<[f64; 3]>> {
    // nearest unmasked index along each direction, per pixel
    let mut acc = vec![([0.0f64; 3], 0.0f64, [f64::INFINITY; 3], [f64::NEG_INFINITY; 3]); w * h];
    let mut add = |i: usize, j: usize, d: usize| {
        let wt = 1.0 / d as f64;
        let e = &mut acc[i];
        for c in 0..3 {
            e.0[c] += wt * pixels[j][c];
            e.2[c] = e.2[c].min(pixels[j][c]);
            e.3[c] = e.3[c].max(pixels[j][c]);
        }
        e.1 += wt;
    };
    for y in 0..h {
        let row = y * w;
        let mut last: Option<usize> = None;
        for x in 0..w {
            if !mask[row + x] {
                last = Some(x);
            } else if let Some(l) = last {
                add(row + x, row + l, x - l);
            }
        }
        last = None;
        for x in (0..w).rev() {
            if !mask[row + x] {
                last = Some(x);
            } else if let Some(l) = last {
                add(row + x, row + l, l - x);
            }
        }
    }
    for x in 0..w {
        let mut last: Option<usize> = None;
        for y in 0..h {
            if !mask[y * w + x] {
                last = Some(y);
            } else if let Some(l) = last {
                add(y * w + x, l * w + x, y - l);
            }
        }
        last = None;
        for y in (0..h).rev() {
            if !mask[y * w + x] {
                last = Some(y);
            } else if let Some(l) = last {
                add(y * w + x, l * w + x, l - y);
            }
        }
    }
    acc.into_iter()
        .map(|(sum, wt, lo, hi)| {
            (wt > 0.0).then(|| {
                let mut v = [0.0; 3];
                for c in 0..3 {
                    v[c] = (sum[c] / wt).clamp(lo[c], hi[c]);
                }
                v
            })
        })
        .collect()
}

fn label_components(
    len: usize,
    mask: &[bool],
    pixels: &[[f64; 3]],
    neighbors: &dyn Fn(usize) -> ([usize; 4], usize),
) -> Vec<Component> {
    let mut seen = vec![false; len];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..len {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut members = Vec::new();
        let mut sum = [0.0; 3];
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        let mut count = 0usize;
        while let Some(i) = queue.pop_front() {
            members.push(i);
            let (nb, n) = neighbors(i);
            for &j in &nb[..n] {
                if mask[j] {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                } else {
                    for c in 0..3 {
                        sum[c] += pixels[j][c];
                        lo[c] = lo[c].min(pixels[j][c]);
                        hi[c] = hi[c].max(pixels[j][c]);
                    }
                    count += 1;
                }
            }
        }
        members.sort_unstable();
        // A component with no unmasked neighbour is the whole image, handled earlier.
        debug_assert!(count > 0);
        let mut boundary_mean = [0.0; 3];
        for c in 0..3 {
            boundary_mean[c] = (sum[c] / count.max(1) as f64).clamp(lo[c], hi[c]);
        }
        components.push(Component {
            pixels: members,
            boundary_mean,
        });
    }
    components
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::BinaryMask;
    use proptest::prelude::*;

    fn request(image: Image, mask: BinaryMask) -> InpaintRequest {
        InpaintRequest {
            image,
            mask,
            steps: 1,
            seed: None,
        }
    }

    #[test]
    fn three_pixel_line() {
        let img = Image::new(3, 1, vec![[0.0; 3], [0.9; 3], [1.0; 3]]).unwrap();
        let mask = BinaryMask::new(3, 1, vec![false, true, false]).unwrap();
        let out = native_harmonic_inpaint(&request(img, mask)).unwrap();
        assert_eq!(out.get(1, 0), [0.5; 3]);
        assert_eq!(out.get(0, 0), [0.0; 3]);
        assert_eq!(out.get(2, 0), [1.0; 3]);
    }

    #[test]
    fn empty_mask_is_identity() {
        let img = Image::from_fn(6, 5, |x, y| [x as f64 / 6.0, y as f64 / 5.0, 0.1]);
        let out = native_harmonic_inpaint(&request(img.clone(), BinaryMask::zeros(6, 5))).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn full_mask_fills_mid_gray() {
        let img = Image::filled(4, 4, [0.9, 0.1, 0.2]);
        let out = native_harmonic_inpaint(&request(img, BinaryMask::ones(4, 4))).unwrap();
        assert!(out.pixels().iter().all(|p| *p == [0.5; 3]));
    }

    #[test]
    fn constant_image_preserved() {
        let img = Image::filled(20, 12, [0.25, 0.5, 0.75]);
        let mask = BinaryMask::from_fn(20, 12, |x, y| (x / 3 + y / 3) % 2 == 0);
        let out = native_harmonic_inpaint(&request(img.clone(), mask)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn linear_ramp_is_reproduced() {
        // Linear functions are discrete-harmonic, so an interior hole in a ramp
        // must be filled with the ramp itself.
        let img = Image::from_fn(24, 24, |x, _| [x as f64 / 23.0, 0.5, 1.0 - x as f64 / 23.0]);
        let mask = BinaryMask::from_fn(24, 24, |x, y| (6..18).contains(&x) && (6..18).contains(&y));
        let out = native_harmonic_inpaint(&request(img.clone(), mask)).unwrap();
        for (a, b) in out.pixels().iter().zip(img.pixels()) {
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() < 1e-4);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn unmasked_pixels_untouched(seed in any::<u64>(), w in 2usize..14, h in 2usize..14) {
            let img = Image::from_fn(w, h, |x, y| {
                let v = (seed.wrapping_mul(x as u64 * 7 + y as u64 * 13 + 1) >> 40) % 1000;
                [v as f64 / 999.0, 0.5, 1.0 - v as f64 / 999.0]
            });
            let mask = BinaryMask::from_fn(w, h, |x, y| (seed >> ((x * 3 + y) % 61)) & 1 == 1);
            let out = native_harmonic_inpaint(&request(img.clone(), mask.clone())).unwrap();
            for (i, &m) in mask.bits().iter().enumerate() {
                if !m {
                    prop_assert_eq!(out.pixels()[i], img.pixels()[i]);
                }
            }
        }
    }
}
