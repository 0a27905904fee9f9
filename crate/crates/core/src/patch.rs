//! Synthetic attack fixtures: pasting patches onto victim boxes.
//!
//! Patch size follows the scale-ratio convention: the pasted height is
//! `ratio × diagonal(target)`, aspect ratio preserved, centered on the target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::BBox;
use crate::image::{resize, Image, ImageError};

#[derive(Debug, Error)]
pub enum PatchError {
    #[error("degenerate target box {0:?}")]
    DegenerateTarget(BBox),
    #[error("target box {target:?} outside {width}x{height} image")]
    TargetOutOfBounds {
        target: BBox,
        width: usize,
        height: usize,
    },
    #[error("scale ratio {0} outside (0, 1]")]
    InvalidRatio(f64),
    #[error("patch image is empty")]
    EmptyPatch,
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchPlacement {
    /// Patch height relative to the target box diagonal.
    pub scale_ratio: f64,
    /// Pixel offset added to the target center.
    #[serde(default)]
    pub offset: (f64, f64),
}

impl PatchPlacement {
    pub fn centered(scale_ratio: f64) -> Self {
        Self {
            scale_ratio,
            offset: (0.0, 0.0),
        }
    }
}

/// Where a patch landed. `x`/`y` may be negative when the patch was clipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PastedPatch {
    pub x: i64,
    pub y: i64,
    pub width: usize,
    pub height: usize,
    /// `scale_ratio × diagonal` before rounding.
    pub target_height: f64,
    pub clipped: bool,
}

impl PastedPatch {
    /// The pasted rectangle intersected with the image.
    pub fn visible_rect(&self, img_w: usize, img_h: usize) -> Option<(usize, usize, usize, usize)> {
        let x0 = self.x.max(0);
        let y0 = self.y.max(0);
        let x1 = (self.x + self.width as i64).min(img_w as i64);
        let y1 = (self.y + self.height as i64).min(img_h as i64);
        (x1 > x0 && y1 > y0).then(|| (x0 as usize, y0 as usize, (x1 - x0) as usize, (y1 - y0) as usize))
    }
}

/// Pastes `patch` over `target`, overwriting pixels and clipping at the borders.
pub fn apply_patch(
    image: &Image,
    patch: &Image,
    target: &BBox,
    place: &PatchPlacement,
) -> Result<(Image, PastedPatch), PatchError> {
    if !(place.scale_ratio > 0.0 && place.scale_ratio <= 1.0) {
        return Err(PatchError::InvalidRatio(place.scale_ratio));
    }
    if !(target.w > 0.0 && target.h > 0.0) {
        return Err(PatchError::DegenerateTarget(*target));
    }
    let (w, h) = image.dims();
    if target.x < 0.0 || target.y < 0.0 || target.x + target.w > w as f64 || target.y + target.h > h as f64 {
        return Err(PatchError::TargetOutOfBounds {
            target: *target,
            width: w,
            height: h,
        });
    }
    if patch.width() == 0 || patch.height() == 0 {
        return Err(PatchError::EmptyPatch);
    }

    let target_height = place.scale_ratio * target.diagonal();
    let mut ph = target_height.round() as usize;
    if ph < 1 {
        log::warn!("patch height {target_height:.3}px rounds below 1px, using 1px");
        ph = 1;
    }
    let pw = ((patch.width() as f64 * ph as f64 / patch.height() as f64).round() as usize).max(1);
    let scaled = resize(patch, pw, ph)?;

    let (cx, cy) = target.center();
    let x0 = (cx + place.offset.0 - pw as f64 / 2.0).round() as i64;
    let y0 = (cy + place.offset.1 - ph as f64 / 2.0).round() as i64;

    let mut out = image.clone();
    let mut clipped = false;
    for py in 0..ph {
        for px in 0..pw {
            let (x, y) = (x0 + px as i64, y0 + py as i64);
            if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
                clipped = true;
                continue;
            }
            out.set(x as usize, y as usize, scaled.get(px, py));
        }
    }
    Ok((
        out,
        PastedPatch {
            x: x0,
            y: y0,
            width: pw,
            height: ph,
            target_height,
            clipped,
        },
    ))
}

/// Seeded uniform-noise RGB square.
pub fn synth_noise_patch(side: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(side, side, |_, _| [rng.random(), rng.random(), rng.random()])
}

/// Clean 512×512 smooth-gradient scene with one seeded uniform-noise patch.
///
/// The victim box is 288×384 (diagonal 480) centered in the frame, so a scale
/// ratio of 0.2 yields a 96×96 patch centered at (256, 256).
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub clean: Image,
    pub attacked: Image,
    pub victim: BBox,
    pub patch: PastedPatch,
}

pub const SCENE_SIZE: usize = 512;

pub fn smooth_gradient(width: usize, height: usize) -> Image {
    let (fw, fh) = ((width.max(2) - 1) as f64, (height.max(2) - 1) as f64);
    Image::from_fn(width, height, |x, y| {
        let (u, v) = (x as f64 / fw, y as f64 / fh);
        [0.15 + 0.7 * u, 0.2 + 0.6 * v, 0.3 + 0.2 * (u + v)]
    })
}

pub fn synthetic_patch_scene(seed: u64) -> SyntheticScene {
    let clean = smooth_gradient(SCENE_SIZE, SCENE_SIZE);
    let victim = BBox::new(112.0, 64.0, 288.0, 384.0);
    let noise = synth_noise_patch(96, seed);
    let (attacked, patch) = apply_patch(&clean, &noise, &victim, &PatchPlacement::centered(0.2))
        .expect("fixed scene geometry is valid");
    SyntheticScene {
        clean,
        attacked,
        victim,
        patch,
    }
}
