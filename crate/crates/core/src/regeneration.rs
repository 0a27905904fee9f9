//! Full-image regeneration through two complementary inpainting passes.
//!
//! `regen = inpaint(I, m0) ⊙ m0 ⊕ inpaint(I, m1) ⊙ m1`. Because `m0 + m1 = J`
//! every output pixel comes from a backend-filled region; unmasked pixels of a
//! backend response are never read.

use crate::backend::{inpaint, BackendError, InpainterBackend};
use crate::checkerboard::{checkerboard_masks, GridSpec};
use crate::config::DefenseConfig;
use crate::error::DefenseError;
use crate::image::{compose, Image};

pub use crate::backend::InpaintRequest;

/// Regenerates every pixel of `image` (expected at the canonical resolution).
///
/// The two passes run concurrently when the backend declares itself safe for
/// concurrent calls. Any backend failure fails the whole call.
pub fn regenerate_full(
    image: &Image,
    cfg: &DefenseConfig,
    backend: &dyn InpainterBackend,
) -> Result<Image, DefenseError> {
    let spec = GridSpec::new(cfg.n_grids, image.width(), image.height())?;
    let (m0, m1) = checkerboard_masks(spec)?;
    let (seed0, seed1) = cfg.pass_seeds();
    let req0 = InpaintRequest {
        image: image.clone(),
        mask: m0,
        steps: cfg.steps,
        seed: seed0,
    };
    let req1 = InpaintRequest {
        image: image.clone(),
        mask: m1,
        steps: cfg.steps,
        seed: seed1,
    };

    let (out0, out1): (Result<Image, BackendError>, Result<Image, BackendError>) =
        if backend.capabilities().concurrent {
            std::thread::scope(|s| {
                let h = s.spawn(|| inpaint(backend, &req1));
                let first = inpaint(backend, &req0);
                let second = h.join().unwrap_or_else(|p| std::panic::resume_unwind(p));
                (first, second)
            })
        } else {
            (inpaint(backend, &req0), inpaint(backend, &req1))
        };
    let (out0, out1) = (out0?, out1?);
    Ok(compose(&out0, &out1, &req0.mask)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{BackendCapabilities, ConstantBackend, HarmonicBackend, IdentityBackend};
    use std::sync::Mutex;

    fn small_cfg(n: usize) -> DefenseConfig {
        DefenseConfig {
            n_grids: n,
            canonical_size: 32,
            ..Default::default()
        }
    }

    fn gradient(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, y| [x as f64 / w as f64, y as f64 / h as f64, 0.3])
    }

    #[test]
    fn identity_backend_returns_input() {
        let img = gradient(32, 24);
        assert_eq!(regenerate_full(&img, &small_cfg(4), &IdentityBackend).unwrap(), img);
    }

    #[test]
    fn constant_backend_fills_everything() {
        let img = gradient(32, 24);
        let out = regenerate_full(&img, &small_cfg(4), &ConstantBackend { value: 0.5 }).unwrap();
        assert!(out.pixels().iter().all(|p| *p == [0.5; 3]));
    }

    #[test]
    fn harmonic_backend_preserves_constants() {
        let img = Image::filled(32, 32, [0.2, 0.4, 0.6]);
        assert_eq!(regenerate_full(&img, &small_cfg(8), &HarmonicBackend).unwrap(), img);
    }

    struct Failing;
    impl InpainterBackend for Failing {
        fn capabilities(&self) -> BackendCapabilities {
            IdentityBackend.capabilities()
        }
        fn inpaint(&self, _: &InpaintRequest) -> Result<Image, BackendError> {
            Err(BackendError::Protocol("boom".into()))
        }
    }

    #[test]
    fn backend_errors_propagate() {
        let err = regenerate_full(&gradient(8, 8), &small_cfg(2), &Failing).unwrap_err();
        assert!(matches!(err, DefenseError::Backend(BackendError::Protocol(_))));
    }

    #[derive(Default)]
    struct SeedRecorder(Mutex<Vec<Option<u64>>>, bool);
    impl InpainterBackend for SeedRecorder {
        fn capabilities(&self) -> BackendCapabilities {
            BackendCapabilities {
                concurrent: self.1,
                ..IdentityBackend.capabilities()
            }
        }
        fn inpaint(&self, req: &InpaintRequest) -> Result<Image, BackendError> {
            self.0.lock().unwrap().push(req.seed);
            Ok(req.image.clone())
        }
    }

    #[test]
    fn passes_get_independent_seeds() {
        let cfg = DefenseConfig {
            seed: Some(7),
            ..small_cfg(2)
        };
        let rec = SeedRecorder(Mutex::new(Vec::new()), false);
        regenerate_full(&gradient(8, 8), &cfg, &rec).unwrap();
        assert_eq!(*rec.0.lock().unwrap(), vec![Some(7), Some(8)]);
    }

    #[test]
    fn grid_larger_than_image_is_rejected() {
        let err = regenerate_full(&gradient(4, 4), &small_cfg(8), &IdentityBackend).unwrap_err();
        assert!(matches!(err, DefenseError::Grid(_)));
    }
}
