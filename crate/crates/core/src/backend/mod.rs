//! Inpainter backends.
//!
//! A backend fills the masked region of an image. The regeneration stage treats
//! every backend as untrusted outside the mask: only masked pixels of a backend
//! response are ever read.

mod harmonic;
mod remote;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{BinaryMask, Image, ImageError};

pub use harmonic::{native_harmonic_inpaint, HarmonicBackend, MAX_SWEEPS, TOLERANCE};
pub use remote::{
    HealthResponse, InpaintWireRequest, InpaintWireResponse, ModelInfo, RemoteBackend, WireMode,
};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("inpaint backend at {url} is unavailable: {reason}")]
    Unavailable { url: String, reason: String },
    #[error("inpaint backend at {url} timed out after {timeout:?}")]
    Timeout { url: String, timeout: Duration },
    #[error("inpaint backend at {url} returned HTTP {status}: {body}")]
    Status {
        url: String,
        status: u16,
        body: String,
    },
    #[error("inpaint backend protocol error: {0}")]
    Protocol(String),
    #[error("backend returned {got_w}x{got_h} image for a {want_w}x{want_h} request")]
    WrongDimensions {
        want_w: usize,
        want_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("invalid inpaint request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Capability descriptor advertised by a backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendCapabilities {
    pub name: String,
    pub deterministic: bool,
    pub supports_seed: bool,
    /// Whether `inpaint` may be called from several threads at once.
    #[serde(default = "default_true")]
    pub concurrent: bool,
}

fn default_true() -> bool {
    true
}

/// One inpainting pass: regenerate the pixels where `mask` is set.
#[derive(Debug, Clone)]
pub struct InpaintRequest {
    pub image: Image,
    pub mask: BinaryMask,
    pub steps: u32,
    pub seed: Option<u64>,
}

impl InpaintRequest {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.image.dims() != self.mask.dims() {
            return Err(BackendError::InvalidRequest(format!(
                "image is {}x{} but mask is {}x{}",
                self.image.width(),
                self.image.height(),
                self.mask.width(),
                self.mask.height()
            )));
        }
        if self.steps == 0 {
            return Err(BackendError::InvalidRequest("steps must be >= 1".into()));
        }
        Ok(())
    }
}

pub trait InpainterBackend: Send + Sync {
    fn capabilities(&self) -> BackendCapabilities;

    fn inpaint(&self, req: &InpaintRequest) -> Result<Image, BackendError>;
}

impl<B: InpainterBackend + ?Sized> InpainterBackend for Box<B> {
    fn capabilities(&self) -> BackendCapabilities {
        (**self).capabilities()
    }

    fn inpaint(&self, req: &InpaintRequest) -> Result<Image, BackendError> {
        (**self).inpaint(req)
    }
}

/// Validates the request, calls the backend and checks the response dimensions.
pub fn inpaint(backend: &dyn InpainterBackend, req: &InpaintRequest) -> Result<Image, BackendError> {
    req.validate()?;
    let out = backend.inpaint(req)?;
    if out.dims() != req.image.dims() {
        return Err(BackendError::WrongDimensions {
            want_w: req.image.width(),
            want_h: req.image.height(),
            got_w: out.width(),
            got_h: out.height(),
        });
    }
    Ok(out)
}

/// Echoes the request image.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityBackend;

impl InpainterBackend for IdentityBackend {
    fn capabilities(&self) -> BackendCapabilities {
        BackendCapabilities {
            name: "identity-stub".into(),
            deterministic: true,
            supports_seed: false,
            concurrent: true,
        }
    }

    fn inpaint(&self, req: &InpaintRequest) -> Result<Image, BackendError> {
        Ok(req.image.clone())
    }
}

/// Fills the masked region with a constant gray level.
#[derive(Debug, Clone, Copy)]
pub struct ConstantBackend {
    pub value: f64,
}

impl InpainterBackend for ConstantBackend {
    fn capabilities(&self) -> BackendCapabilities {
        BackendCapabilities {
            name: format!("constant-stub({})", self.value),
            deterministic: true,
            supports_seed: false,
            concurrent: true,
        }
    }

    fn inpaint(&self, req: &InpaintRequest) -> Result<Image, BackendError> {
        let fill = [self.value; 3];
        Ok(Image::from_fn(req.image.width(), req.image.height(), |x, y| {
            if req.mask.get(x, y) {
                fill
            } else {
                req.image.get(x, y)
            }
        }))
    }
}
