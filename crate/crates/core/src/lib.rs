//! Regenerate-and-rectify defense against adversarial patches in object detection.
//!
//! The pipeline has two stages:
//!
//! 1. **Regeneration** – the image is inpainted twice through complementary
//!    checkerboard masks so that every pixel of the result comes from the
//!    inpainter ([`regeneration`]).
//! 2. **Rectification** – the per-pixel distance between input and regenerated
//!    image is blurred and split into two clusters; pixels in the high-distance
//!    cluster are replaced by their regenerated counterparts ([`rectification`]).
//!
//! [`eval`] holds the detection metrics used to judge defenses (AP@0.5, AR and
//! attack success rates) and [`patch`] builds synthetic attack fixtures.

pub mod backend;
pub mod checkerboard;
pub mod config;
mod error;
pub mod eval;
pub mod image;
pub mod kmeans1d;
pub mod patch;
pub mod rectification;
pub mod regeneration;

pub use crate::backend::{BackendCapabilities, BackendError, InpainterBackend};
pub use crate::checkerboard::{checkerboard_masks, GridSpec};
pub use crate::config::{BackendConfig, DefenseConfig};
pub use crate::error::DefenseError;
pub use crate::image::{BinaryMask, DistanceMap, Image, ImageError};
pub use crate::kmeans1d::{two_means_1d, ClusterResult};
pub use crate::rectification::{defend, DefenseOutput, RectifyParams, RectifyVariant};
pub use crate::regeneration::{regenerate_full, InpaintRequest};
