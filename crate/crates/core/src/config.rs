//! Defense configuration.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backend::{
    ConstantBackend, HarmonicBackend, IdentityBackend, InpainterBackend, RemoteBackend, WireMode,
};
use crate::error::DefenseError;
use crate::rectification::{RectifyParams, RectifyVariant};

/// Which inpainter fills the checkerboard cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendConfig {
    /// Deterministic harmonic (Laplace) fill.
    #[default]
    Native,
    /// Inpaint service reached over HTTP.
    Remote {
        url: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default)]
        mode: WireMode,
    },
    IdentityStub,
    ConstantStub {
        #[serde(default = "default_constant")]
        value: f64,
    },
}

fn default_timeout_ms() -> u64 {
    60_000
}

fn default_constant() -> f64 {
    0.5
}

impl BackendConfig {
    pub fn build(&self) -> Result<Box<dyn InpainterBackend>, DefenseError> {
        Ok(match self {
            BackendConfig::Native => Box::new(HarmonicBackend),
            BackendConfig::Remote {
                url,
                timeout_ms,
                mode,
            } => Box::new(RemoteBackend::new(
                url.clone(),
                Duration::from_millis(*timeout_ms),
                *mode,
            )?),
            BackendConfig::IdentityStub => Box::new(IdentityBackend),
            BackendConfig::ConstantStub { value } => Box::new(ConstantBackend { value: *value }),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefenseConfig {
    /// Checkerboard cells per side.
    pub n_grids: usize,
    /// Sampling steps passed through to the inpainter.
    pub steps: u32,
    /// Side length of the square working resolution.
    pub canonical_size: usize,
    /// Box-blur window applied to the distance map; must be odd.
    pub blur_kernel: usize,
    /// Distance-map ranges below this are treated as "nothing to flag".
    pub degeneracy_epsilon: f64,
    pub variant: RectifyVariant,
    pub backend: BackendConfig,
    /// Seed of the first inpainting pass; the second pass uses `seed + 1`.
    pub seed: Option<u64>,
    /// When false the regenerated image is returned as-is.
    pub rectification_enabled: bool,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        Self {
            n_grids: 32,
            steps: 5,
            canonical_size: 512,
            blur_kernel: 9,
            degeneracy_epsilon: 1e-6,
            variant: RectifyVariant::Regenerated,
            backend: BackendConfig::Native,
            seed: None,
            rectification_enabled: true,
        }
    }
}

impl DefenseConfig {
    pub fn validate(&self) -> Result<(), DefenseError> {
        let fail = |m: String| Err(DefenseError::Config(m));
        if self.canonical_size == 0 {
            return fail("canonical_size must be >= 1".into());
        }
        if self.n_grids == 0 || self.n_grids > self.canonical_size {
            return fail(format!(
                "n_grids must be in 1..={} (got {})",
                self.canonical_size, self.n_grids
            ));
        }
        if self.steps == 0 {
            return fail("steps must be >= 1".into());
        }
        if self.blur_kernel == 0 || self.blur_kernel % 2 == 0 {
            return fail(format!("blur_kernel must be odd (got {})", self.blur_kernel));
        }
        if !(self.degeneracy_epsilon >= 0.0) {
            return fail("degeneracy_epsilon must be >= 0".into());
        }
        if let BackendConfig::ConstantStub { value } = self.backend {
            if !(0.0..=1.0).contains(&value) {
                return fail(format!("constant-stub value {value} outside [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn rectify_params(&self) -> RectifyParams {
        RectifyParams {
            blur_kernel: self.blur_kernel,
            degeneracy_epsilon: self.degeneracy_epsilon,
            variant: self.variant,
        }
    }

    /// Seeds for the two inpainting passes.
    pub fn pass_seeds(&self) -> (Option<u64>, Option<u64>) {
        (self.seed, self.seed.map(|s| s.wrapping_add(1)))
    }
}
