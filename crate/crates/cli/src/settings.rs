//! Effective configuration: defaults, then the TOML file, then flags.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use patchregen::backend::WireMode;
use patchregen::{BackendConfig, DefenseConfig, RectifyVariant};
use sha2::{Digest, Sha256};

use crate::exit::{ErrorClass, Failure};

/// Overrides the remote inpaint service URL.
pub const INPAINT_URL_ENV: &str = "PATCHREGEN_INPAINT_URL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Native,
    Remote,
    IdentityStub,
    ConstantStub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Regenerated,
    Gray,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RemoteModeArg {
    Diffusion,
    StubBlur,
    StubIdentity,
}

impl From<RemoteModeArg> for WireMode {
    fn from(m: RemoteModeArg) -> Self {
        match m {
            RemoteModeArg::Diffusion => WireMode::Diffusion,
            RemoteModeArg::StubBlur => WireMode::StubBlur,
            RemoteModeArg::StubIdentity => WireMode::StubIdentity,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML configuration file; flags take precedence over it.
    #[arg(long, short = 'c', value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Checkerboard cells per side.
    #[arg(long)]
    pub n_grids: Option<usize>,
    /// Inpainter sampling steps.
    #[arg(long)]
    pub steps: Option<u32>,
    /// Working resolution (square side).
    #[arg(long)]
    pub canonical_size: Option<usize>,
    /// Distance-map blur window (odd).
    #[arg(long)]
    pub blur_kernel: Option<usize>,
    /// Distance range below which nothing is flagged.
    #[arg(long)]
    pub degeneracy_epsilon: Option<f64>,
    /// Replacement for flagged pixels.
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Inpainting backend.
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Inpaint service base URL.
    #[arg(long, env = INPAINT_URL_ENV)]
    pub inpaint_url: Option<String>,
    /// Remote request timeout in milliseconds.
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    /// Mode requested from the inpaint service.
    #[arg(long, value_enum)]
    pub remote_mode: Option<RemoteModeArg>,
    /// Fill value of the constant-stub backend.
    #[arg(long)]
    pub constant_value: Option<f64>,
    /// Seed of the first regeneration pass; the second uses seed + 1.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Return the regenerated image without rectification.
    #[arg(long)]
    pub no_rectify: bool,
}

pub fn load_config_file(path: &Path) -> anyhow::Result<DefenseConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn usage(message: impl Into<String>) -> anyhow::Error {
    Failure::new(ErrorClass::Usage, message).into()
}

impl ConfigArgs {
    pub fn resolve(&self) -> anyhow::Result<DefenseConfig> {
        let mut cfg = match &self.config {
            Some(p) => load_config_file(p).map_err(|e| {
                let class = if e.chain().any(|c| c.is::<std::io::Error>()) {
                    ErrorClass::Input
                } else {
                    ErrorClass::Usage
                };
                anyhow::Error::new(Failure::new(class, format!("{e:#}")))
            })?,
            None => DefenseConfig::default(),
        };
        if let Some(v) = self.n_grids {
            cfg.n_grids = v;
        }
        if let Some(v) = self.steps {
            cfg.steps = v;
        }
        if let Some(v) = self.canonical_size {
            cfg.canonical_size = v;
        }
        if let Some(v) = self.blur_kernel {
            cfg.blur_kernel = v;
        }
        if let Some(v) = self.degeneracy_epsilon {
            cfg.degeneracy_epsilon = v;
        }
        if let Some(v) = self.variant {
            cfg.variant = match v {
                VariantArg::Regenerated => RectifyVariant::Regenerated,
                VariantArg::Gray => RectifyVariant::Gray,
            };
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if self.no_rectify {
            cfg.rectification_enabled = false;
        }
        cfg.backend = self.resolve_backend(cfg.backend)?;
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }

    fn resolve_backend(&self, from_file: BackendConfig) -> anyhow::Result<BackendConfig> {
        let base = match self.backend {
            None => from_file,
            Some(kind) if kind_of(&from_file) == kind => from_file,
            Some(BackendKind::Native) => BackendConfig::Native,
            Some(BackendKind::IdentityStub) => BackendConfig::IdentityStub,
            Some(BackendKind::ConstantStub) => BackendConfig::ConstantStub { value: 0.5 },
            Some(BackendKind::Remote) => BackendConfig::Remote {
                url: String::new(),
                timeout_ms: 60_000,
                mode: WireMode::default(),
            },
        };
        Ok(match base {
            BackendConfig::Remote { url, timeout_ms, mode } => {
                let url = self.inpaint_url.clone().unwrap_or(url);
                if url.is_empty() {
                    return Err(usage(format!(
                        "remote backend needs --inpaint-url or {INPAINT_URL_ENV}"
                    )));
                }
                BackendConfig::Remote {
                    url,
                    timeout_ms: self.timeout_ms.unwrap_or(timeout_ms),
                    mode: self.remote_mode.map(Into::into).unwrap_or(mode),
                }
            }
            BackendConfig::ConstantStub { value } => BackendConfig::ConstantStub {
                value: self.constant_value.unwrap_or(value),
            },
            other => other,
        })
    }
}

fn kind_of(b: &BackendConfig) -> BackendKind {
    match b {
        BackendConfig::Native => BackendKind::Native,
        BackendConfig::Remote { .. } => BackendKind::Remote,
        BackendConfig::IdentityStub => BackendKind::IdentityStub,
        BackendConfig::ConstantStub { .. } => BackendKind::ConstantStub,
    }
}

/// SHA-256 of the canonical JSON rendering of `cfg`.
pub fn config_hash(cfg: &DefenseConfig) -> String {
    let json = serde_json::to_vec(cfg).expect("config serializes");
    sha256_hex(&json)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
