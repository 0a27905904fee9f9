//! HTTP client for the inpaint service.
//!
//! Wire format (JSON over HTTP/1.1):
//!
//! ```text
//! POST {base}/inpaint
//!   { "image_png_b64": str, "mask_png_b64": str, "steps": int >= 1,
//!     "seed": int | null, "mode": "diffusion" | "stub-blur" | "stub-identity" }
//!   -> 200 { "image_png_b64": str,
//!            "model_info": { "mode": str, "steps_used": int, "seed_used": int | null } }
//!   -> 400 malformed / dimension mismatch, 422 unsupported mode, 503 model not loaded
//! GET {base}/health
//!   -> 200 { "status": str, "mode": str, "model_loaded": bool,
//!            "name"?: str, "deterministic"?: bool, "supports_seed"?: bool }
//! ```
//!
//! The image is an RGB PNG; the mask is an 8-bit grayscale PNG with 255 marking
//! pixels to regenerate.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{BackendCapabilities, BackendError, InpaintRequest, InpainterBackend};
use crate::image::{decode_png, encode_mask_png, encode_png, Image};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WireMode {
    #[default]
    Diffusion,
    StubBlur,
    StubIdentity,
}

impl WireMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            WireMode::Diffusion => "diffusion",
            WireMode::StubBlur => "stub-blur",
            WireMode::StubIdentity => "stub-identity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InpaintWireRequest {
    pub image_png_b64: String,
    pub mask_png_b64: String,
    pub steps: u32,
    pub seed: Option<u64>,
    pub mode: WireMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub mode: String,
    pub steps_used: u32,
    pub seed_used: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InpaintWireResponse {
    pub image_png_b64: String,
    pub model_info: ModelInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub mode: String,
    pub model_loaded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deterministic: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supports_seed: Option<bool>,
}

impl HealthResponse {
    pub fn is_ok(&self) -> bool {
        self.status.eq_ignore_ascii_case("ok")
    }

    /// Capability descriptor advertised by the service; absent fields fall back
    /// to what the requested mode implies.
    pub fn capabilities(&self, base_url: &str) -> BackendCapabilities {
        let stub = self.mode != WireMode::Diffusion.as_str();
        BackendCapabilities {
            name: self.name.clone().unwrap_or_else(|| format!("remote({base_url})")),
            deterministic: self.deterministic.unwrap_or(stub),
            supports_seed: self.supports_seed.unwrap_or(true),
            concurrent: true,
        }
    }
}

impl InpaintWireRequest {
    pub fn encode(req: &InpaintRequest, mode: WireMode) -> Result<Self, BackendError> {
        Ok(Self {
            image_png_b64: B64.encode(encode_png(&req.image)?),
            mask_png_b64: B64.encode(encode_mask_png(&req.mask)?),
            steps: req.steps,
            seed: req.seed,
            mode,
        })
    }
}

impl InpaintWireResponse {
    pub fn decode_image(&self) -> Result<Image, BackendError> {
        let bytes = B64
            .decode(&self.image_png_b64)
            .map_err(|e| BackendError::Protocol(format!("bad base64 in response: {e}")))?;
        Ok(decode_png(&bytes)?)
    }
}

#[derive(Debug, Clone)]
pub struct RemoteBackend {
    base_url: String,
    timeout: Duration,
    mode: WireMode,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(base_url: impl Into<String>, timeout: Duration, mode: WireMode) -> Result<Self, BackendError> {
        let base_url = base_url.into().trim_end_matches('/').to_string();
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Unavailable {
                url: base_url.clone(),
                reason: e.to_string(),
            })?;
        Ok(Self {
            base_url,
            timeout,
            mode,
            client,
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn classify(&self, url: &str, e: reqwest::Error) -> BackendError {
        if e.is_timeout() {
            BackendError::Timeout {
                url: url.to_string(),
                timeout: self.timeout,
            }
        } else if e.is_decode() {
            BackendError::Protocol(format!("malformed response from {url}: {e}"))
        } else {
            BackendError::Unavailable {
                url: url.to_string(),
                reason: e.to_string(),
            }
        }
    }

    fn check_status(
        &self,
        url: &str,
        resp: reqwest::blocking::Response,
    ) -> Result<reqwest::blocking::Response, BackendError> {
        let status = resp.status();
        if status.is_success() {
            Ok(resp)
        } else {
            Err(BackendError::Status {
                url: url.to_string(),
                status: status.as_u16(),
                body: resp.text().unwrap_or_default(),
            })
        }
    }

    pub fn health(&self) -> Result<HealthResponse, BackendError> {
        let url = format!("{}/health", self.base_url);
        let resp = self.client.get(&url).send().map_err(|e| self.classify(&url, e))?;
        self.check_status(&url, resp)?
            .json()
            .map_err(|e| self.classify(&url, e))
    }
}

impl InpainterBackend for RemoteBackend {
    fn capabilities(&self) -> BackendCapabilities {
        BackendCapabilities {
            name: format!("remote({})", self.base_url),
            deterministic: self.mode != WireMode::Diffusion,
            supports_seed: true,
            concurrent: true,
        }
    }

    fn inpaint(&self, req: &InpaintRequest) -> Result<Image, BackendError> {
        let url = format!("{}/inpaint", self.base_url);
        let body = InpaintWireRequest::encode(req, self.mode)?;
        let resp = self
            .client
            .post(&url)
            .json(&body)
            .send()
            .map_err(|e| self.classify(&url, e))?;
        let wire: InpaintWireResponse = self
            .check_status(&url, resp)?
            .json()
            .map_err(|e| self.classify(&url, e))?;
        wire.decode_image()
    }
}
