//! Batch defense: one result triple per input plus a run manifest.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use patchregen::image::{decode_png, save_mask_png, save_png};
use patchregen::rectification::StageTimings;
use patchregen::{defend, BackendCapabilities, DefenseConfig, InpainterBackend};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exit::{classify, ErrorClass, Failure};
use crate::settings::{config_hash, sha256_hex};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Per-stage wall time in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageSeconds {
    pub resize: f64,
    pub regeneration: f64,
    pub rectification: f64,
    pub total: f64,
}

impl From<StageTimings> for StageSeconds {
    fn from(t: StageTimings) -> Self {
        let s = Duration::as_secs_f64;
        Self {
            resize: s(&t.resize),
            regeneration: s(&t.regeneration),
            rectification: s(&t.rectification),
            total: s(&(t.resize + t.regeneration + t.rectification)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub input: PathBuf,
    pub input_sha256: String,
    pub width: usize,
    pub height: usize,
    pub output: PathBuf,
    pub mask: PathBuf,
    pub regen: PathBuf,
    /// Fraction of pixels in the adversarial mask.
    pub flagged_fraction: f64,
    pub timings: StageSeconds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub input: PathBuf,
    pub class: ErrorClass,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassSeeds {
    pub first: Option<u64>,
    pub second: Option<u64>,
}

/// Everything needed to re-run a batch bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub config: DefenseConfig,
    pub config_sha256: String,
    pub seeds: PassSeeds,
    pub backend: BackendCapabilities,
    pub workers: usize,
    /// Successful images, ordered by input path.
    pub images: Vec<ImageRecord>,
    pub failures: Vec<FailureRecord>,
}

pub fn tool_name() -> String {
    format!("patchregen {}", env!("CARGO_PKG_VERSION"))
}

/// `<dir>/<stem>_<suffix>.png`
pub fn artifact_path(out_dir: &Path, input: &Path, suffix: &str) -> PathBuf {
    let stem = input.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default();
    out_dir.join(format!("{stem}_{suffix}.png"))
}

/// PNG files named by `input`: the file itself, or a directory's `*.png`
/// entries (non-recursive) in lexicographic order.
pub fn collect_pngs(input: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let meta = std::fs::metadata(input).with_context(|| format!("input {}", input.display()))?;
    if meta.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in std::fs::read_dir(input).with_context(|| format!("listing {}", input.display()))? {
        let path = entry?.path();
        let is_png = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Failure::new(ErrorClass::Input, format!("no PNG files in {}", input.display())).into());
    }
    Ok(files)
}

fn defend_one(
    input: &Path,
    out_dir: &Path,
    cfg: &DefenseConfig,
    backend: &dyn InpainterBackend,
) -> anyhow::Result<ImageRecord> {
    let bytes = std::fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    let image = decode_png(&bytes).with_context(|| format!("decoding {}", input.display()))?;
    let result = defend(&image, cfg, backend).with_context(|| format!("defending {}", input.display()))?;

    let output = artifact_path(out_dir, input, "output");
    let mask = artifact_path(out_dir, input, "mask");
    let regen = artifact_path(out_dir, input, "regen");
    save_png(&result.output, &output)?;
    save_mask_png(&result.adv_mask, &mask)?;
    save_png(&result.regen, &regen)?;

    Ok(ImageRecord {
        input: input.to_path_buf(),
        input_sha256: sha256_hex(&bytes),
        width: image.width(),
        height: image.height(),
        output,
        mask,
        regen,
        flagged_fraction: result.adv_mask.fraction_set(),
        timings: result.timings.into(),
    })
}

/// Defends every input on a pool of `workers` threads. Per-image failures are
/// collected in the manifest rather than aborting the batch.
pub fn run_defend(
    inputs: &[PathBuf],
    out_dir: &Path,
    cfg: &DefenseConfig,
    backend: &dyn InpainterBackend,
    workers: usize,
) -> anyhow::Result<RunManifest> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .context("building worker pool")?;
    let mut sorted = inputs.to_vec();
    sorted.sort();
    let results: Vec<_> = pool.install(|| {
        sorted
            .par_iter()
            .map(|p| (p.clone(), defend_one(p, out_dir, cfg, backend)))
            .collect()
    });

    let mut images = Vec::new();
    let mut failures = Vec::new();
    for (input, r) in results {
        match r {
            Ok(rec) => {
                log::info!("{}: flagged {:.4}", input.display(), rec.flagged_fraction);
                images.push(rec);
            }
            Err(e) => {
                log::error!("{}: {e:#}", input.display());
                failures.push(FailureRecord {
                    input,
                    class: classify(&e),
                    error: format!("{e:#}"),
                });
            }
        }
    }
    let (first, second) = cfg.pass_seeds();
    Ok(RunManifest {
        tool: tool_name(),
        config: cfg.clone(),
        config_sha256: config_hash(cfg),
        seeds: PassSeeds { first, second },
        backend: backend.capabilities(),
        workers: workers.max(1),
        images,
        failures,
    })
}

pub fn write_manifest(manifest: &RunManifest, out_dir: &Path) -> anyhow::Result<PathBuf> {
    let path = out_dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(manifest)?;
    std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Error for a batch with failures; backend problems take precedence.
pub fn batch_failure(manifest: &RunManifest) -> Option<Failure> {
    let first = manifest.failures.first()?;
    let class = if manifest.failures.iter().any(|f| f.class == ErrorClass::Backend) {
        ErrorClass::Backend
    } else {
        first.class
    };
    Some(Failure::new(
        class,
        format!(
            "{} of {} images failed; first: {}",
            manifest.failures.len(),
            manifest.failures.len() + manifest.images.len(),
            first.error
        ),
    ))
}
