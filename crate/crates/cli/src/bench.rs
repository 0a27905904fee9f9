//! Per-stage timing over a corpus.

use std::fmt::Write as _;

use patchregen::image::Image;
use patchregen::{defend, BackendCapabilities, DefenseConfig, InpainterBackend};
use serde::{Deserialize, Serialize};

use crate::defend::{tool_name, StageSeconds};
use crate::settings::config_hash;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    /// One wall-time sample per image, in seconds, in corpus order.
    pub samples: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl StageStats {
    pub fn from_samples(samples: Vec<f64>) -> Self {
        let n = samples.len();
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        let (mean, median, min, max) = if n == 0 {
            (0.0, 0.0, 0.0, 0.0)
        } else {
            let median = if n % 2 == 1 {
                sorted[n / 2]
            } else {
                (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
            };
            (samples.iter().sum::<f64>() / n as f64, median, sorted[0], sorted[n - 1])
        };
        Self {
            samples,
            mean,
            median,
            min,
            max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchStages {
    pub resize: StageStats,
    pub regeneration: StageStats,
    pub rectification: StageStats,
    pub total: StageStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub tool: String,
    pub backend: BackendCapabilities,
    pub config_sha256: String,
    pub images: Vec<String>,
    pub stages: BenchStages,
}

impl BenchReport {
    /// Structural checks: one sample per image per stage, consistent summaries.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.images.len();
        for (name, s) in self.stage_list() {
            if s.samples.len() != n {
                return Err(format!("{name}: {} samples for {n} images", s.samples.len()));
            }
            if s.samples.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(format!("{name}: negative or non-finite sample"));
            }
            if n > 0 && !(s.min <= s.median && s.median <= s.max && s.min <= s.mean && s.mean <= s.max) {
                return Err(format!("{name}: summary outside sample range"));
            }
        }
        Ok(())
    }

    pub fn stage_list(&self) -> [(&'static str, &StageStats); 4] {
        [
            ("resize", &self.stages.resize),
            ("regeneration", &self.stages.regeneration),
            ("rectification", &self.stages.rectification),
            ("total", &self.stages.total),
        ]
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} images, backend {}",
            self.images.len(),
            self.backend.name
        );
        let _ = writeln!(out, "{:<14} {:>12} {:>12} {:>12} {:>12}", "stage", "mean ms", "median ms", "min ms", "max ms");
        for (name, s) in self.stage_list() {
            let _ = writeln!(
                out,
                "{:<14} {:>12.3} {:>12.3} {:>12.3} {:>12.3}",
                name,
                s.mean * 1e3,
                s.median * 1e3,
                s.min * 1e3,
                s.max * 1e3
            );
        }
        out
    }
}

/// Runs `defend` once per image, sequentially, and summarizes stage timings.
pub fn run_bench(
    corpus: &[(String, Image)],
    cfg: &DefenseConfig,
    backend: &dyn InpainterBackend,
) -> anyhow::Result<BenchReport> {
    let mut samples: Vec<StageSeconds> = Vec::with_capacity(corpus.len());
    for (name, img) in corpus {
        let out = defend(img, cfg, backend).map_err(|e| anyhow::Error::new(e).context(format!("benchmarking {name}")))?;
        samples.push(out.timings.into());
    }
    let col = |f: fn(&StageSeconds) -> f64| StageStats::from_samples(samples.iter().map(f).collect());
    Ok(BenchReport {
        tool: tool_name(),
        backend: backend.capabilities(),
        config_sha256: config_hash(cfg),
        images: corpus.iter().map(|(n, _)| n.clone()).collect(),
        stages: BenchStages {
            resize: col(|s| s.resize),
            regeneration: col(|s| s.regeneration),
            rectification: col(|s| s.rectification),
            total: col(|s| s.total),
        },
    })
}
