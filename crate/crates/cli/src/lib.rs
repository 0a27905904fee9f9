//! Command-line front end: batch defense, metric evaluation, attack fixtures
//! and stage benchmarks.

pub mod bench;
pub mod defend;
pub mod evaluate;
pub mod exit;
pub mod fixture;
pub mod settings;

use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use patchregen::eval::{load_coco_annotations, load_detections};
use patchregen::image::load_png;

use crate::evaluate::{parse_id, EvalMode, EvalOptions};
use crate::exit::{ErrorClass, Failure};
use crate::settings::ConfigArgs;

#[derive(Debug, Parser)]
#[command(name = "patchregen", version, about = "Regenerate-and-rectify defense against adversarial patches")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Defend a PNG file or every PNG in a directory.
    Defend {
        /// Input PNG file or directory.
        input: PathBuf,
        /// Directory for result images and the run manifest.
        #[arg(long, short)]
        output: PathBuf,
        /// Worker threads.
        #[arg(long, short = 'j', default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score detections against COCO-style ground truth.
    Eval {
        /// Ground-truth annotations (COCO JSON).
        #[arg(long)]
        gt: PathBuf,
        /// Detections (JSON array).
        #[arg(long)]
        dets: PathBuf,
        #[arg(long, value_enum, default_value = "map")]
        mode: EvalMode,
        /// Attack rule score threshold (default 0.9 hiding, 0.3 creating).
        #[arg(long)]
        score_threshold: Option<f64>,
        /// Attack rule IoU threshold (default 0.5 hiding, 0.1 creating).
        #[arg(long)]
        iou_threshold: Option<f64>,
        /// Hiding: only detections of the target's category defend it.
        #[arg(long)]
        same_class: bool,
        /// Creating: targeted attack class.
        #[arg(long)]
        target_class: Option<String>,
        /// Also write the report here.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Paste a patch onto every annotated object.
    AttackFixture {
        /// Input PNG file or directory.
        images: PathBuf,
        /// Ground-truth annotations with the victim boxes.
        #[arg(long)]
        targets: PathBuf,
        /// Patch image; a seeded noise patch is used when absent.
        #[arg(long, conflicts_with = "seed")]
        patch: Option<PathBuf>,
        /// Seed of the synthetic noise patch.
        #[arg(long)]
        seed: Option<u64>,
        /// Side of the synthetic patch before scaling.
        #[arg(long, default_value_t = 64)]
        synth_side: usize,
        /// Patch height relative to the target box diagonal.
        #[arg(long, default_value_t = 0.2)]
        ratio: f64,
        /// Produce the 0.2 / 0.25 / 0.3 ratio sweep.
        #[arg(long)]
        sweep: bool,
        /// Horizontal shift of the patch from the box centre, in pixels.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        offset_x: f64,
        /// Vertical shift of the patch from the box centre, in pixels.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        offset_y: f64,
        /// Directory for attacked images, placements and patch annotations.
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Time each defense stage over a corpus.
    Bench {
        /// Input PNG file or directory.
        corpus: PathBuf,
        /// Write the JSON report here.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Print JSON instead of the table.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn write_json(path: &std::path::Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Defend {
            input,
            output,
            jobs,
            config,
        } => {
            let cfg = config.resolve()?;
            let backend = cfg.backend.build()?;
            let inputs = defend::collect_pngs(&input)?;
            let manifest = defend::run_defend(&inputs, &output, &cfg, &*backend, jobs)?;
            let path = defend::write_manifest(&manifest, &output)?;
            eprintln!(
                "defended {} of {} images; manifest {}",
                manifest.images.len(),
                inputs.len(),
                path.display()
            );
            match defend::batch_failure(&manifest) {
                Some(f) => Err(f.into()),
                None => Ok(()),
            }
        }
        Command::Eval {
            gt,
            dets,
            mode,
            score_threshold,
            iou_threshold,
            same_class,
            target_class,
            output,
        } => {
            let gts = load_coco_annotations(&gt)?;
            let dets = load_detections(&dets)?;
            let opts = EvalOptions {
                score_threshold,
                iou_threshold,
                same_class,
                target_class: target_class.as_deref().map(parse_id),
            };
            let report = evaluate::run_eval(&gts, &dets, mode, &opts)?;
            let text = serde_json::to_string_pretty(&report)?;
            writeln!(std::io::stdout(), "{text}")?;
            if let Some(p) = output {
                write_json(&p, &report)?;
            }
            Ok(())
        }
        Command::AttackFixture {
            images,
            targets,
            patch,
            seed,
            synth_side,
            ratio,
            sweep,
            offset_x,
            offset_y,
            output,
        } => {
            let targets_json = std::fs::read_to_string(&targets)
                .with_context(|| format!("reading targets {}", targets.display()))?;
            let patch = match patch {
                Some(p) => fixture::load_patch(&p)?,
                None => fixture::synth_patch(synth_side, seed.unwrap_or(0)),
            };
            let ratios = if sweep {
                fixture::SWEEP_RATIOS.to_vec()
            } else {
                vec![ratio]
            };
            let job = fixture::FixtureJob {
                images: defend::collect_pngs(&images)?,
                targets_json,
                patch,
                ratios,
                offset: (offset_x, offset_y),
                out_dir: output,
            };
            let m = fixture::run_fixture(&job)?;
            eprintln!("placed {} patches", m.placements.len());
            Ok(())
        }
        Command::Bench {
            corpus,
            output,
            json,
            config,
        } => {
            let cfg = config.resolve()?;
            let backend = cfg.backend.build()?;
            let files = defend::collect_pngs(&corpus)?;
            let mut images = Vec::with_capacity(files.len());
            for f in &files {
                images.push((f.display().to_string(), load_png(f)?));
            }
            let report = bench::run_bench(&images, &cfg, &*backend)?;
            report
                .validate()
                .map_err(|m| Failure::new(ErrorClass::Internal, m))?;
            if json {
                writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&report)?)?;
            } else {
                write!(std::io::stdout(), "{}", report.table())?;
            }
            if let Some(p) = output {
                write_json(&p, &report)?;
            }
            Ok(())
        }
    }
}
