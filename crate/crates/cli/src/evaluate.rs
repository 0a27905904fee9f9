//! Metric computation over COCO-style files.

use clap::ValueEnum;
use patchregen::eval::{
    ap50, asr_creating, asr_hiding, average_recall, per_image_diagnostics, CreatingRule, Detection, EvalReport,
    GroundTruthBox, HidingRule, Id,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    Map,
    Ar,
    AsrHiding,
    AsrCreating,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalOptions {
    /// Overrides the score threshold of the selected attack rule.
    pub score_threshold: Option<f64>,
    /// Overrides the IoU threshold of the selected attack rule.
    pub iou_threshold: Option<f64>,
    /// Hiding rule: only detections of the target's category count.
    pub same_class: bool,
    /// Creating rule: the category a targeted attack aims for.
    pub target_class: Option<Id>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub mode: EvalMode,
    /// The metric selected by `mode`.
    pub value: f64,
    #[serde(flatten)]
    pub report: EvalReport,
}

/// Integer ids stay numeric; anything else is a string id.
pub fn parse_id(s: &str) -> Id {
    s.parse::<i64>().map(Id::Num).unwrap_or_else(|_| Id::Str(s.to_string()))
}

/// Computes AP@0.5 and AR on the object boxes (patch boxes excluded) and, for
/// the attack modes, the success rate over the relevant targets.
pub fn run_eval(
    gts: &[GroundTruthBox],
    dets: &[Detection],
    mode: EvalMode,
    opts: &EvalOptions,
) -> anyhow::Result<EvalOutput> {
    let (patches, objects): (Vec<GroundTruthBox>, Vec<GroundTruthBox>) = gts.iter().cloned().partition(|g| g.is_patch);
    let ap = ap50(dets, &objects);
    let ar = average_recall(dets, &objects);
    let asr = match mode {
        EvalMode::Map | EvalMode::Ar => None,
        EvalMode::AsrHiding => {
            let d = HidingRule::default();
            let rule = HidingRule {
                score_threshold: opts.score_threshold.unwrap_or(d.score_threshold),
                iou_threshold: opts.iou_threshold.unwrap_or(d.iou_threshold),
                require_same_class: opts.same_class,
            };
            Some(asr_hiding(dets, &objects, &rule)?.rate)
        }
        EvalMode::AsrCreating => {
            let d = CreatingRule::default();
            let rule = CreatingRule {
                score_threshold: opts.score_threshold.unwrap_or(d.score_threshold),
                iou_threshold: opts.iou_threshold.unwrap_or(d.iou_threshold),
            };
            Some(asr_creating(dets, &patches, opts.target_class.as_ref(), &rule)?.rate)
        }
    };
    let value = match mode {
        EvalMode::Map => ap,
        EvalMode::Ar => ar,
        _ => asr.expect("attack modes set asr"),
    };
    Ok(EvalOutput {
        mode,
        value,
        report: EvalReport {
            ap50: ap,
            ar,
            asr,
            per_image: per_image_diagnostics(dets, &objects),
        },
    })
}
