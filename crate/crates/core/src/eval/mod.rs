//! Detection metrics: IoU, COCO-style AP@0.5 and AR, and attack success rates.
//!
//! Matching follows pycocotools: detections are ranked by descending score (ties
//! keep input order), each one is greedily matched to the unmatched ground truth
//! in its image and category with the highest IoU at or above the threshold,
//! and precision is read off a 101-point interpolated PR curve.

mod coco;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coco::{load_coco_annotations, load_detections, parse_coco_annotations, parse_detections};

/// Image or category identifier; COCO files use integers but strings are accepted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Id {
    Num(i64),
    Str(String),
}

impl fmt::Display for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Id::Num(n) => write!(f, "{n}"),
            Id::Str(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Id {
    fn from(v: i64) -> Self {
        Id::Num(v)
    }
}

impl From<&str> for Id {
    fn from(v: &str) -> Self {
        Id::Str(v.to_string())
    }
}

/// Axis-aligned box, `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn diagonal(&self) -> f64 {
        self.w.hypot(self.h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: Id,
    pub bbox: BBox,
    pub score: f64,
    pub category: Id,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthBox {
    pub image_id: Id,
    pub bbox: BBox,
    pub category: Id,
    /// Marks adversarial-patch boxes used by the creating-attack rule.
    pub is_patch: bool,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON in {what}: {message}")]
    Json { what: &'static str, message: String },
    #[error("{what} record {index}: field `{field}`: {message}")]
    Schema {
        what: &'static str,
        index: usize,
        field: String,
        message: String,
    },
    #[error("attack success rate needs at least one {0}")]
    EmptyTargets(&'static str),
}

/// Intersection over union; 0 when the union is empty.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let iy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    let inter = ix.max(0.0) * iy.max(0.0);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).min(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    /// Detections kept per image and category, highest scores first.
    pub max_dets: usize,
    /// AP/AR reported when there is no ground truth and no detection.
    pub empty_gt_no_dets: f64,
    /// AP/AR reported when there is no ground truth but some detections.
    pub empty_gt_with_dets: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            max_dets: 100,
            empty_gt_no_dets: 1.0,
            empty_gt_with_dets: 0.0,
        }
    }
}

/// IoU ladder 0.50:0.05:0.95 used by AR.
pub fn ar_iou_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

/// Recall levels 0:0.01:1 of the interpolated PR curve.
pub fn recall_levels() -> [f64; 101] {
    std::array::from_fn(|i| i as f64 / 100.0)
}

/// Matching outcome of one category at one IoU threshold.
struct ClassMatch<'a> {
    ranked: Vec<&'a Detection>,
    /// TP flag of every ranked detection, in rank order.
    tp: Vec<bool>,
    n_gt: usize,
}

fn rank_detections<'a>(dets: &[&'a Detection], max_dets: usize) -> Vec<&'a Detection> {
    let mut ranked: Vec<&Detection> = dets.to_vec();
    // stable: ties keep input order
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut per_image: BTreeMap<&Id, usize> = BTreeMap::new();
    ranked.retain(|d| {
        let n = per_image.entry(&d.image_id).or_default();
        *n += 1;
        *n <= max_dets
    });
    ranked
}

fn match_class<'a>(
    dets: &[&'a Detection],
    gts: &[&GroundTruthBox],
    threshold: f64,
    max_dets: usize,
) -> ClassMatch<'a> {
    let ranked = rank_detections(dets, max_dets);
    let mut by_image: BTreeMap<&Id, Vec<(usize, &BBox)>> = BTreeMap::new();
    for (i, g) in gts.iter().enumerate() {
        by_image.entry(&g.image_id).or_default().push((i, &g.bbox));
    }
    let mut taken = vec![false; gts.len()];
    let tp = ranked
        .iter()
        .map(|d| {
            let Some(cands) = by_image.get(&d.image_id) else {
                return false;
            };
            let mut best: Option<(usize, f64)> = None;
            for &(gi, gb) in cands {
                if taken[gi] {
                    continue;
                }
                let v = iou(&d.bbox, gb);
                if v >= threshold && best.is_none_or(|(_, b)| v > b) {
                    best = Some((gi, v));
                }
            }
            match best {
                Some((gi, _)) => {
                    taken[gi] = true;
                    true
                }
                None => false,
            }
        })
        .collect();
    ClassMatch {
        ranked,
        tp,
        n_gt: gts.len(),
    }
}

fn interpolated_ap(m: &ClassMatch<'_>) -> f64 {
    let mut precision = Vec::with_capacity(m.tp.len());
    let mut recall = Vec::with_capacity(m.tp.len());
    let mut tp = 0usize;
    for (i, &hit) in m.tp.iter().enumerate() {
        tp += hit as usize;
        precision.push(tp as f64 / (i + 1) as f64);
        recall.push(tp as f64 / m.n_gt as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let levels = recall_levels();
    let total: f64 = levels
        .iter()
        .map(|&r| {
            let idx = recall.partition_point(|&v| v < r);
            precision.get(idx).copied().unwrap_or(0.0)
        })
        .sum();
    total / levels.len() as f64
}

fn group_by_category<'a>(
    dets: &'a [Detection],
    gts: &'a [GroundTruthBox],
) -> BTreeMap<&'a Id, (Vec<&'a Detection>, Vec<&'a GroundTruthBox>)> {
    let gt_classes: BTreeSet<&Id> = gts.iter().map(|g| &g.category).collect();
    let mut groups: BTreeMap<&Id, (Vec<&Detection>, Vec<&GroundTruthBox>)> =
        gt_classes.into_iter().map(|c| (c, (Vec::new(), Vec::new()))).collect();
    for g in gts {
        groups.get_mut(&g.category).unwrap().1.push(g);
    }
    for d in dets {
        if let Some(e) = groups.get_mut(&d.category) {
            e.0.push(d);
        }
    }
    groups
}

fn empty_gt_value(dets: &[Detection], params: &EvalParams) -> f64 {
    if dets.is_empty() {
        params.empty_gt_no_dets
    } else {
        params.empty_gt_with_dets
    }
}

/// AP at an arbitrary IoU threshold, averaged over the categories present in
/// the ground truth.
pub fn average_precision(dets: &[Detection], gts: &[GroundTruthBox], threshold: f64, params: &EvalParams) -> f64 {
    if gts.is_empty() {
        return empty_gt_value(dets, params);
    }
    let groups = group_by_category(dets, gts);
    let sum: f64 = groups
        .values()
        .map(|(d, g)| interpolated_ap(&match_class(d, g, threshold, params.max_dets)))
        .sum();
    sum / groups.len() as f64
}

/// COCO-style AP at IoU 0.5 with default parameters.
pub fn ap50(dets: &[Detection], gts: &[GroundTruthBox]) -> f64 {
    average_precision(dets, gts, 0.5, &EvalParams::default())
}

/// COCO-style AR: recall averaged over the 0.50:0.05:0.95 IoU ladder and categories.
pub fn average_recall_with(dets: &[Detection], gts: &[GroundTruthBox], params: &EvalParams) -> f64 {
    if gts.is_empty() {
        return empty_gt_value(dets, params);
    }
    let groups = group_by_category(dets, gts);
    let ladder = ar_iou_thresholds();
    let mut sum = 0.0;
    for (d, g) in groups.values() {
        for &t in &ladder {
            let m = match_class(d, g, t, params.max_dets);
            sum += m.tp.iter().filter(|&&x| x).count() as f64 / m.n_gt as f64;
        }
    }
    sum / (groups.len() * ladder.len()) as f64
}

pub fn average_recall(dets: &[Detection], gts: &[GroundTruthBox]) -> f64 {
    average_recall_with(dets, gts, &EvalParams::default())
}

/// Hiding attack: the attack on a target succeeds when no detection in the same
/// image has score above `score_threshold` and IoU above `iou_threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HidingRule {
    pub score_threshold: f64,
    pub iou_threshold: f64,
    /// Only count detections whose category equals the target's.
    pub require_same_class: bool,
}

impl Default for HidingRule {
    fn default() -> Self {
        Self {
            score_threshold: 0.9,
            iou_threshold: 0.5,
            require_same_class: false,
        }
    }
}

/// Creating attack: the attack on a patch succeeds when some detection in the
/// same image has score above `score_threshold` and IoU of at least
/// `iou_threshold` with the patch (and, when targeted, the targeted category).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CreatingRule {
    pub score_threshold: f64,
    pub iou_threshold: f64,
}

impl Default for CreatingRule {
    fn default() -> Self {
        Self {
            score_threshold: 0.3,
            iou_threshold: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrResult {
    pub rate: f64,
    /// Per-instance success flags in target order.
    pub successes: Vec<bool>,
}

impl AsrResult {
    fn from_flags(successes: Vec<bool>) -> Self {
        let rate = successes.iter().filter(|&&s| s).count() as f64 / successes.len() as f64;
        Self { rate, successes }
    }
}

pub fn asr_hiding(dets: &[Detection], targets: &[GroundTruthBox], rule: &HidingRule) -> Result<AsrResult, EvalError> {
    if targets.is_empty() {
        return Err(EvalError::EmptyTargets("target"));
    }
    let flags = targets
        .iter()
        .map(|t| {
            !dets.iter().any(|d| {
                d.image_id == t.image_id
                    && (!rule.require_same_class || d.category == t.category)
                    && d.score > rule.score_threshold
                    && iou(&d.bbox, &t.bbox) > rule.iou_threshold
            })
        })
        .collect();
    Ok(AsrResult::from_flags(flags))
}

pub fn asr_creating(
    dets: &[Detection],
    patches: &[GroundTruthBox],
    targeted_class: Option<&Id>,
    rule: &CreatingRule,
) -> Result<AsrResult, EvalError> {
    if patches.is_empty() {
        return Err(EvalError::EmptyTargets("patch"));
    }
    let flags = patches
        .iter()
        .map(|p| {
            dets.iter().any(|d| {
                d.image_id == p.image_id
                    && targeted_class.is_none_or(|c| &d.category == c)
                    && d.score > rule.score_threshold
                    && iou(&d.bbox, &p.bbox) >= rule.iou_threshold
            })
        })
        .collect();
    Ok(AsrResult::from_flags(flags))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerImageDiagnostics {
    pub image_id: Id,
    pub ground_truths: usize,
    pub detections: usize,
    /// Ground truths matched at IoU 0.5.
    pub matched_at_50: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ap50: f64,
    pub ar: f64,
    pub asr: Option<f64>,
    pub per_image: Vec<PerImageDiagnostics>,
}

/// Per-image counts, with matching done per category at IoU 0.5.
pub fn per_image_diagnostics(dets: &[Detection], gts: &[GroundTruthBox]) -> Vec<PerImageDiagnostics> {
    fn row<'r>(rows: &'r mut BTreeMap<Id, PerImageDiagnostics>, id: &Id) -> &'r mut PerImageDiagnostics {
        rows.entry(id.clone()).or_insert_with(|| PerImageDiagnostics {
            image_id: id.clone(),
            ground_truths: 0,
            detections: 0,
            matched_at_50: 0,
        })
    }
    let mut rows: BTreeMap<Id, PerImageDiagnostics> = BTreeMap::new();
    for g in gts {
        row(&mut rows, &g.image_id).ground_truths += 1;
    }
    for d in dets {
        row(&mut rows, &d.image_id).detections += 1;
    }
    let max_dets = EvalParams::default().max_dets;
    for (d, g) in group_by_category(dets, gts).values() {
        let m = match_class(d, g, 0.5, max_dets);
        for (det, hit) in m.ranked.iter().zip(&m.tp) {
            if *hit {
                row(&mut rows, &det.image_id).matched_at_50 += 1;
            }
        }
    }
    rows.into_values().collect()
}
