//! Synthetic attack fixtures: paste a patch onto every ground-truth object.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use patchregen::eval::{parse_coco_annotations, BBox, GroundTruthBox, Id};
use patchregen::image::{load_png, save_png, Image};
use patchregen::patch::{apply_patch, synth_noise_patch, PatchPlacement};
use serde::{Deserialize, Serialize};

use crate::exit::{ErrorClass, Failure};
use crate::settings::sha256_hex;

pub const SWEEP_RATIOS: [f64; 3] = [0.2, 0.25, 0.3];
pub const PLACEMENTS_FILE: &str = "placements.json";
pub const PATCH_ANNOTATIONS_FILE: &str = "patch_annotations.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PatchSource {
    File { path: PathBuf, sha256: String },
    Synth { side: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub scale_ratio: f64,
    pub image_id: Id,
    pub output: PathBuf,
    pub target: BBox,
    /// `scale_ratio × diagonal(target)` before rounding.
    pub target_height: f64,
    pub x: i64,
    pub y: i64,
    pub width: usize,
    pub height: usize,
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementManifest {
    pub patch: PatchSource,
    pub ratios: Vec<f64>,
    pub placements: Vec<Placement>,
}

/// `images[]` entries of a COCO file: id and optional file name.
#[derive(Debug, Clone, Deserialize)]
struct CocoImage {
    id: Id,
    #[serde(default)]
    file_name: Option<String>,
}

#[derive(Deserialize)]
struct CocoImages {
    #[serde(default)]
    images: Vec<CocoImage>,
}

pub struct FixtureJob {
    /// PNG inputs; matched to ground-truth images by file name, or by stem = id.
    pub images: Vec<PathBuf>,
    pub targets_json: String,
    pub patch: (Image, PatchSource),
    pub ratios: Vec<f64>,
    pub offset: (f64, f64),
    pub out_dir: PathBuf,
}

pub fn load_patch(path: &Path) -> anyhow::Result<(Image, PatchSource)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading patch {}", path.display()))?;
    let img = patchregen::image::decode_png(&bytes)?;
    Ok((
        img,
        PatchSource::File {
            path: path.to_path_buf(),
            sha256: sha256_hex(&bytes),
        },
    ))
}

pub fn synth_patch(side: usize, seed: u64) -> (Image, PatchSource) {
    (synth_noise_patch(side.max(1), seed), PatchSource::Synth { side: side.max(1), seed })
}

fn ratio_dir(out: &Path, ratio: f64, sweep: bool) -> PathBuf {
    if sweep {
        out.join(format!("ratio_{ratio:.2}"))
    } else {
        out.to_path_buf()
    }
}

fn match_image<'a>(path: &Path, index: &'a [CocoImage]) -> Option<&'a CocoImage> {
    let name = path.file_name()?.to_string_lossy();
    let stem = path.file_stem()?.to_string_lossy();
    index
        .iter()
        .find(|im| im.file_name.as_deref().is_some_and(|f| Path::new(f).file_name().is_some_and(|b| b.to_string_lossy() == name)))
        .or_else(|| index.iter().find(|im| im.file_name.is_none() && im.id.to_string() == stem))
}

pub fn run_fixture(job: &FixtureJob) -> anyhow::Result<PlacementManifest> {
    let gts = parse_coco_annotations(&job.targets_json)?;
    let index: CocoImages = serde_json::from_str(&job.targets_json).context("reading `images` of the targets file")?;
    let mut targets: BTreeMap<&Id, Vec<&GroundTruthBox>> = BTreeMap::new();
    for g in gts.iter().filter(|g| !g.is_patch) {
        targets.entry(&g.image_id).or_default().push(g);
    }
    if targets.is_empty() {
        return Err(Failure::new(ErrorClass::Input, "targets file has no object annotations").into());
    }

    let sweep = job.ratios.len() > 1;
    let mut placements = Vec::new();
    let mut loaded = Vec::new();
    for path in &job.images {
        let id = match match_image(path, &index.images) {
            Some(im) => im.id.clone(),
            None => {
                let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                crate::evaluate::parse_id(&stem)
            }
        };
        let Some(ts) = targets.get(&id) else {
            return Err(Failure::new(
                ErrorClass::Input,
                format!("no targets for {} (image id {id})", path.display()),
            )
            .into());
        };
        loaded.push((path, id, load_png(path)?, ts.clone()));
    }

    for &ratio in &job.ratios {
        let dir = ratio_dir(&job.out_dir, ratio, sweep);
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut coco_images = Vec::new();
        let mut coco_anns = Vec::new();
        for (path, id, image, ts) in &loaded {
            let place = PatchPlacement {
                scale_ratio: ratio,
                offset: job.offset,
            };
            let out_path = dir.join(path.file_name().expect("input is a file"));
            let mut img = image.clone();
            for t in ts {
                let (next, at) = apply_patch(&img, &job.patch.0, &t.bbox, &place)?;
                img = next;
                if let Some((vx, vy, vw, vh)) = at.visible_rect(img.width(), img.height()) {
                    coco_anns.push(serde_json::json!({
                        "id": coco_anns.len() + 1,
                        "image_id": id,
                        "bbox": [vx, vy, vw, vh],
                        "category_id": "patch",
                        "is_patch": true,
                    }));
                }
                placements.push(Placement {
                    scale_ratio: ratio,
                    image_id: (*id).clone(),
                    output: out_path.clone(),
                    target: t.bbox,
                    target_height: at.target_height,
                    x: at.x,
                    y: at.y,
                    width: at.width,
                    height: at.height,
                    clipped: at.clipped,
                });
            }
            save_png(&img, &out_path)?;
            coco_images.push(serde_json::json!({
                "id": id,
                "file_name": out_path.file_name().unwrap().to_string_lossy(),
                "width": img.width(),
                "height": img.height(),
            }));
        }
        let coco = serde_json::json!({ "images": coco_images, "annotations": coco_anns });
        let ann_path = dir.join(PATCH_ANNOTATIONS_FILE);
        std::fs::write(&ann_path, serde_json::to_string_pretty(&coco)?)
            .with_context(|| format!("writing {}", ann_path.display()))?;
    }

    let manifest = PlacementManifest {
        patch: job.patch.1.clone(),
        ratios: job.ratios.clone(),
        placements,
    };
    let path = job.out_dir.join(PLACEMENTS_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(manifest)
}
