//! COCO-style JSON ingestion.
//!
//! Ground truth:
//!
//! ```json
//! { "images": [{"id": 1, ...}],
//!   "annotations": [{"image_id": 1, "bbox": [x, y, w, h], "category_id": 1,
//!                    "is_patch": false}] }
//! ```
//!
//! Detections: `[{"image_id": 1, "bbox": [x, y, w, h], "score": 0.9, "category_id": 1}]`.
//!
//! Unknown fields are ignored; `is_patch` defaults to `false`.

use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use super::{BBox, Detection, EvalError, GroundTruthBox, Id};

const GT: &str = "annotation";
const DET: &str = "detection";

#[derive(Deserialize)]
struct RawAnnotation {
    image_id: Id,
    bbox: Vec<f64>,
    category_id: Id,
    #[serde(default)]
    is_patch: bool,
}

#[derive(Deserialize)]
struct RawDetection {
    image_id: Id,
    bbox: Vec<f64>,
    score: f64,
    category_id: Id,
}

fn schema(what: &'static str, index: usize, field: &str, message: impl Into<String>) -> EvalError {
    EvalError::Schema {
        what,
        index,
        field: field.to_string(),
        message: message.into(),
    }
}

fn required_fields(what: &'static str, index: usize, v: &Value, fields: &[&str]) -> Result<(), EvalError> {
    let Some(obj) = v.as_object() else {
        return Err(schema(what, index, "<record>", "expected a JSON object"));
    };
    for f in fields {
        if !obj.contains_key(*f) {
            return Err(schema(what, index, f, "missing required field"));
        }
    }
    Ok(())
}

fn record<T: for<'de> Deserialize<'de>>(
    what: &'static str,
    index: usize,
    v: Value,
    fields: &[&str],
) -> Result<T, EvalError> {
    required_fields(what, index, &v, fields)?;
    // Locate the offending field when the record as a whole does not decode.
    if let Err(e) = serde_json::from_value::<T>(v.clone()) {
        let obj = v.as_object().expect("checked above");
        let bad = fields
            .iter()
            .find(|f| {
                let mut probe = serde_json::Map::new();
                for g in fields {
                    let val = if g == *f { obj[*g].clone() } else { placeholder(g) };
                    probe.insert(g.to_string(), val);
                }
                serde_json::from_value::<T>(Value::Object(probe)).is_err()
            })
            .copied()
            .unwrap_or("<record>");
        return Err(schema(what, index, bad, e.to_string()));
    }
    Ok(serde_json::from_value(v).expect("decoded above"))
}

fn placeholder(field: &str) -> Value {
    match field {
        "bbox" => serde_json::json!([0.0, 0.0, 0.0, 0.0]),
        "score" => serde_json::json!(0.5),
        _ => serde_json::json!(0),
    }
}

fn parse_bbox(what: &'static str, index: usize, b: &[f64]) -> Result<BBox, EvalError> {
    if b.len() != 4 {
        return Err(schema(what, index, "bbox", format!("expected 4 numbers, got {}", b.len())));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(schema(what, index, "bbox", "non-finite coordinate"));
    }
    if b[2] < 0.0 || b[3] < 0.0 {
        return Err(schema(
            what,
            index,
            "bbox",
            format!("negative extent w={} h={}", b[2], b[3]),
        ));
    }
    Ok(BBox::new(b[0], b[1], b[2], b[3]))
}

fn parse_json(what: &'static str, text: &str) -> Result<Value, EvalError> {
    serde_json::from_str(text).map_err(|e| EvalError::Json {
        what,
        message: e.to_string(),
    })
}

pub fn parse_coco_annotations(text: &str) -> Result<Vec<GroundTruthBox>, EvalError> {
    let root = parse_json(GT, text)?;
    let anns = match root.get("annotations") {
        Some(Value::Array(a)) => a.clone(),
        Some(_) => {
            return Err(EvalError::Json {
                what: GT,
                message: "`annotations` must be an array".into(),
            })
        }
        None => {
            return Err(EvalError::Json {
                what: GT,
                message: "missing `annotations` array".into(),
            })
        }
    };
    anns.into_iter()
        .enumerate()
        .map(|(i, v)| {
            let raw: RawAnnotation = record(GT, i, v, &["image_id", "bbox", "category_id"])?;
            Ok(GroundTruthBox {
                image_id: raw.image_id,
                bbox: parse_bbox(GT, i, &raw.bbox)?,
                category: raw.category_id,
                is_patch: raw.is_patch,
            })
        })
        .collect()
}

pub fn parse_detections(text: &str) -> Result<Vec<Detection>, EvalError> {
    let root = parse_json(DET, text)?;
    let Value::Array(items) = root else {
        return Err(EvalError::Json {
            what: DET,
            message: "expected a top-level array".into(),
        });
    };
    items
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let raw: RawDetection = record(DET, i, v, &["image_id", "bbox", "score", "category_id"])?;
            if !(0.0..=1.0).contains(&raw.score) {
                return Err(schema(DET, i, "score", format!("{} outside [0, 1]", raw.score)));
            }
            Ok(Detection {
                image_id: raw.image_id,
                bbox: parse_bbox(DET, i, &raw.bbox)?,
                score: raw.score,
                category: raw.category_id,
            })
        })
        .collect()
}

fn read(path: &Path) -> Result<String, EvalError> {
    std::fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_coco_annotations(path: impl AsRef<Path>) -> Result<Vec<GroundTruthBox>, EvalError> {
    parse_coco_annotations(&read(path.as_ref())?)
}

pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<Detection>, EvalError> {
    parse_detections(&read(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_annotation_file() {
        let gts = parse_coco_annotations(
            r#"{"images":[{"id":1}],"annotations":[{"image_id":1,"bbox":[1,2,3,4],"category_id":1}]}"#,
        )
        .unwrap();
        assert_eq!(gts.len(), 1);
        assert_eq!(gts[0].bbox, BBox::new(1.0, 2.0, 3.0, 4.0));
        assert!(!gts[0].is_patch);
    }

    #[test]
    fn extra_fields_ignored() {
        let gts = parse_coco_annotations(
            r#"{"info":{},"annotations":[{"id":9,"image_id":"a","bbox":[0,0,1,1],"category_id":1,
                "area":1,"iscrowd":0,"vendor":{"x":1},"is_patch":true}]}"#,
        )
        .unwrap();
        assert_eq!(gts[0].image_id, Id::Str("a".into()));
        assert!(gts[0].is_patch);
    }

    #[test]
    fn negative_extent_rejected_with_field() {
        let err = parse_coco_annotations(
            r#"{"annotations":[{"image_id":1,"bbox":[0,0,1,1],"category_id":1},
                {"image_id":1,"bbox":[10,20,-5,5],"category_id":1}]}"#,
        )
        .unwrap_err();
        match err {
            EvalError::Schema { index, field, .. } => {
                assert_eq!(index, 1);
                assert_eq!(field, "bbox");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_and_mistyped_fields() {
        let err = parse_detections(r#"[{"image_id":1,"bbox":[0,0,1,1],"category_id":1}]"#).unwrap_err();
        assert!(matches!(err, EvalError::Schema { ref field, index: 0, .. } if field == "score"));
        let err = parse_detections(
            r#"[{"image_id":1,"bbox":[0,0,1,1],"score":0.5,"category_id":1},
                {"image_id":1,"bbox":"oops","score":0.5,"category_id":1}]"#,
        )
        .unwrap_err();
        assert!(matches!(err, EvalError::Schema { ref field, index: 1, .. } if field == "bbox"));
        let err = parse_detections(r#"[{"image_id":1,"bbox":[0,0,1,1],"score":1.5,"category_id":1}]"#)
            .unwrap_err();
        assert!(matches!(err, EvalError::Schema { ref field, .. } if field == "score"));
    }

    #[test]
    fn malformed_json() {
        assert!(matches!(parse_detections("[{"), Err(EvalError::Json { .. })));
        assert!(matches!(
            parse_coco_annotations(r#"{"images":[]}"#),
            Err(EvalError::Json { .. })
        ));
    }
}
