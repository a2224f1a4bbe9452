//! Readers and writers for the toolkit's input files.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use detcost_core::metrics::{BoundingBox, DetectionRecord, GroundTruthObject, ImageId};
use detcost_core::sampler::SampledImage;
use detcost_core::vlm::RawVlmResponse;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{from_json, AppError};

pub fn read_text(path: &Path) -> Result<String, AppError> {
    std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), AppError> {
    std::fs::write(path, text).map_err(|e| AppError::io(path, e))
}

/// Ground truth in the toolkit's own layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub images: Vec<GroundTruthImage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthImage {
    pub id: ImageId,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub objects: Vec<GroundTruthEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub category: String,
    /// `[x_min, y_min, x_max, y_max]`
    pub bbox: [i64; 4],
}

/// Ground-truth objects plus the images they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Vec<GroundTruthImage>,
    pub objects: Vec<GroundTruthObject>,
    /// COCO annotations dropped as crowd regions or degenerate boxes.
    pub skipped: usize,
}

impl GroundTruthFile {
    pub fn into_dataset(self) -> Result<Dataset, AppError> {
        let mut objects = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, image) in self.images.iter().enumerate() {
            if !seen.insert(&image.id) {
                return Err(AppError::invalid(
                    format!("images[{i}].id"),
                    format!("duplicate image id `{}`", image.id),
                ));
            }
            if image.width == 0 || image.height == 0 {
                return Err(AppError::invalid(format!("images[{i}]"), "dimensions must be > 0"));
            }
            for (j, o) in image.objects.iter().enumerate() {
                let field = || format!("images[{i}].objects[{j}].bbox");
                let [x0, y0, x1, y1] = o.bbox;
                let b = BoundingBox::new(x0, y0, x1, y1).map_err(|e| AppError::invalid(field(), e.to_string()))?;
                if !b.within(image.width, image.height) {
                    return Err(AppError::invalid(
                        field(),
                        format!("box lies outside the {}x{} image", image.width, image.height),
                    ));
                }
                objects.push(GroundTruthObject::new(image.id.clone(), o.category.clone(), b)?);
            }
        }
        Ok(Dataset {
            images: self.images,
            objects,
            skipped: 0,
        })
    }
}

#[derive(Debug, Deserialize)]
struct CocoFile {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CocoCategory>,
}

#[derive(Debug, Deserialize)]
struct CocoImage {
    id: u64,
    width: u32,
    height: u32,
}

#[derive(Debug, Deserialize)]
struct CocoAnnotation {
    image_id: u64,
    category_id: u64,
    /// `[x, y, width, height]`
    bbox: [f64; 4],
    #[serde(default)]
    iscrowd: u8,
}

#[derive(Debug, Deserialize)]
struct CocoCategory {
    id: u64,
    name: String,
}

/// COCO corners are rounded to whole pixels and clipped to the image.
fn coco_corners(bbox: [f64; 4], width: u32, height: u32) -> Option<BoundingBox> {
    let [x, y, w, h] = bbox;
    if !bbox.iter().all(|v| v.is_finite()) {
        return None;
    }
    let clip = |v: f64, hi: u32| v.round().clamp(0.0, f64::from(hi)) as i64;
    BoundingBox::new(clip(x, width), clip(y, height), clip(x + w, width), clip(y + h, height)).ok()
}

fn coco_dataset(file: CocoFile) -> Result<Dataset, AppError> {
    let names: std::collections::BTreeMap<u64, String> = file.categories.into_iter().map(|c| (c.id, c.name)).collect();
    let mut images: std::collections::BTreeMap<u64, GroundTruthImage> = file
        .images
        .iter()
        .map(|im| {
            (
                im.id,
                GroundTruthImage {
                    id: ImageId::from(im.id),
                    width: im.width,
                    height: im.height,
                    objects: Vec::new(),
                },
            )
        })
        .collect();
    let mut skipped = 0;
    for (i, a) in file.annotations.iter().enumerate() {
        let image = images.get_mut(&a.image_id).ok_or_else(|| {
            AppError::invalid(
                format!("annotations[{i}].image_id"),
                format!("unknown image {}", a.image_id),
            )
        })?;
        let category = names.get(&a.category_id).ok_or_else(|| {
            AppError::invalid(
                format!("annotations[{i}].category_id"),
                format!("unknown category {}", a.category_id),
            )
        })?;
        match coco_corners(a.bbox, image.width, image.height) {
            Some(b) if a.iscrowd == 0 => image.objects.push(GroundTruthEntry {
                category: category.clone(),
                bbox: [b.x_min, b.y_min, b.x_max, b.y_max],
            }),
            _ => skipped += 1,
        }
    }
    if skipped > 0 {
        log::info!("skipped {skipped} crowd or degenerate COCO annotations");
    }
    let mut dataset = GroundTruthFile {
        images: images.into_values().collect(),
    }
    .into_dataset()?;
    dataset.skipped = skipped;
    Ok(dataset)
}

/// Reads either layout; COCO is recognised by its `annotations` array.
pub fn parse_dataset(text: &str) -> Result<Dataset, AppError> {
    let value: Value = serde_json::from_str(text).map_err(|e| AppError::message(format!("invalid JSON: {e}")))?;
    if value.get("annotations").is_some() {
        let file: CocoFile = from_json(text)?;
        coco_dataset(file)
    } else {
        from_json::<GroundTruthFile>(text)?.into_dataset()
    }
}

pub fn read_dataset(path: &Path) -> Result<Dataset, AppError> {
    parse_dataset(&read_text(path)?).map_err(|e| e.in_file(path))
}

pub fn read_predictions(path: &Path) -> Result<Vec<DetectionRecord>, AppError> {
    from_json(&read_text(path)?).map_err(|e| e.in_file(path))
}

pub fn predictions_json(records: &[DetectionRecord]) -> String {
    let mut out = serde_json::to_string_pretty(records).expect("records serialize");
    out.push('\n');
    out
}

/// One response per line; blank lines are skipped.
pub fn parse_responses(reader: impl BufRead) -> Result<Vec<RawVlmResponse>, AppError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| AppError::message(format!("line {}: {e}", i + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw = from_json::<RawVlmResponse>(&line).map_err(|e| match e {
            AppError::Invalid { field, message } => AppError::Invalid {
                field: Some(format!(
                    "line {}{}",
                    i + 1,
                    field.map(|f| format!(" {f}")).unwrap_or_default()
                )),
                message,
            },
            e => e,
        })?;
        out.push(raw);
    }
    Ok(out)
}

pub fn read_responses(path: &Path) -> Result<Vec<RawVlmResponse>, AppError> {
    let file = std::fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    parse_responses(std::io::BufReader::new(file)).map_err(|e| e.in_file(path))
}

#[derive(Debug, Deserialize)]
struct PairRow {
    a: f64,
    b: f64,
}

/// Paired outcomes from a CSV with `a` and `b` columns; other columns are
/// ignored.
pub fn parse_pairs(reader: impl std::io::Read) -> Result<(Vec<f64>, Vec<f64>), AppError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, row) in rdr.deserialize::<PairRow>().enumerate() {
        let row = row.map_err(|e| AppError::invalid(format!("row {}", i + 1), e.to_string()))?;
        a.push(row.a);
        b.push(row.b);
    }
    Ok((a, b))
}

pub fn read_pairs(path: &Path) -> Result<(Vec<f64>, Vec<f64>), AppError> {
    let file = std::fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    parse_pairs(file).map_err(|e| e.in_file(path))
}

/// Items × categories rater counts, one item per row. A header row is
/// skipped when its first cell is not a number.
pub fn parse_ratings(reader: impl std::io::Read) -> Result<Vec<Vec<u32>>, AppError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| AppError::invalid(format!("row {}", i + 1), e.to_string()))?;
        if i == 0 && rec.get(0).is_some_and(|c| c.trim().parse::<u32>().is_err()) {
            continue;
        }
        let row = rec
            .iter()
            .map(|c| c.trim().parse::<u32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| AppError::invalid(format!("row {}", i + 1), e.to_string()))?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_ratings(path: &Path) -> Result<Vec<Vec<u32>>, AppError> {
    let file = std::fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    parse_ratings(file).map_err(|e| e.in_file(path))
}

/// One id per line.
pub fn write_id_list(mut w: impl Write, ids: &[SampledImage]) -> std::io::Result<()> {
    for s in ids {
        writeln!(w, "{}", s.image_id)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use detcost_core::metrics::Stratum;

    #[test]
    fn reads_native_ground_truth() {
        let text = r#"{"images": [{"id": "a", "width": 100, "height": 80,
            "objects": [{"category": "dog", "bbox": [10, 10, 50, 40]}]},
            {"id": 7, "width": 10, "height": 10}]}"#;
        let ds = parse_dataset(text).unwrap();
        assert_eq!(ds.images.len(), 2);
        assert_eq!(ds.objects.len(), 1);
        assert_eq!(ds.objects[0].area, 40 * 30);
        assert_eq!(ds.images[1].id, ImageId::from("7"));
    }

    #[test]
    fn rejects_box_outside_image() {
        let text = r#"{"images": [{"id": "a", "width": 40, "height": 40,
            "objects": [{"category": "dog", "bbox": [10, 10, 50, 40]}]}]}"#;
        let err = parse_dataset(text).unwrap_err();
        assert_eq!(err.field().as_deref(), Some("images[0].objects[0].bbox"));
    }

    #[test]
    fn rejects_duplicate_ids() {
        let text = r#"{"images": [{"id": "a", "width": 4, "height": 4}, {"id": "a", "width": 4, "height": 4}]}"#;
        assert!(parse_dataset(text).is_err());
    }

    #[test]
    fn converts_coco() {
        let text = r#"{
          "images": [{"id": 42, "width": 640, "height": 480, "file_name": "x.jpg"}],
          "annotations": [
            {"id": 1, "image_id": 42, "category_id": 18, "bbox": [10.4, 20.6, 30.0, 40.0], "area": 900.0, "iscrowd": 0},
            {"id": 2, "image_id": 42, "category_id": 18, "bbox": [0, 0, 600, 400], "area": 1.0, "iscrowd": 1},
            {"id": 3, "image_id": 42, "category_id": 18, "bbox": [5, 5, 0.2, 0.2], "area": 0.04, "iscrowd": 0}
          ],
          "categories": [{"id": 18, "name": "dog", "supercategory": "animal"}]
        }"#;
        let ds = parse_dataset(text).unwrap();
        assert_eq!(ds.skipped, 2);
        assert_eq!(ds.objects.len(), 1);
        let o = &ds.objects[0];
        assert_eq!(o.image_id, ImageId::from("42"));
        assert_eq!(o.category, "dog");
        assert_eq!(
            (o.bbox.x_min, o.bbox.y_min, o.bbox.x_max, o.bbox.y_max),
            (10, 21, 40, 61)
        );
        assert_eq!(o.area, 30 * 40);
    }

    #[test]
    fn reads_jsonl_responses() {
        let text = "{\"text\": \"{}\", \"image_width\": 10, \"image_height\": 10, \"category_queried\": \"dog\"}\n\n\
                    {\"text\": \"x\", \"image_width\": 5, \"image_height\": 5, \"category_queried\": \"cat\", \"image_id\": 3}\n";
        let out = parse_responses(text.as_bytes()).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].image_id, ImageId::from("3"));
        let bad = "{\"text\": 1}\n";
        let err = parse_responses(bad.as_bytes()).unwrap_err();
        assert!(err.field().unwrap().starts_with("line 1"));
    }

    #[test]
    fn reads_pairs_and_ratings() {
        let (a, b) = parse_pairs("item,a,b\n1,1,0\n2,0,0\n".as_bytes()).unwrap();
        assert_eq!(a, vec![1.0, 0.0]);
        assert_eq!(b, vec![0.0, 0.0]);
        assert!(parse_pairs("a,b\n1,x\n".as_bytes()).is_err());
        let r = parse_ratings("yes,no\n3,0\n1,2\n".as_bytes()).unwrap();
        assert_eq!(r, vec![vec![3, 0], vec![1, 2]]);
    }

    #[test]
    fn id_list_lines() {
        let ids = vec![
            SampledImage {
                image_id: ImageId::from("b"),
                stratum: Stratum::Small,
            },
            SampledImage {
                image_id: ImageId::from("a"),
                stratum: Stratum::Large,
            },
        ];
        let mut out = Vec::new();
        write_id_list(&mut out, &ids).unwrap();
        assert_eq!(out, b"b\na\n");
    }
}
