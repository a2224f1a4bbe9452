//! Detection scoring: IoU, object-size strata, greedy matching and the
//! evaluation report.
//!
//! Box corners are edge positions, so `width = x_max - x_min` and
//! `area = width * height`.
//!
//! The scoring unit is the ground-truth object. Predictions are grouped
//! by `(image_id, category)` query; within a query, detected predictions are
//! taken in descending confidence and each claims the unconsumed ground-truth
//! box of maximal IoU (ties to the earlier box). Unmatched objects are misses
//! and contribute IoU 0 to [`EvalReport::mean_iou`].

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::stats::{self, ConfidenceInterval};

/// Upper bound (exclusive) of the small stratum, px².
pub const SMALL_AREA_LIMIT: u64 = 1_024;
/// Upper bound (inclusive) of the medium stratum, px².
pub const MEDIUM_AREA_LIMIT: u64 = 9_216;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: i64,
    pub y_min: i64,
    pub x_max: i64,
    pub y_max: i64,
}

impl BoundingBox {
    pub fn new(x_min: i64, y_min: i64, x_max: i64, y_max: i64) -> Result<Self> {
        let b = Self {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::invalid(
                "bounding_box",
                format!(
                    "degenerate box ({}, {}, {}, {})",
                    self.x_min, self.y_min, self.x_max, self.y_max
                ),
            ));
        }
        Ok(())
    }

    pub fn within(&self, width: u32, height: u32) -> bool {
        self.x_min >= 0 && self.y_min >= 0 && self.x_max <= i64::from(width) && self.y_max <= i64::from(height)
    }

    pub fn width(&self) -> i64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> i64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> u64 {
        (self.width().max(0) as u64) * (self.height().max(0) as u64)
    }

    pub fn translate(&self, dx: i64, dy: i64) -> Self {
        Self {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0) as u128;
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0) as u128;
    let inter = iw * ih;
    let union = u128::from(a.area()) + u128::from(b.area()) - inter;
    Ok(inter as f64 / union as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    Small,
    Medium,
    Large,
}

impl Stratum {
    pub const ALL: [Stratum; 3] = [Stratum::Small, Stratum::Medium, Stratum::Large];

    pub fn as_str(self) -> &'static str {
        match self {
            Stratum::Small => "small",
            Stratum::Medium => "medium",
            Stratum::Large => "large",
        }
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn size_stratum(area: u64) -> Stratum {
    if area < SMALL_AREA_LIMIT {
        Stratum::Small
    } else if area <= MEDIUM_AREA_LIMIT {
        Stratum::Medium
    } else {
        Stratum::Large
    }
}

/// Stratum of an image: the stratum of its median object area (lower
/// median for even counts). `None` for images without objects.
pub fn image_stratum(areas: &[u64]) -> Option<Stratum> {
    if areas.is_empty() {
        return None;
    }
    let mut sorted = areas.to_vec();
    sorted.sort_unstable();
    Some(size_stratum(sorted[(sorted.len() - 1) / 2]))
}

/// Image identifier. Accepts JSON strings or integers (COCO ids).
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct ImageId(pub String);

impl ImageId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for ImageId {
    fn from(s: &str) -> Self {
        ImageId(s.into())
    }
}

impl From<u64> for ImageId {
    fn from(v: u64) -> Self {
        ImageId(format!("{v}"))
    }
}

impl fmt::Display for ImageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ImageId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u64),
            Str(String),
        }
        Ok(match Repr::deserialize(d)? {
            Repr::Int(v) => ImageId::from(v),
            Repr::Str(s) => ImageId(s),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    pub image_id: ImageId,
    pub category: String,
    pub bbox: BoundingBox,
    pub area: u64,
}

impl GroundTruthObject {
    pub fn new(image_id: impl Into<ImageId>, category: impl Into<String>, bbox: BoundingBox) -> Result<Self> {
        bbox.validate()?;
        Ok(Self {
            image_id: image_id.into(),
            category: category.into(),
            area: bbox.area(),
            bbox,
        })
    }
}

/// One answer to a detection query, in the VLM response field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: ImageId,
    pub category: String,
    pub detected: bool,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounding_box: Option<BoundingBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<f64>,
}

impl DetectionRecord {
    pub fn miss(image_id: impl Into<ImageId>, category: impl Into<String>) -> Self {
        Self {
            image_id: image_id.into(),
            category: category.into(),
            detected: false,
            confidence: 0.0,
            bounding_box: None,
            reasoning: None,
            latency_ms: None,
        }
    }

    pub fn hit(image_id: impl Into<ImageId>, category: impl Into<String>, confidence: f64, bbox: BoundingBox) -> Self {
        Self {
            image_id: image_id.into(),
            category: category.into(),
            detected: true,
            confidence,
            bounding_box: Some(bbox),
            reasoning: None,
            latency_ms: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::invalid("confidence", "must be in [0, 1]"));
        }
        if let Some(l) = self.latency_ms {
            if !l.is_finite() || l <= 0.0 {
                return Err(Error::invalid("latency_ms", "must be > 0"));
            }
        }
        match (self.detected, &self.bounding_box) {
            (true, Some(b)) => b.validate(),
            (true, None) => Err(Error::invalid("bounding_box", "required when detected")),
            (false, Some(_)) => Err(Error::invalid("bounding_box", "must be absent when not detected")),
            (false, None) if self.confidence != 0.0 => {
                Err(Error::invalid("confidence", "must be 0.0 when not detected"))
            }
            (false, None) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAccuracy {
    pub threshold: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumReport {
    pub n_images: usize,
    pub n_objects: usize,
    pub accuracy_at: Vec<ThresholdAccuracy>,
    pub mean_iou: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordIssue {
    UnknownImage,
    UnknownCategory,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordError {
    /// Index into the prediction list.
    pub index: usize,
    pub image_id: ImageId,
    pub category: String,
    pub issue: RecordIssue,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Ground-truth objects scored.
    pub n_evaluated: usize,
    pub n_queries: usize,
    pub n_predictions: usize,
    pub n_matched: usize,
    pub accuracy_at: Vec<ThresholdAccuracy>,
    /// Misses count as IoU 0.
    pub mean_iou: f64,
    /// Mean over matched pairs only; `None` without matches.
    pub mean_iou_detected_only: Option<f64>,
    pub per_stratum: BTreeMap<Stratum, StratumReport>,
    pub mean_latency_ms: Option<f64>,
    pub ci_95: BTreeMap<String, ConfidenceInterval>,
    pub record_errors: Vec<RecordError>,
}

impl EvalReport {
    pub fn accuracy(&self, threshold: f64) -> Option<f64> {
        self.accuracy_at
            .iter()
            .find(|a| a.threshold == threshold)
            .map(|a| a.accuracy)
    }
}

/// Outcome for one ground-truth object, in report order
/// (image id, category, input order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectOutcome {
    pub image_id: ImageId,
    pub category: String,
    pub stratum: Stratum,
    pub matched: bool,
    /// IoU with the matched prediction, 0 when unmatched.
    pub iou: f64,
}

impl ObjectOutcome {
    pub fn correct_at(&self, threshold: f64) -> bool {
        self.matched && self.iou >= threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: EvalReport,
    pub outcomes: Vec<ObjectOutcome>,
}

impl Evaluation {
    /// 0/1 correctness per object at `threshold`, aligned across
    /// evaluations of the same ground truth.
    pub fn correctness(&self, threshold: f64) -> Vec<f64> {
        self.outcomes
            .iter()
            .map(|o| if o.correct_at(threshold) { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn ious(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.iou).collect()
    }

    /// Percentile-bootstrap intervals for every accuracy threshold
    /// (`accuracy@<t>`) and for `mean_iou`.
    pub fn attach_bootstrap(&mut self, iterations: u32, level: f64, seed: u64) -> Result<()> {
        if self.outcomes.len() < 2 {
            return Ok(());
        }
        let thresholds: Vec<f64> = self.report.accuracy_at.iter().map(|a| a.threshold).collect();
        for t in thresholds {
            let ci = stats::bootstrap_ci(&self.correctness(t), iterations, level, seed)?;
            self.report.ci_95.insert(format!("accuracy@{t}"), ci);
        }
        let ci = stats::bootstrap_ci(&self.ious(), iterations, level, seed)?;
        self.report.ci_95.insert("mean_iou".into(), ci);
        Ok(())
    }
}

fn validate_thresholds(thresholds: &[f64]) -> Result<Vec<f64>> {
    if thresholds.is_empty() {
        return Err(Error::Empty("thresholds"));
    }
    let mut ts = thresholds.to_vec();
    for &t in &ts {
        if t.is_nan() || t <= 0.0 || t > 1.0 {
            return Err(Error::invalid("thresholds", format!("{t} is outside (0, 1]")));
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    Ok(ts)
}

type QueryKey = (ImageId, String);

/// Greedy confidence-descending assignment for one query. Returns, per
/// ground-truth box, the IoU of its match if any.
pub fn greedy_match(gt: &[BoundingBox], preds: &[(f64, BoundingBox)]) -> Vec<Option<f64>> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].0.total_cmp(&preds[a].0));
    let mut matched: Vec<Option<f64>> = alloc::vec![None; gt.len()];
    for pi in order {
        let pbox = &preds[pi].1;
        let mut best: Option<(usize, f64)> = None;
        for (gi, gbox) in gt.iter().enumerate() {
            if matched[gi].is_some() {
                continue;
            }
            let v = iou(pbox, gbox).unwrap_or(0.0);
            if v > 0.0 && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((gi, v));
            }
        }
        if let Some((gi, v)) = best {
            matched[gi] = Some(v);
        }
    }
    matched
}

fn accuracy_rows(outcomes: &[&ObjectOutcome], thresholds: &[f64]) -> Vec<ThresholdAccuracy> {
    let n = outcomes.len();
    thresholds
        .iter()
        .map(|&t| ThresholdAccuracy {
            threshold: t,
            accuracy: if n == 0 {
                0.0
            } else {
                outcomes.iter().filter(|o| o.correct_at(t)).count() as f64 / n as f64
            },
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn match_and_score(gt: &[GroundTruthObject], preds: &[DetectionRecord], thresholds: &[f64]) -> Result<Evaluation> {
    if gt.is_empty() {
        return Err(Error::Empty("ground truth"));
    }
    let thresholds = validate_thresholds(thresholds)?;

    let mut queries: BTreeMap<QueryKey, Vec<usize>> = BTreeMap::new();
    let mut image_areas: BTreeMap<&ImageId, Vec<u64>> = BTreeMap::new();
    for (i, obj) in gt.iter().enumerate() {
        obj.bbox.validate()?;
        queries
            .entry((obj.image_id.clone(), obj.category.clone()))
            .or_default()
            .push(i);
        image_areas.entry(&obj.image_id).or_default().push(obj.area);
    }
    let strata: BTreeMap<&ImageId, Stratum> = image_areas
        .iter()
        .map(|(id, areas)| (*id, image_stratum(areas).unwrap_or(Stratum::Small)))
        .collect();

    let mut record_errors = Vec::new();
    let mut by_query: BTreeMap<QueryKey, Vec<(f64, BoundingBox)>> = BTreeMap::new();
    for (index, p) in preds.iter().enumerate() {
        let issue = if !strata.contains_key(&p.image_id) {
            Some((
                RecordIssue::UnknownImage,
                format!("image `{}` is not in the ground truth", p.image_id),
            ))
        } else if !queries.contains_key(&(p.image_id.clone(), p.category.clone())) {
            Some((
                RecordIssue::UnknownCategory,
                format!(
                    "category `{}` has no ground truth in image `{}`",
                    p.category, p.image_id
                ),
            ))
        } else if let Err(e) = p.validate() {
            Some((RecordIssue::Invalid, format!("{e}")))
        } else {
            None
        };
        if let Some((issue, message)) = issue {
            record_errors.push(RecordError {
                index,
                image_id: p.image_id.clone(),
                category: p.category.clone(),
                issue,
                message,
            });
            continue;
        }
        if let (true, Some(b)) = (p.detected, p.bounding_box) {
            by_query
                .entry((p.image_id.clone(), p.category.clone()))
                .or_default()
                .push((p.confidence, b));
        }
    }

    let mut outcomes = Vec::with_capacity(gt.len());
    for (key, idxs) in &queries {
        let boxes: Vec<BoundingBox> = idxs.iter().map(|&i| gt[i].bbox).collect();
        let preds_q = by_query.get(key).map(Vec::as_slice).unwrap_or(&[]);
        let matches = greedy_match(&boxes, preds_q);
        let stratum = strata[&key.0];
        for m in matches {
            outcomes.push(ObjectOutcome {
                image_id: key.0.clone(),
                category: key.1.clone(),
                stratum,
                matched: m.is_some(),
                iou: m.unwrap_or(0.0),
            });
        }
    }

    let all: Vec<&ObjectOutcome> = outcomes.iter().collect();
    let mut per_stratum = BTreeMap::new();
    for s in Stratum::ALL {
        let sub: Vec<&ObjectOutcome> = outcomes.iter().filter(|o| o.stratum == s).collect();
        if sub.is_empty() {
            continue;
        }
        per_stratum.insert(
            s,
            StratumReport {
                n_images: strata.values().filter(|&&v| v == s).count(),
                n_objects: sub.len(),
                accuracy_at: accuracy_rows(&sub, &thresholds),
                mean_iou: mean(sub.iter().map(|o| o.iou)).unwrap_or(0.0),
            },
        );
    }

    let report = EvalReport {
        n_evaluated: outcomes.len(),
        n_queries: queries.len(),
        n_predictions: preds.len(),
        n_matched: outcomes.iter().filter(|o| o.matched).count(),
        accuracy_at: accuracy_rows(&all, &thresholds),
        mean_iou: mean(outcomes.iter().map(|o| o.iou)).unwrap_or(0.0),
        mean_iou_detected_only: mean(outcomes.iter().filter(|o| o.matched).map(|o| o.iou)),
        per_stratum,
        mean_latency_ms: mean(preds.iter().filter_map(|p| p.latency_ms)),
        ci_95: BTreeMap::new(),
        record_errors,
    };
    Ok(Evaluation { report, outcomes })
}
