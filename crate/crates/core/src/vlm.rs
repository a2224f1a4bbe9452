//! Parsing and validation of VLM detection responses.
//!
//! Models are asked for a bare JSON object but often wrap it in markdown
//! fences or prose. [`clean_response`] recovers the object; the parser then
//! checks it against the detection schema and the image dimensions.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::metrics::{BoundingBox, DetectionRecord, ImageId};

pub const MAX_REASONING_CHARS: usize = 1_024;
const SNIPPET_CHARS: usize = 80;
const MAX_OBJECT_CANDIDATES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawVlmResponse {
    pub text: String,
    pub image_width: u32,
    pub image_height: u32,
    pub category_queried: String,
    #[serde(default)]
    pub image_id: ImageId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VlmErrorKind {
    /// No JSON object could be recovered.
    Parse,
    /// A field is missing or has the wrong type.
    Schema,
    /// A coordinate lies outside the image.
    Bounds,
    /// The box is empty or inverted.
    Geometry,
    /// Confidence outside `[0, 1]`.
    Range,
}

impl VlmErrorKind {
    pub const ALL: [VlmErrorKind; 5] = [
        VlmErrorKind::Parse,
        VlmErrorKind::Schema,
        VlmErrorKind::Bounds,
        VlmErrorKind::Geometry,
        VlmErrorKind::Range,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VlmErrorKind::Parse => "parse",
            VlmErrorKind::Schema => "schema",
            VlmErrorKind::Bounds => "bounds",
            VlmErrorKind::Geometry => "geometry",
            VlmErrorKind::Range => "range",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{}: {message}", kind.as_str())]
pub struct VlmError {
    pub kind: VlmErrorKind,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snippet: Option<String>,
}

impl VlmError {
    fn new(kind: VlmErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            snippet: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseOptions {
    /// Clamp coordinates into the image instead of rejecting them.
    pub clamp: bool,
}

/// A parsed response with the texts kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub record: DetectionRecord,
    pub raw_text: String,
    pub cleaned_text: String,
}

fn snippet(s: &str) -> String {
    let mut out: String = s.chars().take(SNIPPET_CHARS).collect();
    if s.chars().nth(SNIPPET_CHARS).is_some() {
        out.push_str("...");
    }
    out
}

/// Text between the first markdown fence and the next one, without the
/// info string. Unfenced text is returned trimmed.
fn strip_fences(text: &str) -> &str {
    let t = text.trim();
    let Some(open) = t.find("```") else {
        return t;
    };
    let after = &t[open + 3..];
    let body = match after.find('\n') {
        Some(nl) if !after[..nl].contains('{') => &after[nl + 1..],
        _ => after.trim_start_matches(|c: char| c.is_ascii_alphanumeric()),
    };
    match body.find("```") {
        Some(close) => body[..close].trim(),
        None => body.trim(),
    }
}

/// End (exclusive) of the balanced object starting at `start`, honouring
/// JSON string escapes.
fn balanced_end(s: &str, start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, b) in s.bytes().enumerate().skip(start) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Recovers the JSON object from a model response: drops markdown fences
/// and surrounding prose. Returns the candidate text even when it does not
/// parse, so the caller can report it.
pub fn clean_response(text: &str) -> &str {
    locate_object(text).0
}

fn locate_object(text: &str) -> (&str, Option<Map<String, Value>>) {
    let body = strip_fences(text);
    let mut first: Option<&str> = None;
    for (start, _) in body.match_indices('{').take(MAX_OBJECT_CANDIDATES) {
        let candidate = match balanced_end(body, start) {
            Some(end) => &body[start..end],
            None => &body[start..],
        };
        if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(candidate) {
            return (candidate, Some(map));
        }
        first.get_or_insert(candidate);
    }
    (first.unwrap_or(body), None)
}

fn schema(msg: impl Into<String>) -> VlmError {
    VlmError::new(VlmErrorKind::Schema, msg)
}

fn coordinate(map: &Map<String, Value>, name: &str) -> Result<i64, VlmError> {
    let v = map
        .get(name)
        .ok_or_else(|| schema(format!("bounding_box.{name} is missing")))?;
    if let Some(i) = v.as_i64() {
        return Ok(i);
    }
    match v.as_f64() {
        // integral values written as floats (`110.0`) are accepted
        Some(f) if libm::trunc(f) == f && libm::fabs(f) < 9.0e15 => Ok(f as i64),
        Some(f) => Err(schema(format!("bounding_box.{name} must be an integer, got {f}"))),
        None => Err(schema(format!("bounding_box.{name} must be an integer"))),
    }
}

fn parse_box(value: Option<&Value>, width: u32, height: u32, clamp: bool) -> Result<BoundingBox, VlmError> {
    let map = match value {
        Some(Value::Object(m)) => m,
        Some(_) => return Err(schema("bounding_box must be an object")),
        None => return Err(schema("bounding_box is required when detected is true")),
    };
    let (w, h) = (i64::from(width), i64::from(height));
    let mut c = [
        coordinate(map, "x_min")?,
        coordinate(map, "y_min")?,
        coordinate(map, "x_max")?,
        coordinate(map, "y_max")?,
    ];
    if clamp {
        c[0] = c[0].clamp(0, w);
        c[2] = c[2].clamp(0, w);
        c[1] = c[1].clamp(0, h);
        c[3] = c[3].clamp(0, h);
    }
    for (name, v, limit) in [
        ("x_min", c[0], w),
        ("y_min", c[1], h),
        ("x_max", c[2], w),
        ("y_max", c[3], h),
    ] {
        if v < 0 || v > limit {
            return Err(VlmError::new(
                VlmErrorKind::Bounds,
                format!("{name} = {v} outside [0, {limit}] for a {width}x{height} image"),
            ));
        }
    }
    if c[0] >= c[2] || c[1] >= c[3] {
        return Err(VlmError::new(
            VlmErrorKind::Geometry,
            format!("box ({}, {}, {}, {}) is empty or inverted", c[0], c[1], c[2], c[3]),
        ));
    }
    Ok(BoundingBox {
        x_min: c[0],
        y_min: c[1],
        x_max: c[2],
        y_max: c[3],
    })
}

fn truncate_chars(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => s[..i].to_string(),
        None => s.to_string(),
    }
}

fn record_from_object(
    map: &Map<String, Value>,
    raw: &RawVlmResponse,
    opts: ParseOptions,
) -> Result<DetectionRecord, VlmError> {
    let detected = match map.get("detected") {
        Some(Value::Bool(b)) => *b,
        Some(_) => return Err(schema("detected must be a boolean")),
        None => return Err(schema("detected is missing")),
    };
    let confidence = match map.get("confidence") {
        Some(v) => Some(v.as_f64().ok_or_else(|| schema("confidence must be a number"))?),
        None => None,
    };
    let reasoning = match map.get("reasoning") {
        Some(Value::String(s)) => Some(truncate_chars(s, MAX_REASONING_CHARS)),
        Some(Value::Null) | None => None,
        Some(_) => return Err(schema("reasoning must be a string")),
    };
    let mut record = DetectionRecord::miss(raw.image_id.clone(), raw.category_queried.clone());
    record.reasoning = reasoning;
    record.latency_ms = raw.latency_ms;
    if !detected {
        // box fields are ignored for misses
        return match confidence {
            None | Some(0.0) => Ok(record),
            Some(c) => Err(VlmError::new(
                VlmErrorKind::Range,
                format!("confidence must be 0.0 when detected is false, got {c}"),
            )),
        };
    }
    let confidence = confidence.ok_or_else(|| schema("confidence is required when detected is true"))?;
    if !(0.0..=1.0).contains(&confidence) {
        return Err(VlmError::new(
            VlmErrorKind::Range,
            format!("confidence {confidence} outside [0, 1]"),
        ));
    }
    let bbox = parse_box(map.get("bounding_box"), raw.image_width, raw.image_height, opts.clamp)?;
    record.detected = true;
    record.confidence = confidence;
    record.bounding_box = Some(bbox);
    Ok(record)
}

/// Parses one response. Never panics: every input yields a record or a
/// typed error.
pub fn parse_vlm_response_with(raw: &RawVlmResponse, opts: ParseOptions) -> Result<ParsedResponse, VlmError> {
    if raw.image_width == 0 || raw.image_height == 0 {
        return Err(schema("image dimensions must be > 0"));
    }
    let (cleaned, object) = locate_object(&raw.text);
    let Some(map) = object else {
        let message = match serde_json::from_str::<Value>(cleaned) {
            Ok(_) => "response is not a JSON object".to_string(),
            Err(e) => format!("invalid JSON: {e}"),
        };
        return Err(VlmError {
            kind: VlmErrorKind::Parse,
            message,
            snippet: Some(snippet(cleaned)),
        });
    };
    let record = record_from_object(&map, raw, opts)?;
    Ok(ParsedResponse {
        record,
        raw_text: raw.text.clone(),
        cleaned_text: cleaned.to_string(),
    })
}

/// [`parse_vlm_response_with`] with default options, returning only the
/// record.
pub fn parse_vlm_response(raw: &RawVlmResponse) -> Result<DetectionRecord, VlmError> {
    parse_vlm_response_with(raw, ParseOptions::default()).map(|p| p.record)
}

/// Response JSON for a record in the prompt's output schema.
pub fn response_json(record: &DetectionRecord) -> String {
    let mut map = Map::new();
    map.insert("detected".into(), Value::Bool(record.detected));
    map.insert("confidence".into(), Value::from(record.confidence));
    if let Some(b) = record.bounding_box {
        let mut bm = Map::new();
        for (k, v) in [
            ("x_min", b.x_min),
            ("y_min", b.y_min),
            ("x_max", b.x_max),
            ("y_max", b.y_max),
        ] {
            bm.insert(k.into(), Value::from(v));
        }
        map.insert("bounding_box".into(), Value::Object(bm));
    }
    if let Some(r) = &record.reasoning {
        map.insert("reasoning".into(), Value::String(r.clone()));
    }
    Value::Object(map).to_string()
}

/// Error counts per class for batch runs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub total: usize,
    pub valid: usize,
    pub parse: usize,
    pub schema: usize,
    pub bounds: usize,
    pub geometry: usize,
    pub range: usize,
}

impl ErrorSummary {
    pub fn record(&mut self, outcome: Result<(), VlmErrorKind>) {
        self.total += 1;
        match outcome {
            Ok(()) => self.valid += 1,
            Err(VlmErrorKind::Parse) => self.parse += 1,
            Err(VlmErrorKind::Schema) => self.schema += 1,
            Err(VlmErrorKind::Bounds) => self.bounds += 1,
            Err(VlmErrorKind::Geometry) => self.geometry += 1,
            Err(VlmErrorKind::Range) => self.range += 1,
        }
    }

    pub fn invalid(&self) -> usize {
        self.total - self.valid
    }
}

/// Parses a batch. Invalid responses become miss records, so they count
/// against accuracy; the errors are returned alongside by index.
pub fn parse_batch(
    raws: &[RawVlmResponse],
    opts: ParseOptions,
) -> (Vec<DetectionRecord>, Vec<(usize, VlmError)>, ErrorSummary) {
    let mut records = Vec::with_capacity(raws.len());
    let mut errors = Vec::new();
    let mut summary = ErrorSummary::default();
    for (i, raw) in raws.iter().enumerate() {
        match parse_vlm_response_with(raw, opts) {
            Ok(p) => {
                summary.record(Ok(()));
                records.push(p.record);
            }
            Err(e) => {
                summary.record(Err(e.kind));
                let mut miss = DetectionRecord::miss(raw.image_id.clone(), raw.category_queried.clone());
                miss.latency_ms = raw.latency_ms;
                records.push(miss);
                errors.push((i, e));
            }
        }
    }
    (records, errors, summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(text: &str) -> RawVlmResponse {
        RawVlmResponse {
            text: text.into(),
            image_width: 640,
            image_height: 480,
            category_queried: "dog".into(),
            image_id: ImageId::from("img1"),
            latency_ms: None,
        }
    }

    const VALID: &str = r#"{"detected": true, "confidence": 0.9, "bounding_box": {"x_min": 10, "y_min": 20, "x_max": 110, "y_max": 220}, "reasoning": "..."}"#;

    fn kind(text: &str) -> VlmErrorKind {
        parse_vlm_response(&raw(text)).unwrap_err().kind
    }

    #[test]
    fn schema_example_parses() {
        let r = parse_vlm_response(&raw(VALID)).unwrap();
        assert!(r.detected);
        assert_eq!(r.confidence, 0.9);
        assert_eq!(r.bounding_box, Some(BoundingBox::new(10, 20, 110, 220).unwrap()));
        assert_eq!(r.reasoning.as_deref(), Some("..."));
        assert_eq!(r.category, "dog");
    }

    #[test]
    fn miss_example_parses() {
        let r = parse_vlm_response(&raw(r#"{"detected": false, "confidence": 0.0}"#)).unwrap();
        assert_eq!(r, DetectionRecord::miss("img1", "dog"));
        // box fields are ignored on misses
        let r = parse_vlm_response(&raw(
            r#"{"detected": false, "confidence": 0, "bounding_box": {"x_min": 900}}"#,
        ))
        .unwrap();
        assert!(r.bounding_box.is_none());
    }

    #[test]
    fn fenced_equals_unfenced() {
        let plain = parse_vlm_response(&raw(VALID)).unwrap();
        for wrapped in [
            format!("```json\n{VALID}\n```"),
            format!("```\n{VALID}\n```"),
            format!("Here is the result:\n```json\n{VALID}\n```\nDone."),
            format!("Sure! {VALID} Hope that helps."),
            format!("```json {VALID}```"),
        ] {
            assert_eq!(parse_vlm_response(&raw(&wrapped)).unwrap(), plain, "{wrapped}");
        }
    }

    #[test]
    fn braces_in_prose_are_skipped() {
        let text = format!("Looking at {{the image}} I found: {VALID}");
        assert!(parse_vlm_response(&raw(&text)).unwrap().detected);
        assert_eq!(clean_response(&text), VALID);
    }

    #[test]
    fn braces_inside_strings() {
        let text = r#"{"detected": false, "confidence": 0.0, "reasoning": "no } here {"}"#;
        assert_eq!(clean_response(text), text);
        assert!(parse_vlm_response(&raw(text)).is_ok());
    }

    #[test]
    fn error_classes() {
        assert_eq!(
            kind(
                r#"{"detected": true, "confidence": 0.9, "bounding_box": {"x_min": 10, "y_min": 20, "x_max": 700, "y_max": 220}}"#
            ),
            VlmErrorKind::Bounds
        );
        assert_eq!(
            kind(
                r#"{"detected": true, "confidence": 0.9, "bounding_box": {"x_min": -1, "y_min": 20, "x_max": 70, "y_max": 220}}"#
            ),
            VlmErrorKind::Bounds
        );
        assert_eq!(
            kind(
                r#"{"detected": true, "confidence": 0.9, "bounding_box": {"x_min": 110, "y_min": 20, "x_max": 10, "y_max": 220}}"#
            ),
            VlmErrorKind::Geometry
        );
        assert_eq!(
            kind(
                r#"{"detected": true, "confidence": 1.5, "bounding_box": {"x_min": 10, "y_min": 20, "x_max": 110, "y_max": 220}}"#
            ),
            VlmErrorKind::Range
        );
        assert_eq!(kind(r#"{"detected": false, "confidence": 0.4}"#), VlmErrorKind::Range);
        assert_eq!(kind(r#"{"confidence": 0.4}"#), VlmErrorKind::Schema);
        assert_eq!(kind(r#"{"detected": "yes"}"#), VlmErrorKind::Schema);
        assert_eq!(kind(r#"{"detected": true, "confidence": 0.5}"#), VlmErrorKind::Schema);
        assert_eq!(
            kind(
                r#"{"detected": true, "confidence": 0.9, "bounding_box": {"x_min": 10.5, "y_min": 20, "x_max": 110, "y_max": 220}}"#
            ),
            VlmErrorKind::Schema
        );
        assert_eq!(kind("I could not find a dog."), VlmErrorKind::Parse);
        assert_eq!(kind(r#"{"detected": true, "confidence": "#), VlmErrorKind::Parse);
        assert_eq!(kind(""), VlmErrorKind::Parse);
    }

    #[test]
    fn parse_error_carries_snippet() {
        let e = parse_vlm_response(&raw(r#"{"detected": tru"#)).unwrap_err();
        assert_eq!(e.snippet.as_deref(), Some(r#"{"detected": tru"#));
    }

    #[test]
    fn integral_floats_accepted() {
        let r = parse_vlm_response(&raw(
            r#"{"detected": true, "confidence": 1, "bounding_box": {"x_min": 10.0, "y_min": 20, "x_max": 110, "y_max": 220}}"#,
        ))
        .unwrap();
        assert_eq!(r.bounding_box.unwrap().x_min, 10);
    }

    #[test]
    fn clamp_option() {
        let text = r#"{"detected": true, "confidence": 0.9, "bounding_box": {"x_min": -5, "y_min": 20, "x_max": 700, "y_max": 220}}"#;
        let p = parse_vlm_response_with(&raw(text), ParseOptions { clamp: true }).unwrap();
        assert_eq!(p.record.bounding_box, Some(BoundingBox::new(0, 20, 640, 220).unwrap()));
        let outside = r#"{"detected": true, "confidence": 0.9, "bounding_box": {"x_min": 650, "y_min": 20, "x_max": 700, "y_max": 220}}"#;
        let e = parse_vlm_response_with(&raw(outside), ParseOptions { clamp: true }).unwrap_err();
        assert_eq!(e.kind, VlmErrorKind::Geometry);
    }

    #[test]
    fn reasoning_truncated() {
        let long: String = "é".repeat(2_000);
        let text = format!(r#"{{"detected": false, "confidence": 0.0, "reasoning": "{long}"}}"#);
        let r = parse_vlm_response(&raw(&text)).unwrap();
        assert_eq!(r.reasoning.unwrap().chars().count(), MAX_REASONING_CHARS);
    }

    #[test]
    fn audit_texts_kept() {
        let text = format!("```json\n{VALID}\n```");
        let p = parse_vlm_response_with(&raw(&text), ParseOptions::default()).unwrap();
        assert_eq!(p.raw_text, text);
        assert_eq!(p.cleaned_text, VALID);
    }

    #[test]
    fn round_trip() {
        let mut rec = DetectionRecord::hit(
            "img1",
            "dog",
            0.123_456_789_012_345_67,
            BoundingBox::new(1, 2, 639, 480).unwrap(),
        );
        rec.reasoning = Some("a \"quoted\" dog".into());
        assert_eq!(parse_vlm_response(&raw(&response_json(&rec))).unwrap(), rec);
        let full = serde_json::to_string(&rec).unwrap();
        assert_eq!(parse_vlm_response(&raw(&full)).unwrap(), rec);
    }

    #[test]
    fn zero_dimensions_rejected() {
        let mut r = raw(VALID);
        r.image_width = 0;
        assert_eq!(parse_vlm_response(&r).unwrap_err().kind, VlmErrorKind::Schema);
    }

    #[test]
    fn batch_turns_errors_into_misses() {
        let raws = [
            raw(VALID),
            raw("garbage"),
            raw(r#"{"detected": true, "confidence": 2.0}"#),
        ];
        let (records, errors, summary) = parse_batch(&raws, ParseOptions::default());
        assert_eq!(records.len(), 3);
        assert!(records[0].detected && !records[1].detected && !records[2].detected);
        assert_eq!(errors.iter().map(|(i, _)| *i).collect::<Vec<_>>(), [1, 2]);
        assert_eq!(
            (summary.total, summary.valid, summary.parse, summary.range),
            (3, 1, 1, 1)
        );
    }
}
