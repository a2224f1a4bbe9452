//! Annotation cost, upfront totals and TCO as a function of inference volume.
//!
//! All arithmetic stays in unrounded `f64`; [`round_half_even`] and
//! [`format_usd`] are for presentation only.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite_nonneg, ensure_unit, Error, Result};

/// 15% quality control plus 5% platform fees.
pub const DEFAULT_OVERHEAD_FACTOR: f64 = 1.20;
/// Amortized supervised inference cost at high volume, USD per image.
pub const DEFAULT_SUPERVISED_PER_IMAGE: f64 = 0.00004;

fn default_overhead() -> f64 {
    DEFAULT_OVERHEAD_FACTOR
}

fn default_supervised_per_image() -> f64 {
    DEFAULT_SUPERVISED_PER_IMAGE
}

/// Inputs of the supervised cost model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModelParams {
    pub n_categories: u32,
    pub n_images_per_category: u32,
    /// Average boxes per image; may be fractional.
    pub n_boxes_per_image: f64,
    pub price_per_box: f64,
    #[serde(default = "default_overhead")]
    pub overhead_factor: f64,
    pub training_cost: f64,
    pub infrastructure_cost: f64,
    #[serde(default = "default_supervised_per_image")]
    pub supervised_per_image_cost: f64,
}

impl CostModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_categories == 0 {
            return Err(Error::invalid("n_categories", "must be >= 1"));
        }
        if self.n_images_per_category == 0 {
            return Err(Error::invalid("n_images_per_category", "must be >= 1"));
        }
        if !self.n_boxes_per_image.is_finite() || self.n_boxes_per_image <= 0.0 {
            return Err(Error::invalid("n_boxes_per_image", "must be a finite value > 0"));
        }
        ensure_finite_nonneg("price_per_box", self.price_per_box)?;
        if !self.overhead_factor.is_finite() || self.overhead_factor < 1.0 {
            return Err(Error::invalid("overhead_factor", "must be >= 1"));
        }
        ensure_finite_nonneg("training_cost", self.training_cost)?;
        ensure_finite_nonneg("infrastructure_cost", self.infrastructure_cost)?;
        ensure_finite_nonneg("supervised_per_image_cost", self.supervised_per_image_cost)?;
        Ok(())
    }

    /// Same system with a different category count and per-box price.
    pub fn with_annotation(&self, n_categories: u32, price_per_box: f64) -> Self {
        Self {
            n_categories,
            price_per_box,
            ..self.clone()
        }
    }
}

/// Named system scales of the published break-even table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemScale {
    Small,
    Medium,
    Large,
    Enterprise,
    Medical,
}

impl SystemScale {
    pub const ALL: [SystemScale; 5] = [
        SystemScale::Small,
        SystemScale::Medium,
        SystemScale::Large,
        SystemScale::Enterprise,
        SystemScale::Medical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemScale::Small => "small",
            SystemScale::Medium => "medium",
            SystemScale::Large => "large",
            SystemScale::Enterprise => "enterprise",
            SystemScale::Medical => "medical",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    /// 100 images per category, 3 boxes per image, $500 edge hardware.
    /// Training cost differs per scale; medical annotation is $1.00/box.
    pub fn params(self) -> CostModelParams {
        let (n_categories, price_per_box, training_cost) = match self {
            SystemScale::Small => (10, 0.30, 54.0),
            SystemScale::Medium => (50, 0.30, 180.0),
            SystemScale::Large => (100, 0.30, 316.0),
            SystemScale::Enterprise => (200, 0.30, 500.0),
            SystemScale::Medical => (100, 1.00, 316.0),
        };
        CostModelParams {
            n_categories,
            n_images_per_category: 100,
            n_boxes_per_image: 3.0,
            price_per_box,
            overhead_factor: DEFAULT_OVERHEAD_FACTOR,
            training_cost,
            infrastructure_cost: 500.0,
            supervised_per_image_cost: DEFAULT_SUPERVISED_PER_IMAGE,
        }
    }
}

impl fmt::Display for SystemScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn annotation_cost(params: &CostModelParams) -> Result<f64> {
    params.validate()?;
    Ok(f64::from(params.n_categories)
        * f64::from(params.n_images_per_category)
        * params.n_boxes_per_image
        * params.price_per_box
        * params.overhead_factor)
}

/// Annotation + training + infrastructure.
pub fn upfront_total(params: &CostModelParams) -> Result<f64> {
    Ok(annotation_cost(params)? + params.training_cost + params.infrastructure_cost)
}

/// Supervised TCO after `n_inferences` images; affine in the volume.
pub fn tco_supervised(params: &CostModelParams, n_inferences: u64) -> Result<f64> {
    Ok(upfront_total(params)? + n_inferences as f64 * params.supervised_per_image_cost)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PricingMode {
    UpfrontAmortized,
    PerImageApi,
}

impl PricingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PricingMode::UpfrontAmortized => "upfront_amortized",
            PricingMode::PerImageApi => "per_image_api",
        }
    }
}

/// Economic and performance identity of one detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProfile {
    pub name: String,
    pub pricing_mode: PricingMode,
    #[serde(default)]
    pub api_price_per_image: f64,
    #[serde(default)]
    pub free_tier_daily_quota: u64,
    pub accuracy_coco: f64,
    /// Accuracy on categories outside the supervised taxonomy, keyed by
    /// web-prevalence tier (`tier1`..`tier3`) plus `overall`.
    #[serde(default)]
    pub accuracy_novel_by_tier: BTreeMap<String, f64>,
    pub latency_ms: f64,
}

impl ModelProfile {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::invalid("name", "must not be empty"));
        }
        ensure_finite_nonneg("api_price_per_image", self.api_price_per_image)?;
        if self.pricing_mode == PricingMode::PerImageApi && self.api_price_per_image <= 0.0 {
            return Err(Error::invalid(
                "api_price_per_image",
                "per_image_api profiles need a price > 0",
            ));
        }
        ensure_unit("accuracy_coco", self.accuracy_coco)?;
        for v in self.accuracy_novel_by_tier.values() {
            ensure_unit("accuracy_novel_by_tier", *v)?;
        }
        if !self.latency_ms.is_finite() || self.latency_ms <= 0.0 {
            return Err(Error::invalid("latency_ms", "must be > 0"));
        }
        Ok(())
    }

    pub fn is_api(&self) -> bool {
        self.pricing_mode == PricingMode::PerImageApi
    }

    /// `overall` novel accuracy, else the mean of the tiers, else 0.
    pub fn novel_accuracy(&self) -> f64 {
        if let Some(v) = self.accuracy_novel_by_tier.get("overall") {
            return *v;
        }
        let tiers: Vec<f64> = self.accuracy_novel_by_tier.values().copied().collect();
        if tiers.is_empty() {
            0.0
        } else {
            tiers.iter().sum::<f64>() / tiers.len() as f64
        }
    }

    /// Accuracy on a workload where `novel_share` of queries fall outside
    /// the standard taxonomy.
    pub fn effective_accuracy(&self, novel_share: f64) -> f64 {
        (1.0 - novel_share) * self.accuracy_coco + novel_share * self.novel_accuracy()
    }
}

/// API TCO. With the free tier on, `free_tier_daily_quota * deployment_days`
/// requests are deducted before pricing.
pub fn tco_api(profile: &ModelProfile, n_inferences: u64, apply_free_tier: bool, deployment_days: u32) -> Result<f64> {
    if profile.pricing_mode != PricingMode::PerImageApi {
        return Err(Error::PricingMode {
            profile: profile.name.clone(),
            expected: PricingMode::PerImageApi.as_str(),
            actual: profile.pricing_mode.as_str(),
        });
    }
    profile.validate()?;
    let billable = if apply_free_tier {
        if deployment_days == 0 {
            return Err(Error::invalid("deployment_days", "must be >= 1"));
        }
        let free = profile.free_tier_daily_quota.saturating_mul(u64::from(deployment_days));
        n_inferences.saturating_sub(free)
    } else {
        n_inferences
    };
    Ok(billable as f64 * profile.api_price_per_image)
}

fn tiers(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
    entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Measured YOLOv8m profile: 91.2% accuracy@0.5 on COCO, 9.1 ms.
pub fn yolov8m() -> ModelProfile {
    ModelProfile {
        name: "yolov8m".into(),
        pricing_mode: PricingMode::UpfrontAmortized,
        api_price_per_image: 0.0,
        free_tier_daily_quota: 0,
        accuracy_coco: 0.912,
        accuracy_novel_by_tier: tiers(&[("overall", 0.0), ("tier1", 0.0), ("tier2", 0.0), ("tier3", 0.0)]),
        latency_ms: 9.1,
    }
}

/// Gemini Flash 2.5: $0.00025/image, 1,500 free requests per day.
pub fn gemini() -> ModelProfile {
    ModelProfile {
        name: "gemini".into(),
        pricing_mode: PricingMode::PerImageApi,
        api_price_per_image: 0.00025,
        free_tier_daily_quota: 1500,
        accuracy_coco: 0.685,
        accuracy_novel_by_tier: tiers(&[("overall", 0.523), ("tier1", 0.790), ("tier2", 0.480), ("tier3", 0.300)]),
        latency_ms: 289.7,
    }
}

/// GPT-4V: $0.01/image, 500 free requests per day.
pub fn gpt4() -> ModelProfile {
    ModelProfile {
        name: "gpt4".into(),
        pricing_mode: PricingMode::PerImageApi,
        api_price_per_image: 0.01,
        free_tier_daily_quota: 500,
        accuracy_coco: 0.713,
        accuracy_novel_by_tier: tiers(&[("overall", 0.551), ("tier1", 0.824), ("tier2", 0.513), ("tier3", 0.320)]),
        latency_ms: 312.4,
    }
}

pub fn builtin_profiles() -> Vec<ModelProfile> {
    alloc::vec![yolov8m(), gemini(), gpt4()]
}

pub const BUILTIN_CATALOG_VERSION: &str = "2024-10";

/// A versioned set of model profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub version: String,
    pub profiles: Vec<ModelProfile>,
}

impl Catalog {
    pub fn builtin() -> Self {
        Self {
            version: BUILTIN_CATALOG_VERSION.into(),
            profiles: builtin_profiles(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.profiles.is_empty() {
            return Err(Error::Empty("catalog"));
        }
        for (i, p) in self.profiles.iter().enumerate() {
            p.validate()?;
            if self.profiles[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::invalid(
                    "profiles",
                    alloc::format!("duplicate profile `{}`", p.name),
                ));
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ModelProfile> {
        self.profiles.iter().find(|p| p.name == name)
    }
}

/// Banker's rounding to `decimals` places, for presentation.
pub fn round_half_even(x: f64, decimals: u32) -> f64 {
    let scale = libm::pow(10.0, f64::from(decimals));
    let y = x * scale;
    let r = libm::round(y);
    let adjusted = if libm::fabs(y - libm::trunc(y)) == 0.5 && libm::fmod(r, 2.0) != 0.0 {
        r - libm::copysign(1.0, y)
    } else {
        r
    };
    adjusted / scale
}

/// `$12,345.68` style, half-even to cents.
pub fn format_usd(x: f64) -> String {
    let mut s = String::from(if x < 0.0 { "-$" } else { "$" });
    s.push_str(&group_thousands(round_half_even(libm::fabs(x), 2), 2));
    s
}

/// Fixed-point rendering with `,` thousands separators.
pub fn group_thousands(x: f64, decimals: usize) -> String {
    let raw = alloc::format!("{:.*}", decimals, x);
    let (sign, raw) = match raw.strip_prefix('-') {
        Some(r) => ("-", r),
        None => ("", raw.as_str()),
    };
    let (int, frac) = match raw.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (raw, None),
    };
    let mut out = String::from(sign);
    let digits = int.len();
    for (i, ch) in int.chars().enumerate() {
        if i > 0 && (digits - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    if let Some(f) = frac {
        out.push('.');
        out.push_str(f);
    }
    out
}
