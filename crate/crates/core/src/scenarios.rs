//! Preset deployment scenarios and per-scenario cost reports.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::breakeven;
use crate::cost::{self, Catalog, CostModelParams, SystemScale, DEFAULT_OVERHEAD_FACTOR, DEFAULT_SUPERVISED_PER_IMAGE};
use crate::decision::{self, Choice, DeploymentScenario, Recommendation, RULESET_VERSION};
use crate::error::{Error, Result};
use crate::reproduce::{self, Check};

/// A scenario with its supervised cost model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPreset {
    pub id: String,
    pub label: String,
    pub scenario: DeploymentScenario,
    pub params: CostModelParams,
    /// Architecture the published recommendation table names.
    pub published_choice: Choice,
}

fn params(images_per_category: u32, training: f64, infrastructure: f64) -> CostModelParams {
    CostModelParams {
        n_categories: 1,
        n_images_per_category: images_per_category,
        n_boxes_per_image: 3.0,
        price_per_box: 0.30,
        overhead_factor: DEFAULT_OVERHEAD_FACTOR,
        training_cost: training,
        infrastructure_cost: infrastructure,
        supervised_per_image_cost: DEFAULT_SUPERVISED_PER_IMAGE,
    }
}

#[allow(clippy::too_many_arguments)]
fn make(
    id: &str,
    label: &str,
    daily_volume: u64,
    n_categories: u32,
    budget_upfront: Option<f64>,
    accuracy_floor: f64,
    latency_budget_ms: Option<f64>,
    lifetime_days: u32,
    novel_category_share: f64,
    price_per_box: f64,
    base: CostModelParams,
    published: Choice,
) -> ScenarioPreset {
    let scenario = DeploymentScenario {
        name: id.into(),
        daily_volume,
        n_categories,
        budget_upfront,
        accuracy_floor,
        latency_budget_ms,
        category_additions_per_month: 0.0,
        deployment_lifetime_days: lifetime_days,
        novel_category_share,
        annotation_price_per_box: price_per_box,
    };
    let params = scenario.params(&base);
    ScenarioPreset {
        id: id.into(),
        label: label.into(),
        scenario,
        params,
        published_choice: published,
    }
}

/// The six published deployment scenarios.
///
/// Budgets written as "<$5K" are encoded as 5,000 and latency limits
/// such as "<50ms" as 50 ms, both as strict bounds. Lifetimes follow each
/// scenario's stated horizon (five years for enterprise and vehicles).
pub fn presets() -> Vec<ScenarioPreset> {
    let large = SystemScale::Large.params();
    let api = |n: &str| Choice::Api(n.into());
    let mut startup = make(
        "startup_ecommerce",
        "Startup E-commerce",
        1_000,
        50,
        Some(5_000.0),
        0.65,
        None,
        365,
        0.0,
        0.30,
        params(100, 120.0, 500.0),
        api("gemini"),
    );
    startup.scenario.category_additions_per_month = 7.5;
    alloc::vec![
        startup,
        make(
            "smb_retail",
            "SMB Retail Analytics",
            5_000,
            100,
            Some(10_000.0),
            0.75,
            Some(1_000.0),
            365,
            0.0,
            0.30,
            large.clone(),
            api("gemini"),
        ),
        make(
            "research_wildlife",
            "Research Wildlife",
            333,
            500,
            Some(3_000.0),
            0.60,
            None,
            365,
            1.0,
            0.30,
            large.clone(),
            api("gpt4"),
        ),
        make(
            "medical_imaging",
            "Medical Imaging",
            10_000,
            12,
            Some(50_000.0),
            0.85,
            Some(10_000.0),
            365,
            0.0,
            1.20,
            params(100, 316.0, 500.0),
            Choice::Hybrid,
        ),
        make(
            "enterprise_inventory",
            "Enterprise Inventory",
            500_000,
            200,
            Some(500_000.0),
            0.90,
            Some(50.0),
            1_825,
            0.0,
            0.30,
            params(100, 500.0, 50_000.0),
            Choice::Supervised,
        ),
        make(
            "autonomous_vehicles",
            "Autonomous Vehicles",
            10_000_000,
            20,
            None,
            0.95,
            Some(20.0),
            1_825,
            0.0,
            0.30,
            // edge hardware plus redundancy
            params(5_000, 5_000.0, 30_000.0 + 3_500.0),
            Choice::Supervised,
        ),
    ]
}

pub fn preset(id: &str) -> Option<ScenarioPreset> {
    presets().into_iter().find(|p| p.id == id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchitectureKind {
    Supervised,
    Api,
}

/// Lifetime economics of one catalog profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureCost {
    pub name: String,
    pub kind: ArchitectureKind,
    /// Upfront (supervised) or zero (API).
    pub upfront_usd: f64,
    /// Lifetime TCO at list price.
    pub tco_usd: f64,
    /// API TCO after the daily free tier; `None` for supervised profiles.
    pub tco_with_free_tier_usd: Option<f64>,
    /// Accuracy on this scenario's mix of standard and novel categories.
    pub accuracy: f64,
    /// `None` when nothing is processed or accuracy is zero.
    pub ccd_usd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub catalog_version: String,
    pub ruleset: String,
    pub scenario: DeploymentScenario,
    pub params: CostModelParams,
    pub lifetime_volume: u64,
    pub architectures: Vec<ArchitectureCost>,
    pub recommendation: Recommendation,
    /// Published figures about this scenario, recomputed from components.
    pub notes: Vec<Check>,
}

/// Lifetime TCO and CCD of every catalog profile plus the recommendation.
/// The category count and box price of `base` are replaced by the
/// scenario's.
pub fn evaluate_scenario(
    scenario: &DeploymentScenario,
    catalog: &Catalog,
    base: &CostModelParams,
) -> Result<ScenarioReport> {
    scenario.validate()?;
    catalog.validate()?;
    let params = &scenario.params(base);
    params.validate()?;
    let lifetime = scenario.lifetime_volume();
    let days = scenario.deployment_lifetime_days;
    let upfront = cost::upfront_total(params)?;
    let share = scenario.novel_category_share;
    let mut architectures = Vec::with_capacity(catalog.profiles.len());
    for p in &catalog.profiles {
        let accuracy = p.effective_accuracy(share);
        let (kind, upfront_usd, tco, free) = if p.is_api() {
            let free = if days == 0 {
                0.0
            } else {
                cost::tco_api(p, lifetime, true, days)?
            };
            (
                ArchitectureKind::Api,
                0.0,
                cost::tco_api(p, lifetime, false, 0)?,
                Some(free),
            )
        } else {
            (
                ArchitectureKind::Supervised,
                upfront,
                cost::tco_supervised(params, lifetime)?,
                None,
            )
        };
        let ccd = if lifetime == 0 || accuracy == 0.0 {
            None
        } else {
            Some(breakeven::ccd(tco, lifetime, accuracy)?)
        };
        architectures.push(ArchitectureCost {
            name: p.name.clone(),
            kind,
            upfront_usd,
            tco_usd: tco,
            tco_with_free_tier_usd: free,
            accuracy,
            ccd_usd: ccd,
        });
    }
    let recommendation = decision::recommend(scenario, &catalog.profiles, params)?;
    let notes = reproduce::prose_checks()
        .into_iter()
        .filter(|c| c.item == scenario.name)
        .collect();
    Ok(ScenarioReport {
        catalog_version: catalog.version.clone(),
        ruleset: RULESET_VERSION.into(),
        scenario: scenario.clone(),
        params: params.clone(),
        lifetime_volume: lifetime,
        architectures,
        recommendation,
        notes,
    })
}

pub fn evaluate_preset(preset: &ScenarioPreset, catalog: &Catalog) -> Result<ScenarioReport> {
    evaluate_scenario(&preset.scenario, catalog, &preset.params)
}

/// One row of the cross-scenario comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scenario: String,
    pub daily_volume: u64,
    pub n_categories: u32,
    pub budget_upfront: Option<f64>,
    pub accuracy_floor: f64,
    pub latency_budget_ms: Option<f64>,
    pub choice: Choice,
    /// Message of the rule that made the final selection.
    pub rationale: String,
    pub lifetime_volume: u64,
    pub projected_costs: BTreeMap<String, f64>,
}

pub fn compare(reports: &[ScenarioReport]) -> Result<Vec<ComparisonRow>> {
    if reports.is_empty() {
        return Err(Error::Empty("scenarios"));
    }
    Ok(reports
        .iter()
        .map(|r| {
            let s = &r.scenario;
            let rec = &r.recommendation;
            let rationale = rec
                .rationale
                .iter()
                .rev()
                .find(|f| f.effect == decision::Effect::Selected)
                .or(rec.rationale.last())
                .map(|f| f.message.clone())
                .unwrap_or_default();
            ComparisonRow {
                scenario: s.name.clone(),
                daily_volume: s.daily_volume,
                n_categories: s.n_categories,
                budget_upfront: s.budget_upfront,
                accuracy_floor: s.accuracy_floor,
                latency_budget_ms: s.latency_budget_ms,
                choice: rec.choice.clone(),
                rationale,
                lifetime_volume: rec.lifetime_volume,
                projected_costs: rec.projected_costs.clone(),
            }
        })
        .collect())
}
