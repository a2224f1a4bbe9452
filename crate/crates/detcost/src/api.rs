//! Request and response bodies shared by the CLI and the HTTP service.

use std::collections::BTreeMap;

use detcost_core::breakeven::{self, break_even_volume, BreakEvenSummary, CurveModel, CurveRow, DEFAULT_VOLUME_GRID};
use detcost_core::cost::{self, CostModelParams, ModelProfile, SystemScale, DEFAULT_SUPERVISED_PER_IMAGE};
use detcost_core::decision::{recommend, DeploymentScenario, Recommendation};
use detcost_core::scenarios::{self, ScenarioPreset};
use detcost_core::Error as CoreError;
use serde::{Deserialize, Serialize};

use crate::catalog::LoadedCatalog;
use crate::error::AppError;

/// Supervised parameters given inline or by scale preset; defaults to the
/// `large` scale.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamsSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<CostModelParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<SystemScale>,
}

macro_rules! params_source {
    ($($t:ty),*) => {$(
        impl $t {
            pub fn source(&self) -> ParamsSource {
                ParamsSource {
                    params: self.params.clone(),
                    scale: self.scale,
                }
            }
        }
    )*};
}

params_source!(TcoRequest, BreakevenRequest, CcdCurveRequest);

impl ParamsSource {
    pub fn resolve(&self, catalog: &LoadedCatalog) -> Result<CostModelParams, AppError> {
        let params = match (&self.params, self.scale) {
            (Some(_), Some(_)) => return Err(AppError::invalid("scale", "give either params or scale, not both")),
            (Some(p), None) => p.clone(),
            (None, s) => catalog.scale(s.unwrap_or(SystemScale::Large)),
        };
        params.validate().map_err(|e| match e.field() {
            Some(f) => AppError::invalid(format!("params.{f}"), e.to_string()),
            None => e.into(),
        })?;
        Ok(params)
    }
}

fn select_models<'a>(
    catalog: &'a LoadedCatalog,
    names: &Option<Vec<String>>,
) -> Result<Vec<&'a ModelProfile>, AppError> {
    match names {
        None => Ok(catalog.catalog.profiles.iter().collect()),
        Some(names) if names.is_empty() => Err(AppError::invalid("models", "must not be empty")),
        Some(names) => names
            .iter()
            .map(|n| {
                catalog
                    .catalog
                    .get(n)
                    .ok_or_else(|| AppError::invalid("models", format!("unknown model `{n}`")))
            })
            .collect(),
    }
}

fn volumes_or_default(volumes: &Option<Vec<u64>>) -> Result<Vec<u64>, AppError> {
    let v = volumes.clone().unwrap_or_else(|| DEFAULT_VOLUME_GRID.to_vec());
    breakeven::validate_volumes(&v)?;
    Ok(v)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TcoRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<CostModelParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<SystemScale>,
    #[serde(default)]
    pub volumes: Option<Vec<u64>>,
    #[serde(default)]
    pub models: Option<Vec<String>>,
    /// Deployment length for free-tier deductions; when set, API rows also
    /// carry the free-tier-adjusted cost.
    #[serde(default)]
    pub deployment_days: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpfrontBreakdown {
    pub annotation_usd: f64,
    pub training_usd: f64,
    pub infrastructure_usd: f64,
    pub total_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcoRow {
    pub volume: u64,
    pub model: String,
    pub tco_usd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tco_with_free_tier_usd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcoResponse {
    pub params: CostModelParams,
    pub upfront: UpfrontBreakdown,
    pub rows: Vec<TcoRow>,
}

pub fn tco(catalog: &LoadedCatalog, req: &TcoRequest) -> Result<TcoResponse, AppError> {
    let params = req.source().resolve(catalog)?;
    let models = select_models(catalog, &req.models)?;
    let volumes = volumes_or_default(&req.volumes)?;
    if req.deployment_days == Some(0) {
        return Err(AppError::invalid("deployment_days", "must be >= 1"));
    }
    let mut rows = Vec::with_capacity(volumes.len() * models.len());
    for &volume in &volumes {
        for m in &models {
            let (tco_usd, free) = if m.is_api() {
                let free = match req.deployment_days {
                    Some(days) => Some(cost::tco_api(m, volume, true, days)?),
                    None => None,
                };
                (cost::tco_api(m, volume, false, 1)?, free)
            } else {
                (cost::tco_supervised(&params, volume)?, None)
            };
            rows.push(TcoRow {
                volume,
                model: m.name.clone(),
                tco_usd,
                tco_with_free_tier_usd: free,
            });
        }
    }
    Ok(TcoResponse {
        upfront: UpfrontBreakdown {
            annotation_usd: cost::annotation_cost(&params)?,
            training_usd: params.training_cost,
            infrastructure_usd: params.infrastructure_cost,
            total_usd: cost::upfront_total(&params)?,
        },
        params,
        rows,
    })
}

/// Either explicit prices, or a parameter source plus an API profile name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BreakevenRequest {
    #[serde(default)]
    pub upfront: Option<f64>,
    #[serde(default)]
    pub api_price: Option<f64>,
    #[serde(default)]
    pub sup_cost: Option<f64>,
    #[serde(default)]
    pub api: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<CostModelParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<SystemScale>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakevenResponse {
    #[serde(flatten)]
    pub result: BreakEvenSummary,
    pub upfront: f64,
    pub api_price: f64,
    pub sup_cost: f64,
}

pub fn breakeven(catalog: &LoadedCatalog, req: &BreakevenRequest) -> Result<BreakevenResponse, AppError> {
    let explicit = req.upfront.is_some() || req.api_price.is_some();
    let (upfront, api_price, sup_cost) = if explicit {
        let upfront = req
            .upfront
            .ok_or_else(|| AppError::invalid("upfront", "required with api_price"))?;
        let api_price = req
            .api_price
            .ok_or_else(|| AppError::invalid("api_price", "required with upfront"))?;
        (upfront, api_price, req.sup_cost.unwrap_or(DEFAULT_SUPERVISED_PER_IMAGE))
    } else {
        let params = req.source().resolve(catalog)?;
        let name = req.api.as_deref().unwrap_or("gemini");
        let profile = catalog
            .catalog
            .get(name)
            .ok_or_else(|| AppError::invalid("api", format!("unknown model `{name}`")))?;
        if !profile.is_api() {
            return Err(AppError::invalid("api", format!("`{name}` is not a per-image API")));
        }
        let sup = req.sup_cost.unwrap_or(params.supervised_per_image_cost);
        (cost::upfront_total(&params)?, profile.api_price_per_image, sup)
    };
    let result = break_even_volume(upfront, api_price, sup_cost)?.summary();
    Ok(BreakevenResponse {
        result,
        upfront,
        api_price,
        sup_cost,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CcdCurveRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<CostModelParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<SystemScale>,
    #[serde(default)]
    pub volumes: Option<Vec<u64>>,
    #[serde(default)]
    pub models: Option<Vec<String>>,
    /// Accuracy overrides by model; others use the catalog accuracy.
    #[serde(default)]
    pub accuracy: BTreeMap<String, f64>,
    /// Share of queries on categories outside the supervised taxonomy.
    #[serde(default)]
    pub novel_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossover {
    pub api: String,
    /// Volume where supervised CCD falls to the API's; `None` when it
    /// never does.
    pub volume: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdCurveResponse {
    pub params: CostModelParams,
    pub rows: Vec<CurveRow>,
    pub crossovers: Vec<Crossover>,
}

pub fn curve_models(
    catalog: &LoadedCatalog,
    req: &CcdCurveRequest,
) -> Result<(CostModelParams, Vec<CurveModel>), AppError> {
    let params = req.source().resolve(catalog)?;
    if !(0.0..=1.0).contains(&req.novel_share) {
        return Err(AppError::invalid("novel_share", "must be in [0, 1]"));
    }
    let models = select_models(catalog, &req.models)?;
    for (name, acc) in &req.accuracy {
        if catalog.catalog.get(name).is_none() {
            return Err(AppError::invalid(format!("accuracy.{name}"), "unknown model"));
        }
        if !(0.0..=1.0).contains(acc) {
            return Err(AppError::invalid(format!("accuracy.{name}"), "must be in [0, 1]"));
        }
    }
    let out = models
        .into_iter()
        .map(|m| {
            let accuracy = req
                .accuracy
                .get(&m.name)
                .copied()
                .unwrap_or_else(|| m.effective_accuracy(req.novel_share));
            if m.is_api() {
                CurveModel::Api {
                    profile: m.clone(),
                    accuracy,
                }
            } else {
                CurveModel::Supervised {
                    name: m.name.clone(),
                    params: params.clone(),
                    accuracy,
                }
            }
        })
        .collect();
    Ok((params, out))
}

pub fn ccd_curve(catalog: &LoadedCatalog, req: &CcdCurveRequest) -> Result<CcdCurveResponse, AppError> {
    let (params, models) = curve_models(catalog, req)?;
    let volumes = volumes_or_default(&req.volumes)?;
    let rows = breakeven::curve(&models, &volumes)?;
    let supervised = models.iter().find(|m| matches!(m, CurveModel::Supervised { .. }));
    let mut crossovers = Vec::new();
    if let Some(sup) = supervised {
        for m in &models {
            let CurveModel::Api { profile, accuracy } = m else {
                continue;
            };
            let result = breakeven::ccd_crossover(&params, sup.accuracy(), profile, *accuracy);
            let (volume, note) = match result {
                Ok(v) => (Some(v), None),
                Err(e @ (CoreError::NoCrossover { .. } | CoreError::InvalidField { .. })) => {
                    (None, Some(e.to_string()))
                }
                Err(e) => return Err(e.into()),
            };
            crossovers.push(Crossover {
                api: profile.name.clone(),
                volume,
                note,
            });
        }
    }
    Ok(CcdCurveResponse {
        params,
        rows,
        crossovers,
    })
}

/// A preset id, or a scenario with optional supervised parameters
/// (default: the `large` scale).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecideRequest {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub scenario: Option<DeploymentScenario>,
    #[serde(default)]
    pub params: Option<CostModelParams>,
}

pub fn find_preset(id: &str) -> Result<ScenarioPreset, AppError> {
    scenarios::preset(id).ok_or_else(|| {
        let known: Vec<String> = scenarios::presets().into_iter().map(|p| p.id).collect();
        AppError::invalid("preset", format!("unknown preset `{id}` (known: {})", known.join(", ")))
    })
}

impl DecideRequest {
    pub fn resolve(&self, catalog: &LoadedCatalog) -> Result<(DeploymentScenario, CostModelParams), AppError> {
        match (&self.preset, &self.scenario) {
            (Some(_), Some(_)) => Err(AppError::invalid("preset", "give either preset or scenario, not both")),
            (Some(id), None) => {
                let p = find_preset(id)?;
                let params = self.params.clone().unwrap_or(p.params);
                Ok((p.scenario, params))
            }
            (None, Some(s)) => {
                let source = ParamsSource {
                    params: self.params.clone(),
                    scale: None,
                };
                Ok((s.clone(), source.resolve(catalog)?))
            }
            (None, None) => Err(AppError::invalid("scenario", "a preset or a scenario is required")),
        }
    }
}

pub fn decide(catalog: &LoadedCatalog, req: &DecideRequest) -> Result<Recommendation, AppError> {
    let (scenario, params) = req.resolve(catalog)?;
    recommend(&scenario, &catalog.catalog.profiles, &params).map_err(|e| match e.field() {
        Some(f) => AppError::invalid(format!("scenario.{f}"), e.to_string()),
        None => e.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogResponse<'a> {
    pub version: &'a str,
    pub profiles: &'a [ModelProfile],
    pub system_scales: &'a BTreeMap<SystemScale, CostModelParams>,
    pub presets: Vec<ScenarioPreset>,
}

pub fn catalog_view(catalog: &LoadedCatalog) -> CatalogResponse<'_> {
    CatalogResponse {
        version: &catalog.catalog.version,
        profiles: &catalog.catalog.profiles,
        system_scales: &catalog.system_scales,
        presets: scenarios::presets(),
    }
}
