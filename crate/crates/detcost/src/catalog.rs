//! Pricing catalog files.
//!
//! On disk a catalog maps profile names to their fields, next to the
//! supervised system-scale presets:
//!
//! ```json
//! {"version": "2024-10",
//!  "profiles": {"gemini": {"pricing_mode": "per_image_api", ...}},
//!  "system_scales": {"large": {"n_categories": 100, ...}}}
//! ```
//!
//! Profiles are loaded supervised first, then APIs, each group by name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use detcost_core::cost::{Catalog, CostModelParams, ModelProfile, PricingMode, SystemScale};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::AppError;

/// Environment variable naming the default catalog file.
pub const CATALOG_ENV: &str = "DETCOST_CATALOG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CatalogFile {
    version: String,
    profiles: BTreeMap<String, serde_json::Map<String, Value>>,
    #[serde(default)]
    system_scales: BTreeMap<String, CostModelParams>,
}

/// A validated catalog plus the supervised scale presets it carries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadedCatalog {
    pub catalog: Catalog,
    pub system_scales: BTreeMap<SystemScale, CostModelParams>,
}

impl LoadedCatalog {
    pub fn builtin() -> Self {
        Self {
            catalog: Catalog::builtin(),
            system_scales: SystemScale::ALL.iter().map(|&s| (s, s.params())).collect(),
        }
    }

    /// Parameters of a scale preset; falls back to the built-in values when
    /// the catalog omits the scale.
    pub fn scale(&self, scale: SystemScale) -> CostModelParams {
        self.system_scales
            .get(&scale)
            .cloned()
            .unwrap_or_else(|| scale.params())
    }

    pub fn from_json(text: &str) -> Result<Self, AppError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: CatalogFile = serde_path_to_error::deserialize(de).map_err(AppError::from_json_path)?;
        let mut profiles = Vec::with_capacity(file.profiles.len());
        for (name, mut fields) in file.profiles {
            fields.insert("name".into(), Value::String(name.clone()));
            let profile: ModelProfile = serde_json::from_value(Value::Object(fields))
                .map_err(|e| AppError::invalid(format!("profiles.{name}"), e.to_string()))?;
            profiles.push(profile);
        }
        profiles.sort_by_key(|p| (p.pricing_mode != PricingMode::UpfrontAmortized, p.name.clone()));
        let catalog = Catalog {
            version: file.version,
            profiles,
        };
        catalog.validate()?;
        let mut system_scales = BTreeMap::new();
        for (name, params) in file.system_scales {
            let scale = SystemScale::from_name(&name)
                .ok_or_else(|| AppError::invalid(format!("system_scales.{name}"), "unknown system scale"))?;
            params.validate().map_err(|e| {
                let field = match e.field() {
                    Some(f) => format!("system_scales.{name}.{f}"),
                    None => format!("system_scales.{name}"),
                };
                AppError::invalid(field, e.to_string())
            })?;
            system_scales.insert(scale, params);
        }
        Ok(Self { catalog, system_scales })
    }

    pub fn to_json(&self) -> String {
        let profiles = self
            .catalog
            .profiles
            .iter()
            .map(|p| {
                let mut fields = match serde_json::to_value(p) {
                    Ok(Value::Object(m)) => m,
                    _ => unreachable!("profiles serialize as objects"),
                };
                fields.remove("name");
                (p.name.clone(), fields)
            })
            .collect();
        let file = CatalogFile {
            version: self.catalog.version.clone(),
            profiles,
            system_scales: self
                .system_scales
                .iter()
                .map(|(s, p)| (s.name().to_string(), p.clone()))
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&file).expect("catalog serializes");
        out.push('\n');
        out
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.in_file(path))
    }

    /// Loads `explicit`, else the file named by `DETCOST_CATALOG`, else the
    /// built-in catalog.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self, AppError> {
        let from_env = std::env::var_os(CATALOG_ENV).map(PathBuf::from);
        match explicit.map(Path::to_path_buf).or(from_env) {
            Some(path) => {
                log::info!("loading catalog {}", path.display());
                Self::load(&path)
            }
            None => Ok(Self::builtin()),
        }
    }
}
