//! Closed-form break-even volumes, cost per correct detection (CCD) and
//! TCO/CCD curves. Every curve point is an exact evaluation of the affine
//! cost models; nothing is interpolated.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cost::{self, CostModelParams, ModelProfile};
use crate::error::{Error, Result};
use crate::DAYS_PER_YEAR;

/// Inference volume at which supervised and API TCO are equal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakEvenResult {
    /// Unrounded `upfront / cost_margin`.
    pub volume: f64,
    /// `volume / 365`.
    pub daily_for_one_year: f64,
    /// API price minus supervised per-image cost.
    pub cost_margin: f64,
}

impl BreakEvenResult {
    /// Break-even volume rounded to whole images.
    pub fn volume_images(&self) -> u64 {
        libm::round(self.volume) as u64
    }

    pub fn daily_images(&self) -> u64 {
        libm::round(self.daily_for_one_year) as u64
    }

    pub fn summary(&self) -> BreakEvenSummary {
        BreakEvenSummary {
            volume: self.volume_images(),
            volume_exact: self.volume,
            daily_for_one_year: self.daily_images(),
            daily_exact: self.daily_for_one_year,
            cost_margin: self.cost_margin,
        }
    }
}

/// Presentation form with whole-image counts next to the exact values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakEvenSummary {
    pub volume: u64,
    pub volume_exact: f64,
    pub daily_for_one_year: u64,
    pub daily_exact: f64,
    pub cost_margin: f64,
}

pub fn break_even_volume(upfront: f64, api_price: f64, supervised_per_image: f64) -> Result<BreakEvenResult> {
    for (field, v) in [
        ("upfront", upfront),
        ("api_price", api_price),
        ("sup_cost", supervised_per_image),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::invalid(field, "must be a finite value >= 0"));
        }
    }
    let margin = api_price - supervised_per_image;
    if margin <= 0.0 {
        return Err(Error::NoFiniteBreakEven { margin });
    }
    let volume = upfront / margin;
    Ok(BreakEvenResult {
        volume,
        daily_for_one_year: volume / f64::from(DAYS_PER_YEAR),
        cost_margin: margin,
    })
}

/// Break-even of a supervised system against an API profile.
pub fn break_even_against(params: &CostModelParams, api: &ModelProfile) -> Result<BreakEvenResult> {
    if !api.is_api() {
        return Err(Error::PricingMode {
            profile: api.name.clone(),
            expected: cost::PricingMode::PerImageApi.as_str(),
            actual: api.pricing_mode.as_str(),
        });
    }
    break_even_volume(
        cost::upfront_total(params)?,
        api.api_price_per_image,
        params.supervised_per_image_cost,
    )
}

/// `tco / (n_inferences * accuracy)`.
pub fn ccd(tco: f64, n_inferences: u64, accuracy: f64) -> Result<f64> {
    if n_inferences == 0 {
        return Err(Error::invalid("n_inferences", "must be >= 1"));
    }
    if !tco.is_finite() || tco < 0.0 {
        return Err(Error::invalid("tco", "must be a finite value >= 0"));
    }
    if accuracy.is_nan() || !(0.0..=1.0).contains(&accuracy) {
        return Err(Error::invalid("accuracy", "must be in (0, 1]"));
    }
    if accuracy == 0.0 {
        return Err(Error::UndefinedCcd);
    }
    Ok(tco / (n_inferences as f64 * accuracy))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcdPoint {
    pub n_inferences: u64,
    pub tco: f64,
    pub accuracy: f64,
    pub ccd: f64,
}

impl CcdPoint {
    pub fn new(tco: f64, n_inferences: u64, accuracy: f64) -> Result<Self> {
        Ok(Self {
            n_inferences,
            tco,
            accuracy,
            ccd: ccd(tco, n_inferences, accuracy)?,
        })
    }
}

/// Volume at which supervised CCD falls to the (constant) API CCD:
/// `upfront / (api_price * acc_sup / acc_api - c)`.
pub fn ccd_crossover(
    params: &CostModelParams,
    supervised_accuracy: f64,
    api: &ModelProfile,
    api_accuracy: f64,
) -> Result<f64> {
    for (field, acc) in [
        ("supervised_accuracy", supervised_accuracy),
        ("api_accuracy", api_accuracy),
    ] {
        if acc.is_nan() || acc <= 0.0 || acc > 1.0 {
            return Err(Error::invalid(field, "must be in (0, 1]"));
        }
    }
    if !api.is_api() {
        return Err(Error::PricingMode {
            profile: api.name.clone(),
            expected: cost::PricingMode::PerImageApi.as_str(),
            actual: api.pricing_mode.as_str(),
        });
    }
    let upfront = cost::upfront_total(params)?;
    let margin = api.api_price_per_image * supervised_accuracy / api_accuracy - params.supervised_per_image_cost;
    if margin <= 0.0 {
        return Err(Error::NoCrossover { margin });
    }
    Ok(upfront / margin)
}

/// Volumes of the published inference-cost comparison (1K to 200M).
pub const DEFAULT_VOLUME_GRID: [u64; 9] = [
    1_000,
    10_000,
    100_000,
    1_000_000,
    10_000_000,
    50_000_000,
    100_000_000,
    150_000_000,
    200_000_000,
];

/// One series of a TCO/CCD curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveModel {
    Supervised {
        name: String,
        params: CostModelParams,
        accuracy: f64,
    },
    Api {
        profile: ModelProfile,
        accuracy: f64,
    },
}

impl CurveModel {
    pub fn name(&self) -> &str {
        match self {
            CurveModel::Supervised { name, .. } => name,
            CurveModel::Api { profile, .. } => &profile.name,
        }
    }

    pub fn accuracy(&self) -> f64 {
        match self {
            CurveModel::Supervised { accuracy, .. } | CurveModel::Api { accuracy, .. } => *accuracy,
        }
    }

    pub fn tco(&self, volume: u64) -> Result<f64> {
        match self {
            CurveModel::Supervised { params, .. } => cost::tco_supervised(params, volume),
            CurveModel::Api { profile, .. } => cost::tco_api(profile, volume, false, 1),
        }
    }

    /// CCD is `None` when the model's accuracy is zero.
    pub fn point(&self, volume: u64) -> Result<CurveRow> {
        let tco_usd = self.tco(volume)?;
        let ccd_usd = match ccd(tco_usd, volume, self.accuracy()) {
            Ok(v) => Some(v),
            Err(Error::UndefinedCcd) => None,
            Err(e) => return Err(e),
        };
        Ok(CurveRow {
            volume,
            model: self.name().into(),
            tco_usd,
            ccd_usd,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub volume: u64,
    pub model: String,
    pub tco_usd: f64,
    pub ccd_usd: Option<f64>,
}

pub fn validate_volumes(volumes: &[u64]) -> Result<()> {
    if volumes.is_empty() {
        return Err(Error::Empty("volumes"));
    }
    if volumes[0] == 0 {
        return Err(Error::invalid("volumes", "volumes must be >= 1"));
    }
    if volumes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("volumes", "must be strictly increasing"));
    }
    Ok(())
}

/// Rows are volume-major, models in the order given.
pub fn curve(models: &[CurveModel], volumes: &[u64]) -> Result<Vec<CurveRow>> {
    validate_volumes(volumes)?;
    if models.is_empty() {
        return Err(Error::Empty("models"));
    }
    let mut rows = Vec::with_capacity(models.len() * volumes.len());
    for &v in volumes {
        for m in models {
            rows.push(m.point(v)?);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{gemini, gpt4, SystemScale};

    #[test]
    fn break_even_examples() {
        let r = break_even_volume(11_616.0, 0.00025, 0.0).unwrap();
        assert!((r.volume - 46_464_000.0).abs() < 1e-3);
        let r = break_even_volume(11_616.0, 0.00025, 0.00004).unwrap();
        assert_eq!(r.volume_images(), 55_314_286);
        assert_eq!(r.daily_images(), 151_546);
        let r = break_even_volume(11_616.0, 0.01, 0.00004).unwrap();
        assert_eq!(r.volume_images(), 1_166_265);
        let r = break_even_volume(22_600.0, 0.00025, 0.00004).unwrap();
        assert_eq!(r.volume_images(), 107_619_048);
        assert!(matches!(
            break_even_volume(100.0, 0.001, 0.001),
            Err(Error::NoFiniteBreakEven { .. })
        ));
    }

    #[test]
    fn break_even_identity() {
        let r = break_even_volume(11_616.0, 0.00025, 0.00004).unwrap();
        assert!((r.volume * r.cost_margin - 11_616.0).abs() <= 1e-6 * 11_616.0);
        assert_eq!(r.daily_for_one_year, r.volume / 365.0);
    }

    #[test]
    fn ccd_examples() {
        assert_eq!(ccd(100.0, 100, 1.0).unwrap(), 1.0);
        // exact rational: 25 / 68,500
        assert!((ccd(25.0, 100_000, 0.685).unwrap() - 0.000_364_963_503_649_635).abs() < 1e-15);
        assert!((ccd(11_658.0, 100_000, 0.912).unwrap() - 0.127_828_947_368_421_04).abs() < 1e-12);
        assert_eq!(ccd(1.0, 10, 0.0), Err(Error::UndefinedCcd));
        assert_eq!(ccd(1.0, 0, 0.5).unwrap_err().field(), Some("n_inferences"));
    }

    #[test]
    fn crossover_examples() {
        let large = SystemScale::Large.params();
        // Oracle: exact rational arithmetic (Python fractions).
        let n = ccd_crossover(&large, 0.912, &gemini(), 0.685).unwrap();
        assert!((n - 39_665_802.592_223_33).abs() < 1e-3, "{n}");
        let n = ccd_crossover(&large, 0.897, &gemini(), 0.728).unwrap();
        assert!((n - 43_337_508.327_781_476).abs() < 1e-3, "{n}");

        let free_sup = CostModelParams {
            supervised_per_image_cost: 0.0,
            ..large.clone()
        };
        let n = ccd_crossover(&free_sup, 0.8, &gemini(), 0.8).unwrap();
        let be = break_even_against(&free_sup, &gemini()).unwrap();
        assert!((n - be.volume).abs() <= 1e-9 * be.volume);

        let mut cheap = gemini();
        cheap.api_price_per_image = 0.00001;
        assert!(matches!(
            ccd_crossover(&large, 0.9, &cheap, 0.9),
            Err(Error::NoCrossover { .. })
        ));
    }

    #[test]
    fn api_tco_columns() {
        let models = [
            CurveModel::Api {
                profile: gemini(),
                accuracy: 0.685,
            },
            CurveModel::Api {
                profile: gpt4(),
                accuracy: 0.713,
            },
        ];
        let rows = curve(&models, &DEFAULT_VOLUME_GRID).unwrap();
        let gem: Vec<f64> = rows.iter().filter(|r| r.model == "gemini").map(|r| r.tco_usd).collect();
        let expected = [0.25, 2.50, 25.0, 250.0, 2_500.0, 12_500.0, 25_000.0, 37_500.0, 50_000.0];
        for (g, e) in gem.iter().zip(expected) {
            assert!((g - e).abs() < 1e-9 * e, "{g} vs {e}");
        }
        assert_eq!(rows.last().unwrap().tco_usd, 2_000_000.0);
        assert_eq!(rows[0].model, "gemini");
        assert_eq!(rows[1].model, "gpt4");
    }

    #[test]
    fn zero_cost_single_volume() {
        let zero = CostModelParams {
            price_per_box: 0.0,
            training_cost: 0.0,
            infrastructure_cost: 0.0,
            supervised_per_image_cost: 0.0,
            ..SystemScale::Large.params()
        };
        let rows = curve(
            &[CurveModel::Supervised {
                name: "free".into(),
                params: zero,
                accuracy: 1.0,
            }],
            &[1],
        )
        .unwrap();
        assert_eq!(rows[0].tco_usd, 0.0);
        assert_eq!(rows[0].ccd_usd, Some(0.0));
    }

    #[test]
    fn curve_rejects_bad_volumes() {
        let m = [CurveModel::Api {
            profile: gemini(),
            accuracy: 0.685,
        }];
        assert_eq!(curve(&m, &[]), Err(Error::Empty("volumes")));
        assert!(curve(&m, &[10, 10]).is_err());
        assert!(curve(&m, &[0, 10]).is_err());
    }

    #[test]
    fn zero_accuracy_has_no_ccd() {
        let m = CurveModel::Supervised {
            name: "yolov8m".into(),
            params: SystemScale::Large.params(),
            accuracy: 0.0,
        };
        assert_eq!(m.point(1_000).unwrap().ccd_usd, None);
    }
}
