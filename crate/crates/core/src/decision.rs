//! Rule-based architecture recommendation (`ruleset-v1`).
//!
//! Rules run in a fixed order and every elimination is written to the
//! rationale with the quantity that triggered it:
//!
//! | id | rule |
//! |----|------|
//! | R0 | zero lifetime volume: nothing to deploy |
//! | R1 | profile latency must be strictly below the budget; budgets of 50 ms or less rule out every API |
//! | R2 | a floor above both the best API accuracy and the reviewed-output ceiling (0.75) rules out APIs, unless novel categories are expected |
//! | R3 | novel categories rule out the supervised model |
//! | R4 | upfront cost above budget rules out the supervised model; first-year API spend above budget rules out that API |
//! | R5 | supervised vs API: lifetime volume against the break-even of the cheapest surviving API |
//! | R6 | among APIs: lowest CCD, unless the floor exceeds its accuracy, then the most accurate |
//! | R7 | floor between the best API and supervised accuracy with prohibitive annotation (>= $1/box): hybrid |
//! | R8 | nothing survives: no viable architecture |
//!
//! An accuracy floor never rules out the supervised model on its own: when
//! no profile meets the floor the most accurate one is kept and the
//! shortfall is recorded.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::breakeven::{self, BreakEvenResult};
use crate::cost::{self, CostModelParams, ModelProfile};
use crate::error::{ensure_unit, Error, Result};
use crate::DAYS_PER_YEAR;

pub const RULESET_VERSION: &str = "ruleset-v1";
/// Budgets at or below this rule out every API profile.
pub const REAL_TIME_LATENCY_MS: f64 = 50.0;
/// Floors up to this are met by API output plus manual review.
pub const REVIEWED_ACCURACY_CEILING: f64 = 0.75;
pub const PROHIBITIVE_PRICE_PER_BOX: f64 = 1.00;
/// Share of the supervised upfront cost a hybrid still pays (70% less
/// annotation).
pub const HYBRID_UPFRONT_SHARE: f64 = 0.30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentScenario {
    pub name: String,
    /// Images per day. Zero is accepted and yields no recommendation.
    pub daily_volume: u64,
    pub n_categories: u32,
    /// Upfront budget in USD; `None` means unlimited.
    #[serde(default)]
    pub budget_upfront: Option<f64>,
    pub accuracy_floor: f64,
    /// `None` means any latency is acceptable.
    #[serde(default)]
    pub latency_budget_ms: Option<f64>,
    #[serde(default)]
    pub category_additions_per_month: f64,
    pub deployment_lifetime_days: u32,
    #[serde(default)]
    pub novel_category_share: f64,
    pub annotation_price_per_box: f64,
}

impl DeploymentScenario {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::invalid("name", "must not be empty"));
        }
        if self.n_categories == 0 {
            return Err(Error::invalid("n_categories", "must be >= 1"));
        }
        if let Some(b) = self.budget_upfront {
            crate::error::ensure_finite_nonneg("budget_upfront", b)?;
        }
        if !(self.accuracy_floor > 0.0 && self.accuracy_floor <= 1.0) {
            return Err(Error::invalid("accuracy_floor", "must be in (0, 1]"));
        }
        if let Some(l) = self.latency_budget_ms {
            if l.is_nan() || l <= 0.0 {
                return Err(Error::invalid("latency_budget_ms", "must be > 0"));
            }
        }
        crate::error::ensure_finite_nonneg("category_additions_per_month", self.category_additions_per_month)?;
        ensure_unit("novel_category_share", self.novel_category_share)?;
        if !self.annotation_price_per_box.is_finite() || self.annotation_price_per_box <= 0.0 {
            return Err(Error::invalid("annotation_price_per_box", "must be > 0"));
        }
        Ok(())
    }

    pub fn lifetime_volume(&self) -> u64 {
        self.daily_volume
            .saturating_mul(u64::from(self.deployment_lifetime_days))
    }

    /// Images processed in the first year (or the whole lifetime if
    /// shorter).
    pub fn first_year_volume(&self) -> u64 {
        self.daily_volume
            .saturating_mul(u64::from(self.deployment_lifetime_days.min(DAYS_PER_YEAR)))
    }

    /// Supervised cost parameters for this scenario's taxonomy and
    /// annotation price.
    pub fn params(&self, base: &CostModelParams) -> CostModelParams {
        base.with_annotation(self.n_categories, self.annotation_price_per_box)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Choice {
    Supervised,
    Api(String),
    Hybrid,
    /// No architecture satisfies the constraints.
    None,
}

impl Choice {
    pub fn as_str(&self) -> &str {
        match self {
            Choice::Supervised => "supervised",
            Choice::Api(name) => name,
            Choice::Hybrid => "hybrid",
            Choice::None => "none",
        }
    }

    pub fn from_name(s: &str) -> Self {
        match s {
            "supervised" => Choice::Supervised,
            "hybrid" => Choice::Hybrid,
            "none" => Choice::None,
            other => Choice::Api(other.to_string()),
        }
    }

    pub fn is_api(&self) -> bool {
        matches!(self, Choice::Api(_))
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Choice {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Choice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        Ok(Choice::from_name(&String::deserialize(d)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    Eliminated,
    Retained,
    Selected,
}

/// One fired rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleFiring {
    pub rule: String,
    /// Profile or architecture the rule acted on.
    pub subject: String,
    pub effect: Effect,
    /// Quantity compared by the rule.
    pub value: f64,
    /// What it was compared against; `None` for unbounded limits.
    pub limit: Option<f64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub scenario: String,
    pub ruleset: String,
    pub choice: Choice,
    pub rationale: Vec<RuleFiring>,
    pub lifetime_volume: u64,
    /// Break-even against the cheapest API in the catalog; `None` when the
    /// API is not cheaper per image than supervised inference.
    pub breakeven: Option<BreakEvenResult>,
    pub breakeven_against: String,
    /// Lifetime TCO at list price for `supervised`, every API and `hybrid`.
    pub projected_costs: BTreeMap<String, f64>,
}

struct Trace(Vec<RuleFiring>);

impl Trace {
    fn push(&mut self, rule: &str, subject: &str, effect: Effect, value: f64, limit: Option<f64>, message: String) {
        self.0.push(RuleFiring {
            rule: rule.into(),
            subject: subject.into(),
            effect,
            value,
            limit,
            message,
        });
    }
}

fn fmt_limit(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v}"),
        None => "unlimited".into(),
    }
}

/// Recommends one architecture for `scenario`.
///
/// `catalog` needs at least one supervised and one API profile; the first
/// supervised profile is used. `base` supplies the supervised cost model
/// whose category count and box price are replaced by the scenario's.
pub fn recommend(
    scenario: &DeploymentScenario,
    catalog: &[ModelProfile],
    base: &CostModelParams,
) -> Result<Recommendation> {
    scenario.validate()?;
    if catalog.is_empty() {
        return Err(Error::Empty("catalog"));
    }
    for p in catalog {
        p.validate()?;
    }
    let sup = catalog
        .iter()
        .find(|p| !p.is_api())
        .ok_or_else(|| Error::invalid("catalog", "needs a supervised profile"))?;
    let apis: Vec<&ModelProfile> = catalog.iter().filter(|p| p.is_api()).collect();
    if apis.is_empty() {
        return Err(Error::invalid("catalog", "needs an API profile"));
    }
    let params = scenario.params(base);
    params.validate()?;

    let lifetime = scenario.lifetime_volume();
    let upfront = cost::upfront_total(&params)?;
    let share = scenario.novel_category_share;
    let floor = scenario.accuracy_floor;
    let sup_acc = sup.effective_accuracy(share);
    let api_acc: Vec<f64> = apis.iter().map(|p| p.effective_accuracy(share)).collect();
    let best_api_acc = api_acc.iter().copied().fold(0.0, f64::max);

    let cheapest_api = *apis
        .iter()
        .min_by(|a, b| a.api_price_per_image.total_cmp(&b.api_price_per_image))
        .expect("non-empty");
    let breakeven = match breakeven::break_even_against(&params, cheapest_api) {
        Ok(r) => Some(r),
        Err(Error::NoFiniteBreakEven { .. }) => None,
        Err(e) => return Err(e),
    };

    let mut projected = BTreeMap::new();
    projected.insert("supervised".to_string(), cost::tco_supervised(&params, lifetime)?);
    for p in &apis {
        projected.insert(p.name.clone(), cost::tco_api(p, lifetime, false, 0)?);
    }

    let mut trace = Trace(Vec::new());
    let mut sup_alive = true;
    let mut api_alive = alloc::vec![true; apis.len()];
    let mut sup_latency_ok = true;
    let mut api_latency_ok = alloc::vec![true; apis.len()];

    // R1
    if let Some(budget) = scenario.latency_budget_ms {
        if sup.latency_ms >= budget {
            sup_alive = false;
            sup_latency_ok = false;
            trace.push(
                "R1",
                &sup.name,
                Effect::Eliminated,
                sup.latency_ms,
                Some(budget),
                format!("latency {} ms does not meet the {} ms budget", sup.latency_ms, budget),
            );
        }
        for (i, p) in apis.iter().enumerate() {
            let message = if budget <= REAL_TIME_LATENCY_MS {
                format!(
                    "latency budget {budget} ms is real-time; network APIs cannot meet it ({} ms)",
                    p.latency_ms
                )
            } else if p.latency_ms >= budget {
                format!("latency {} ms does not meet the {} ms budget", p.latency_ms, budget)
            } else {
                continue;
            };
            api_alive[i] = false;
            api_latency_ok[i] = false;
            trace.push("R1", &p.name, Effect::Eliminated, p.latency_ms, Some(budget), message);
        }
    }

    let hybrid_api = apis
        .iter()
        .zip(&api_latency_ok)
        .filter(|(_, ok)| **ok)
        .map(|(p, _)| *p)
        .min_by(|a, b| a.api_price_per_image.total_cmp(&b.api_price_per_image))
        .unwrap_or(cheapest_api);
    projected.insert(
        "hybrid".to_string(),
        cost::tco_api(hybrid_api, lifetime, false, 0)? + HYBRID_UPFRONT_SHARE * upfront,
    );

    let finish = |choice: Choice, trace: Trace, projected_costs: BTreeMap<String, f64>| Recommendation {
        scenario: scenario.name.clone(),
        ruleset: RULESET_VERSION.into(),
        choice,
        rationale: trace.0,
        lifetime_volume: lifetime,
        breakeven,
        breakeven_against: cheapest_api.name.clone(),
        projected_costs,
    };

    // R0
    if lifetime == 0 {
        trace.push(
            "R0",
            "all",
            Effect::Eliminated,
            0.0,
            None,
            format!(
                "lifetime volume is 0 ({} images/day over {} days); no viable architecture",
                scenario.daily_volume, scenario.deployment_lifetime_days
            ),
        );
        return Ok(finish(Choice::None, trace, projected));
    }

    // R2
    let api_floor = best_api_acc.max(REVIEWED_ACCURACY_CEILING);
    if floor > api_floor {
        if share > 0.0 {
            trace.push(
                "R2",
                "api",
                Effect::Retained,
                best_api_acc,
                Some(floor),
                format!(
                    "best API accuracy {best_api_acc:.4} is below the {floor} floor, kept because {:.0}% of categories are novel",
                    share * 100.0
                ),
            );
        } else {
            for (i, p) in apis.iter().enumerate() {
                if api_alive[i] {
                    api_alive[i] = false;
                    trace.push(
                        "R2",
                        &p.name,
                        Effect::Eliminated,
                        api_acc[i],
                        Some(floor),
                        format!(
                            "accuracy {:.4} is below the {floor} floor and above what manual review can cover ({REVIEWED_ACCURACY_CEILING})",
                            api_acc[i]
                        ),
                    );
                }
            }
        }
    }
    if floor > sup_acc && sup_alive {
        trace.push(
            "R2",
            &sup.name,
            Effect::Retained,
            sup_acc,
            Some(floor),
            format!("accuracy {sup_acc:.4} is below the {floor} floor; kept as the most accurate option"),
        );
    }

    // R3
    if share > 0.0 && sup_alive {
        sup_alive = false;
        trace.push(
            "R3",
            &sup.name,
            Effect::Eliminated,
            share,
            Some(0.0),
            format!(
                "{:.0}% of categories are novel; supervised accuracy on untrained categories is {:.3}",
                share * 100.0,
                sup.novel_accuracy()
            ),
        );
    }

    // R4
    if let Some(budget) = scenario.budget_upfront {
        if sup_alive && upfront > budget {
            sup_alive = false;
            trace.push(
                "R4",
                &sup.name,
                Effect::Eliminated,
                upfront,
                Some(budget),
                format!("upfront cost ${upfront:.2} exceeds the ${budget} budget"),
            );
        }
        let year = scenario.first_year_volume();
        for (i, p) in apis.iter().enumerate() {
            let spend = year as f64 * p.api_price_per_image;
            if api_alive[i] && spend > budget {
                api_alive[i] = false;
                trace.push(
                    "R4",
                    &p.name,
                    Effect::Eliminated,
                    spend,
                    Some(budget),
                    format!("first-year spend ${spend:.2} on {year} images exceeds the ${budget} budget"),
                );
            }
        }
    }

    // R5
    if sup_alive && api_alive.iter().any(|a| *a) {
        let rival = apis
            .iter()
            .zip(&api_alive)
            .filter(|(_, a)| **a)
            .map(|(p, _)| *p)
            .min_by(|a, b| a.api_price_per_image.total_cmp(&b.api_price_per_image))
            .expect("an API survives");
        let be = match breakeven::break_even_against(&params, rival) {
            Ok(r) => Some(r),
            Err(Error::NoFiniteBreakEven { .. }) => None,
            Err(e) => return Err(e),
        };
        match be {
            Some(be) if lifetime as f64 >= be.volume => {
                for (i, p) in apis.iter().enumerate() {
                    if api_alive[i] {
                        api_alive[i] = false;
                        trace.push(
                            "R5",
                            &p.name,
                            Effect::Eliminated,
                            lifetime as f64,
                            Some(be.volume),
                            format!(
                                "lifetime volume {lifetime} reaches the {} break-even of {:.0}",
                                rival.name, be.volume
                            ),
                        );
                    }
                }
            }
            Some(be) => {
                sup_alive = false;
                trace.push(
                    "R5",
                    &sup.name,
                    Effect::Eliminated,
                    lifetime as f64,
                    Some(be.volume),
                    format!(
                        "lifetime volume {lifetime} is below the {} break-even of {:.0}",
                        rival.name, be.volume
                    ),
                );
            }
            None => {
                sup_alive = false;
                trace.push(
                    "R5",
                    &sup.name,
                    Effect::Eliminated,
                    params.supervised_per_image_cost,
                    Some(rival.api_price_per_image),
                    format!(
                        "{} is no more expensive per image than supervised inference",
                        rival.name
                    ),
                );
            }
        }
    }

    // R6
    let mut choice = Choice::None;
    let alive: Vec<usize> = (0..apis.len()).filter(|&i| api_alive[i]).collect();
    if !alive.is_empty() {
        let ccd_of = |i: usize| breakeven::ccd(projected[&apis[i].name], lifetime, api_acc[i]).unwrap_or(f64::INFINITY);
        let cheapest = *alive
            .iter()
            .min_by(|&&a, &&b| {
                ccd_of(a)
                    .total_cmp(&ccd_of(b))
                    .then(apis[a].latency_ms.total_cmp(&apis[b].latency_ms))
                    .then(apis[a].name.cmp(&apis[b].name))
            })
            .expect("non-empty");
        let pick = if floor > api_acc[cheapest] && alive.len() > 1 {
            let best = *alive
                .iter()
                .max_by(|&&a, &&b| api_acc[a].total_cmp(&api_acc[b]).then(ccd_of(b).total_cmp(&ccd_of(a))))
                .expect("non-empty");
            trace.push(
                "R6",
                &apis[best].name,
                Effect::Selected,
                api_acc[best],
                Some(floor),
                format!(
                    "lowest-CCD {} ({:.4}) is below the {floor} floor; most accurate API is {} ({:.4})",
                    apis[cheapest].name, api_acc[cheapest], apis[best].name, api_acc[best]
                ),
            );
            best
        } else {
            trace.push(
                "R6",
                &apis[cheapest].name,
                Effect::Selected,
                ccd_of(cheapest),
                None,
                format!(
                    "lowest CCD ${:.6} per correct detection at {:.4} accuracy",
                    ccd_of(cheapest),
                    api_acc[cheapest]
                ),
            );
            cheapest
        };
        choice = Choice::Api(apis[pick].name.clone());
    } else if sup_alive {
        trace.push(
            "R5",
            &sup.name,
            Effect::Selected,
            sup_acc,
            Some(floor),
            format!("only surviving architecture; accuracy {sup_acc:.4}"),
        );
        choice = Choice::Supervised;
    }

    // R7
    let hybrid_upfront = HYBRID_UPFRONT_SHARE * upfront;
    let hybrid_affordable = scenario.budget_upfront.is_none_or(|b| hybrid_upfront <= b);
    if floor > best_api_acc
        && floor <= sup_acc
        && scenario.annotation_price_per_box >= PROHIBITIVE_PRICE_PER_BOX
        && sup_latency_ok
        && api_latency_ok.iter().any(|ok| *ok)
        && hybrid_affordable
    {
        trace.push(
            "R7",
            "hybrid",
            Effect::Selected,
            scenario.annotation_price_per_box,
            Some(PROHIBITIVE_PRICE_PER_BOX),
            format!(
                "floor {floor} lies between API ({best_api_acc:.4}) and supervised ({sup_acc:.4}) accuracy and annotation at ${}/box is prohibitive; {} screening with supervised verification on {:.0}% of the annotation (${hybrid_upfront:.2} upfront)",
                scenario.annotation_price_per_box,
                hybrid_api.name,
                HYBRID_UPFRONT_SHARE * 100.0
            ),
        );
        choice = Choice::Hybrid;
    }

    if choice == Choice::None {
        trace.push(
            "R8",
            "all",
            Effect::Eliminated,
            floor,
            None,
            format!(
                "no architecture survives the constraints (budget {}, latency {})",
                fmt_limit(scenario.budget_upfront),
                fmt_limit(scenario.latency_budget_ms)
            ),
        );
    }
    Ok(finish(choice, trace, projected))
}
