//! Evaluation and paired statistics with the bootstrap spread over the
//! rayon pool.

use std::collections::BTreeMap;

use detcost_core::metrics::{match_and_score, DetectionRecord, EvalReport, Evaluation, GroundTruthObject};
use detcost_core::stats::{
    self, bootstrap_replicate, cohens_d, paired_t_test, percentile_interval, power_check, CiMethod, ConfidenceInterval,
    PairedSample, Statistic, TTest,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::AppError;

/// Same interval as [`stats::bootstrap_ci_with`]: every replicate draws from
/// its own indexed substream, so the worker count cannot change the result.
pub fn par_bootstrap_ci(
    values: &[f64],
    statistic: Statistic,
    iterations: u32,
    level: f64,
    seed: u64,
) -> detcost_core::Result<ConfidenceInterval> {
    stats::validate_bootstrap(values, iterations, level)?;
    let mut reps: Vec<f64> = (0..u64::from(iterations))
        .into_par_iter()
        .map(|i| bootstrap_replicate(values, statistic, seed, i))
        .collect();
    Ok(percentile_interval(&mut reps, level))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSettings {
    pub iterations: u32,
    pub level: f64,
    pub seed: u64,
    pub statistic: Statistic,
    pub method: CiMethod,
}

impl BootstrapSettings {
    pub fn new(iterations: u32, level: f64, seed: u64) -> Self {
        Self {
            iterations,
            level,
            seed,
            statistic: Statistic::Mean,
            method: CiMethod::BootstrapPercentile,
        }
    }

    pub fn ci(&self, values: &[f64]) -> detcost_core::Result<ConfidenceInterval> {
        par_bootstrap_ci(values, self.statistic, self.iterations, self.level, self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSummary {
    pub n: u64,
    pub sd: f64,
    pub delta: f64,
    pub alpha: f64,
    pub power: f64,
}

/// Paired comparison of two outcome series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSummary {
    pub n: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub mean_difference: f64,
    pub ci_a: ConfidenceInterval,
    pub ci_b: ConfidenceInterval,
    pub ci_difference: ConfidenceInterval,
    pub t_test: TTest,
    /// `None` when the differences have zero variance.
    pub cohens_d: Option<f64>,
    pub effect_size_convention: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerSummary>,
}

fn sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Bootstrap intervals, paired t-test and effect size for `a - b`. With
/// `delta`, also the power to detect that difference at the observed
/// spread of the differences.
pub fn paired_summary(
    a: Vec<f64>,
    b: Vec<f64>,
    boot: &BootstrapSettings,
    delta: Option<(f64, f64)>,
) -> Result<PairedSummary, AppError> {
    let sample = PairedSample::new(a, b)?;
    let d = sample.differences();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let power = match delta {
        Some((delta, alpha)) => {
            let s = sd(&d);
            let power = power_check(d.len() as u64, s, delta, alpha)?;
            Some(PowerSummary {
                n: d.len() as u64,
                sd: s,
                delta,
                alpha,
                power,
            })
        }
        None => None,
    };
    Ok(PairedSummary {
        n: sample.len(),
        mean_a: mean(sample.a()),
        mean_b: mean(sample.b()),
        mean_difference: mean(&d),
        ci_a: boot.ci(sample.a())?,
        ci_b: boot.ci(sample.b())?,
        ci_difference: boot.ci(&d)?,
        t_test: paired_t_test(&sample),
        cohens_d: cohens_d(&sample).ok(),
        effect_size_convention: "paired_differences".into(),
        power,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub baseline: String,
    pub threshold: f64,
    /// Per-object correctness, evaluated minus baseline.
    pub summary: PairedSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistics {
    pub bootstrap: BootstrapSettings,
    /// Same intervals as the report's `ci_95`, keyed by metric.
    pub intervals: BTreeMap<String, ConfidenceInterval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<BaselineComparison>,
}

/// Evaluation report with its statistics block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    #[serde(flatten)]
    pub report: EvalReport,
    pub statistics: Statistics,
}

fn attach_intervals(eval: &mut Evaluation, boot: &BootstrapSettings) -> Result<(), AppError> {
    if eval.outcomes.len() < 2 {
        return Ok(());
    }
    let thresholds: Vec<f64> = eval.report.accuracy_at.iter().map(|a| a.threshold).collect();
    for t in thresholds {
        let ci = boot.ci(&eval.correctness(t))?;
        eval.report.ci_95.insert(format!("accuracy@{t}"), ci);
    }
    let ci = boot.ci(&eval.ious())?;
    eval.report.ci_95.insert("mean_iou".into(), ci);
    Ok(())
}

/// Scores `preds`, attaches bootstrap intervals, and with a baseline
/// compares per-object correctness at the lowest threshold.
pub fn evaluate(
    gt: &[GroundTruthObject],
    preds: &[DetectionRecord],
    thresholds: &[f64],
    boot: &BootstrapSettings,
    baseline: Option<(&str, &[DetectionRecord])>,
) -> Result<EvalOutput, AppError> {
    let mut eval = match_and_score(gt, preds, thresholds)?;
    attach_intervals(&mut eval, boot)?;
    let comparison = match baseline {
        Some((name, base_preds)) => {
            let base = match_and_score(gt, base_preds, thresholds)?;
            let t = eval.report.accuracy_at[0].threshold;
            let summary = paired_summary(eval.correctness(t), base.correctness(t), boot, None)?;
            Some(BaselineComparison {
                baseline: name.into(),
                threshold: t,
                summary,
            })
        }
        None => None,
    };
    Ok(EvalOutput {
        statistics: Statistics {
            bootstrap: *boot,
            intervals: eval.report.ci_95.clone(),
            comparison,
        },
        report: eval.report,
    })
}
