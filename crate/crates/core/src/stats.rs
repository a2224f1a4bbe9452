//! Bootstrap intervals, paired t-test, Cohen's d, Fleiss' kappa and a
//! normal-approximation power check.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Xoshiro256StarStar;
use crate::special;

pub const DEFAULT_BOOTSTRAP_ITERATIONS: u32 = 10_000;
pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    BootstrapPercentile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub method: CiMethod,
}

impl ConfidenceInterval {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

impl Statistic {
    pub fn apply(self, values: &[f64]) -> f64 {
        match self {
            Statistic::Mean => mean(values),
        }
    }
}

/// Input checks shared by every bootstrap driver.
pub fn validate_bootstrap(values: &[f64], iterations: u32, level: f64) -> Result<()> {
    if values.len() < 2 {
        return Err(Error::invalid("values", "need at least 2 values"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("values", "must be finite"));
    }
    if iterations == 0 {
        return Err(Error::invalid("iterations", "must be >= 1"));
    }
    if level.is_nan() || level <= 0.0 || level >= 1.0 {
        return Err(Error::invalid("level", "must be in (0, 1)"));
    }
    Ok(())
}

/// Statistic of bootstrap replicate `index`: `values.len()` draws with
/// replacement from the replicate's own substream
/// ([`Xoshiro256StarStar::substream`]). Replicates are independent of
/// evaluation order.
pub fn bootstrap_replicate(values: &[f64], statistic: Statistic, seed: u64, index: u64) -> f64 {
    let mut rng = Xoshiro256StarStar::substream(seed, index);
    let n = values.len() as u64;
    match statistic {
        Statistic::Mean => {
            let mut sum = 0.0;
            for _ in 0..n {
                sum += values[rng.below(n) as usize];
            }
            sum / n as f64
        }
    }
}

/// Linear-interpolation quantile (Hyndman-Fan type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile interval from replicate statistics (sorted in place).
pub fn percentile_interval(replicates: &mut [f64], level: f64) -> ConfidenceInterval {
    replicates.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    ConfidenceInterval {
        lo: quantile_sorted(replicates, tail),
        hi: quantile_sorted(replicates, 1.0 - tail),
        level,
        method: CiMethod::BootstrapPercentile,
    }
}

/// Percentile bootstrap interval of the mean.
pub fn bootstrap_ci(values: &[f64], iterations: u32, level: f64, seed: u64) -> Result<ConfidenceInterval> {
    bootstrap_ci_with(values, Statistic::Mean, iterations, level, seed)
}

pub fn bootstrap_ci_with(
    values: &[f64],
    statistic: Statistic,
    iterations: u32,
    level: f64,
    seed: u64,
) -> Result<ConfidenceInterval> {
    validate_bootstrap(values, iterations, level)?;
    let mut reps: Vec<f64> = (0..u64::from(iterations))
        .map(|i| bootstrap_replicate(values, statistic, seed, i))
        .collect();
    Ok(percentile_interval(&mut reps, level))
}

/// Outcome pairs for a paired comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl PairedSample {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::invalid(
                "sample",
                format!("series lengths differ ({} vs {})", a.len(), b.len()),
            ));
        }
        if a.len() < 2 {
            return Err(Error::invalid("sample", "need at least 2 pairs"));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::invalid("sample", "values must be finite"));
        }
        Ok(Self { a, b })
    }

    pub fn from_differences(d: Vec<f64>) -> Result<Self> {
        let zeros = alloc::vec![0.0; d.len()];
        Self::new(d, zeros)
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// `a_i - b_i`.
    pub fn differences(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(x, y)| x - y).collect()
    }
}

/// Mean and sample standard deviation; the deviation is exactly 0 when all
/// values are identical.
fn mean_sd(d: &[f64]) -> (f64, f64) {
    let m = mean(d);
    if d.iter().all(|&v| v == d[0]) {
        return (d[0], 0.0);
    }
    let ss: f64 = d.iter().map(|v| (v - m) * (v - m)).sum();
    (m, libm::sqrt(ss / (d.len() - 1) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    /// `±inf` when the differences are constant and nonzero.
    pub t: f64,
    pub df: u64,
    pub p_two_sided: f64,
}

/// Paired t-test on `a - b`; the p-value comes from
/// [`special::student_t_two_sided`].
pub fn paired_t_test(sample: &PairedSample) -> TTest {
    let d = sample.differences();
    let n = d.len();
    let df = (n - 1) as u64;
    let (m, sd) = mean_sd(&d);
    if sd == 0.0 {
        return if m == 0.0 {
            TTest {
                t: 0.0,
                df,
                p_two_sided: 1.0,
            }
        } else {
            TTest {
                t: libm::copysign(f64::INFINITY, m),
                df,
                p_two_sided: 0.0,
            }
        };
    }
    let t = m / (sd / libm::sqrt(n as f64));
    TTest {
        t,
        df,
        p_two_sided: special::student_t_two_sided(t, df as f64),
    }
}

/// Standardized mean difference with the paired-differences denominator,
/// `mean(d) / sd(d)`; equals `t / sqrt(n)`.
pub fn cohens_d(sample: &PairedSample) -> Result<f64> {
    let (m, sd) = mean_sd(&sample.differences());
    if sd == 0.0 {
        return Err(Error::UndefinedEffect);
    }
    Ok(m / sd)
}

/// Fleiss' kappa from an items × categories matrix of rater counts.
pub fn fleiss_kappa(ratings: &[Vec<u32>], n_raters: u32) -> Result<f64> {
    if ratings.len() < 2 {
        return Err(Error::invalid("ratings", "need at least 2 items"));
    }
    let k = ratings[0].len();
    if k < 2 {
        return Err(Error::invalid("ratings", "need at least 2 categories"));
    }
    if n_raters < 2 {
        return Err(Error::invalid("n_raters", "need at least 2 raters"));
    }
    let mut totals = alloc::vec![0u64; k];
    for (i, row) in ratings.iter().enumerate() {
        if row.len() != k {
            return Err(Error::invalid(
                "ratings",
                format!("row {i} has {} categories, expected {k}", row.len()),
            ));
        }
        let sum: u64 = row.iter().map(|&c| u64::from(c)).sum();
        if sum != u64::from(n_raters) {
            return Err(Error::invalid(
                "ratings",
                format!("row {i} sums to {sum}, expected {n_raters}"),
            ));
        }
        for (t, &c) in totals.iter_mut().zip(row) {
            *t += u64::from(c);
        }
    }
    let items = ratings.len() as u64;
    let n = u64::from(n_raters);
    let grand = items * n;
    if totals.contains(&grand) {
        return Err(Error::UndefinedKappa);
    }
    let nf = n as f64;
    let p_bar = ratings
        .iter()
        .map(|row| {
            let sq: u64 = row.iter().map(|&c| u64::from(c) * u64::from(c)).sum();
            (sq - n) as f64 / (nf * (nf - 1.0))
        })
        .sum::<f64>()
        / items as f64;
    let p_e: f64 = totals
        .iter()
        .map(|&t| {
            let p = t as f64 / grand as f64;
            p * p
        })
        .sum();
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Normal-approximation power of a two-sided test:
/// `Φ(delta / (sd / sqrt(n)) - z_{1-α/2})`.
pub fn power_check(n: u64, sd: f64, delta: f64, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    if !sd.is_finite() || sd <= 0.0 {
        return Err(Error::invalid("sd", "must be > 0"));
    }
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::invalid("delta", "must be >= 0"));
    }
    if alpha.is_nan() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::invalid("alpha", "must be in (0, 1)"));
    }
    let z = special::normal_quantile(1.0 - alpha / 2.0);
    let shift = delta / (sd / libm::sqrt(n as f64));
    Ok(special::normal_cdf(shift - z))
}
