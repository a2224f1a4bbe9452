//! Markdown and CSV views of results. JSON output is plain serde.

use std::fmt::Write as _;

use detcost_core::breakeven::{BreakEvenSummary, CurveRow};
use detcost_core::cost::{format_usd, group_thousands};
use detcost_core::decision::{Effect, Recommendation};
use detcost_core::metrics::EvalReport;
use detcost_core::reproduce::{BreakEvenRow, Check, DiscrepancyReport, Status, VolumeRow};
use detcost_core::scenarios::{ComparisonRow, ScenarioReport};
use serde::Serialize;

use crate::analysis::{EvalOutput, PairedSummary};

pub fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("value serializes");
    out.push('\n');
    out
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).expect("writing to memory");
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn pct(v: f64) -> String {
    format!("{:.1}%", v * 100.0)
}

pub const CURVE_HEADER: [&str; 4] = ["volume", "model", "tco_usd", "ccd_usd"];

/// Volume-major rows in the order given.
pub fn curve_csv(rows: &[CurveRow]) -> String {
    csv_string(|w| {
        w.write_record(CURVE_HEADER)?;
        for r in rows {
            w.write_record([
                r.volume.to_string(),
                r.model.clone(),
                r.tco_usd.to_string(),
                opt(r.ccd_usd),
            ])?;
        }
        Ok(())
    })
}

pub fn curve_md(rows: &[CurveRow]) -> String {
    let mut s = String::from("| Volume | Model | TCO | CCD |\n|---:|---|---:|---:|\n");
    for r in rows {
        let ccd = r.ccd_usd.map(|c| format!("${c:.6}")).unwrap_or_else(|| "n/a".into());
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} |",
            group_thousands(r.volume as f64, 0),
            r.model,
            format_usd(r.tco_usd),
            ccd
        );
    }
    s
}

pub fn breakeven_md(b: &BreakEvenSummary) -> String {
    format!(
        "Break-even volume: {} images\nDaily volume for one year: {}/day\nPer-image margin: ${:.6}\n",
        group_thousands(b.volume as f64, 0),
        group_thousands(b.daily_for_one_year as f64, 0),
        b.cost_margin
    )
}

pub fn breakeven_csv(b: &BreakEvenSummary) -> String {
    csv_string(|w| {
        w.write_record([
            "volume",
            "volume_exact",
            "daily_for_one_year",
            "daily_exact",
            "cost_margin",
        ])?;
        w.write_record([
            b.volume.to_string(),
            b.volume_exact.to_string(),
            b.daily_for_one_year.to_string(),
            b.daily_exact.to_string(),
            b.cost_margin.to_string(),
        ])
    })
}

fn accuracy_cells(report: &EvalReport) -> String {
    report
        .accuracy_at
        .iter()
        .map(|a| format!(" {} |", pct(a.accuracy)))
        .collect()
}

/// Accuracy, mean IoU and latency in the layout of a model-comparison
/// table, followed by the per-stratum breakdown.
pub fn eval_md(model: &str, out: &EvalOutput) -> String {
    let r = &out.report;
    let thresholds: String = r
        .accuracy_at
        .iter()
        .map(|a| format!(" Acc@{} |", a.threshold))
        .collect();
    let align: String = r.accuracy_at.iter().map(|_| "---:|").collect();
    let latency = r
        .mean_latency_ms
        .map(|l| format!("{l:.1} ms"))
        .unwrap_or_else(|| "n/a".into());
    let mut s = format!("| Model |{thresholds} Mean IoU | Latency |\n|---|{align}---:|---:|\n");
    let _ = writeln!(s, "| {model} |{} {:.3} | {latency} |", accuracy_cells(r), r.mean_iou);
    let _ = write!(
        s,
        "\n| Stratum | Images | Objects |{thresholds} Mean IoU |\n|---|---:|---:|{align}---:|\n"
    );
    for (stratum, sr) in &r.per_stratum {
        let cells: String = sr
            .accuracy_at
            .iter()
            .map(|a| format!(" {} |", pct(a.accuracy)))
            .collect();
        let _ = writeln!(
            s,
            "| {stratum} | {} | {} |{cells} {:.3} |",
            sr.n_images, sr.n_objects, sr.mean_iou
        );
    }
    if !r.ci_95.is_empty() {
        let b = &out.statistics.bootstrap;
        let _ = write!(
            s,
            "\n{:.0}% bootstrap intervals ({} resamples, seed {}):\n\n",
            b.level * 100.0,
            b.iterations,
            b.seed
        );
        for (metric, ci) in &r.ci_95 {
            let _ = writeln!(s, "- {metric}: [{:.4}, {:.4}]", ci.lo, ci.hi);
        }
    }
    if let Some(c) = &out.statistics.comparison {
        let _ = write!(
            s,
            "\nAgainst {} at IoU {}:\n\n{}",
            c.baseline,
            c.threshold,
            paired_md(&c.summary)
        );
    }
    if !r.record_errors.is_empty() {
        let _ = writeln!(s, "\n{} prediction records could not be scored.", r.record_errors.len());
    }
    s
}

pub fn paired_md(p: &PairedSummary) -> String {
    let mut s = String::new();
    let t = &p.t_test;
    let _ = writeln!(s, "- n = {}", p.n);
    let _ = writeln!(s, "- mean a = {:.4} [{:.4}, {:.4}]", p.mean_a, p.ci_a.lo, p.ci_a.hi);
    let _ = writeln!(s, "- mean b = {:.4} [{:.4}, {:.4}]", p.mean_b, p.ci_b.lo, p.ci_b.hi);
    let _ = writeln!(
        s,
        "- mean difference = {:.4} [{:.4}, {:.4}]",
        p.mean_difference, p.ci_difference.lo, p.ci_difference.hi
    );
    let _ = writeln!(s, "- t({}) = {:.3}, p = {:.3e}", t.df, t.t, t.p_two_sided);
    match p.cohens_d {
        Some(d) => {
            let _ = writeln!(s, "- Cohen's d = {d:.3} ({})", p.effect_size_convention);
        }
        None => s.push_str("- Cohen's d undefined (differences have zero variance)\n"),
    }
    if let Some(pw) = &p.power {
        let _ = writeln!(
            s,
            "- power to detect {} at sd {:.4}, alpha {} = {:.4}",
            pw.delta, pw.sd, pw.alpha, pw.power
        );
    }
    s
}

fn effect_word(e: Effect) -> &'static str {
    match e {
        Effect::Eliminated => "eliminated",
        Effect::Retained => "retained",
        Effect::Selected => "selected",
    }
}

pub fn recommendation_md(r: &Recommendation) -> String {
    let mut s = format!(
        "# {}\n\nRecommended architecture: **{}** ({})\n\n",
        r.scenario, r.choice, r.ruleset
    );
    let _ = writeln!(
        s,
        "Lifetime volume: {} images",
        group_thousands(r.lifetime_volume as f64, 0)
    );
    if let Some(b) = &r.breakeven {
        let _ = writeln!(
            s,
            "Break-even against {}: {} images ({}/day for one year)",
            r.breakeven_against,
            group_thousands(b.volume.round(), 0),
            group_thousands(b.daily_for_one_year.round(), 0)
        );
    }
    s.push_str("\n## Rules\n\n");
    for f in &r.rationale {
        let _ = writeln!(s, "- {} {} {}: {}", f.rule, f.subject, effect_word(f.effect), f.message);
    }
    s.push_str("\n## Projected lifetime cost\n\n| Architecture | TCO |\n|---|---:|\n");
    for (name, cost) in &r.projected_costs {
        let _ = writeln!(s, "| {name} | {} |", format_usd(*cost));
    }
    s
}

fn fmt_opt_usd(v: Option<f64>) -> String {
    v.map(format_usd).unwrap_or_else(|| "none".into())
}

fn fmt_latency(v: Option<f64>) -> String {
    v.map(|l| format!("<{l} ms")).unwrap_or_else(|| "any".into())
}

/// One row per scenario: the constraint columns, the choice and the
/// projected costs.
pub fn comparison_md(rows: &[ComparisonRow]) -> String {
    let mut names: Vec<&String> = rows.iter().flat_map(|r| r.projected_costs.keys()).collect();
    names.sort();
    names.dedup();
    let mut s = String::from("| Scenario | Daily Vol | Cat. | Budget | Acc. | Lat. | Optimal |");
    for n in &names {
        let _ = write!(s, " {n} |");
    }
    s.push_str(" Rationale |\n|---|---:|---:|---:|---:|---|---|");
    s.push_str(&"---:|".repeat(names.len()));
    s.push_str("---|\n");
    for r in rows {
        let _ = write!(
            s,
            "| {} | {} | {} | {} | {}+ | {} | {} |",
            r.scenario,
            group_thousands(r.daily_volume as f64, 0),
            r.n_categories,
            fmt_opt_usd(r.budget_upfront),
            pct(r.accuracy_floor),
            fmt_latency(r.latency_budget_ms),
            r.choice
        );
        for n in &names {
            let _ = write!(
                s,
                " {} |",
                r.projected_costs.get(*n).map(|c| format_usd(*c)).unwrap_or_default()
            );
        }
        let _ = writeln!(s, " {} |", r.rationale.replace('|', "/"));
    }
    s
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut names: Vec<&String> = rows.iter().flat_map(|r| r.projected_costs.keys()).collect();
    names.sort();
    names.dedup();
    csv_string(|w| {
        let mut header: Vec<String> = [
            "scenario",
            "daily_volume",
            "n_categories",
            "budget_upfront",
            "accuracy_floor",
            "latency_budget_ms",
            "choice",
            "lifetime_volume",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(names.iter().map(|n| format!("tco_{n}_usd")));
        header.push("rationale".into());
        w.write_record(&header)?;
        for r in rows {
            let mut rec = vec![
                r.scenario.clone(),
                r.daily_volume.to_string(),
                r.n_categories.to_string(),
                opt(r.budget_upfront),
                r.accuracy_floor.to_string(),
                opt(r.latency_budget_ms),
                r.choice.to_string(),
                r.lifetime_volume.to_string(),
            ];
            rec.extend(names.iter().map(|n| opt(r.projected_costs.get(*n).copied())));
            rec.push(r.rationale.clone());
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

pub fn scenario_md(report: &ScenarioReport) -> String {
    let mut s = recommendation_md(&report.recommendation);
    let _ = write!(
        s,
        "\n## Architectures\n\nCatalog {}, {} days.\n\n| Model | Upfront | TCO | TCO with free tier | Accuracy | CCD |\n|---|---:|---:|---:|---:|---:|\n",
        report.catalog_version, report.scenario.deployment_lifetime_days
    );
    for a in &report.architectures {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} |",
            a.name,
            format_usd(a.upfront_usd),
            format_usd(a.tco_usd),
            a.tco_with_free_tier_usd.map(format_usd).unwrap_or_default(),
            pct(a.accuracy),
            a.ccd_usd.map(|c| format!("${c:.6}")).unwrap_or_else(|| "n/a".into())
        );
    }
    if !report.notes.is_empty() {
        s.push_str("\n## Published figures\n\n");
        s.push_str(&checks_md(&report.notes));
    }
    s
}

fn status_word(s: Status) -> &'static str {
    match s {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
    }
}

pub fn checks_md(checks: &[Check]) -> String {
    let mut s = String::from("| Check | Printed | Computed | Status | Note |\n|---|---:|---:|---|---|\n");
    for c in checks {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} |",
            c.id,
            c.printed,
            c.computed_text,
            status_word(c.status),
            c.note.as_deref().unwrap_or("")
        );
    }
    s
}

pub fn checks_csv(checks: &[Check]) -> String {
    csv_string(|w| {
        w.write_record([
            "id", "source", "item", "quantity", "printed", "computed", "status", "note",
        ])?;
        for c in checks {
            let source = serde_json::to_value(c.source)
                .ok()
                .and_then(|v| v.as_str().map(String::from));
            w.write_record([
                c.id.clone(),
                source.unwrap_or_default(),
                c.item.clone(),
                c.quantity.clone(),
                c.printed.clone(),
                c.computed_text.clone(),
                status_word(c.status).to_string(),
                c.note.clone().unwrap_or_default(),
            ])?;
        }
        Ok(())
    })
}

pub fn breakeven_table_md(rows: &[BreakEvenRow]) -> String {
    let mut s = String::from(
        "| Scale | Cat. | Images | Annotation | Training + Infra | Upfront | Break-even | Daily (1 yr) |\n|---|---:|---:|---:|---:|---:|---:|---:|\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} | {} |",
            r.scale,
            r.n_categories,
            group_thousands(r.images as f64, 0),
            format_usd(r.annotation_usd),
            format_usd(r.training_infra_usd),
            format_usd(r.upfront_usd),
            group_thousands(r.breakeven_volume.round(), 0),
            group_thousands(r.breakeven_daily.round(), 0)
        );
    }
    s
}

pub fn volume_table_md(rows: &[VolumeRow]) -> String {
    let Some(first) = rows.first() else {
        return String::new();
    };
    let mut s = String::from("| Volume |");
    for c in &first.cells {
        let _ = write!(s, " {} TCO | {} CCD |", c.model, c.model);
    }
    s.push_str(" Best CCD |\n|---:|");
    s.push_str(&"---:|---:|".repeat(first.cells.len()));
    s.push_str("---|\n");
    for r in rows {
        let _ = write!(s, "| {} |", group_thousands(r.volume as f64, 0));
        for c in &r.cells {
            let ccd = c.ccd_usd.map(|v| format!("${v:.5}")).unwrap_or_else(|| "n/a".into());
            let _ = write!(s, " {} | {} |", format_usd(c.tco_usd), ccd);
        }
        let _ = writeln!(s, " {} |", r.best);
    }
    s
}

/// Regenerated break-even and inference-cost tables with the comparison
/// against the printed values.
pub fn reproduction_md(breakeven: &[BreakEvenRow], volume: &[VolumeRow], report: &DiscrepancyReport) -> String {
    let mut s = format!(
        "# Reproduced tables\n\nCatalog {}.\n\n## Break-even against gemini\n\n",
        report.catalog_version
    );
    s.push_str(&breakeven_table_md(breakeven));
    s.push_str("\n## Inference cost by volume\n\n");
    s.push_str(&volume_table_md(volume));
    let _ = write!(
        s,
        "\n## Discrepancies\n\n{} of {} printed values reproduce; {} do not.\n\n",
        report.summary.pass, report.summary.total, report.summary.fail
    );
    let failures: Vec<Check> = report.failures().cloned().collect();
    s.push_str(&checks_md(&failures));
    s
}
