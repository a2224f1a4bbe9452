use std::path::Path;
use std::process::{Command, Output};

fn detcost(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_detcost"))
        .args(args)
        .env_remove("DETCOST_CATALOG")
        .env_remove("DETCOST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

/// 30 images, one object each, ten per size stratum.
fn ground_truth() -> String {
    let images: Vec<String> = (0..30)
        .map(|i| {
            let side = [20, 60, 150][i % 3];
            let x = (i * 7) % 300;
            format!(
                r#"{{"id": {i}, "width": 640, "height": 480, "objects": [{{"category": "dog", "bbox": [{x}, 10, {}, {}]}}]}}"#,
                x + side,
                10 + side
            )
        })
        .collect();
    format!(r#"{{"images": [{}]}}"#, images.join(","))
}

fn predictions(hit_every: usize) -> String {
    let recs: Vec<String> = (0..30)
        .map(|i| {
            let side = [20, 60, 150][i % 3];
            let x = (i * 7) % 300;
            if i % hit_every == 0 {
                format!(
                    r#"{{"image_id": {i}, "category": "dog", "detected": true, "confidence": 0.9,
                        "bounding_box": {{"x_min": {x}, "y_min": 10, "x_max": {}, "y_max": {}}}}}"#,
                    x + side,
                    10 + side
                )
            } else {
                format!(r#"{{"image_id": {i}, "category": "dog", "detected": false, "confidence": 0.0}}"#)
            }
        })
        .collect();
    format!("[{}]", recs.join(","))
}

#[test]
fn breakeven_prints_published_volume() {
    let o = detcost(&[
        "breakeven",
        "--upfront",
        "11616",
        "--api-price",
        "0.00025",
        "--sup-cost",
        "0.00004",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("55,314,286"), "{out}");
    assert!(out.contains("151,546/day"), "{out}");
}

#[test]
fn breakeven_json_is_machine_readable() {
    let o = detcost(&[
        "breakeven",
        "--upfront",
        "11616",
        "--api-price",
        "0.00025",
        "--sup-cost",
        "0.00004",
        "--format",
        "json",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["volume"], 55_314_286);
    assert_eq!(v["daily_for_one_year"], 151_546);
}

#[test]
fn help_exits_zero() {
    let o = detcost(&["tco", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("Usage"));
    assert!(detcost(&["--version"]).status.success());
}

#[test]
fn unknown_subcommand_prints_usage_and_exits_one() {
    let o = detcost(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
    assert!(o.stdout.is_empty());
    assert_eq!(detcost(&[]).status.code(), Some(1));
}

#[test]
fn validation_errors_exit_one() {
    let o = detcost(&[
        "breakeven",
        "--upfront",
        "100",
        "--api-price",
        "0.00004",
        "--sup-cost",
        "0.00004",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error"));
    assert_eq!(detcost(&["decide", "--preset", "nope"]).status.code(), Some(1));
    assert_eq!(detcost(&["tco", "--scale", "huge"]).status.code(), Some(1));
}

#[test]
fn io_errors_exit_two() {
    let o = detcost(&[
        "evaluate",
        "--ground-truth",
        "/no/such/gt.json",
        "--predictions",
        "/no/such/p.json",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/gt.json"));
    let o = detcost(&["tco", "--output", "/no/such/dir/out.md"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_input_file_reports_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "params.json", r#"{"n_categories": "many"}"#);
    let o = detcost(&["tco", "--params", &p]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("n_categories"), "{}", stderr(&o));
}

#[test]
fn curve_is_plot_ready_csv() {
    let o = detcost(&["ccd-curve"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("volume,model,tco_usd,ccd_usd"));
    assert_eq!(lines.count(), 27);
}

#[test]
fn logs_stay_on_stderr() {
    let o = detcost(&["ccd-curve", "-vv"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("INFO"), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().all(|l| l.split(',').count() == 4), "{out}");
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let gt = write(dir.path(), "gt.json", &ground_truth());
    let preds = write(dir.path(), "p.json", &predictions(2));
    let runs: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let o = detcost(&[
                "evaluate",
                "--ground-truth",
                &gt,
                "--predictions",
                &preds,
                "--bootstrap",
                "500",
                "--threads",
                "2",
            ]);
            assert!(o.status.success(), "{}", stderr(&o));
            o.stdout
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    let o = detcost(&[
        "evaluate",
        "--ground-truth",
        &gt,
        "--predictions",
        &preds,
        "--bootstrap",
        "500",
        "--threads",
        "1",
    ]);
    assert_eq!(o.stdout, runs[0]);

    for args in [
        &["scenario"][..],
        &["reproduce-tables", "--discrepancy-report"],
        &["tco", "--format", "csv"],
    ] {
        assert_eq!(detcost(args).stdout, detcost(args).stdout);
    }
}

#[test]
fn evaluate_reports_accuracy_and_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let gt = write(dir.path(), "gt.json", &ground_truth());
    let preds = write(dir.path(), "p.json", &predictions(1));
    let base = write(dir.path(), "base.json", &predictions(3));
    let o = detcost(&[
        "evaluate",
        "--ground-truth",
        &gt,
        "--predictions",
        &preds,
        "--baseline",
        &base,
        "--bootstrap",
        "200",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["n_evaluated"], 30);
    assert_eq!(v["accuracy_at"][0]["accuracy"], 1.0);
    let cmp = &v["statistics"]["comparison"];
    assert_eq!(cmp["baseline"], "base");
    assert!((cmp["summary"]["mean_difference"].as_f64().unwrap() - 20.0 / 30.0).abs() < 1e-12);
}

#[test]
fn sample_writes_id_list() {
    let dir = tempfile::tempdir().unwrap();
    let gt = write(dir.path(), "gt.json", &ground_truth());
    let args = [
        "sample",
        "--ground-truth",
        &gt,
        "--small",
        "2",
        "--medium",
        "4",
        "--large",
        "4",
    ];
    let o = detcost(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 10);
    assert_eq!(detcost(&args).stdout, o.stdout);
    let other = detcost(&[&args[..], &["--seed", "7"]].concat());
    assert_ne!(other.stdout, o.stdout);

    let short = detcost(&["sample", "--ground-truth", &gt, "--small", "11"]);
    assert_eq!(short.status.code(), Some(1));
}

#[test]
fn parse_vlm_writes_predictions_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let lines = [
        r#"{"text": "{\"detected\": true, \"confidence\": 0.9, \"bounding_box\": {\"x_min\": 10, \"y_min\": 20, \"x_max\": 110, \"y_max\": 220}, \"reasoning\": \"ears\"}", "image_width": 640, "image_height": 480, "category_queried": "dog", "image_id": "a"}"#,
        r#"{"text": "{\"detected\": false, \"confidence\": 0.0}", "image_width": 640, "image_height": 480, "category_queried": "dog", "image_id": "b"}"#,
        r#"{"text": "{\"detected\": true, \"confidence\": 0.9, \"bounding_box\": {\"x_min\": 10, \"y_min\": 20, \"x_max\": 900, \"y_max\": 220}}", "image_width": 640, "image_height": 480, "category_queried": "dog", "image_id": "c"}"#,
        "",
        r#"{"text": "sorry, I cannot", "image_width": 640, "image_height": 480, "category_queried": "dog", "image_id": "d"}"#,
    ];
    let input = write(dir.path(), "r.jsonl", &lines.join("\n"));
    let preds = dir.path().join("preds.json");
    let o = detcost(&[
        "parse-vlm",
        "--input",
        &input,
        "--predictions-out",
        preds.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["total"], 4);
    assert_eq!(summary["valid"], 2);
    assert_eq!(summary["bounds"], 1);
    assert_eq!(summary["parse"], 1);
    let records: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&preds).unwrap()).unwrap();
    assert_eq!(records.as_array().unwrap().len(), 4);

    let clamped = detcost(&["parse-vlm", "--input", &input, "--clamp"]);
    let summary: serde_json::Value = serde_json::from_slice(&clamped.stdout).unwrap();
    assert_eq!(summary["valid"], 3);
}

#[test]
fn stats_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = write(dir.path(), "pairs.csv", "a,b\n2,1\n4,2\n6,3\n8,4\n");
    let o = detcost(&[
        "stats",
        "paired",
        "--input",
        &pairs,
        "--format",
        "json",
        "--bootstrap",
        "100",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["t_test"]["t"].as_f64().unwrap() - 3.873).abs() < 1e-3);
    assert_eq!(v["t_test"]["df"], 3);

    let ratings = write(dir.path(), "k.csv", "yes,no\n3,0\n0,3\n3,0\n");
    let o = detcost(&["stats", "kappa", "--input", &ratings, "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["kappa"], 1.0);

    let o = detcost(&[
        "stats", "power", "--n", "5000", "--sd", "0.15", "--delta", "0.015", "--format", "json",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["power"].as_f64().unwrap() >= 0.95);
}

#[test]
fn decide_from_preset_and_file() {
    let o = detcost(&["decide", "--preset", "startup_ecommerce", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["choice"], "gemini");

    let dir = tempfile::tempdir().unwrap();
    let scenario = r#"{"name": "plant", "daily_volume": 2000000, "n_categories": 20, "budget_upfront": null,
        "accuracy_floor": 0.9, "latency_budget_ms": 30.0, "category_additions_per_month": 0,
        "deployment_lifetime_days": 1825, "novel_category_share": 0.0, "annotation_price_per_box": 0.3}"#;
    let p = write(dir.path(), "s.json", scenario);
    let o = detcost(&["decide", "--scenario", &p, "--scale", "small"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("**supervised**"), "{}", stdout(&o));
}

#[test]
fn scenario_and_reproduce_write_report_directories() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["scenario", "reproduce-tables"] {
        let out = dir.path().join(cmd);
        let o = detcost(&[cmd, "--out-dir", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        for f in ["report.md", "report.csv", "discrepancies.json"] {
            assert!(out.join(f).is_file(), "{cmd}: {f}");
        }
        let d: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("discrepancies.json")).unwrap()).unwrap();
        assert!(d["summary"]["total"].as_u64().unwrap() > 0);
    }
}

#[test]
fn reproduce_tables_matches_breakeven_column() {
    let o = detcost(&["reproduce-tables"]);
    assert!(o.status.success());
    let out = stdout(&o);
    for v in ["7,780,952", "28,952,381", "55,314,286", "107,619,048", "175,314,286"] {
        assert!(out.contains(v), "missing {v} in\n{out}");
    }
}

#[test]
fn halved_prices_halve_costs() {
    let full = detcost(&["scenario", "--format", "json"]);
    let half = detcost(&["scenario", "--format", "json", "--price-factor", "0.5"]);
    let full: serde_json::Value = serde_json::from_slice(&full.stdout).unwrap();
    let half: serde_json::Value = serde_json::from_slice(&half.stdout).unwrap();
    for (f, h) in full.as_array().unwrap().iter().zip(half.as_array().unwrap()) {
        // budgets are not prices, so choices may move; costs scale exactly
        for (a, b) in f["architectures"]
            .as_array()
            .unwrap()
            .iter()
            .zip(h["architectures"].as_array().unwrap())
        {
            assert_eq!(a["tco_usd"].as_f64().unwrap() * 0.5, b["tco_usd"].as_f64().unwrap());
        }
    }
    assert_eq!(detcost(&["scenario", "--price-factor", "0"]).status.code(), Some(1));
}

#[test]
fn catalog_file_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let text = include_str!("../data/catalog.json").replace("0.00025", "0.0005");
    let p = write(dir.path(), "catalog.json", &text);
    let o = Command::new(env!("CARGO_BIN_EXE_detcost"))
        .args(["breakeven", "--scale", "large", "--format", "json"])
        .env("DETCOST_CATALOG", &p)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["api_price"], 0.0005);

    let bad = write(dir.path(), "bad.json", "{");
    assert_eq!(detcost(&["tco", "--catalog", &bad]).status.code(), Some(1));
}
