//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so every criterion reports even when an earlier one fails.

#[path = "../../detcost/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use axum::http::StatusCode;
use detcost::analysis::par_bootstrap_ci;
use detcost_core::breakeven::{break_even_volume, DEFAULT_VOLUME_GRID};
use detcost_core::cost::{self, annotation_cost, tco_api, Catalog, SystemScale};
use detcost_core::decision::Choice;
use detcost_core::metrics::{greedy_match, iou, match_and_score, BoundingBox, DetectionRecord, GroundTruthObject};
use detcost_core::reproduce::{breakeven_table, discrepancy_report, Status};
use detcost_core::rng::Xoshiro256StarStar;
use detcost_core::scenarios::{evaluate_preset, preset, presets};
use detcost_core::stats::{fleiss_kappa, paired_t_test, power_check, PairedSample, Statistic};
use detcost_core::vlm::{parse_vlm_response, RawVlmResponse, VlmErrorKind};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs()
}

fn to_the_dollar(got: f64, want: f64) -> bool {
    (got - want).abs() < 0.005
}

fn breakeven_table_rows() -> Outcome {
    let start = Instant::now();
    let rows = breakeven_table(&cost::gemini()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let annotation = [1_080.0, 5_400.0, 10_800.0, 21_600.0, 36_000.0];
    let volume = [7.8e6, 28.9e6, 55.3e6, 107.6e6, 175.3e6];
    let daily = [21e3, 79e3, 152e3, 295e3, 480e3];
    let mut misses = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        if !to_the_dollar(r.annotation_usd, annotation[i]) {
            misses.push(format!(
                "{} annotation {} vs {}",
                r.scale.name(),
                r.annotation_usd,
                annotation[i]
            ));
        }
        let v = r.breakeven_volume;
        if !within(v, volume[i], 0.005) {
            misses.push(format!("{} break-even {v} vs {}", r.scale.name(), volume[i]));
        }
        let d = r.breakeven_daily;
        if !within(d, daily[i], 0.005) {
            misses.push(format!(
                "{} daily {d} vs {} ({:+.2}%)",
                r.scale.name(),
                daily[i],
                100.0 * (d - daily[i]) / daily[i]
            ));
        }
    }
    ensure(rows.len() == 5, || format!("{} rows", rows.len()))?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    if misses.is_empty() {
        Ok(format!("5 rows in {elapsed:?}"))
    } else {
        Err(misses.join("; "))
    }
}

fn breakeven_formula() -> Outcome {
    let at_zero = break_even_volume(11_616.0, 0.00025, 0.0)
        .map_err(|e| e.to_string())?
        .volume;
    ensure((at_zero - 46_464_000.0).abs() < 1e-6, || format!("c=0 gives {at_zero}"))?;
    let large = break_even_volume(11_616.0, 0.00025, 0.00004)
        .map_err(|e| e.to_string())?
        .summary();
    ensure(large.volume.abs_diff(55_314_286) <= 1, || {
        format!("c=0.00004 gives {}", large.volume)
    })?;
    ensure(large.daily_for_one_year == 151_546, || {
        format!("daily {}", large.daily_for_one_year)
    })?;
    let gpt4 = break_even_volume(11_616.0, 0.01, 0.00004)
        .map_err(|e| e.to_string())?
        .summary();
    ensure(gpt4.volume == 1_166_265, || format!("gpt4 gives {}", gpt4.volume))?;
    ensure(within(gpt4.volume as f64, 1.2e6, 0.05), || "gpt4 not about 1.2M".into())?;
    Ok(format!("46,464,000 / {} / {}", large.volume, gpt4.volume))
}

fn volume_table() -> Outcome {
    let report = discrepancy_report().map_err(|e| e.to_string())?;
    let labels = ["1K", "10K", "100K", "1M", "10M", "50M", "100M", "150M", "200M"];
    ensure(labels.len() == DEFAULT_VOLUME_GRID.len(), || "grid size".into())?;
    let mut recomputed = 0;
    for (label, &n) in labels.iter().zip(&DEFAULT_VOLUME_GRID) {
        for (model, profile) in [("gemini", cost::gemini()), ("gpt4", cost::gpt4())] {
            let id = format!("volume_table.{label}.{model}_tco");
            let check = report.get(&id).ok_or_else(|| format!("{id} missing"))?;
            ensure(check.status == Status::Pass, || format!("{id} {}", check.computed_text))?;
            let tco = tco_api(&profile, n, false, 365).map_err(|e| e.to_string())?;
            ensure(tco == profile.api_price_per_image * n as f64, || {
                format!("{id} = {tco}")
            })?;
        }
        for cell in ["yolov8m_tco", "yolov8m_ccd", "gemini_ccd", "gpt4_ccd"] {
            let id = format!("volume_table.{label}.{cell}");
            let check = report
                .get(&id)
                .ok_or_else(|| format!("{id} not in the discrepancy report"))?;
            ensure(check.computed.is_some_and(f64::is_finite), || {
                format!("{id} has no recomputed value")
            })?;
            recomputed += 1;
        }
    }
    let listed = report.failures().filter(|c| c.id.starts_with("volume_table.")).count();
    let json = serde_json::to_value(&report).map_err(|e| e.to_string())?;
    ensure(
        json["checks"]
            .as_array()
            .is_some_and(|c| c.len() == report.checks.len()),
        || "report does not serialize".into(),
    )?;
    Ok(format!(
        "18 API cells exact; {recomputed} recomputed cells; {listed} mismatches listed"
    ))
}

fn scenario_dollars() -> Outcome {
    let catalog = Catalog::builtin();
    let tco = |id: &str, model: &str| -> Result<f64, String> {
        let r = evaluate_preset(&preset(id).ok_or("preset")?, &catalog).map_err(|e| e.to_string())?;
        r.architectures
            .iter()
            .find(|a| a.name == model)
            .map(|a| a.tco_usd)
            .ok_or_else(|| format!("{model} missing"))
    };
    let wildlife_year = 120_000;
    let checks = [
        (
            "enterprise gemini 5-year",
            tco("enterprise_inventory", "gemini")?,
            228_125.0,
        ),
        (
            "enterprise gpt4 5-year",
            tco("enterprise_inventory", "gpt4")?,
            9_125_000.0,
        ),
        ("medical screening", tco("medical_imaging", "gemini")?, 912.5),
        (
            "wildlife gemini",
            tco_api(&cost::gemini(), wildlife_year, false, 365).map_err(|e| e.to_string())?,
            30.0,
        ),
        (
            "wildlife gpt4",
            tco_api(&cost::gpt4(), wildlife_year, false, 365).map_err(|e| e.to_string())?,
            1_200.0,
        ),
        (
            "medical annotation",
            annotation_cost(&SystemScale::Medical.params()).map_err(|e| e.to_string())?,
            36_000.0,
        ),
    ];
    for (what, got, want) in checks {
        ensure(to_the_dollar(got, want), || format!("{what}: {got} vs {want}"))?;
    }
    Ok("6 amounts exact".into())
}

fn decision_goldens() -> Outcome {
    let catalog = Catalog::builtin();
    let mut got = Vec::new();
    for p in presets() {
        let r = evaluate_preset(&p, &catalog).map_err(|e| e.to_string())?;
        got.push(r.recommendation.choice.to_string());
    }
    let want = ["gemini", "gemini", "gpt4", "hybrid", "supervised", "supervised"];
    ensure(got == want, || format!("{got:?}"))?;
    ensure(
        catalog
            .profiles
            .iter()
            .filter(|p| !p.is_api())
            .all(|p| p.name == "yolov8m"),
        || "supervised profile is not yolov8m".into(),
    )?;
    ensure(Choice::from_name("gpt4").is_api(), || "choice names".into())?;
    Ok(got.join(", "))
}

fn random_box(rng: &mut Xoshiro256StarStar, extent: u64) -> BoundingBox {
    let x = rng.below(extent) as i64;
    let y = rng.below(extent) as i64;
    let w = 1 + rng.below(200) as i64;
    let h = 1 + rng.below(200) as i64;
    BoundingBox::new(x, y, x + w, y + h).unwrap()
}

fn exhaustive_correct(gt: &[BoundingBox], pred: &BoundingBox, t: f64) -> usize {
    gt.iter().any(|g| iou(pred, g).unwrap() >= t) as usize
}

fn metric_properties() -> Outcome {
    let mut rng = Xoshiro256StarStar::seed_from_u64(7);
    for i in 0..10_000 {
        let a = random_box(&mut rng, 500);
        let b = random_box(&mut rng, 500);
        let ab = iou(&a, &b).map_err(|e| e.to_string())?;
        let (dx, dy) = (rng.below(2_001) as i64 - 1_000, rng.below(2_001) as i64 - 1_000);
        let shifted = iou(&a.translate(dx, dy), &b.translate(dx, dy)).map_err(|e| e.to_string())?;
        ensure(ab == iou(&b, &a).unwrap(), || format!("pair {i} not symmetric"))?;
        ensure((0.0..=1.0).contains(&ab), || format!("pair {i} out of range"))?;
        ensure(ab == shifted, || format!("pair {i} not translation invariant"))?;
    }
    for set in 0..1_000 {
        let n = 1 + rng.below(40) as usize;
        let mut gt = Vec::with_capacity(n);
        let mut preds = Vec::with_capacity(n);
        for i in 0..n {
            let id = format!("s{set}-{i}");
            let b = random_box(&mut rng, 400);
            gt.push(GroundTruthObject::new(id.as_str(), "cat", b).unwrap());
            preds.push(if rng.below(4) == 0 {
                DetectionRecord::miss(id.as_str(), "cat")
            } else {
                let shift = rng.below(41) as i64 - 20;
                DetectionRecord::hit(id.as_str(), "cat", 0.8, b.translate(shift, shift / 2))
            });
        }
        let report = match_and_score(&gt, &preds, &[0.5, 0.7])
            .map_err(|e| e.to_string())?
            .report;
        let (a5, a7) = (report.accuracy(0.5).unwrap(), report.accuracy(0.7).unwrap());
        ensure(a7 <= a5, || format!("set {set}: {a7} > {a5}"))?;
    }
    let mut cases = 0;
    for objects in 1..=5 {
        for _ in 0..2_000 {
            let gt: Vec<BoundingBox> = (0..objects).map(|_| random_box(&mut rng, 300)).collect();
            let target = gt[rng.below(objects as u64) as usize];
            let pred = if rng.below(2) == 0 {
                target.translate(rng.below(21) as i64 - 10, rng.below(21) as i64 - 10)
            } else {
                random_box(&mut rng, 300)
            };
            for t in [0.5, 0.7] {
                let greedy = greedy_match(&gt, &[(0.9, pred)])
                    .iter()
                    .filter(|m| m.is_some_and(|v| v >= t))
                    .count();
                ensure(greedy == exhaustive_correct(&gt, &pred, t), || {
                    format!("gap on {objects}-object case at {t}")
                })?;
            }
            cases += 1;
        }
    }
    Ok(format!("10,000 pairs, 1,000 sets, {cases} matching cases with gap 0"))
}

fn statistics() -> Outcome {
    let sample = PairedSample::new(vec![2.0, 4.0, 6.0, 8.0], vec![1.0, 2.0, 3.0, 4.0]).map_err(|e| e.to_string())?;
    let t = paired_t_test(&sample);
    ensure((t.t - 3.873).abs() <= 1e-3 && t.df == 3, || {
        format!("t={} df={}", t.t, t.df)
    })?;

    let kappa = fleiss_kappa(&[vec![5, 0], vec![0, 5], vec![5, 0], vec![0, 5]], 5).map_err(|e| e.to_string())?;
    ensure(kappa == 1.0, || format!("kappa {kappa}"))?;

    let power = power_check(5_000, 0.15, 0.015, 0.05).map_err(|e| e.to_string())?;
    ensure(power >= 0.95, || format!("power {power}"))?;

    let start = Instant::now();
    let trials = 1_000;
    let mut covered = 0;
    for trial in 0..trials {
        let mut rng = Xoshiro256StarStar::substream(42, trial);
        let values: Vec<f64> = (0..500).map(|_| f64::from(u8::from(rng.next_f64() < 0.7))).collect();
        let ci = par_bootstrap_ci(&values, Statistic::Mean, 10_000, 0.95, 1_000 + trial).map_err(|e| e.to_string())?;
        if ci.lo <= 0.7 && 0.7 <= ci.hi {
            covered += 1;
        }
    }
    let elapsed = start.elapsed();
    let coverage = f64::from(covered) / trials as f64;
    ensure((0.93..=0.97).contains(&coverage), || format!("coverage {coverage}"))?;
    ensure(elapsed < Duration::from_secs(60), || {
        format!("coverage run took {elapsed:?}")
    })?;
    Ok(format!(
        "t={:.4} df=3, kappa=1, power={power:.4}, coverage {:.1}% in {:.1}s",
        t.t,
        100.0 * coverage,
        elapsed.as_secs_f64()
    ))
}

fn sampler_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = Xoshiro256StarStar::seed_from_u64(2024);
    let images: Vec<String> = (0..25_000)
        .map(|i| {
            // side 20, 60 or 150 px puts the image in the small, medium or large stratum
            let side = [20, 60, 150][rng.below(3) as usize];
            let x = rng.below(400);
            format!(
                r#"{{"id":{i},"width":640,"height":480,"objects":[{{"category":"obj","bbox":[{x},10,{},{}]}}]}}"#,
                x + side,
                10 + side
            )
        })
        .collect();
    let gt = dir.path().join("corpus.json");
    std::fs::write(&gt, format!(r#"{{"images":[{}]}}"#, images.join(","))).map_err(|e| e.to_string())?;
    // each run reads the corpus file and builds its own worker pool
    let run = |threads: &str| {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let args = [
            "detcost",
            "sample",
            "--seed",
            "42",
            "--format",
            "csv",
            "--threads",
            threads,
            "--ground-truth",
        ];
        let mut argv: Vec<std::ffi::OsString> = args.iter().map(Into::into).collect();
        argv.push(gt.clone().into());
        let code = detcost::cli::run(argv, &mut out, &mut err);
        (code, out, String::from_utf8_lossy(&err).into_owned())
    };
    let (a, b) = (run("1"), run("2"));
    ensure(a.0 == 0, || a.2.clone())?;
    ensure(a.1 == b.1, || "runs differ".into())?;
    let text = String::from_utf8(a.1).map_err(|e| e.to_string())?;
    let mut counts = [0usize; 3];
    for line in text.lines().skip(1) {
        match line.rsplit(',').next() {
            Some("small") => counts[0] += 1,
            Some("medium") => counts[1] += 1,
            Some("large") => counts[2] += 1,
            other => return Err(format!("unexpected row {other:?}")),
        }
    }
    ensure(counts == [1_000, 2_000, 2_000], || format!("counts {counts:?}"))?;
    Ok("byte-identical 5,000 ids, 1,000/2,000/2,000".into())
}

fn raw(text: &str) -> RawVlmResponse {
    RawVlmResponse {
        text: text.into(),
        image_width: 640,
        image_height: 480,
        category_queried: "dog".into(),
        image_id: "img".into(),
        latency_ms: None,
    }
}

fn parser() -> Outcome {
    let hit = r#"{"detected": true, "confidence": 0.9, "bounding_box": {"x_min": 10, "y_min": 20, "x_max": 110, "y_max": 220}, "reasoning": "..."}"#;
    let miss = r#"{"detected": false, "confidence": 0.0}"#;
    let rec = parse_vlm_response(&raw(hit)).map_err(|e| e.to_string())?;
    ensure(
        rec.detected && rec.bounding_box == BoundingBox::new(10, 20, 110, 220).ok(),
        || format!("{rec:?}"),
    )?;
    let rec = parse_vlm_response(&raw(miss)).map_err(|e| e.to_string())?;
    ensure(!rec.detected && rec.bounding_box.is_none(), || format!("{rec:?}"))?;

    let oob = hit.replace("\"x_max\": 110", "\"x_max\": 700");
    let kind = parse_vlm_response(&raw(&oob)).map(|_| ()).map_err(|e| e.kind);
    ensure(kind == Err(VlmErrorKind::Bounds), || {
        format!("out of bounds gave {kind:?}")
    })?;
    let inverted = hit.replace("\"x_min\": 10", "\"x_min\": 300");
    let kind = parse_vlm_response(&raw(&inverted)).map(|_| ()).map_err(|e| e.kind);
    ensure(kind == Err(VlmErrorKind::Geometry), || {
        format!("inverted gave {kind:?}")
    })?;

    let alphabet: &[u8] = b"{}[]\":,.-0123456789eE truefalsnul\\`x_miny_max";
    let mut rng = Xoshiro256StarStar::seed_from_u64(99);
    let (mut ok, mut typed) = (0, 0);
    for i in 0..10_000 {
        let mut bytes = if i % 2 == 0 {
            hit.as_bytes().to_vec()
        } else {
            miss.as_bytes().to_vec()
        };
        for _ in 0..1 + rng.below(6) {
            let pos = rng.below(bytes.len() as u64 + 1) as usize;
            let c = alphabet[rng.below(alphabet.len() as u64) as usize];
            match rng.below(4) {
                0 if pos < bytes.len() => bytes[pos] = c,
                1 if pos < bytes.len() => {
                    bytes.remove(pos);
                }
                2 => bytes.truncate(pos),
                _ => bytes.insert(pos, c),
            }
        }
        let text = String::from_utf8_lossy(&bytes).into_owned();
        let result = catch_unwind(AssertUnwindSafe(|| parse_vlm_response(&raw(&text))))
            .map_err(|_| format!("panic on mutation {i}: {text}"))?;
        match result {
            Ok(_) => ok += 1,
            Err(_) => typed += 1,
        }
    }
    Ok(format!(
        "canonical pair parses; 10,000 mutations: {ok} valid, {typed} typed errors, 0 panics"
    ))
}

fn service_goldens() -> Outcome {
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let requests = common::golden_requests();
    for g in &requests {
        let path = common::golden_dir().join(format!("{}.json", g.name));
        let golden = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        for start in 0..2 {
            let (status, body) = rt.block_on(common::send(common::app(), g.method.clone(), g.uri, g.body.as_deref()));
            ensure(status == StatusCode::OK, || format!("{} returned {status}", g.name))?;
            ensure(body == golden, || {
                format!("{} differs from golden on start {start}", g.name)
            })?;
        }
    }
    let metadata = Command::new(env!("CARGO"))
        .args(["metadata", "--no-deps", "--format-version", "1", "--offline"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .map_err(|e| e.to_string())?;
    let meta: serde_json::Value = serde_json::from_slice(&metadata.stdout).map_err(|e| e.to_string())?;
    let members: Vec<&str> = meta["packages"]
        .as_array()
        .map(|p| p.iter().filter_map(|p| p["name"].as_str()).collect())
        .unwrap_or_default();
    ensure(
        !members.is_empty() && members.iter().all(|m| m.starts_with("detcost")),
        || format!("workspace builds {members:?}"),
    )?;
    Ok(format!(
        "{} responses byte-stable over 2 starts; workspace {members:?}",
        requests.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("break-even table", breakeven_table_rows),
        ("break-even formula", breakeven_formula),
        ("volume table", volume_table),
        ("scenario dollars", scenario_dollars),
        ("decision goldens", decision_goldens),
        ("metric properties", metric_properties),
        ("statistics", statistics),
        ("sampler determinism", sampler_determinism),
        ("parser", parser),
        ("service goldens", service_goldens),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let outcome = catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
