//! Command-line entry point.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use detcost_core::cost::{CostModelParams, SystemScale};
use detcost_core::decision::DeploymentScenario;
use detcost_core::reproduce::{self, Check, CheckSummary, DiscrepancyReport, Status};
use detcost_core::sampler::{sample_objects, StratificationPlan, DEFAULT_SEED};
use detcost_core::scenarios::{self, evaluate_scenario, ScenarioReport};
use detcost_core::stats::{fleiss_kappa, power_check, DEFAULT_BOOTSTRAP_ITERATIONS, DEFAULT_LEVEL};
use detcost_core::vlm::{parse_batch, ParseOptions};
use serde::{Deserialize, Serialize};

use crate::analysis::{self, BootstrapSettings};
use crate::api::{self, BreakevenRequest, CcdCurveRequest, DecideRequest, ParamsSource, TcoRequest};
use crate::catalog::LoadedCatalog;
use crate::error::{from_json, AppError, EXIT_OK, EXIT_VALIDATION};
use crate::formats;
use crate::render;
use crate::service;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Md,
}

#[derive(Debug, Parser)]
#[command(
    name = "detcost",
    version,
    about = "Deployment economics of supervised and zero-shot object detectors"
)]
pub struct Cli {
    /// Pricing catalog file (default: built-in catalog)
    #[arg(long, global = true, env = crate::catalog::CATALOG_ENV)]
    pub catalog: Option<PathBuf>,
    /// Output format; each command has its own default
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write output here instead of stdout
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Seed for resampling and sampling
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// More log output on stderr (-v info, -vv debug)
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct ParamsArgs {
    /// System-scale preset: small, medium, large, enterprise, medical
    #[arg(long, value_parser = parse_scale, conflicts_with = "params")]
    pub scale: Option<SystemScale>,
    /// JSON file of supervised cost parameters
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Upfront cost and TCO per model over a volume grid
    Tco {
        #[command(flatten)]
        params: ParamsArgs,
        /// Comma-separated inference volumes
        #[arg(long, value_delimiter = ',')]
        volumes: Option<Vec<u64>>,
        /// Comma-separated model names
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        /// Deployment days; adds free-tier-adjusted API costs
        #[arg(long)]
        days: Option<u32>,
    },
    /// Break-even inference volume between supervised and API detection
    Breakeven {
        #[arg(long)]
        upfront: Option<f64>,
        #[arg(long)]
        api_price: Option<f64>,
        /// Supervised per-image cost
        #[arg(long)]
        sup_cost: Option<f64>,
        /// API profile to compare against (with --scale/--params)
        #[arg(long)]
        api: Option<String>,
        #[command(flatten)]
        params: ParamsArgs,
    },
    /// TCO and cost-per-correct-detection curves for plotting
    CcdCurve {
        #[command(flatten)]
        params: ParamsArgs,
        #[arg(long, value_delimiter = ',')]
        volumes: Option<Vec<u64>>,
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        /// Accuracy override, `model=value`; repeatable
        #[arg(long = "accuracy", value_parser = parse_accuracy)]
        accuracy: Vec<(String, f64)>,
        /// Share of queries on categories outside the supervised taxonomy
        #[arg(long, default_value_t = 0.0)]
        novel_share: f64,
    },
    /// Score predictions against ground truth
    Evaluate {
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Second predictions file compared per object with a paired t-test
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.7")]
        thresholds: Vec<f64>,
        /// Bootstrap resamples
        #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_ITERATIONS)]
        bootstrap: u32,
        #[arg(long, default_value_t = DEFAULT_LEVEL)]
        level: f64,
    },
    /// Paired comparisons, inter-rater agreement and power
    Stats {
        #[command(subcommand)]
        command: StatsCommand,
    },
    /// Deterministic stratified sample of image ids
    Sample {
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long, default_value_t = 1_000)]
        small: usize,
        #[arg(long, default_value_t = 2_000)]
        medium: usize,
        #[arg(long, default_value_t = 2_000)]
        large: usize,
    },
    /// Validate VLM responses and write a predictions file
    ParseVlm {
        /// JSON-lines file of responses
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        predictions_out: Option<PathBuf>,
        #[arg(long)]
        errors_out: Option<PathBuf>,
        /// Clamp coordinates into the image instead of rejecting them
        #[arg(long)]
        clamp: bool,
    },
    /// Recommend an architecture for a deployment scenario
    Decide {
        #[arg(long, conflicts_with = "scenario")]
        preset: Option<String>,
        /// Scenario JSON file
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[command(flatten)]
        params: ParamsArgs,
    },
    /// Lifetime costs and recommendations for scenarios
    Scenario {
        /// Preset id; repeatable (default: all presets)
        #[arg(long)]
        preset: Vec<String>,
        /// Scenario JSON file; repeatable
        #[arg(long)]
        scenario: Vec<PathBuf>,
        /// Write report.md, report.csv and discrepancies.json here
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Multiply every price by this factor
        #[arg(long, default_value_t = 1.0)]
        price_factor: f64,
    },
    /// Regenerate the published tables and compare them with the printed values
    ReproduceTables {
        /// Write report.md, report.csv and discrepancies.json here
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Print only the discrepancy report (JSON)
        #[arg(long)]
        discrepancy_report: bool,
    },
    /// Run the HTTP API
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Allowed CORS origin (default: any)
        #[arg(long)]
        cors_origin: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// Paired outcomes from a CSV with `a` and `b` columns
    Paired {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_ITERATIONS)]
        bootstrap: u32,
        #[arg(long, default_value_t = DEFAULT_LEVEL)]
        level: f64,
        /// Difference to report power for
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Fleiss' kappa from an items x categories CSV of rater counts
    Kappa {
        #[arg(long)]
        input: PathBuf,
        /// Raters per item (default: the first row's total)
        #[arg(long)]
        raters: Option<u32>,
    },
    /// Normal-approximation power of a two-sided test
    Power {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        sd: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
}

fn parse_scale(s: &str) -> Result<SystemScale, String> {
    SystemScale::from_name(s).ok_or_else(|| {
        let names: Vec<&str> = SystemScale::ALL.iter().map(|s| s.name()).collect();
        format!("unknown scale `{s}` (expected one of {})", names.join(", "))
    })
}

fn parse_accuracy(s: &str) -> Result<(String, f64), String> {
    let (name, v) = s.split_once('=').ok_or("expected model=value")?;
    let v: f64 = v.parse().map_err(|e| format!("{e}"))?;
    Ok((name.to_string(), v))
}

impl ParamsArgs {
    fn source(&self) -> Result<ParamsSource, AppError> {
        let params = match &self.params {
            Some(path) => Some(read_json::<CostModelParams>(path)?),
            None => None,
        };
        Ok(ParamsSource {
            params,
            scale: self.scale,
        })
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, AppError> {
    from_json(&formats::read_text(path)?).map_err(|e| e.in_file(path))
}

/// A scenario file holds a bare scenario or `{"scenario", "params"}`.
#[derive(Debug, Deserialize)]
struct ScenarioFile {
    scenario: DeploymentScenario,
    #[serde(default)]
    params: Option<CostModelParams>,
}

fn read_scenario(path: &Path) -> Result<(DeploymentScenario, Option<CostModelParams>), AppError> {
    let text = formats::read_text(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| AppError::message(format!("invalid JSON: {e}")).in_file(path))?;
    if value.get("scenario").is_some() {
        let f: ScenarioFile = from_json(&text).map_err(|e| e.in_file(path))?;
        Ok((f.scenario, f.params))
    } else {
        Ok((from_json(&text).map_err(|e| e.in_file(path))?, None))
    }
}

struct Ctx {
    catalog: LoadedCatalog,
    format: Option<Format>,
    seed: u64,
}

impl Ctx {
    fn format(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), AppError> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let path = dir.join(name);
    formats::write_text(&path, text)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn check_report(checks: Vec<Check>, catalog_version: &str) -> DiscrepancyReport {
    let pass = checks.iter().filter(|c| c.status == Status::Pass).count();
    DiscrepancyReport {
        catalog_version: catalog_version.into(),
        summary: CheckSummary {
            total: checks.len(),
            pass,
            fail: checks.len() - pass,
        },
        checks,
    }
}

fn scaled(catalog: &LoadedCatalog, factor: f64) -> Result<LoadedCatalog, AppError> {
    if !factor.is_finite() || factor <= 0.0 {
        return Err(AppError::invalid("price_factor", "must be > 0"));
    }
    let mut c = catalog.clone();
    for p in &mut c.catalog.profiles {
        p.api_price_per_image *= factor;
    }
    Ok(c)
}

fn scale_params(p: &mut CostModelParams, factor: f64) {
    p.price_per_box *= factor;
    p.training_cost *= factor;
    p.infrastructure_cost *= factor;
    p.supervised_per_image_cost *= factor;
}

fn run_scenarios(
    ctx: &Ctx,
    presets: &[String],
    files: &[PathBuf],
    out_dir: Option<&Path>,
    factor: f64,
) -> Result<String, AppError> {
    let catalog = scaled(&ctx.catalog, factor)?;
    let mut inputs: Vec<(DeploymentScenario, CostModelParams)> = Vec::new();
    let ids: Vec<String> = if presets.is_empty() && files.is_empty() {
        scenarios::presets().into_iter().map(|p| p.id).collect()
    } else {
        presets.to_vec()
    };
    for id in &ids {
        let p = api::find_preset(id)?;
        inputs.push((p.scenario, p.params));
    }
    for path in files {
        let (s, params) = read_scenario(path)?;
        let params = ParamsSource { params, scale: None }.resolve(&ctx.catalog)?;
        inputs.push((s, params));
    }
    let mut reports: Vec<ScenarioReport> = Vec::with_capacity(inputs.len());
    for (mut s, mut params) in inputs {
        s.annotation_price_per_box *= factor;
        scale_params(&mut params, factor);
        reports.push(evaluate_scenario(&s, &catalog.catalog, &params)?);
    }
    let rows = scenarios::compare(&reports)?;
    if let Some(dir) = out_dir {
        let mut md = String::from("# Scenario comparison\n\n");
        md.push_str(&render::comparison_md(&rows));
        for r in &reports {
            md.push('\n');
            md.push_str(&render::scenario_md(r).replace("\n# ", "\n## ").replacen("# ", "## ", 1));
        }
        write_file(dir, "report.md", &md)?;
        write_file(dir, "report.csv", &render::comparison_csv(&rows))?;
        let notes: Vec<Check> = reports.iter().flat_map(|r| r.notes.iter().cloned()).collect();
        write_file(
            dir,
            "discrepancies.json",
            &render::json(&check_report(notes, &catalog.catalog.version)),
        )?;
    }
    Ok(match ctx.format(Format::Md) {
        Format::Json => render::json(&reports),
        Format::Csv => render::comparison_csv(&rows),
        Format::Md => render::comparison_md(&rows),
    })
}

fn reproduce_tables(ctx: &Ctx, out_dir: Option<&Path>, only_discrepancies: bool) -> Result<String, AppError> {
    let gemini = detcost_core::cost::gemini();
    let breakeven = reproduce::breakeven_table(&gemini)?;
    let volume = reproduce::volume_table(
        &reproduce::volume_table_models(),
        &detcost_core::breakeven::DEFAULT_VOLUME_GRID,
    )?;
    let report = reproduce::discrepancy_report()?;
    if let Some(dir) = out_dir {
        write_file(dir, "report.md", &render::reproduction_md(&breakeven, &volume, &report))?;
        write_file(dir, "report.csv", &render::checks_csv(&report.checks))?;
        write_file(dir, "discrepancies.json", &render::json(&report))?;
    }
    if only_discrepancies {
        return Ok(render::json(&report));
    }
    #[derive(Serialize)]
    struct Tables<'a> {
        breakeven: &'a [reproduce::BreakEvenRow],
        volume: &'a [reproduce::VolumeRow],
        discrepancies: &'a DiscrepancyReport,
    }
    Ok(match ctx.format(Format::Md) {
        Format::Json => render::json(&Tables {
            breakeven: &breakeven,
            volume: &volume,
            discrepancies: &report,
        }),
        Format::Csv => render::checks_csv(&report.checks),
        Format::Md => render::reproduction_md(&breakeven, &volume, &report),
    })
}

fn stats_command(ctx: &Ctx, cmd: &StatsCommand) -> Result<String, AppError> {
    match cmd {
        StatsCommand::Paired {
            input,
            bootstrap,
            level,
            delta,
            alpha,
        } => {
            let (a, b) = formats::read_pairs(input)?;
            let boot = BootstrapSettings::new(*bootstrap, *level, ctx.seed);
            let summary = analysis::paired_summary(a, b, &boot, delta.map(|d| (d, *alpha)))?;
            Ok(match ctx.format(Format::Md) {
                Format::Json => render::json(&summary),
                Format::Csv => {
                    return Err(AppError::invalid(
                        "format",
                        "csv is not available for paired statistics",
                    ))
                }
                Format::Md => render::paired_md(&summary),
            })
        }
        StatsCommand::Kappa { input, raters } => {
            let rows = formats::read_ratings(input)?;
            let n = match raters {
                Some(n) => *n,
                None => rows.first().map(|r| r.iter().sum()).unwrap_or(0),
            };
            let kappa = fleiss_kappa(&rows, n)?;
            #[derive(Serialize)]
            struct Kappa {
                items: usize,
                raters: u32,
                kappa: f64,
            }
            let out = Kappa {
                items: rows.len(),
                raters: n,
                kappa,
            };
            Ok(match ctx.format(Format::Md) {
                Format::Json => render::json(&out),
                _ => format!("Fleiss' kappa = {kappa:.4} ({} items, {n} raters)\n", out.items),
            })
        }
        StatsCommand::Power { n, sd, delta, alpha } => {
            let power = power_check(*n, *sd, *delta, *alpha)?;
            Ok(match ctx.format(Format::Md) {
                Format::Json => render::json(&serde_json::json!({
                    "n": n, "sd": sd, "delta": delta, "alpha": alpha, "power": power
                })),
                _ => format!("power = {power:.6}\n"),
            })
        }
    }
}

fn dispatch(ctx: &Ctx, command: &Command) -> Result<String, AppError> {
    match command {
        Command::Tco {
            params,
            volumes,
            models,
            days,
        } => {
            let src = params.source()?;
            let req = TcoRequest {
                params: src.params,
                scale: src.scale,
                volumes: volumes.clone(),
                models: models.clone(),
                deployment_days: *days,
            };
            let r = api::tco(&ctx.catalog, &req)?;
            Ok(match ctx.format(Format::Md) {
                Format::Json => render::json(&r),
                Format::Csv => tco_csv(&r),
                Format::Md => tco_md(&r),
            })
        }
        Command::Breakeven {
            upfront,
            api_price,
            sup_cost,
            api,
            params,
        } => {
            let src = params.source()?;
            let req = BreakevenRequest {
                upfront: *upfront,
                api_price: *api_price,
                sup_cost: *sup_cost,
                api: api.clone(),
                params: src.params,
                scale: src.scale,
            };
            let r = api::breakeven(&ctx.catalog, &req)?;
            Ok(match ctx.format(Format::Md) {
                Format::Json => render::json(&r),
                Format::Csv => render::breakeven_csv(&r.result),
                Format::Md => render::breakeven_md(&r.result),
            })
        }
        Command::CcdCurve {
            params,
            volumes,
            models,
            accuracy,
            novel_share,
        } => {
            let src = params.source()?;
            let req = CcdCurveRequest {
                params: src.params,
                scale: src.scale,
                volumes: volumes.clone(),
                models: models.clone(),
                accuracy: accuracy.iter().cloned().collect::<BTreeMap<_, _>>(),
                novel_share: *novel_share,
            };
            let r = api::ccd_curve(&ctx.catalog, &req)?;
            for c in &r.crossovers {
                match c.volume {
                    Some(v) => log::info!("supervised CCD falls below {} at {:.0} images", c.api, v),
                    None => log::info!("no CCD crossover against {}", c.api),
                }
            }
            Ok(match ctx.format(Format::Csv) {
                Format::Json => render::json(&r),
                Format::Csv => render::curve_csv(&r.rows),
                Format::Md => render::curve_md(&r.rows),
            })
        }
        Command::Evaluate {
            ground_truth,
            predictions,
            baseline,
            thresholds,
            bootstrap,
            level,
        } => {
            let dataset = formats::read_dataset(ground_truth)?;
            let preds = formats::read_predictions(predictions)?;
            let base = match baseline {
                Some(p) => Some((stem(p), formats::read_predictions(p)?)),
                None => None,
            };
            let boot = BootstrapSettings::new(*bootstrap, *level, ctx.seed);
            let out = analysis::evaluate(
                &dataset.objects,
                &preds,
                thresholds,
                &boot,
                base.as_ref().map(|(n, p)| (n.as_str(), p.as_slice())),
            )?;
            if !out.report.record_errors.is_empty() {
                log::warn!(
                    "{} prediction records could not be scored",
                    out.report.record_errors.len()
                );
            }
            Ok(match ctx.format(Format::Json) {
                Format::Json => render::json(&out),
                Format::Csv => return Err(AppError::invalid("format", "evaluation reports are json or md")),
                Format::Md => render::eval_md(&stem(predictions), &out),
            })
        }
        Command::Stats { command } => stats_command(ctx, command),
        Command::Sample {
            ground_truth,
            small,
            medium,
            large,
        } => {
            let dataset = formats::read_dataset(ground_truth)?;
            let plan = StratificationPlan::new(*small, *medium, *large, ctx.seed)?;
            let ids = sample_objects(&dataset.objects, &plan)?;
            Ok(match ctx.format(Format::Md) {
                Format::Json => render::json(&ids),
                Format::Csv => {
                    let mut s = String::from("image_id,stratum\n");
                    for i in &ids {
                        s.push_str(&format!("{},{}\n", i.image_id, i.stratum));
                    }
                    s
                }
                Format::Md => {
                    let mut buf = Vec::new();
                    formats::write_id_list(&mut buf, &ids).expect("writing to memory");
                    String::from_utf8(buf).expect("ids are utf-8")
                }
            })
        }
        Command::ParseVlm {
            input,
            predictions_out,
            errors_out,
            clamp,
        } => {
            let raws = formats::read_responses(input)?;
            let (records, errors, summary) = parse_batch(&raws, ParseOptions { clamp: *clamp });
            for (i, e) in &errors {
                log::debug!("response {}: {e}", i + 1);
            }
            if let Some(path) = predictions_out {
                formats::write_text(path, &formats::predictions_json(&records))?;
            }
            let summary_json = render::json(&summary);
            if let Some(path) = errors_out {
                formats::write_text(path, &summary_json)?;
            }
            Ok(match ctx.format(Format::Json) {
                Format::Json => summary_json,
                _ => format!(
                    "{} responses: {} valid, {} parse, {} schema, {} bounds, {} geometry, {} range\n",
                    summary.total,
                    summary.valid,
                    summary.parse,
                    summary.schema,
                    summary.bounds,
                    summary.geometry,
                    summary.range
                ),
            })
        }
        Command::Decide {
            preset,
            scenario,
            params,
        } => {
            let mut req = DecideRequest {
                preset: preset.clone(),
                ..Default::default()
            };
            if let Some(path) = scenario {
                let (s, p) = read_scenario(path)?;
                req.scenario = Some(s);
                req.params = p;
            }
            if params.scale.is_some() || params.params.is_some() {
                req.params = Some(params.source()?.resolve(&ctx.catalog)?);
            }
            let r = api::decide(&ctx.catalog, &req)?;
            Ok(match ctx.format(Format::Md) {
                Format::Json => render::json(&r),
                Format::Csv => return Err(AppError::invalid("format", "recommendations are json or md")),
                Format::Md => render::recommendation_md(&r),
            })
        }
        Command::Scenario {
            preset,
            scenario,
            out_dir,
            price_factor,
        } => run_scenarios(ctx, preset, scenario, out_dir.as_deref(), *price_factor),
        Command::ReproduceTables {
            out_dir,
            discrepancy_report,
        } => reproduce_tables(ctx, out_dir.as_deref(), *discrepancy_report),
        Command::Serve {
            port,
            host,
            cors_origin,
        } => {
            let origin = match cors_origin {
                Some(o) => Some(
                    o.parse::<axum::http::HeaderValue>()
                        .map_err(|_| AppError::invalid("cors_origin", "not a valid header value"))?,
                ),
                None => None,
            };
            let state = service::AppState {
                catalog: ctx.catalog.clone(),
            };
            let rt = tokio::runtime::Runtime::new().map_err(|e| AppError::io(Path::new("tokio runtime"), e))?;
            rt.block_on(service::serve((*host, *port).into(), state, origin))
                .map_err(|e| AppError::io(Path::new(&format!("{host}:{port}")), e))?;
            Ok(String::new())
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into())
}

fn tco_csv(r: &api::TcoResponse) -> String {
    let mut s = String::from("volume,model,tco_usd,tco_with_free_tier_usd\n");
    for row in &r.rows {
        let free = row.tco_with_free_tier_usd.map(|v| v.to_string()).unwrap_or_default();
        s.push_str(&format!("{},{},{},{}\n", row.volume, row.model, row.tco_usd, free));
    }
    s
}

fn tco_md(r: &api::TcoResponse) -> String {
    use detcost_core::cost::{format_usd, group_thousands};
    let u = &r.upfront;
    let mut s = format!(
        "Upfront: {} (annotation {}, training {}, infrastructure {})\n\n| Volume | Model | TCO | With free tier |\n|---:|---|---:|---:|\n",
        format_usd(u.total_usd),
        format_usd(u.annotation_usd),
        format_usd(u.training_usd),
        format_usd(u.infrastructure_usd)
    );
    for row in &r.rows {
        s.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            group_thousands(row.volume as f64, 0),
            row.model,
            format_usd(row.tco_usd),
            row.tco_with_free_tier_usd.map(format_usd).unwrap_or_default()
        ));
    }
    s
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("DETCOST_LOG")
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), AppError> {
    let ctx = Ctx {
        catalog: LoadedCatalog::resolve(cli.catalog.as_deref())?,
        format: cli.format,
        seed: cli.seed.unwrap_or(DEFAULT_SEED),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(AppError::invalid("threads", "must be >= 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| AppError::message(format!("thread pool: {e}")))?;
    let text = pool.install(|| dispatch(&ctx, &cli.command))?;
    match &cli.output {
        Some(path) => formats::write_text(path, &text),
        None => out
            .write_all(text.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| AppError::io(Path::new("stdout"), e)),
    }
}

/// Runs the CLI and returns the process exit code: 0 on success, 1 for
/// usage and validation errors, 2 for I/O errors.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_VALIDATION
                }
            };
        }
    };
    init_logging(cli.verbose);
    match execute(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
