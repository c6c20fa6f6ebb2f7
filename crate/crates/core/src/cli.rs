//! Command-line front end: evaluate metric, volume, norm, and operator
//! quantities, check weight conditions, and run verification experiments
//! from config files.
//!
//! Exit codes: 0 on success with all checks passing, 1 when any check fails
//! (unstable or divergent constants), 2 on configuration or validation
//! errors.

use crate::anisotropy::AnisotropicStructure;
use crate::conditions::{check_condition, ConditionParams};
use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::harness::{run_experiment, Experiment, ExperimentConfig};
use crate::operators::{
    commutator, dominating, fractional_integral, maximal, singular_integral, OperatorSpecConfig,
};
use crate::polar::QuadConfig;
use crate::report::{fmt_sig10, reports_to_csv, reports_to_json, round_json, write_atomic};
use crate::spaces::{campanato_norm, morrey_norm, RadiusGrid, WeightSpec};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "parmor",
    about = "Anisotropic quasi-metric operators, local Morrey/Campanato norms, and inequality verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the quasi-metric rho at a point.
    Metric(MetricArgs),
    /// Measure of an ellipsoid of the given radius.
    Volume(VolumeArgs),
    /// Morrey / Campanato norms from a config file.
    Norm(ConfigArgs),
    /// Evaluate an operator at points from a config file.
    Op(ConfigArgs),
    /// Check weight-pair admissibility conditions from a config file.
    Conditions(ConfigArgs),
    /// Run a verification experiment from a config file.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct MetricArgs {
    /// Comma-separated dilation exponents, e.g. 1,2
    #[arg(long, value_delimiter = ',')]
    exponents: Vec<f64>,
    /// Comma-separated coordinates, e.g. 1,1
    #[arg(long, value_delimiter = ',')]
    point: Vec<f64>,
    /// Quasi-triangle constant.
    #[arg(long, default_value_t = 1.0)]
    k: f64,
}

#[derive(Debug, Args)]
struct VolumeArgs {
    #[arg(long, value_delimiter = ',')]
    exponents: Vec<f64>,
    #[arg(long)]
    r: f64,
    #[arg(long, default_value_t = 1.0)]
    k: f64,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// JSON config path.
    #[arg(long)]
    config: PathBuf,
    /// Output path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Experiment config path.
    #[arg(long)]
    config: PathBuf,
    /// JSON report path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Flat per-case CSV path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Worker threads (defaults to the core count, or THREADS env).
    #[arg(long)]
    threads: Option<usize>,
    /// Suppress the timestamp header line in outputs.
    #[arg(long)]
    no_timestamp: bool,
}

/// Run the CLI; returns the process exit code.
pub fn run<I: IntoIterator<Item = String>>(argv: I) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version with its own success exit
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Metric(args) => {
            let s = AnisotropicStructure::with_k(args.exponents, args.k)?;
            let rho = s.rho(&args.point)?;
            println!("{{\"rho\": {}}}", fmt_sig10(rho));
            Ok(0)
        }
        Command::Volume(args) => {
            let s = AnisotropicStructure::with_k(args.exponents, args.k)?;
            let vol = s.ellipsoid_volume(args.r)?;
            println!(
                "{{\"volume\": {}, \"unit_measure\": {}, \"gamma\": {}}}",
                fmt_sig10(vol),
                fmt_sig10(s.unit_measure()),
                fmt_sig10(s.gamma())
            );
            Ok(0)
        }
        Command::Norm(args) => {
            let cfg: NormConfig = read_config(&args.config)?;
            let out = run_norm(&cfg)?;
            emit(args.output.as_deref(), &out)?;
            Ok(0)
        }
        Command::Op(args) => {
            let cfg: OpConfig = read_config(&args.config)?;
            let out = run_op(&cfg)?;
            emit(args.output.as_deref(), &out)?;
            Ok(0)
        }
        Command::Conditions(args) => {
            let cfg: ConditionsConfig = read_config(&args.config)?;
            let report = run_conditions(&cfg)?;
            let divergent = report["divergent"].as_bool().unwrap_or(true);
            emit(
                args.output.as_deref(),
                &serde_json::to_string_pretty(&report)
                    .map_err(|e| Error::Internal(e.to_string()))?,
            )?;
            Ok(if divergent { 1 } else { 0 })
        }
        Command::Verify(args) => run_verify(args),
    }
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::invalid(format!("config {}: {e}", path.display())))
}

fn emit(path: Option<&std::path::Path>, contents: &str) -> Result<()> {
    match path {
        None => {
            println!("{contents}");
            Ok(())
        }
        Some(p) => write_atomic(p, contents),
    }
}

// -- norm subcommand --------------------------------------------------------

#[derive(Debug, Deserialize)]
struct NormConfig {
    structure: AnisotropicStructure,
    field: FieldSpec,
    #[serde(default)]
    x0: Option<Vec<f64>>,
    grid: RadiusGrid,
    #[serde(default)]
    morrey: Option<MorreyBlock>,
    #[serde(default)]
    campanato: Option<CampanatoBlock>,
}

#[derive(Debug, Deserialize)]
struct MorreyBlock {
    p: f64,
    weight: WeightSpec,
}

#[derive(Debug, Deserialize)]
struct CampanatoBlock {
    p: f64,
    lambda: f64,
}

fn run_norm(cfg: &NormConfig) -> Result<String> {
    let s = &cfg.structure;
    let f = cfg.field.build(s.dim())?;
    let x0 = cfg.x0.clone().unwrap_or_else(|| vec![0.0; s.dim()]);
    let mut out = serde_json::Map::new();
    if let Some(m) = &cfg.morrey {
        let w = m.weight.build(s.gamma())?;
        let v = morrey_norm(s, &f, m.p, &w, &x0, &cfg.grid, QuadConfig::medium())?;
        out.insert("morrey".into(), serde_json::json!(v));
    }
    if let Some(c) = &cfg.campanato {
        let v = campanato_norm(s, &f, c.p, c.lambda, &x0, &cfg.grid, QuadConfig::medium())?;
        out.insert("campanato".into(), serde_json::json!(v));
    }
    if out.is_empty() {
        return Err(Error::invalid(
            "norm config needs a \"morrey\" or \"campanato\" block",
        ));
    }
    let mut value = serde_json::Value::Object(out);
    round_json(&mut value);
    serde_json::to_string_pretty(&value).map_err(|e| Error::Internal(e.to_string()))
}

// -- op subcommand ----------------------------------------------------------

#[derive(Debug, Deserialize)]
struct OpConfig {
    structure: AnisotropicStructure,
    operator: OperatorSpecConfig,
    field: FieldSpec,
    points: Vec<Vec<f64>>,
    /// maximal | fractional | singular | commutator | dominating
    kind: String,
    #[serde(default)]
    t_grid: Option<crate::harness::TGridSpec>,
}

fn run_op(cfg: &OpConfig) -> Result<String> {
    let s = &cfg.structure;
    let spec = cfg.operator.build(s)?;
    let f = cfg.field.build(s.dim())?;
    let quad = QuadConfig::medium();
    let t_grid = cfg.t_grid.unwrap_or_default().values();
    let mut rows = Vec::new();
    for x in &cfg.points {
        let value = match cfg.kind.as_str() {
            "maximal" => maximal(s, &spec, &f, x, &t_grid, quad)?,
            "fractional" => fractional_integral(s, &spec, &f, x, quad)?,
            "singular" => singular_integral(s, &spec, &f, x, quad)?,
            "commutator" => commutator(s, &spec, &f, x, quad)?,
            "dominating" => dominating(s, &spec, &f, x, quad)?,
            other => {
                return Err(Error::invalid(format!(
                    "unknown operator kind {other:?}; expected maximal | fractional | singular | commutator | dominating"
                )))
            }
        };
        rows.push(serde_json::json!({"x": x, "value": value}));
    }
    let mut value = serde_json::json!({"kind": cfg.kind, "values": rows});
    round_json(&mut value);
    serde_json::to_string_pretty(&value).map_err(|e| Error::Internal(e.to_string()))
}

// -- conditions subcommand --------------------------------------------------

#[derive(Debug, Deserialize)]
struct ConditionsConfig {
    params: ConditionParams,
    phi1: WeightSpec,
    phi2: WeightSpec,
    grid: RadiusGrid,
    #[serde(default = "default_t_max")]
    t_max: f64,
}

fn default_t_max() -> f64 {
    1e4
}

fn run_conditions(cfg: &ConditionsConfig) -> Result<serde_json::Value> {
    let phi1 = cfg.phi1.build(cfg.params.gamma)?;
    let phi2 = cfg.phi2.build(cfg.params.gamma)?;
    let report = check_condition(&cfg.params, &phi1, &phi2, &cfg.grid.values(), cfg.t_max)?;
    let mut value = serde_json::to_value(&report).map_err(|e| Error::Internal(e.to_string()))?;
    round_json(&mut value);
    Ok(value)
}

// -- verify subcommand ------------------------------------------------------

fn run_verify(args: VerifyArgs) -> Result<i32> {
    let cfg: ExperimentConfig = read_config(&args.config)?;
    let exp = Experiment::from_config(&cfg)?;
    let threads = args
        .threads
        .or_else(|| std::env::var("THREADS").ok().and_then(|t| t.parse().ok()));
    let reports = match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
            pool.install(|| run_experiment(&exp))
        }
        None => run_experiment(&exp),
    };
    let timestamp = if args.no_timestamp {
        None
    } else {
        Some(
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        )
    };
    let json = reports_to_json(&reports, timestamp)?;
    emit(args.output.as_deref(), &json)?;
    if let Some(csv_path) = &args.csv {
        write_atomic(csv_path, &reports_to_csv(&reports, timestamp))?;
    }
    let all_pass = reports.iter().all(|r| r.pass);
    for r in &reports {
        eprintln!(
            "{}: {} (fitted {}, growth {})",
            r.check_name,
            if r.pass { "pass" } else { "FAIL" },
            fmt_sig10(r.fitted_constant),
            fmt_sig10(r.growth),
        );
    }
    Ok(if all_pass { 0 } else { 1 })
}
