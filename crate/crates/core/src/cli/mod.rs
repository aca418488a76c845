//! Batch front end: JSON run configurations, the `bifkit` subcommands and their outputs.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 assumption failure,
//! 3 failed verification.

mod config;
mod output;
mod verify;

pub use config::{ChartOverrides, ModelSpec, RunConfig};
pub use output::{continuation_csv, grid_csv, report_json, write_analysis, write_atomic};
pub use verify::{
    beta_limit, continuation_soundness, convergence_order, degree_axioms, family_invariance, flow_consistency,
    m_eps_convergence, run_verify, OrderCheck, PropertyResult, VerifyReport, MIN_ORDER,
};

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::detect::{analyze, Analysis, Verdict};
use crate::error::{Error, Result};
use crate::flow::Flow;
use crate::model::registry;
use crate::reduction::{format_float, BifurcationMode, Reduction};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_ASSUMPTION: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

const DEFAULT_OUT: &str = "bifkit-out";

#[derive(Debug, Parser)]
#[command(name = "bifkit", version, about = "Bifurcation of periodic solutions from families of periodic orbits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Bifurcation function mode; overrides `mode` in the config.
    #[arg(long)]
    pub mode: Option<BifurcationMode>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the built-in models and their parameters.
    ListModels {
        #[arg(long)]
        json: bool,
    },
    /// Run the full analysis; writes report.json, m_grid.csv and continuation.csv.
    Analyze(RunArgs),
    /// Repeat the analysis over values of one model parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        param: String,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
    /// Run the invariant suite for the configured model.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        json: bool,
    },
}

/// Parses `args` (including the program name) and runs the command; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_ERROR;
    }
    match run(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// Sizes the global rayon pool from `BIFKIT_THREADS`.
fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("BIFKIT_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::Config(format!("BIFKIT_THREADS must be a positive integer, found '{value}'")))?;
    // fails only if the pool already exists, in which case it stays as it is
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

pub fn run(command: &Command) -> Result<i32> {
    match command {
        Command::ListModels { json } => {
            print!("{}", list_models(*json)?);
            Ok(EXIT_OK)
        }
        Command::Analyze(args) => cmd_analyze(args),
        Command::Sweep { run, param, values } => cmd_sweep(run, param, values),
        Command::Verify { run, json } => cmd_verify(run, *json),
    }
}

/// Text (or JSON) listing of the registry.
pub fn list_models(json: bool) -> Result<String> {
    let infos = registry::MODEL_NAMES
        .iter()
        .map(|name| registry::info(name))
        .collect::<Result<Vec<_>>>()?;
    if json {
        return Ok(serde_json::to_string_pretty(&infos)? + "\n");
    }
    let mut out = String::new();
    for m in infos {
        let params: Vec<String> = m.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.push_str(&format!("{}  n={} k={} T={:.6}\n", m.name, m.n, m.k, m.period));
        out.push_str(&format!("    params: {}\n    {}\n", params.join(" "), m.notes));
    }
    Ok(out)
}

fn load(args: &RunArgs) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(mode) = args.mode {
        cfg.mode = mode;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    Ok((cfg, out))
}

/// Runs one configured analysis and writes its outputs into `dir`.
pub fn analyze_to_dir(cfg: &RunConfig, dir: &Path) -> Result<Analysis> {
    let (problem, chart) = cfg.build_model()?;
    let analysis = analyze(&problem, &chart, &cfg.analysis_config())?;
    write_analysis(dir, &analysis.report, analysis.grid.as_ref())?;
    Ok(analysis)
}

fn summarize(analysis: &Analysis) -> String {
    let r = &analysis.report;
    let mut out = format!("{}: {:?}\n", r.model.name, r.verdict);
    for c in r.failed_checks() {
        out.push_str(&format!("  {} FAILED: {}\n", c.name, c.detail));
    }
    for z in &r.zeros {
        let index = z.index.map_or("-".to_string(), |d| d.value.to_string());
        out.push_str(&format!("  zero {:?}  index {index}  {:?}\n", z.h_star, z.verdict));
    }
    for n in &r.notes {
        out.push_str(&format!("  note: {n}\n"));
    }
    out
}

fn cmd_analyze(args: &RunArgs) -> Result<i32> {
    let (cfg, dir) = load(args)?;
    let analysis = analyze_to_dir(&cfg, &dir)?;
    print!("{}", summarize(&analysis));
    println!("wrote {}", dir.display());
    Ok(if analysis.report.verdict == Verdict::AssumptionFailure {
        EXIT_ASSUMPTION
    } else {
        EXIT_OK
    })
}

/// Sub-directory name of one sweep value.
pub fn sweep_dir_name(param: &str, value: f64) -> String {
    format!("{param}={value}")
}

fn summary_rows(param_value: f64, analysis: &Analysis) -> Vec<Vec<String>> {
    let r = &analysis.report;
    if r.zeros.is_empty() {
        return vec![vec![format_float(param_value), String::new(), String::new(), String::new(), String::new(), format!("{:?}", r.verdict)]];
    }
    r.zeros
        .iter()
        .enumerate()
        .map(|(i, z)| {
            vec![
                format_float(param_value),
                i.to_string(),
                z.h_star.iter().map(|v| format_float(*v)).collect::<Vec<_>>().join(" "),
                format_float(z.m_norm),
                z.index.map_or(String::new(), |d| d.value.to_string()),
                format!("{:?}", z.verdict),
            ]
        })
        .collect()
}

fn write_summary(dir: &Path, param: &str, rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([param, "zero", "h_star", "m_norm", "index", "verdict"])?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    write_atomic(&dir.join("summary.csv"), &bytes)
}

fn cmd_sweep(args: &RunArgs, param: &str, values: &[f64]) -> Result<i32> {
    let (cfg, dir) = load(args)?;
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value (--values a,b,...)".into()));
    }
    let defaults = registry::default_params(&cfg.model.name)?;
    if !defaults.contains_key(param) {
        let known: Vec<&str> = defaults.keys().map(String::as_str).collect();
        return Err(Error::Config(format!(
            "model '{}' has no parameter '{param}' (parameters: {})",
            cfg.model.name,
            known.join(", ")
        )));
    }
    let mut rows = Vec::new();
    for &v in values {
        let mut c = cfg.clone();
        c.model.params.insert(param.to_string(), v);
        let sub = dir.join(sweep_dir_name(param, v));
        let result = (|| -> Result<Analysis> {
            let (problem, chart) = c.build_model()?;
            let reduction = Reduction::new(Flow::new(&problem, c.integrator), &chart, c.reduction);
            if chart.k() < chart.n() {
                if let Ok(d) = reduction.complement_operator(chart.h0()) {
                    let entries: Vec<String> = d.matrix.iter().map(|x| format!("{x:.12e}")).collect();
                    println!("{param} = {v}: complement operator D(h0) = [{}]", entries.join(", "));
                }
            }
            analyze_to_dir(&c, &sub)
        })();
        match result {
            Ok(a) => {
                print!("{param} = {v}: {}", summarize(&a));
                rows.extend(summary_rows(v, &a));
                if a.report.verdict == Verdict::AssumptionFailure {
                    write_summary(&dir, param, &rows)?;
                    eprintln!("sweep aborted at {param} = {v}: assumption failure");
                    return Ok(EXIT_ASSUMPTION);
                }
            }
            Err(e) => {
                write_summary(&dir, param, &rows)?;
                return Err(e);
            }
        }
    }
    write_summary(&dir, param, &rows)?;
    println!("wrote {}", dir.display());
    Ok(EXIT_OK)
}

fn cmd_verify(args: &RunArgs, json: bool) -> Result<i32> {
    let (cfg, dir) = load(args)?;
    let report = run_verify(&cfg)?;
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    write_atomic(&dir.join("verify.json"), &bytes)?;
    if json {
        print!("{}", String::from_utf8_lossy(&bytes));
    } else {
        print!("{}", report.table());
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_VERIFY })
}
