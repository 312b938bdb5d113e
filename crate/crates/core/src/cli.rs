//! Command-line front end: `run`, `sweep` and `verify`.
//!
//! Exit codes: 0 success, 2 unreadable or unparsable input, 3 invalid
//! configuration, 4 simulation failure, 5 verification failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::scenarios::report::{csv, jsonl, non_increasing};
use crate::scenarios::{render, run_scenario, ScenarioConfig, ScenarioRun};

pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;
pub const EXIT_VERIFY: i32 = 5;

/// Environment variable holding the worker count; unset means sequential.
pub const WORKERS_ENV: &str = "QFRAMES_WORKERS";

/// Sweep key that replaces the mass list by a single mass.
pub const MASS_KEY: &str = "center_of_mass.mass";

const PROBABILITY_TOL: f64 = 1e-8;
const MATRIX_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "qframes", version, about = "Run and check composite-system frame scenarios")]
pub struct Cli {
    /// Overrides the seed of the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario config.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `key=value` override with a dotted key, e.g. `time.dt=0.001`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run a config once per value of a numeric key.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recheck the invariants of stored reports.
    Verify { dir: PathBuf },
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_) => EXIT_INVALID,
            _ => EXIT_RUNTIME,
        };
        CliError::new(code, e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub label: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub reports: Vec<OutputFile>,
    pub tables: Vec<OutputFile>,
    pub timings: Vec<Timing>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Diagnostics go to stderr.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(msg) => {
            if !msg.is_empty() {
                println!("{msg}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<String> {
    match &cli.command {
        Command::Run { config, out, set } => cmd_run(config, out, set, cli.seed),
        Command::Sweep { config, param, values, out } => cmd_sweep(config, param, values, out, cli.seed),
        Command::Verify { dir } => cmd_verify(dir),
    }
}

fn read_config(path: &Path) -> CliResult<String> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new(EXIT_PARSE, format!("cannot read {}: {e}", path.display())))?;
    ScenarioConfig::from_toml(&text)
        .map_err(|e| CliError::new(EXIT_PARSE, format!("cannot parse {}: {e}", path.display())))?;
    Ok(text)
}

/// Parses text that has been through overrides; failures here are the
/// override's fault, so they count as validation errors.
fn effective_config(text: &str, seed: Option<u64>) -> CliResult<ScenarioConfig> {
    let mut cfg = ScenarioConfig::from_toml(text)
        .map_err(|e| CliError::new(EXIT_INVALID, format!("invalid configuration after overrides: {e}")))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn config_hash(cfg: &ScenarioConfig) -> String {
    ScenarioConfig::canonical_hash(&cfg.to_toml()).expect("serialised config parses")
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(dir: &Path, name: &str, text: &str) -> CliResult<OutputFile> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::new(EXIT_RUNTIME, format!("cannot write {}: {e}", path.display())))?;
    Ok(OutputFile { path: name.to_string(), sha256: sha256_hex(text.as_bytes()) })
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::new(EXIT_RUNTIME, format!("cannot create {}: {e}", dir.display())))
}

fn worker_pool() -> CliResult<rayon::ThreadPool> {
    let n = match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::new(EXIT_INVALID, format!("{WORKERS_ENV} must be a positive integer, got `{v}`")))?,
        Err(_) => 1,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::new(EXIT_RUNTIME, e.to_string()))
}

fn write_manifest(out: &Path, manifest: &RunManifest) -> CliResult<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serialises") + "\n";
    write_file(out, "manifest.json", &text).map(|_| ())
}

fn split_override(s: &str) -> CliResult<(&str, &str)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| CliError::new(EXIT_PARSE, format!("override `{s}` is not of the form key=value")))
}

pub fn cmd_run(config: &Path, out: &Path, set: &[String], seed: Option<u64>) -> CliResult<String> {
    let mut text = read_config(config)?;
    for s in set {
        let (k, v) = split_override(s)?;
        text = ScenarioConfig::apply_override(&text, k, v)?;
    }
    let cfg = effective_config(&text, seed)?;
    let hash = config_hash(&cfg);
    let pool = worker_pool()?;
    let started = Instant::now();
    let run = pool.install(|| run_scenario(&cfg))?;
    let elapsed = started.elapsed().as_secs_f64();
    create_dir(out)?;
    let name = cfg.scenario.name();
    let rendered = render(&cfg, &run, &hash);
    let report = write_file(out, &format!("{name}.report.jsonl"), &rendered.report)?;
    let tables = rendered
        .tables
        .iter()
        .map(|(suffix, text)| write_file(out, &format!("{name}.{suffix}"), text))
        .collect::<CliResult<Vec<_>>>()?;
    let manifest = RunManifest {
        tool: "qframes".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: hash,
        seeds: vec![cfg.seed],
        reports: vec![report.clone()],
        tables,
        timings: vec![Timing { label: name.into(), seconds: elapsed }],
    };
    write_manifest(out, &manifest)?;
    Ok(format!("wrote {}", out.join(&report.path).display()))
}

/// Whether `key` names a numeric entry of the config document.
fn numeric_key(text: &str, key: &str) -> bool {
    if key == MASS_KEY {
        return true;
    }
    let Ok(doc) = toml::from_str::<toml::Table>(text) else { return false };
    let mut parts = key.split('.').peekable();
    let mut table = &doc;
    while let Some(p) = parts.next() {
        match table.get(p) {
            Some(toml::Value::Table(t)) if parts.peek().is_some() => table = t,
            Some(toml::Value::Integer(_) | toml::Value::Float(_)) if parts.peek().is_none() => return true,
            _ => return false,
        }
    }
    false
}

pub fn cmd_sweep(config: &Path, param: &str, values: &[String], out: &Path, seed: Option<u64>) -> CliResult<String> {
    let text = read_config(config)?;
    if !numeric_key(&text, param) {
        return Err(CliError::new(EXIT_INVALID, format!("unknown sweep key `{param}`")));
    }
    let mut configs = Vec::with_capacity(values.len());
    for v in values {
        let num: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::new(EXIT_INVALID, format!("sweep value `{v}` is not a number")))?;
        let t = if param == MASS_KEY {
            ScenarioConfig::apply_override(&text, "center_of_mass.masses", &format!("[{}]", toml_float(num)))?
        } else {
            ScenarioConfig::apply_override(&text, param, v.trim())?
        };
        configs.push((num, effective_config(&t, seed)?));
    }
    let base_hash = ScenarioConfig::canonical_hash(&text).expect("parsed above");
    let pool = worker_pool()?;
    let runs: Vec<(ScenarioRun, f64)> = pool.install(|| {
        configs
            .par_iter()
            .map(|(_, cfg)| {
                let started = Instant::now();
                run_scenario(cfg).map(|r| (r, started.elapsed().as_secs_f64()))
            })
            .collect::<std::result::Result<Vec<_>, _>>()
    })?;

    create_dir(out)?;
    let mut reports = Vec::new();
    let mut tables = Vec::new();
    let mut timings = Vec::new();
    let mut rows = Vec::new();
    let mut csv_rows = Vec::new();
    for (i, ((value, cfg), (run, secs))) in configs.iter().zip(&runs).enumerate() {
        let name = cfg.scenario.name();
        let rendered = render(cfg, run, &config_hash(cfg));
        reports.push(write_file(out, &format!("{name}.sweep{i}.report.jsonl"), &rendered.report)?);
        for (suffix, t) in &rendered.tables {
            tables.push(write_file(out, &format!("{name}.sweep{i}.{suffix}"), t)?);
        }
        timings.push(Timing { label: format!("sweep{i}"), seconds: *secs });
        match run {
            ScenarioRun::Collision(r) => {
                for p in &r.points {
                    rows.push(serde_json::json!({
                        "value": value, "mass": p.mass, "fidelity_deficit": p.fidelity_deficit,
                        "residual": p.residual, "trace_distance": p.trace_distance,
                    }));
                    csv_rows.push(vec![*value, p.mass, p.fidelity_deficit, p.residual, p.trace_distance]);
                }
            }
            ScenarioRun::Measurement(r) => {
                for p in &r.points {
                    let max_b = p.branches.iter().map(|b| b.b_fidelity_deficit).fold(0.0, f64::max);
                    rows.push(serde_json::json!({
                        "value": value, "mass": p.mass, "frequencies": p.frequencies,
                        "b_fidelity_deficit": max_b, "component_overlap": p.component_overlap,
                    }));
                    csv_rows.push(vec![*value, p.mass, p.frequencies[0], max_b, p.component_overlap]);
                }
            }
        }
    }
    let collision = matches!(runs.first(), Some((ScenarioRun::Collision(_), _)));
    let mut summary = String::new();
    jsonl(
        &mut summary,
        &serde_json::json!({
            "record": "header", "scenario": "sweep", "param": param, "values": values,
            "version": env!("CARGO_PKG_VERSION"), "config_hash": base_hash,
        }),
    );
    let td: Vec<f64> = rows.iter().filter_map(|r| r.get("trace_distance").and_then(Value::as_f64)).collect();
    let mut record = serde_json::json!({ "record": "summary", "param": param, "rows": rows });
    if collision {
        record["trace_distance_non_increasing"] = Value::Bool(non_increasing(&td));
    }
    jsonl(&mut summary, &record);
    reports.push(write_file(out, "sweep.report.jsonl", &summary)?);
    let header: &[&str] = if collision {
        &["value", "mass", "fidelity_deficit", "residual", "trace_distance"]
    } else {
        &["value", "mass", "frequency_0", "b_fidelity_deficit", "component_overlap"]
    };
    tables.push(write_file(out, "sweep.summary.csv", &csv(header, &csv_rows))?);
    let manifest = RunManifest {
        tool: "qframes".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: base_hash,
        seeds: configs.iter().map(|(_, c)| c.seed).collect(),
        reports,
        tables,
        timings,
    };
    write_manifest(out, &manifest)?;
    Ok(format!("wrote {} sweep points to {}", configs.len(), out.display()))
}

fn toml_float(x: f64) -> String {
    let s = format!("{x:?}");
    if s.contains(['.', 'e', 'E']) || s.contains("inf") || s.contains("nan") {
        s
    } else {
        format!("{s}.0")
    }
}

fn verify_fail(msg: impl Into<String>) -> CliError {
    CliError::new(EXIT_VERIFY, msg)
}

fn as_f64_vec(v: &Value) -> Option<Vec<f64>> {
    v.as_array()?.iter().map(Value::as_f64).collect()
}

fn check_probabilities(label: &str, v: &Value) -> CliResult<()> {
    let p = as_f64_vec(v).ok_or_else(|| verify_fail(format!("{label} is not a list of numbers")))?;
    if p.iter().any(|x| *x < -PROBABILITY_TOL) {
        return Err(verify_fail(format!("{label} has a negative entry")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PROBABILITY_TOL {
        return Err(verify_fail(format!("{label} sums to {s}, not 1")));
    }
    Ok(())
}

fn check_density(label: &str, v: &Value) -> CliResult<()> {
    let rows = v.as_array().ok_or_else(|| verify_fail(format!("{label} is not a matrix")))?;
    let n = rows.len();
    let mut m = vec![vec![(0.0, 0.0); n]; n];
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().filter(|r| r.len() == n).ok_or_else(|| verify_fail(format!("{label} is not square")))?;
        for (j, z) in row.iter().enumerate() {
            let z = as_f64_vec(z).filter(|z| z.len() == 2).ok_or_else(|| verify_fail(format!("{label} entry malformed")))?;
            m[i][j] = (z[0], z[1]);
        }
    }
    let mut trace = 0.0;
    for i in 0..n {
        trace += m[i][i].0;
        for j in 0..n {
            let (a, b) = (m[i][j], m[j][i]);
            if (a.0 - b.0).abs() > MATRIX_TOL || (a.1 + b.1).abs() > MATRIX_TOL {
                return Err(verify_fail(format!("{label} is not Hermitian")));
            }
        }
    }
    if (trace - 1.0).abs() > MATRIX_TOL {
        return Err(verify_fail(format!("{label} has trace {trace}")));
    }
    Ok(())
}

fn check_flag(record: &Value, flag: &str, values: &str, rule: fn(&[f64]) -> bool) -> CliResult<()> {
    if let Some(stored) = record.get(flag) {
        let stored = stored.as_bool().ok_or_else(|| verify_fail(format!("{flag} is not a boolean")))?;
        let v = match record.get(values) {
            Some(v) => as_f64_vec(v).ok_or_else(|| verify_fail(format!("{values} is not numeric")))?,
            None => {
                // sweep summaries keep the values inside `rows`
                let rows = record.get("rows").and_then(Value::as_array).ok_or_else(|| verify_fail(format!("{flag} without data")))?;
                rows.iter()
                    .map(|r| r.get(values).and_then(Value::as_f64))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| verify_fail(format!("rows lack {values}")))?
            }
        };
        if rule(&v) != stored {
            return Err(verify_fail(format!("{flag} = {stored} disagrees with the stored {values}")));
        }
    }
    Ok(())
}

fn verify_report(name: &str, text: &str) -> CliResult<usize> {
    let mut points: Vec<Value> = Vec::new();
    let mut records = 0;
    for (ln, line) in text.lines().enumerate() {
        let rec: Value =
            serde_json::from_str(line).map_err(|e| verify_fail(format!("{name}:{}: corrupt record: {e}", ln + 1)))?;
        let kind = rec.get("record").and_then(Value::as_str).unwrap_or("");
        let at = |what: &str| format!("{name}:{} {what}", ln + 1);
        match kind {
            "header" => {}
            "point" => {
                for key in ["probabilities", "frequencies"] {
                    if let Some(v) = rec.get(key) {
                        check_probabilities(&at(key), v)?;
                    }
                }
                if let Some(v) = rec.get("rho_internal") {
                    check_density(&at("rho_internal"), v)?;
                }
                points.push(rec);
            }
            "summary" => {
                check_flag(&rec, "trace_distance_non_increasing", "trace_distance", non_increasing)?;
                check_flag(&rec, "fidelity_deficit_strictly_decreasing", "fidelity_deficit", crate::scenarios::report::strictly_decreasing)?;
                check_flag(&rec, "residual_strictly_decreasing", "residual", crate::scenarios::report::strictly_decreasing)?;
                for key in ["trace_distance", "fidelity_deficit", "residual"] {
                    if let Some(v) = rec.get(key).and_then(as_f64_vec) {
                        let from_points: Vec<f64> = points.iter().filter_map(|p| p.get(key).and_then(Value::as_f64)).collect();
                        if from_points.len() == v.len() && from_points != v {
                            return Err(verify_fail(at(&format!("summary {key} disagrees with the point records"))));
                        }
                    }
                }
                if let Some(rows) = rec.get("rows").and_then(Value::as_array) {
                    for r in rows {
                        if let Some(f) = r.get("frequencies") {
                            check_probabilities(&at("rows.frequencies"), f)?;
                        }
                    }
                }
            }
            other => return Err(verify_fail(at(&format!("unknown record type `{other}`")))),
        }
        records += 1;
    }
    if records == 0 {
        return Err(verify_fail(format!("{name} is empty")));
    }
    Ok(records)
}

pub fn cmd_verify(dir: &Path) -> CliResult<String> {
    let manifest_path = dir.join("manifest.json");
    let has_reports = fs::read_dir(dir)
        .map(|entries| {
            entries.filter_map(|e| e.ok()).any(|e| e.file_name().to_string_lossy().ends_with(".report.jsonl"))
        })
        .unwrap_or(false);
    if !manifest_path.exists() {
        return Err(verify_fail(if has_reports {
            format!("{} has reports but no manifest.json", dir.display())
        } else {
            "no reports found".to_string()
        }));
    }
    let text = fs::read_to_string(&manifest_path).map_err(|e| verify_fail(format!("cannot read manifest: {e}")))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| verify_fail(format!("corrupt manifest: {e}")))?;
    if manifest.reports.is_empty() {
        return Err(verify_fail("no reports found"));
    }
    let mut records = 0;
    for f in manifest.reports.iter().chain(&manifest.tables) {
        let path = dir.join(&f.path);
        let bytes = fs::read(&path).map_err(|e| verify_fail(format!("missing {}: {e}", f.path)))?;
        if sha256_hex(&bytes) != f.sha256 {
            return Err(verify_fail(format!("{} does not match its recorded sha256", f.path)));
        }
    }
    for f in &manifest.reports {
        let text = fs::read_to_string(dir.join(&f.path)).map_err(|e| verify_fail(format!("{}: {e}", f.path)))?;
        records += verify_report(&f.path, &text)?;
    }
    Ok(format!("ok: {} reports, {records} records", manifest.reports.len()))
}
