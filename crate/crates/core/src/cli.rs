//! Command-line front end: flat `key = value` config files, flag overrides,
//! and dispatch of every study to artifacts on disk.
//!
//! Config files are TOML restricted to top-level keys; `key: value` lines are
//! accepted as a shorthand for `key = value`. Unknown keys are rejected.
//! Precedence: built-in defaults < config file < command-line flags.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, ErrorClass, Result};
use crate::experiments::{
    crossval_observables, exact_sq_increment, fmt_f64, json_f64, msd_indices, regime_figure,
    scaling_study, spec_echo, verify_suite, write_artifacts, Method, RunManifest, Table,
};
use crate::hierarchy::{
    a_r_recursion, exponent_fixed_point, fixed_point_iterate, r_cap, s_v_recursion,
};
use crate::model::{Boundary, ModelSpec};
use crate::sampler::{estimates, run_chain, McmcConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Exact,
    Sample,
    Scaling,
    Verify,
    Regimes,
    Fixpoint,
    Recursion,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Exact => "exact",
            Command::Sample => "sample",
            Command::Scaling => "scaling",
            Command::Verify => "verify",
            Command::Regimes => "regimes",
            Command::Fixpoint => "fixpoint",
            Command::Recursion => "recursion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Fully resolved configuration. Every field has a documented default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub subcommand: Command,
    // model
    pub t: u32,
    pub n_per_unit: usize,
    pub dim: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub xi: f64,
    pub zeta: f64,
    pub boundary: Boundary,
    // sampler
    pub sweeps: usize,
    pub burn_in: usize,
    pub proposal_scale: f64,
    pub block_move_period: usize,
    pub shift_stride: usize,
    pub chains: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tempering_ladder: Option<Vec<f64>>,
    pub batches: usize,
    // output
    #[serde(with = "seed_repr")]
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
    // studies
    pub t_values: Vec<u32>,
    pub method: Method,
    pub resolution: usize,
    pub fp_c: f64,
    pub fp_d: f64,
    pub iterations: u32,
    pub n_max: usize,
}

impl Default for CliConfig {
    fn default() -> Self {
        let m = McmcConfig::default();
        CliConfig {
            subcommand: Command::Verify,
            t: 8,
            n_per_unit: 4,
            dim: 1,
            alpha: 1.0,
            gamma: 2.0,
            xi: 2.0,
            zeta: 1.0,
            boundary: Boundary::Pinned,
            sweeps: m.sweeps,
            burn_in: m.burn_in,
            proposal_scale: m.proposal_scale,
            block_move_period: m.block_move_period,
            shift_stride: m.shift_stride,
            chains: m.chains,
            tempering_ladder: None,
            batches: m.batches,
            seed: 0,
            out: PathBuf::from("out"),
            format: Format::Csv,
            t_values: (6..=13).collect(),
            method: Method::Exact,
            resolution: 64,
            fp_c: 1.0,
            fp_d: 0.5,
            iterations: 50,
            n_max: 10_000,
        }
    }
}

impl CliConfig {
    pub fn spec(&self) -> Result<ModelSpec> {
        ModelSpec::builder()
            .t(self.t)
            .n_per_unit(self.n_per_unit)
            .dim(self.dim)
            .alpha(self.alpha)
            .gamma(self.gamma)
            .xi(self.xi)
            .zeta(self.zeta)
            .boundary(self.boundary)
            .build()
    }

    pub fn mcmc(&self) -> McmcConfig {
        McmcConfig {
            sweeps: self.sweeps,
            burn_in: self.burn_in,
            proposal_scale: self.proposal_scale,
            block_move_period: self.block_move_period,
            shift_stride: self.shift_stride,
            chains: self.chains,
            seed: self.seed,
            tempering_ladder: self.tempering_ladder.clone(),
            batches: self.batches,
            ..McmcConfig::default()
        }
    }

    /// Flat TOML text that [`parse_config_text`] maps back to `self`.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("flat config serialises")
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serialises")
    }
}

/// TOML integers are `i64`; seeds above `i64::MAX` are written as strings.
mod seed_repr {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&seed.to_string()),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(u64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(|_| de::Error::custom(format!("seed `{t}` is not an unsigned 64-bit integer"))),
        }
    }
}

/// Rewrites `key: value` lines as `key = value` and quotes bare words.
fn normalise(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        let trimmed = line.trim_start();
        let split = if trimmed.starts_with('#') {
            None
        } else if line.contains('=') {
            line.split_once('=')
        } else {
            line.split_once(':')
        };
        match split {
            Some((k, v)) => {
                let v = v.trim();
                let bare = v.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
                    && v.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
                    && !matches!(v, "true" | "false" | "inf" | "nan");
                if bare {
                    let _ = writeln!(out, "{} = \"{v}\"", k.trim_end());
                } else {
                    let _ = writeln!(out, "{} = {v}", k.trim_end());
                }
            }
            None => {
                out.push_str(line);
                out.push('\n');
            }
        }
    }
    out
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// 1-based line where `key` is assigned, or 0 if absent.
fn line_of_key(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .map(|rest| rest.trim_start().starts_with(['=', ':']))
                .unwrap_or(false)
        })
        .map(|i| i + 1)
        .unwrap_or(0)
}

fn parse_table(text: &str) -> Result<toml::Table> {
    let norm = normalise(text);
    let table: toml::Table = toml::from_str(&norm).map_err(|e| Error::Config {
        line: e.span().map(|s| line_of_offset(&norm, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    for (k, v) in &table {
        if v.is_table() {
            return Err(Error::Config {
                line: line_of_key(text, k),
                message: format!("`{k}`: nested tables are not allowed"),
            });
        }
    }
    Ok(table)
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        base.insert(k, v);
    }
}

fn resolve(table: toml::Table, text: &str) -> Result<CliConfig> {
    let cfg: CliConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| {
        let msg = e.message().to_string();
        let key = msg
            .split('`')
            .nth(1)
            .map(|k| line_of_key(text, k))
            .unwrap_or(0);
        Error::Config { line: key, message: msg }
    })?;
    validate(&cfg, text)?;
    Ok(cfg)
}

/// Checks every model and sampler invariant, pointing at the offending line.
pub fn validate(cfg: &CliConfig, text: &str) -> Result<()> {
    let located = |field: &str, message: String| Error::Config {
        line: line_of_key(text, field),
        message: format!("{field}: {message}"),
    };
    match cfg.spec() {
        Err(Error::InvalidSpec { field, message }) => return Err(located(field, message)),
        Err(e) => return Err(e),
        Ok(_) => {}
    }
    match cfg.mcmc().validate() {
        Err(Error::InvalidSpec { field, message }) => return Err(located(field, message)),
        Err(e) => return Err(e),
        Ok(()) => {}
    }
    if cfg.subcommand == Command::Exact && cfg.gamma != 2.0 {
        return Err(located("gamma", format!("exact solves need gamma = 2, got {}", cfg.gamma)));
    }
    Ok(())
}

/// Parses config text (no flags).
pub fn parse_config_text(text: &str) -> Result<CliConfig> {
    let table = parse_table(text)?;
    resolve(table, text)
}

/// Model, sampler and output flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Config file (flat `key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub t: Option<u32>,
    #[arg(long, global = true)]
    pub n_per_unit: Option<usize>,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub xi: Option<f64>,
    #[arg(long, global = true)]
    pub zeta: Option<f64>,
    #[arg(long, global = true)]
    pub boundary: Option<String>,
    #[arg(long, global = true)]
    pub sweeps: Option<usize>,
    #[arg(long, global = true)]
    pub burn_in: Option<usize>,
    #[arg(long, global = true)]
    pub proposal_scale: Option<f64>,
    #[arg(long, global = true)]
    pub block_move_period: Option<usize>,
    #[arg(long, global = true)]
    pub shift_stride: Option<usize>,
    #[arg(long, global = true)]
    pub chains: Option<usize>,
    /// Comma-separated coupling multipliers, e.g. `0.25,0.5,1`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub tempering_ladder: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub batches: Option<usize>,
    /// Comma-separated horizon exponents for `scaling`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub t_values: Option<Vec<u32>>,
    #[arg(long, global = true)]
    pub method: Option<String>,
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
    #[arg(long, global = true)]
    pub fp_c: Option<f64>,
    #[arg(long, global = true)]
    pub fp_d: Option<f64>,
    #[arg(long, global = true)]
    pub iterations: Option<u32>,
    #[arg(long, global = true)]
    pub n_max: Option<usize>,
}

impl CommonArgs {
    fn overrides(&self) -> toml::Table {
        let mut t = toml::Table::new();
        macro_rules! put {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f {
                    t.insert(stringify!($f).into(), toml::Value::try_from(v.clone()).expect("flag value"));
                }
            )*};
        }
        put!(
            t_values, tempering_ladder, t, n_per_unit, dim, alpha, gamma, xi, zeta, boundary,
            sweeps, burn_in, proposal_scale, block_move_period, shift_stride, chains, batches,
            method, resolution, fp_c, fp_d, iterations, n_max
        );
        if let Some(seed) = self.seed {
            let v = i64::try_from(seed).map(toml::Value::Integer).unwrap_or_else(|_| toml::Value::String(seed.to_string()));
            t.insert("seed".into(), v);
        }
        if let Some(o) = &self.out {
            t.insert("out".into(), toml::Value::String(o.display().to_string()));
        }
        if let Some(f) = self.format {
            t.insert("format".into(), toml::Value::String(match f {
                Format::Csv => "csv".into(),
                Format::Json => "json".into(),
            }));
        }
        t
    }
}

#[derive(Debug, Parser)]
#[command(name = "subdiff", version, about = "Self-interacting Brownian paths with long-range kernels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum CliCommand {
    /// Exact Gaussian values (gamma = 2).
    Exact,
    /// MCMC run with default observables.
    Sample,
    /// s_T across horizons and a log-log fit.
    Scaling,
    /// Property suite with per-check pass/fail.
    Verify,
    /// Regime labels on a (gamma, xi) grid.
    Regimes,
    /// Iterates of h(x) = C + d x and the exponent-map fixed point.
    Fixpoint,
    /// The A/r and S/V recursions.
    Recursion,
}

impl From<CliCommand> for Command {
    fn from(c: CliCommand) -> Self {
        match c {
            CliCommand::Exact => Command::Exact,
            CliCommand::Sample => Command::Sample,
            CliCommand::Scaling => Command::Scaling,
            CliCommand::Verify => Command::Verify,
            CliCommand::Regimes => Command::Regimes,
            CliCommand::Fixpoint => Command::Fixpoint,
            CliCommand::Recursion => Command::Recursion,
        }
    }
}

/// Defaults, then the config file, then flags.
pub fn parse_config(cli: &Cli) -> Result<CliConfig> {
    let text = match &cli.common.config {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::Config {
            line: 0,
            message: format!("cannot read {}: {e}", p.display()),
        })?,
        None => String::new(),
    };
    let mut table = parse_table(&text)?;
    merge(&mut table, cli.common.overrides());
    table.insert(
        "subcommand".into(),
        toml::Value::String(Command::from(cli.command).as_str().into()),
    );
    resolve(table, &text)
}

/// Result of a dispatched command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub summary: Value,
    pub artifacts: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

pub fn exit_code_for(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Config => EXIT_CONFIG,
        ErrorClass::Numeric => EXIT_NUMERIC,
    }
}

fn versioned_csv(table: &Table) -> String {
    format!("# subdiff {}\n{}", env!("CARGO_PKG_VERSION"), table.to_csv())
}

fn emit(cfg: &CliConfig, spec: Option<&ModelSpec>, table: Option<Table>, mut summary: Value, pass: bool) -> Result<Outcome> {
    summary["version"] = json!(env!("CARGO_PKG_VERSION"));
    summary["subcommand"] = json!(cfg.subcommand.as_str());
    summary["pass"] = json!(pass);
    let mut manifest = RunManifest::new(cfg.to_json(), cfg.seed, spec.map(spec_echo).unwrap_or(Value::Null));
    let csv = match (cfg.format, &table) {
        (Format::Csv, Some(t)) => Some(versioned_csv(t)),
        _ => None,
    };
    manifest.finish();
    let artifacts = write_artifacts(FsPath::new(&cfg.out), cfg.subcommand.as_str(), csv.as_deref(), &summary, &manifest)?;
    Ok(Outcome { pass, summary, artifacts })
}

pub fn dispatch(cfg: &CliConfig) -> Result<Outcome> {
    match cfg.subcommand {
        Command::Exact => run_exact(cfg),
        Command::Sample => run_sample(cfg),
        Command::Scaling => run_scaling(cfg),
        Command::Verify => run_verify(cfg),
        Command::Regimes => run_regimes(cfg),
        Command::Fixpoint => run_fixpoint(cfg),
        Command::Recursion => run_recursion(cfg),
    }
}

fn run_exact(cfg: &CliConfig) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let mut table = Table::new(&["observable", "m", "n", "value"]);
    let mut values = serde_json::Map::new();
    for o in crossval_observables(&spec) {
        let (m, n) = match o {
            crate::sampler::Observable::SqIncrement { m, n } => (m, n),
            _ => msd_indices(&spec),
        };
        let v = exact_sq_increment(&spec, m, n)?;
        table.push(vec![o.label(), m.to_string(), n.to_string(), fmt_f64(v)]);
        values.insert(o.label(), json_f64(v));
    }
    emit(cfg, Some(&spec), Some(table), json!({ "values": values }), true)
}

fn run_sample(cfg: &CliConfig) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let mcmc = cfg.mcmc();
    let run = run_chain(&spec, &mcmc)?;
    let est = estimates(&run, mcmc.batches)?;
    let mut table = Table::new(&["observable", "mean", "std_error", "n_effective", "iat"]);
    let mut rows = Vec::new();
    for (o, e) in run.observables.iter().zip(&est) {
        table.push(vec![o.label(), fmt_f64(e.mean), fmt_f64(e.std_error), fmt_f64(e.n_effective), fmt_f64(e.iat)]);
        rows.push(json!({
            "observable": o.label(),
            "mean": json_f64(e.mean),
            "std_error": json_f64(e.std_error),
            "n_effective": json_f64(e.n_effective),
            "iat": json_f64(e.iat),
        }));
    }
    let d = &run.diagnostics;
    let summary = json!({
        "estimates": rows,
        "diagnostics": {
            "acceptance_site": json_f64(d.acceptance.site),
            "acceptance_shift": d.acceptance.shift.map(json_f64),
            "acceptance_swap": d.acceptance.swap.map(json_f64),
            "effective_samples": json_f64(d.effective_samples),
            "retained_samples": d.retained_samples,
            "batch_count": d.batch_count,
            "energy_drift": json_f64(d.energy_drift),
        },
    });
    emit(cfg, Some(&spec), Some(table), summary, true)
}

fn run_scaling(cfg: &CliConfig) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let fit = scaling_study(&spec, &cfg.t_values, cfg.method, &cfg.mcmc())?;
    let prediction = (cfg.xi - 2.0).clamp(0.0, 1.0);
    let subdiffusive_expected = cfg.alpha > 0.0 && cfg.gamma == 2.0 && cfg.xi < 3.0;
    let hard_fail = subdiffusive_expected && fit.slope >= 0.95;
    let summary = json!({
        "slope": json_f64(fit.slope),
        "slope_se": json_f64(fit.slope_se),
        "intercept": json_f64(fit.intercept),
        "r_squared": json_f64(fit.r_squared),
        "gaussian_prediction": json_f64(prediction),
        "within_band": (fit.slope - prediction).abs() <= 0.3,
        "subdiffusive": !hard_fail,
        "warnings": fit.warnings,
    });
    emit(cfg, Some(&spec), Some(fit.table()), summary, !hard_fail)
}

fn run_verify(cfg: &CliConfig) -> Result<Outcome> {
    let report = verify_suite(cfg.seed)?;
    let mut table = Table::new(&["check", "pass", "detail"]);
    let mut checks = serde_json::Map::new();
    for c in &report.checks {
        table.push(vec![c.name.clone(), c.pass.to_string(), format!("\"{}\"", c.detail.replace('"', "'"))]);
        checks.insert(c.name.clone(), json!(c.pass));
    }
    let details: Vec<Value> = report.checks.iter().map(|c| json!({"check": c.name, "detail": c.detail})).collect();
    emit(cfg, None, Some(table), json!({ "checks": checks, "details": details }), report.pass)
}

fn run_regimes(cfg: &CliConfig) -> Result<Outcome> {
    let grid = regime_figure(cfg.resolution)?;
    let mut table = Table::new(&["gamma", "xi", "label"]);
    for c in &grid.cells {
        table.push(vec![fmt_f64(c.gamma), fmt_f64(c.xi), c.label.to_string()]);
    }
    let mut summary = json!({ "resolution": grid.resolution, "metadata": grid.metadata });
    if cfg.format == Format::Json {
        summary["cells"] = serde_json::to_value(&grid.cells)?;
    }
    emit(cfg, None, Some(table), summary, true)
}

fn run_fixpoint(cfg: &CliConfig) -> Result<Outcome> {
    let mut table = Table::new(&["n", "value", "error", "stated_bound"]);
    for n in 0..=cfg.iterations {
        let r = fixed_point_iterate(cfg.fp_c, cfg.fp_d, n)?;
        table.push(vec![n.to_string(), fmt_f64(r.value), fmt_f64(r.error), fmt_f64(r.stated_bound)]);
    }
    let last = fixed_point_iterate(cfg.fp_c, cfg.fp_d, cfg.iterations)?;
    let beta = exponent_fixed_point(cfg.gamma, cfg.xi).ok();
    let summary = json!({
        "fixed_point": json_f64(last.fixed_point),
        "final_value": json_f64(last.value),
        "final_error": json_f64(last.error),
        "stated_bound": json_f64(last.stated_bound),
        "bound_applies": last.bound_applies,
        "bound_holds": last.bound_holds,
        "exponent_fixed_point": beta.map(json_f64),
    });
    emit(cfg, None, Some(table), summary, true)
}

fn run_recursion(cfg: &CliConfig) -> Result<Outcome> {
    let horizon = (1u64 << cfg.t) as f64;
    let mut table = Table::new(&["sequence", "index", "value"]);
    let mut summary = serde_json::Map::new();
    let mut ran = false;
    let mut pass = true;
    if cfg.gamma < 2.0 {
        let st = a_r_recursion(cfg.gamma, cfg.xi, cfg.n_max)?;
        for (n, (a, r)) in st.a_seq.iter().zip(&st.r_seq).enumerate() {
            table.push(vec!["A".into(), n.to_string(), fmt_f64(*a)]);
            table.push(vec!["r".into(), n.to_string(), fmt_f64(*r)]);
        }
        let cap = r_cap(cfg.gamma, cfg.xi).ok();
        let max_r = st.r_seq.iter().copied().fold(0.0, f64::max);
        if let Some(c) = cap {
            pass &= !st.overflow && max_r <= c;
        }
        summary.insert("a_r".into(), json!({
            "steps": st.a_seq.len(),
            "max_r": json_f64(max_r),
            "cap": cap.map(json_f64),
            "overflow": st.overflow,
        }));
        ran = true;
    }
    if let Ok(st) = s_v_recursion(cfg.gamma, cfg.xi, horizon, cfg.iterations as usize) {
        for (j, e) in st.exponent_trace.iter().enumerate() {
            table.push(vec!["log_T S".into(), j.to_string(), fmt_f64(*e)]);
        }
        summary.insert("s_v".into(), json!({
            "horizon": json_f64(horizon),
            "c_of_t": st.c_of_t.map(json_f64),
            "d_of_t": st.d_of_t.map(json_f64),
            "exponent_fixed_point": st.exponent_fixed_point.map(json_f64),
            "printed_limit": st.printed_limit.map(json_f64),
            "final_exponent": st.exponent_trace.last().copied().map(json_f64),
        }));
        ran = true;
    }
    if !ran {
        return Err(Error::OutOfRange(format!(
            "no recursion applies: the A/r recursion needs gamma in (0, 2) and the S/V recursion \
             needs xi in (2, 2 + gamma/2); got gamma = {}, xi = {}",
            cfg.gamma, cfg.xi
        )));
    }
    emit(cfg, None, Some(table), Value::Object(summary), pass)
}

/// Parses arguments, runs, prints a one-line summary, and returns the exit code.
pub fn run(args: impl IntoIterator<Item = String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let cfg = match parse_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    match dispatch(&cfg) {
        Ok(out) => {
            println!(
                "{}: {} ({} artifacts in {})",
                cfg.subcommand.as_str(),
                if out.pass { "pass" } else { "FAIL" },
                out.artifacts.len(),
                cfg.out.display()
            );
            out.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
