//! Run configuration: flags, an optional TOML file, and their resolution.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every configurable field. The same keys are accepted on the command line
/// (`--key`) and in a TOML config file (`key = value`); flags win.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    /// TOML file with default values for any of the other flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Model: mfp, k, gfp, fat or truncated.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Retention probability of mfp; `enumerate` also accepts a fraction like 1/3.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<String>,
    /// Retained children per cube (k-model, m-good threshold).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    /// Mandelbrot parameter of the m-good recursion and the truncated model.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    /// Child-count law: constant:K, binomial:P or pmf:y=w,y=w,...
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    /// Level-dependent retention `p1,p2,...;TAIL` with TAIL one of const:V,
    /// geometric-complement:C:Q (p_n = 1 - C Q^n) or power-complement:C:ALPHA
    /// (p_n = 1 - C n^-ALPHA). The prefix is optional.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<String>,

    /// Subdivision base N.
    #[arg(long = "N")]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub base: Option<u32>,
    /// Dimension d (default 2).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    /// Depth n of the construction.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    /// Monte Carlo replicates (default 1000).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<u64>,
    /// Master seed; falls back to FRACPERC_SEED, then 0.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Crossing direction, 1..=d (default 1).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<usize>,
    /// Result file; the resolved config is written next to it.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Output format: csv or json for results, binary or json for grids.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    /// Worker threads for replicate loops.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,

    /// kc-search: a k counts as critical once its estimate exceeds this.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// site-perc: side M of the box.
    #[arg(long = "M")]
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub side: Option<u64>,
    /// site-perc: comma list of p values or START:STOP:STEP.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_grid: Option<String>,
    /// good-prob: last index of the recursion.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    /// nu-good-check: minimum number of witness cubes per cube edge.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<u32>,
    /// Truncation level of the dominating process.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_trunc: Option<u32>,
    /// schedule-products: number of levels of partial products.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u32>,
    /// schedule-products: distance from a convergence boundary reported as undetermined.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_tol: Option<f64>,
    /// gamma-prob: rational point `x1,x2`, e.g. 1/2,1/2.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<String>,
    /// gamma-prob: strip width is 1/(4 n_x).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_x: Option<u64>,
    /// Grid file to analyze instead of sampling one.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// render: colour retained cells by cluster.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub color_clusters: Option<bool>,
}

/// Keys each subcommand accepts, beyond `output`, `format`, `jobs` and `seed`.
pub fn schema(command: &str) -> &'static [&'static str] {
    const MODEL: [&str; 7] = ["model", "p", "k", "p0", "generator", "schedule", "m_trunc"];
    match command {
        "sample" => &["model", "p", "k", "p0", "generator", "schedule", "m_trunc", "N", "d", "n"],
        "crossing-prob" => &["model", "p", "k", "p0", "generator", "schedule", "m_trunc", "N", "d", "n", "replicates", "axis"],
        "kc-search" => &["N", "d", "n", "replicates", "threshold"],
        "site-perc" => &["d", "M", "replicates", "p_grid"],
        "good-prob" => &["p0", "generator", "k", "N", "d", "m"],
        "nu-good-check" => &["model", "p", "k", "p0", "generator", "schedule", "m_trunc", "N", "d", "n", "u", "input"],
        "coupling-check" => &["p0", "k", "N", "d", "n", "m_trunc", "replicates"],
        "fat-stats" => &["schedule", "N", "d", "n", "replicates"],
        "schedule-products" => &["schedule", "N", "d", "horizon", "tail_tol"],
        "gamma-prob" => &["schedule", "N", "d", "n", "x", "n_x", "replicates"],
        "enumerate" => &["model", "p", "k", "generator", "schedule", "N", "d", "n"],
        "render" => &["model", "p", "k", "p0", "generator", "schedule", "m_trunc", "N", "d", "n", "input", "color_clusters"],
        _ => &MODEL,
    }
}

const COMMON: [&str; 4] = ["output", "format", "jobs", "seed"];

/// Values filled in when neither the file nor the flags give one.
fn defaults(command: &str) -> Vec<(&'static str, toml::Value)> {
    use toml::Value;
    let format = match command {
        "sample" => "binary",
        "render" => "ppm",
        "enumerate" => "json",
        _ => "csv",
    };
    vec![
        ("format", Value::String(format.into())),
        ("d", Value::Integer(2)),
        ("replicates", Value::Integer(1000)),
        ("axis", Value::Integer(1)),
        ("threshold", Value::Float(0.5)),
        ("horizon", Value::Integer(20)),
        ("tail_tol", Value::Float(1e-9)),
        ("p_grid", Value::String("0.55:0.65:0.005".into())),
        ("u", Value::Integer(1)),
        ("color_clusters", Value::Boolean(false)),
    ]
}

fn to_table(flags: &Flags) -> Result<toml::Table, CliError> {
    toml::Table::try_from(flags).map_err(|e| CliError::Usage(format!("config: {e}")))
}

fn read_file(path: &Path) -> Result<toml::Table, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))?;
    // Reject unknown keys with the field name.
    Flags::deserialize(table.clone()).map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))?;
    Ok(table)
}

/// Merges file and flags, checks the keys against the subcommand and fills
/// defaults (`d = 2`, the seed fallback). The result is what gets echoed.
pub fn resolve(command: &str, flags: &Flags) -> Result<Flags, CliError> {
    let mut table = match &flags.config {
        Some(path) => read_file(path)?,
        None => toml::Table::new(),
    };
    table.extend(to_table(flags)?);
    let allowed = schema(command);
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) && !COMMON.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("field `{key}` is not used by `{command}`")));
        }
    }
    for (key, value) in defaults(command) {
        if allowed.contains(&key) || COMMON.contains(&key) {
            table.entry(key).or_insert(value);
        }
    }
    let mut resolved = Flags::deserialize(table).map_err(|e| CliError::Usage(format!("config: {e}")))?;
    if resolved.seed.is_none() {
        resolved.seed = Some(match std::env::var("FRACPERC_SEED") {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("FRACPERC_SEED=`{s}` is not an unsigned integer")))?,
            Err(_) => 0,
        });
    }
    Ok(resolved)
}

/// TOML text of the resolved configuration, loadable with `--config`.
pub fn echo(command: &str, resolved: &Flags) -> Result<String, CliError> {
    let body = toml::to_string(resolved).map_err(|e| CliError::Runtime(format!("config echo: {e}")))?;
    Ok(format!("# fracperc {command}\n{body}"))
}

impl Flags {
    pub fn require<T: Clone>(value: &Option<T>, name: &str) -> Result<T, CliError> {
        value.clone().ok_or_else(|| CliError::Usage(format!("missing required field `{name}`")))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn dim(&self) -> u32 {
        self.d.unwrap_or(2)
    }

    pub fn replicates(&self) -> u64 {
        self.replicates.unwrap_or(1000)
    }
}
