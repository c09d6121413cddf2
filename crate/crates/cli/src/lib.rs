//! The `fracperc` command line: argument and config parsing, one subcommand
//! per estimator, and deterministic result files.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod render;

pub use config::Flags;

const SCHEDULE_GRAMMAR: &str = "\
Retention schedules: `p1,p2,...;TAIL` where the optional prefix gives p_1, p_2, ...
explicitly and TAIL covers every later level:
  const:V                    p_n = V
  geometric-complement:C:Q   p_n = 1 - C * Q^n
  power-complement:C:ALPHA   p_n = 1 - C * n^(-ALPHA)
Example: --schedule '0.5,0.8;geometric-complement:0.5:0.5'.

Child-count laws (--generator): constant:K, binomial:P, or pmf:y=w,y=w,...

Every flag can also be set as `key = value` in a TOML file passed with --config;
flags override the file. The resolved configuration is written to
`<output>.config.toml` (or to stderr without --output) and can be fed back with
--config to reproduce the run. FRACPERC_SEED supplies the seed when neither
gives one.";

#[derive(Debug, Parser)]
#[command(name = "fracperc", version, about = "Fractal percolation simulation and exact analysis", after_long_help = SCHEDULE_GRAMMAR)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample one realization and write it as a grid file.
    Sample(#[command(flatten)] Flags),
    /// Monte Carlo crossing probability of a model.
    CrossingProb(#[command(flatten)] Flags),
    /// Crossing curve of the k-model over k = 1..N^d and its critical k.
    KcSearch(#[command(flatten)] Flags),
    /// Site percolation crossing curve on a box of side M.
    SitePerc(#[command(flatten)] Flags),
    /// Probabilities of the m-good events from their recursion.
    GoodProb(#[command(flatten)] Flags),
    /// Run the (n,u)-goodness procedure on a sampled or loaded grid.
    NuGoodCheck(#[command(flatten)] Flags),
    /// Check containment and the child-count law of the coupled pair.
    CouplingCheck(#[command(flatten)] Flags),
    /// Level statistics of the fat fractal over replicates.
    #[command(after_long_help = SCHEDULE_GRAMMAR)]
    FatStats(#[command(flatten)] Flags),
    /// Partial products of a retention schedule and their limits.
    #[command(after_long_help = SCHEDULE_GRAMMAR)]
    ScheduleProducts(#[command(flatten)] Flags),
    /// Probability of the four-strip crossing event around a point.
    #[command(after_long_help = SCHEDULE_GRAMMAR)]
    GammaProb(#[command(flatten)] Flags),
    /// Exact crossing probability by enumerating retained trees.
    Enumerate(#[command(flatten)] Flags),
    /// Draw a planar realization as a binary PPM image.
    Render(#[command(flatten)] Flags),
}

impl Command {
    pub fn parts(&self) -> (&'static str, &Flags) {
        match self {
            Command::Sample(f) => ("sample", f),
            Command::CrossingProb(f) => ("crossing-prob", f),
            Command::KcSearch(f) => ("kc-search", f),
            Command::SitePerc(f) => ("site-perc", f),
            Command::GoodProb(f) => ("good-prob", f),
            Command::NuGoodCheck(f) => ("nu-good-check", f),
            Command::CouplingCheck(f) => ("coupling-check", f),
            Command::FatStats(f) => ("fat-stats", f),
            Command::ScheduleProducts(f) => ("schedule-products", f),
            Command::GammaProb(f) => ("gamma-prob", f),
            Command::Enumerate(f) => ("enumerate", f),
            Command::Render(f) => ("render", f),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments or configuration; exit code 1.
    #[error("{0}")]
    Usage(String),
    /// Failure while running or writing results; exit code 2.
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Core(#[from] fracperc_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use fracperc_core::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Core(E::Parameter(_) | E::UnsupportedDimension { .. } | E::TooManyConfigurations { .. }) => 1,
            CliError::Core(_) => 2,
        }
    }
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn sidecar(path: &std::path::Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".config.toml");
    PathBuf::from(s)
}

fn execute(command: &Command) -> Result<(), CliError> {
    let (name, flags) = command.parts();
    let cfg = config::resolve(name, flags)?;
    let echo = config::echo(name, &cfg)?;
    commands::check_format(name, &cfg)?;
    let file = match &cfg.output {
        Some(path) => Some(
            std::fs::File::create(path).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?,
        ),
        None => None,
    };
    let bytes = match cfg.jobs {
        Some(0) => return Err(CliError::Usage("field `jobs` must be at least 1".into())),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?
            .install(|| commands::dispatch(name, &cfg))?,
        None => commands::dispatch(name, &cfg)?,
    };
    match (file, &cfg.output) {
        (Some(mut f), Some(path)) => {
            f.write_all(&bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
            let side = sidecar(path);
            std::fs::write(&side, echo).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", side.display())))?;
        }
        _ => {
            std::io::stdout().write_all(&bytes).map_err(|e| CliError::Runtime(format!("stdout: {e}")))?;
            eprint!("{echo}");
        }
    }
    Ok(())
}
