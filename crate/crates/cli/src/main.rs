//! `tacrule`: learn tactic rules from proof-state corpora and use them to
//! reorder k-NN tactic predictions.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tacrule_core::ilp::modes::Variant;
use thiserror::Error;

use crate::config::Config;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

/// How a command finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    /// Some learning tasks failed or timed out; outputs were still written.
    Partial,
}

#[derive(Debug, Parser)]
#[command(name = "tacrule", version, about = "Rule-filtered tactic prediction")]
struct Cli {
    /// TOML configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Overrides {
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    split: Option<PathBuf>,
    #[arg(long, global = true)]
    oracle: Option<PathBuf>,
    #[arg(long, global = true)]
    rules: Option<PathBuf>,
    #[arg(long, global = true)]
    stats: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true)]
    reports: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    variant: Option<Variant>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Target cluster size.
    #[arg(long, global = true)]
    pos: Option<usize>,
    /// Nearest negatives per positive.
    #[arg(long, global = true)]
    neg: Option<usize>,
    /// Precision threshold for pruning.
    #[arg(long, global = true)]
    qualt: Option<f64>,
    #[arg(long, global = true)]
    max_nodes: Option<usize>,
    #[arg(long, global = true)]
    max_clause_length: Option<usize>,
    /// Per-search time limit in seconds.
    #[arg(long, global = true)]
    timeout: Option<f64>,
    /// Neighbours per tactic in preselection.
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    walk_length: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write each state's facts to `<out>/<id>.pl`.
    Encode,
    /// Relabel states with the first automation tactic closing them.
    Orthogonalize,
    /// Learn rules for every tactic of the training split.
    Train,
    /// Collect per-rule precision on the validation split and drop weak rules.
    Prune,
    /// Rank tactics for states and explain accepted ones.
    Predict {
        /// States to predict for (line-delimited JSON); stdin if absent.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Emit JSON lines instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Evaluate rules and k-NN on the test split.
    Evaluate,
    /// Learn and validate rules over the parameter grid.
    Sweep,
    /// Generate a corpus with planted patterns.
    GenSynthetic,
}

fn effective_config(cli: &Cli) -> Result<Config, CliError> {
    let mut c = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let o = &cli.overrides;
    let p = &mut c.paths;
    for (slot, v) in [
        (&mut p.corpus, &o.corpus),
        (&mut p.split, &o.split),
        (&mut p.oracle, &o.oracle),
        (&mut p.rules, &o.rules),
        (&mut p.stats, &o.stats),
        (&mut p.model, &o.model),
        (&mut p.reports, &o.reports),
        (&mut p.out, &o.out),
    ] {
        if v.is_some() {
            slot.clone_from(v);
        }
    }
    if o.seed.is_some() {
        c.seed = o.seed;
    }
    if let Some(s) = c.seed {
        c.synthetic.seed = s;
    }
    if let Some(v) = o.variant {
        c.variant = v;
    }
    if let Some(w) = o.workers {
        c.workers = w;
    }
    if let Some(v) = o.pos {
        c.selection.pos = v;
    }
    if let Some(v) = o.neg {
        c.selection.neg = v;
    }
    if let Some(v) = o.qualt {
        c.selection.qualt = v;
    }
    if let Some(v) = o.max_nodes {
        c.budget.max_nodes = v;
    }
    if let Some(v) = o.max_clause_length {
        c.budget.max_clause_length = v;
    }
    if let Some(v) = o.timeout {
        c.budget.timeout_secs = v;
    }
    if let Some(v) = o.k {
        c.knn.k = v;
    }
    if let Some(v) = o.walk_length {
        c.knn.walk_length = v;
    }
    c.validate()?;
    Ok(c)
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let config = effective_config(cli)?;
    if cli.print_config {
        print!("{}", config.to_toml());
        return Ok(Outcome::Complete);
    }
    log::debug!("effective configuration:\n{}", config.to_toml());
    if config.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot set up {} workers: {e}", config.workers)))?;
    }
    match &cli.command {
        Command::Encode => commands::encode(&config),
        Command::Orthogonalize => commands::orthogonalize(&config),
        Command::Train => commands::train(&config),
        Command::Prune => commands::prune(&config),
        Command::Predict { input, json } => commands::predict(&config, input.as_deref(), *json),
        Command::Evaluate => commands::evaluate(&config),
        Command::Sweep => commands::sweep(&config),
        Command::GenSynthetic => commands::gen_synthetic(&config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Warn,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        (false, _) => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match run(&cli) {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => {
            log::warn!("finished with failed or timed-out learning tasks");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
