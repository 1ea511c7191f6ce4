//! Command-line driver: layered configuration, run directories with
//! manifests, and model persistence around the `wahkon` library.

pub mod commands;
pub mod config;
pub mod error;
pub mod model_file;

use std::path::PathBuf;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "wahkon", version, about = "Deep RKHS superposition networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML file overriding the built-in defaults.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the configured `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Parent directory of the run directory.
    #[arg(long, value_name = "DIR", default_value = "runs")]
    pub out: PathBuf,
    /// Override one config key, e.g. `--set train.max_steps=100`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a CSV of features followed by the response.
    Train {
        #[arg(long, value_name = "CSV")]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Predict with a saved model; writes a `yhat` column.
    Predict {
        #[arg(long, value_name = "JSON")]
        model: PathBuf,
        #[arg(long, value_name = "CSV")]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Sample-size sweep over a synthetic benchmark.
    Benchmark {
        #[command(flatten)]
        common: Common,
    },
    /// Profile versus direct optimization of the same network.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Bayesian optimization of the last-layer penalty.
    Tune {
        #[arg(long, value_name = "CSV")]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Prior sampling and Mahalanobis diagnostics.
    Prior {
        #[command(flatten)]
        common: Common,
    },
}

/// Config sections each command reads.
const SECTIONS: &[(&str, &[&str])] = &[
    ("train", &["train", "model", "bo"]),
    ("predict", &[]),
    ("benchmark", &["benchmark", "train", "model", "bo"]),
    ("compare", &["compare", "train", "model"]),
    ("tune", &["train", "model", "bo"]),
    ("prior", &["prior"]),
];

/// Parses the process arguments, with per-command key listings in `--help`.
pub fn parse_args() -> Cli {
    let mut cmd = Cli::command();
    for (name, sections) in SECTIONS {
        cmd = cmd.mut_subcommand(*name, |c| c.after_help(config::help_listing(sections)));
    }
    let matches = cmd.get_matches();
    Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit())
}

/// Runs one command and returns its run directory.
pub fn run(cli: &Cli) -> Result<PathBuf, CliError> {
    let common = match &cli.command {
        Command::Train { common, .. }
        | Command::Predict { common, .. }
        | Command::Benchmark { common }
        | Command::Compare { common }
        | Command::Tune { common, .. }
        | Command::Prior { common } => common,
    };
    let cfg = config::resolve(common.config.as_deref(), &common.sets, common.seed)?;
    let out = &common.out;
    match &cli.command {
        Command::Train { data, .. } => commands::train(&cfg, data, out),
        Command::Predict { model, data, .. } => commands::predict_cmd(&cfg, model, data, out),
        Command::Benchmark { .. } => commands::benchmark(&cfg, out),
        Command::Compare { .. } => commands::compare(&cfg, out),
        Command::Tune { data, .. } => commands::tune(&cfg, data, out),
        Command::Prior { .. } => commands::prior(&cfg, out),
    }
}
