use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use log::info;
use scca_core::config::RunConfig;
use scca_core::experiment::{cmd_all, cmd_evaluate, cmd_lasso_validate, cmd_preprocess, cmd_train};
use scca_core::model::ModelRegistry;
use scca_core::Error;

/// Sparse CCA mate-retrieval experiments.
#[derive(Debug, Parser)]
#[command(name = "scca", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the run seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the number of projections.
    #[arg(long, global = true)]
    d_max: Option<usize>,

    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read or generate the corpus and draw the splits.
    Preprocess,
    /// Fit every configured model on every repeat.
    Train,
    /// Mate retrieval and sparsity per model and projection count.
    Evaluate,
    /// Leave-one-out selection ratios of the LASSO reduction.
    LassoValidate,
    /// All of the above in order.
    All,
}

fn load_config(cli: &Cli) -> scca_core::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(d) = cli.d_max {
        cfg.deflation.d_max = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli)?;
    let registry = ModelRegistry::default();
    info!("config {} seed {}", cfg.hash(), cfg.seed);
    match cli.command {
        Command::Preprocess => cmd_preprocess(&cfg).context("preprocess")?,
        Command::Train => {
            let results = cmd_train(&cfg, &registry).context("train")?;
            let failed = results.iter().flat_map(|r| &r.models).filter(|m| !m.ok).count();
            if failed > 0 {
                log::warn!("{failed} model fits failed; see the train manifest");
            }
        }
        Command::Evaluate => {
            cmd_evaluate(&cfg, &registry).context("evaluate")?;
        }
        Command::LassoValidate => {
            cmd_lasso_validate(&cfg).context("lasso-validate")?;
        }
        Command::All => {
            cmd_all(&cfg, &registry).context("all")?;
        }
    }
    Ok(())
}

/// One line: `error: <kind>: <message chain>`.
fn error_line(err: &anyhow::Error) -> String {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<Error>())
        .map_or("other", Error::kind);
    let msg = err
        .chain()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join(": ")
        .replace('\n', " ");
    format!("error: {kind}: {msg}")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}
