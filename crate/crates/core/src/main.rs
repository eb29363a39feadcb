use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flamelut::experiment::{self, ExperimentConfig, Overrides};
use flamelut::LossMode;

#[derive(Parser)]
#[command(
    name = "flamelut",
    version,
    about = "Lookup-table regression with per-species loss weighting"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed; drives the split, initialization and shuffling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `standard` or `weighted`.
    #[arg(long, global = true, value_parser = parse_loss)]
    loss: Option<LossMode>,
    /// Passes over the training split.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Minibatch size.
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    /// Learning rate.
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Table CSV; the surrogate is generated when absent.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a surrogate table and its profile.
    Generate {
        /// Number of rows.
        #[arg(long)]
        n_points: Option<usize>,
    },
    /// Train one network and score it on the test split.
    Train,
    /// Score a saved network on the test split of `--seed`.
    Eval {
        /// Network file written by `train`.
        #[arg(long)]
        network: PathBuf,
    },
    /// Train standard and weighted networks over several seeds.
    Compare {
        /// Comma-separated seeds, e.g. `1,2,3`.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Print the variance weights of the training split.
    Weights,
}

fn parse_loss(s: &str) -> Result<LossMode, String> {
    s.parse().map_err(|e: flamelut::Error| e.to_string())
}

fn run(cli: Cli) -> flamelut::Result<()> {
    let mut cfg = match &cli.common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let mut overrides = Overrides {
        seed: cli.common.seed,
        loss: cli.common.loss,
        epochs: cli.common.epochs,
        batch_size: cli.common.batch_size,
        learning_rate: cli.common.lr,
        out: cli.common.out,
        dataset: cli.common.dataset,
        ..Default::default()
    };
    match &cli.command {
        Command::Generate { n_points } => overrides.n_points = *n_points,
        Command::Compare { seeds } => overrides.seeds = seeds.clone(),
        _ => {}
    }
    cfg.apply(&overrides);

    match cli.command {
        Command::Generate { .. } => {
            let path = experiment::cmd_generate(&cfg)?;
            println!("wrote {}", path.display());
        }
        Command::Train => {
            let run = experiment::cmd_train(&cfg)?;
            print!("{}", run.report.render());
            println!("artifacts in {}", cfg.out.display());
        }
        Command::Eval { network } => {
            let report = experiment::cmd_eval(&cfg, &network)?;
            print!("{}", report.render());
        }
        Command::Compare { .. } => {
            let cmp = experiment::cmd_compare(&cfg)?;
            print!("{}", cmp.table);
            println!("artifacts in {}", cfg.out.display());
        }
        Command::Weights => print!("{}", experiment::cmd_weights(&cfg)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
