use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use dualrec::model::Ablation;
use dualrec_cli::error::{CliError, EXIT_USAGE};
use dualrec_cli::{run, ExperimentConfig};

/// Dual-domain recommender experiments.
#[derive(Debug, Parser)]
#[command(name = "dualrec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Args)]
struct Flags {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run a single seed instead of `run.seeds`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Model variant: full, gcn, no-dec, no-enc, no-itdis, no-pers (`+` combines).
    #[arg(long, global = true)]
    ablation: Option<String>,
    /// Output directory (for `synth`, where the interaction files go).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated ranking cut-offs, e.g. `10,20`.
    #[arg(long, global = true, value_delimiter = ',')]
    k: Option<Vec<usize>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter, split and write the processed dataset.
    Preprocess,
    /// Train every (seed, target) run and write checkpoints, histories and metrics.
    Train,
    /// Recompute test metrics from saved checkpoints.
    Evaluate,
    /// Train over the cartesian product of the `[sweep]` axes.
    Sweep,
    /// Write attention shares and embeddings of saved checkpoints.
    Export,
    /// Generate synthetic interaction files from `[synth]`.
    Synth,
}

fn load_config(flags: &Flags) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &flags.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = flags.seed {
        cfg.run.seeds = vec![seed];
        cfg.train.seed = seed;
        cfg.synth.seed = seed;
    }
    if let Some(name) = &flags.ablation {
        cfg.train.ablation = name.parse::<Ablation>()?;
    }
    if let Some(out) = &flags.out {
        cfg.run.out_dir = out.clone();
    }
    if let Some(ks) = &flags.k {
        cfg.run.ks = ks.clone();
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli.flags)?;
    for name in cfg.off_grid() {
        eprintln!("warning: train.{name} is outside the published search grid");
    }
    match cli.command {
        Command::Preprocess => println!("{}", run::preprocess(&cfg)?),
        Command::Train => println!("{}", run::train_all(&cfg)?),
        Command::Evaluate => {
            let reports = run::evaluate_all(&cfg)?;
            print!("{}", run::metrics_tsv(&reports));
        }
        Command::Sweep => {
            for c in run::sweep(&cfg)? {
                let axes: Vec<String> = c.values.iter().map(|(n, v)| format!("{n}={v}")).collect();
                println!(
                    "{} target {}: valid {:.4} test {:.4}",
                    axes.join(" "),
                    c.target,
                    c.valid,
                    c.test
                );
            }
        }
        Command::Export => {
            for dir in run::export_all(&cfg)? {
                println!("exported {}", dir.display());
            }
        }
        Command::Synth => {
            let dir = cli
                .flags
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("synth"));
            let stats = run::synth(&cfg, &dir)?;
            for (d, s) in ["A", "B"].iter().zip(stats) {
                println!(
                    "{d}: {} users, {} items, {} interactions",
                    s.users, s.items, s.interactions
                );
            }
            println!("written to {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli).with_context(|| format!("{:?} failed", cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<CliError>().map_or(2, CliError::exit_code);
            ExitCode::from(code)
        }
    }
}
