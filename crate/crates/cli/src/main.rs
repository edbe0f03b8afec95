use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dpmnl::data::SimKind;
use dpmnl::{Error, Result};
use dpmnl_bench::commands;
use dpmnl_bench::config::RunConfig;

#[derive(Parser)]
#[command(name = "dpmnl", version, about = "Dirichlet process mixtures of multinomial logit models")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the chain (or simulation) seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Sim1,
    Sim2,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic train/test split and its generating truth.
    Simulate {
        #[arg(long, value_enum)]
        which: Option<Which>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the sampler and store one trace per chain.
    Train {
        /// Training data; defaults to `[data] train`.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Posterior predictive class probabilities from stored traces.
    Predict {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Training data to verify against the trace checksum.
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy and macro F1 of a predictions file.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        /// Labelled data for the predicted cases.
        #[arg(long)]
        truth: PathBuf,
    },
    /// Repeated fits of several models with a results table.
    Experiment {
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate { which, out } => {
            let mut spec = cfg.sim.clone();
            if let Some(w) = which {
                spec.which = match w {
                    Which::Sim1 => SimKind::Sim1,
                    Which::Sim2 => SimKind::Sim2,
                };
            }
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            commands::simulate(&spec, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Train {
            input,
            chains,
            iterations,
            out,
        } => {
            let mut chain = cfg.chain();
            if let Some(seed) = cli.seed {
                chain.seed = seed;
            }
            if let Some(c) = chains {
                chain.n_chains = c;
            }
            if let Some(n) = iterations {
                chain.n_iterations = n;
                chain.burn_in = chain.burn_in.min(n.saturating_sub(1));
            }
            cfg.chain = Some(chain);
            let input = input
                .or_else(|| cfg.data.train.clone())
                .ok_or_else(|| Error::MissingInput("no training data: pass --input or set [data] train".into()))?;
            for p in commands::train(&cfg, &input, &out)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Predict {
            traces,
            input,
            train,
            out,
        } => {
            if let Some(seed) = cli.seed {
                cfg.predict.seed = seed;
            }
            let m = commands::predict(&cfg, &traces, &input, train.as_deref(), &out)?;
            println!("wrote {}", out.display());
            print!("{}", commands::render_metrics(&m));
        }
        Command::Evaluate { predictions, truth } => {
            let m = commands::evaluate_files(&cfg, &predictions, &truth)?;
            print!("{}", commands::render_metrics(&m));
        }
        Command::Experiment {
            repetitions,
            chains,
            out,
        } => {
            if let Some(r) = repetitions {
                cfg.experiment.repetitions = r;
            }
            if let Some(seed) = cli.seed {
                cfg.experiment.seed = seed;
            }
            if let Some(c) = chains {
                let mut chain = cfg.chain();
                chain.n_chains = c;
                cfg.chain = Some(chain);
            }
            let (_, table) = commands::experiment(&cfg, out.as_deref())?;
            print!("{table}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dpmnl: error[{}]: {e}", e.kind());
            ExitCode::FAILURE
        }
    }
}
