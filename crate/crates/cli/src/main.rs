//! `sbm`: reproducible pipeline runs from the command line.
//!
//! Subcommands `generate`, `preprocess`, `fit`, `run-filter` and
//! `experiment` each read an optional TOML config, apply flag overrides,
//! echo the effective config into the output directory and write their
//! artifacts there. Exit codes: 0 success, 1 runtime failure, 2 invalid
//! configuration or input.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use sbm_core::eval::ExperimentConfig;
use sbm_core::{Result, SbmError};

use commands::{FitConfig, GenerateConfig, PreprocessConfig, RunFilterConfig};
use config::{load, write_echo, Loaded, DEFAULT_OUTDIR};

#[derive(Parser)]
#[command(
    name = "sbm",
    version,
    about = "ARX identification and adaptive model updating"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file; relative paths inside it are relative to the file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    outdir: Option<PathBuf>,
    /// Random seed (generate only).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress the run summary.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic plant record (or a monthly suite) with ground truth.
    Generate {
        /// Record length in days.
        #[arg(long)]
        days: Option<f64>,
        /// Number of month-like records.
        #[arg(long)]
        months: Option<usize>,
    },
    /// Fit PCA and scaling on a training window and build the model-ready frame.
    Preprocess {
        /// Raw plant record (CSV).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Days at the start of the record used to fit PCA and scaling.
        #[arg(long)]
        train_days: Option<f64>,
    },
    /// Fit an ARX model, optionally with an nAIC order-selection table.
    Fit {
        /// Model-ready record (CSV).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Model order (default: the order chosen from `--orders`).
        #[arg(long)]
        order: Option<usize>,
        /// Candidate orders, `1..5` (inclusive) or `1,2,3`.
        #[arg(long, value_parser = parse_order_list)]
        orders: Option<OrderList>,
        /// Days at the start of the record the final model is fitted on.
        #[arg(long)]
        train_days: Option<f64>,
    },
    /// Stream the parameter filter over a record and write its trajectory.
    RunFilter {
        /// Model-ready record (CSV).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Initial model (JSON, as written by `fit`).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Complete filter tuning (JSON).
        #[arg(long)]
        tuning: Option<PathBuf>,
        /// Parameter covariance (JSON nested rows) for the default tuning.
        #[arg(long)]
        sigma: Option<PathBuf>,
        /// Trajectory recording stride, samples.
        #[arg(long)]
        record_every: Option<usize>,
    },
    /// Static-vs-adaptive moving-horizon experiment.
    Experiment {
        /// Raw plant record (CSV).
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Evaluate the static model only.
        #[arg(long)]
        no_adaptive: bool,
    },
}

/// Candidate orders given as one flag value.
#[derive(Clone)]
struct OrderList(Vec<usize>);

fn parse_order_list(s: &str) -> std::result::Result<OrderList, String> {
    config::parse_orders(s).map(OrderList)
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

fn reject_seed(common: &Common) -> Result<()> {
    match common.seed {
        Some(_) => Err(SbmError::config("seed", "only `generate` takes a seed")),
        None => Ok(()),
    }
}

fn load_config<T: DeserializeOwned + Default>(
    common: &Common,
    command: &str,
) -> Result<(T, PathBuf, PathBuf)> {
    let Loaded {
        config,
        outdir,
        base,
    } = load::<T>(common.config.as_deref(), command)?;
    let outdir = common
        .outdir
        .clone()
        .or(outdir)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTDIR));
    Ok((config, config::resolve(Path::new(""), &outdir), base))
}

fn run(cli: Cli) -> Result<(String, PathBuf)> {
    let common = &cli.common;
    let (summary, outdir) = match cli.command {
        Command::Generate { days, months } => {
            let (mut cfg, outdir, _) = load_config::<GenerateConfig>(common, "generate")?;
            set_opt(&mut cfg.days, days);
            set(&mut cfg.months, months);
            set(&mut cfg.plant.seed, common.seed);
            cfg.finalize()?;
            write_echo("generate", &outdir, &cfg)?;
            (commands::generate(&cfg, &outdir)?, outdir)
        }
        Command::Preprocess { input, train_days } => {
            reject_seed(common)?;
            let (mut cfg, outdir, base) = load_config::<PreprocessConfig>(common, "preprocess")?;
            cfg.resolve_paths(&base);
            set(&mut cfg.input, input);
            set_opt(&mut cfg.train_days, train_days);
            cfg.resolve_paths(Path::new(""));
            cfg.finalize()?;
            write_echo("preprocess", &outdir, &cfg)?;
            (commands::preprocess(&cfg, &outdir)?, outdir)
        }
        Command::Fit {
            input,
            order,
            orders,
            train_days,
        } => {
            reject_seed(common)?;
            let (mut cfg, outdir, base) = load_config::<FitConfig>(common, "fit")?;
            cfg.resolve_paths(&base);
            set(&mut cfg.input, input);
            set_opt(&mut cfg.order, order);
            set(&mut cfg.orders, orders.map(|o| o.0));
            set_opt(&mut cfg.train_days, train_days);
            cfg.resolve_paths(Path::new(""));
            cfg.finalize()?;
            write_echo("fit", &outdir, &cfg)?;
            (commands::fit(&cfg, &outdir)?, outdir)
        }
        Command::RunFilter {
            data,
            model,
            tuning,
            sigma,
            record_every,
        } => {
            reject_seed(common)?;
            let (mut cfg, outdir, base) = load_config::<RunFilterConfig>(common, "run-filter")?;
            cfg.resolve_paths(&base);
            set(&mut cfg.data, data);
            set(&mut cfg.model, model);
            // A tuning source given on the command line replaces the file's.
            if tuning.is_some() || sigma.is_some() {
                cfg.tuning = tuning;
                cfg.sigma = sigma;
            }
            set(&mut cfg.record_every, record_every);
            cfg.resolve_paths(Path::new(""));
            cfg.finalize()?;
            write_echo("run-filter", &outdir, &cfg)?;
            (commands::run_filter(&cfg, &outdir)?, outdir)
        }
        Command::Experiment {
            dataset,
            no_adaptive,
        } => {
            reject_seed(common)?;
            let (mut cfg, outdir, base) = load_config::<ExperimentConfig>(common, "experiment")?;
            commands::resolve_experiment_paths(&mut cfg, &base);
            set(&mut cfg.dataset, dataset);
            if no_adaptive {
                cfg.adaptive = false;
            }
            commands::resolve_experiment_paths(&mut cfg, Path::new(""));
            commands::finalize_experiment(&cfg)?;
            write_echo("experiment", &outdir, &cfg)?;
            (commands::experiment(&cfg, &outdir)?, outdir)
        }
    };
    Ok((summary, outdir))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = cli.common.quiet;
    match run(cli) {
        Ok((summary, outdir)) => {
            if !quiet {
                println!("{summary}");
                println!("outputs in {}", outdir.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
