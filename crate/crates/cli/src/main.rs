//! `heatlab`: run heat-content experiments from TOML configs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod failure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::failure::Failure;

#[derive(Parser)]
#[command(name = "heatlab", version, about = "Heat content curves and short-time coefficients")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute heat-content curves for every configured method.
    Run {
        config: PathBuf,
        /// Override a config key, e.g. `--set grid_n=512` or `--set shape.radius=2`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Fit expansion coefficients to a curve CSV and compare with closed forms.
    Fit {
        curve: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Highest coefficient order; defaults to `fit_order` from the config.
        #[arg(long)]
        order: Option<usize>,
        /// `joint` or `peel`; defaults to `fit_strategy`, else peel from order 3 up.
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Repeat an experiment over several grid sizes and tabulate coefficient errors.
    Convergence {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        grids: Vec<usize>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Tube-volume difference quotients against the boundary measure.
    Reynolds {
        /// Catalog domain with default shape parameters.
        #[arg(long, conflicts_with = "config")]
        domain: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 1e-3, 1e-4])]
        s: Vec<f64>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("HEATLAB_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Failure::Config(format!("HEATLAB_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Run { config, set } => {
            let cfg = ExperimentConfig::load(&config, &set)?;
            let dir = commands::run(&cfg)?;
            println!("{}", dir.display());
        }
        Command::Fit { curve, config, order, strategy, set } => {
            let cfg = ExperimentConfig::load(&config, &set)?;
            let order = order.unwrap_or(cfg.fit_order);
            let strategy = strategy.unwrap_or_else(|| cfg.strategy(order).to_string());
            let summary = commands::fit(&cfg, &curve, order, &strategy)?;
            println!("{}", summary.json.display());
            if !summary.all_pass {
                return Err(Failure::Tolerance(format!("coefficients outside tolerance, see {}", summary.csv.display())));
            }
        }
        Command::Convergence { config, grids, set } => {
            let cfg = ExperimentConfig::load(&config, &set)?;
            let table = commands::convergence(&cfg, &grids)?;
            let csv = table.to_csv();
            let dir = cfg.run_dir().join("reports");
            output::write_text(&dir.join("convergence.csv"), &csv)?;
            output::write_text(
                &dir.join("convergence.json"),
                &serde_json::to_string_pretty(&table.rows).expect("rows serialize"),
            )?;
            if let Some(mut manifest) = output::Manifest::load(&cfg.run_dir()) {
                manifest.write(&cfg.run_dir())?;
            }
            print!("{csv}");
            for w in &table.warnings {
                eprintln!("warning: {w}");
            }
            if !table.failures.is_empty() {
                return Err(Failure::Tolerance(table.failures.join("; ")));
            }
        }
        Command::Reynolds { domain, config, s, set } => {
            let cfg = match (domain, config) {
                (_, Some(path)) => ExperimentConfig::load(&path, &set)?,
                (Some(name), None) => ExperimentConfig::from_toml(&format!("domain = {name:?}"), &set)?,
                (None, None) => return Err(Failure::Config("reynolds needs --domain or --config".into())),
            };
            let rows = commands::reynolds(&cfg.geometry()?, &s)?;
            print!("{}", commands::reynolds_csv(&rows));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("heatlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
