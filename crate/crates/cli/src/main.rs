use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use robin_ns_cli::commands::{self, Overrides};
use robin_ns_cli::config::RunConfig;
use robin_ns_cli::exit_code;

#[derive(Parser)]
#[command(name = "robin-ns", version, about = "Navier-Stokes with Navier-slip walls on a staggered grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ensemble seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
        }
        .apply(&mut cfg);
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the nonlinear problem and write fields, diagnostics and a summary.
    #[command(alias = "picard")]
    Run {
        #[command(flatten)]
        common: Common,
        /// Read the Picard constants from this file, or estimate and write them there.
        #[arg(long)]
        cache_constants: Option<PathBuf>,
    },
    /// Refinement study against the Taylor-Green solution.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Estimate C_MR, C1, C2, δ and ε over a seeded ensemble.
    EstimateConstants {
        #[command(flatten)]
        common: Common,
    },
    /// Split a face-field file into its divergence-free and gradient parts.
    Decompose {
        /// Field file with all face components.
        input: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check the β schedule of a configuration.
    ValidateSchedule {
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, cache_constants } => {
            let cfg = common.load()?;
            let outcome = commands::cmd_run(&cfg, cache_constants.as_deref())?;
            let r = &outcome.report;
            println!(
                "{} after {} iterations; results in {}",
                if r.converged { "converged" } else { "not converged" },
                r.increments.len(),
                outcome.directory.display()
            );
            anyhow::ensure!(r.converged, "Picard iteration did not reach the tolerance");
        }
        Command::Convergence { common, levels } => {
            let cfg = common.load()?;
            let (path, rows) = commands::cmd_convergence(&cfg, levels)?;
            for r in rows {
                let order = r.order.map(|o| format!("{o:.3}")).unwrap_or_default();
                println!("{:<8} level {} dt {:.3e} error {:.3e} {order}", r.study, r.level, r.dt_s, r.error);
            }
            println!("table written to {}", path.display());
        }
        Command::EstimateConstants { common } => {
            let cfg = common.load()?;
            let path = commands::cmd_estimate_constants(&cfg)?;
            print!("{}", std::fs::read_to_string(&path).context("reading back the constants")?);
        }
        Command::Decompose { input, out } => {
            let r = commands::cmd_decompose(&input, &out)?;
            println!(
                "⟨Pu, grad p⟩ = {:.3e}, ‖u − Pu − grad p‖ = {:.3e}",
                r.inner_product, r.recomposition_error
            );
        }
        Command::ValidateSchedule { common } => {
            let cfg = common.load()?;
            print!("{}", commands::cmd_validate_schedule(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
