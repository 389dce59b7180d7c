//! Command-line front end for the backward-parabolic regularization
//! experiments: lemma verification, single solves, convergence sweeps,
//! stability trials and the ill-posedness demonstration.

mod commands;
mod config;
mod report;
mod svg;

use clap::{Parser, Subcommand};
use commands::Context;
use config::{ConfigError, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "qbv",
    version,
    about = "Regularized backward solves of semilinear heat-type problems and verification experiments"
)]
struct Cli {
    /// Key-value configuration file (built-in defaults when omitted)
    #[arg(long, global = true, value_name = "path")]
    config: Option<PathBuf>,

    /// Output directory for reports (overrides output.dir)
    #[arg(long, global = true, value_name = "dir")]
    out: Option<PathBuf>,

    /// Also emit SVG charts where the subcommand supports them
    #[arg(long, global = true)]
    svg: bool,

    /// Offset added to every random seed
    #[arg(long, global = true, value_name = "n", default_value_t = 0)]
    seed_offset: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the filter bound inequalities; exit 0 iff zero violations
    VerifyLemmas,
    /// Solve the configured problem once from exact final data
    Solve,
    /// Noisy-data convergence sweep over the configured delta list
    Sweep,
    /// Perturbation stability trials against the stability bound
    Stability,
    /// Unregularized vs regularized backward solve on noisy data
    Illposed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            if is_config_error(&err) {
                eprintln!("config error: {err:#}");
                ExitCode::from(2)
            } else {
                eprintln!("error: {err:#}");
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    let config = RunConfig::load(cli.config.as_deref())?;
    let out_dir = cli.out.unwrap_or_else(|| PathBuf::from(&config.output_dir));
    commands::ensure_out_dir(&out_dir)?;
    let ctx = Context { config, out_dir, svg: cli.svg, seed_offset: cli.seed_offset };
    match cli.command {
        Command::VerifyLemmas => commands::cmd_verify_lemmas(&ctx),
        Command::Solve => commands::cmd_solve(&ctx),
        Command::Sweep => commands::cmd_sweep(&ctx),
        Command::Stability => commands::cmd_stability(&ctx),
        Command::Illposed => commands::cmd_illposed(&ctx),
    }
}

fn is_config_error(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        cause.downcast_ref::<ConfigError>().is_some()
            || matches!(cause.downcast_ref::<qbv_core::QbvError>(), Some(qbv_core::QbvError::Config(_)))
    })
}
