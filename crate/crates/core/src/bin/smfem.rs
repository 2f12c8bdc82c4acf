//! Thin command-line front end over [`smfem::cli`].

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use smfem::cli::{run, Overrides};

#[derive(Parser)]
#[command(
    name = "smfem",
    about = "Mixed finite element solver for steady-state Stefan-Maxwell diffusion in 2D",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the sparse solver; 1 is fully deterministic.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Escalate data-consistency warnings to errors.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Manufactured-solution refinement study with error slopes.
    Convergence(CommonArgs),
    /// Mixed Dirichlet/Neumann air-diffusion demo on a rectangle.
    Demo(CommonArgs),
    /// Single solve described entirely by the configuration.
    Solve(CommonArgs),
    /// Transport-matrix eigenvalue diagnostics at one state.
    Spectrum(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, expected) = match &cli.command {
        Command::Convergence(a) => (a, "convergence"),
        Command::Demo(a) => (a, "demo"),
        Command::Solve(a) => (a, "solve"),
        Command::Spectrum(a) => (a, "spectrum"),
    };
    let overrides = Overrides {
        out_dir: args.out.clone(),
        threads: Some(args.threads),
        strict: args.strict,
    };

    // The subcommand must agree with the experiment in the config.
    match smfem::cli::RunConfig::from_path(&args.config) {
        Ok(config) => {
            let actual = serde_json::to_value(config.experiment)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default();
            if actual != expected {
                let err = smfem::cli::CliError::Config(vec![format!(
                    "config experiment is {actual:?} but the {expected:?} subcommand was invoked"
                )]);
                eprintln!("{}", err.to_json());
                return ExitCode::from(err.exit_code() as u8);
            }
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    }

    match run(&args.config, &overrides) {
        Ok(out_dir) => {
            println!("wrote outputs to {}", out_dir.display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
