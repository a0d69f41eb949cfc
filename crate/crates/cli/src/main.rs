use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rhr::commands;
use rhr::config::ExperimentConfig;
use rhr::Result;

/// Progressive-resolution DDIM sampling experiments on toy denoisers.
#[derive(Parser)]
#[command(name = "rhr", version)]
struct Cli {
    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for independent seeds.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the refresh steps, guidance scales and stages.
    Ladder,
    /// Run the configured variant for every seed.
    Sample,
    /// Write mean energy curves for the configured variants and sweeps.
    EnergyCurve,
    /// Run the verification suite.
    Verify,
    /// Convert an RHRT grid to one PGM per channel.
    DumpGrid { input: PathBuf, output: PathBuf },
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<bool> {
    let stdout = &mut std::io::stdout();
    match &cli.command {
        Command::DumpGrid { input, output } => {
            for p in commands::dump_grid(input, output)? {
                println!("{}", p.display());
            }
        }
        Command::Verify => {
            let cfg = load(cli)?;
            return commands::verify(&cfg.schedule, cfg.seed, stdout);
        }
        Command::Ladder => {
            let cfg = load(cli)?;
            commands::ladder(&cfg, &cfg.output_dir, stdout)?;
        }
        Command::Sample => {
            let cfg = load(cli)?;
            let files = commands::sample(&cfg, &cfg.output_dir, cli.jobs)?;
            println!(
                "wrote {} files to {}",
                files.len(),
                cfg.output_dir.display()
            );
        }
        Command::EnergyCurve => {
            let cfg = load(cli)?;
            let path = commands::energy_curve(&cfg, &cfg.output_dir, cli.jobs)?;
            println!("{}", path.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
