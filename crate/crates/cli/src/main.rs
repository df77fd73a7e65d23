use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lpv_fdi_cli::commands;
use lpv_fdi_cli::config::Config;
use lpv_fdi_cli::exit;

/// Fault estimation filters for LPV systems: isolability checks, scenario
/// simulation and timing.
#[derive(Parser)]
#[command(name = "fdi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file (TOML) or a run manifest.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; a manifest is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Isolability over sampled parameter windows.
    Check(Common),
    /// Closed-loop scenario with LPV and LTI residuals, as CSV.
    Simulate(Common),
    /// Per-step timing of repeated scenario runs.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Check(c) | Command::Simulate(c) => c,
            Command::Bench { common, .. } => common,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = cli.command.common();
    let mut cfg = match Config::load(&common.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(exit::CONFIG);
        }
    };
    if let Some(seed) = common.seed {
        cfg.noise.seed = seed;
    }

    let mut stdout = std::io::stdout().lock();
    let (path, out) = (common.config.as_path(), common.out.as_deref());
    let result = match &cli.command {
        Command::Check(_) => commands::check(&cfg, path, out, &mut stdout),
        Command::Simulate(_) => commands::simulate(&cfg, path, out, &mut stdout),
        Command::Bench { repetitions, .. } => commands::bench(&cfg, path, *repetitions, out, &mut stdout),
    };
    let _ = stdout.flush();
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::RUNTIME)
        }
    }
}
