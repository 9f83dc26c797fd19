use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chemotaxis_id::config::RunConfig;
use chemotaxis_id::experiments::{self, Outcome};
use chemotaxis_id::Error;

/// Chemotaxis forward simulation and sensitivity identification.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// RNG seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Named parameter preset (only `myerscough`).
    #[arg(long, global = true)]
    preset: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve the forward problem on the main grid.
    Forward,
    /// Synthesize noisy measurements.
    MakeData,
    /// Recover the sensitivity from data.
    Invert,
    /// Sweep alpha and locate the L-curve corner.
    Lcurve,
    /// Convergence-rate study over noise levels.
    Rates,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_STAGNATION: u8 = 4;

fn run(cli: &Cli) -> Result<Outcome, Error> {
    let (cfg, base) = match &cli.config {
        Some(p) => (RunConfig::from_file(p)?, p.parent().unwrap_or(Path::new(".")).to_path_buf()),
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    let mut cfg = cfg;
    if let Some(p) = &cli.preset {
        cfg.preset = Some(p.clone());
    }
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    let settings = cfg.resolve(&base)?;
    match cli.command {
        Command::Forward => experiments::cmd_forward(&settings, &cli.out),
        Command::MakeData => experiments::cmd_make_data(&settings, &cli.out),
        Command::Invert => experiments::cmd_invert(&settings, &cli.out),
        Command::Lcurve => experiments::cmd_lcurve(&settings, &cli.out),
        Command::Rates => experiments::cmd_rates(&settings, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.stagnated {
                eprintln!("error: code={EXIT_STAGNATION} kind=stagnation message=\"optimizer stagnated before convergence\"");
                ExitCode::from(EXIT_STAGNATION)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            let code = if e.is_config() { EXIT_CONFIG } else { EXIT_SOLVER };
            let msg = e.to_string().replace('"', "'").replace('\n', " ");
            eprintln!("error: code={code} kind={} message=\"{msg}\"", e.kind());
            ExitCode::from(code)
        }
    }
}
