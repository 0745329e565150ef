use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dtc_core::config::{Format, RunConfig};
use dtc_core::runner::{Command, Overrides, Runner};

#[derive(Parser)]
#[command(name = "dtc", version, about = "Double-transmon coupler simulator")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "DTC_WORKERS")]
    workers: Option<usize>,
    /// Charge cutoff N (overrides the configuration).
    #[arg(long, global = true)]
    cutoff: Option<usize>,
    /// Drop the flux-rate term from the Hamiltonian.
    #[arg(long, global = true)]
    no_drive_term: bool,
    #[arg(long, global = true, value_enum)]
    format: Option<OutFormat>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Derived circuit parameters.
    DeriveParams,
    /// ZZ coupling over flux and ω4.
    ZzSweep {
        /// ω4/2π rows in GHz (comma separated).
        #[arg(long = "omega4-GHz", value_delimiter = ',')]
        omega4_ghz: Option<Vec<f64>>,
    },
    /// Labeled energy levels over flux.
    Levels,
    /// Gap profile and CZ flux pulses.
    DesignPulse,
    /// Gate simulation over the configured gate times.
    SimulateGate,
    /// Single-transmon coupler ZZ map.
    StcSweep,
    /// Flux-noise dephasing times.
    T2,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let (cmd, omega4_ghz) = match cli.command {
        Cmd::DeriveParams => (Command::DeriveParams, None),
        Cmd::ZzSweep { omega4_ghz } => (Command::ZzSweep, omega4_ghz),
        Cmd::Levels => (Command::Levels, None),
        Cmd::DesignPulse => (Command::DesignPulse, None),
        Cmd::SimulateGate => (Command::SimulateGate, None),
        Cmd::StcSweep => (Command::StcSweep, None),
        Cmd::T2 => (Command::T2, None),
    };
    let overrides = Overrides {
        out: cli.out,
        cutoff: cli.cutoff,
        no_drive_term: cli.no_drive_term,
        format: cli.format.map(|f| match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }),
        omega4_ghz,
    };
    let result = match &cli.config {
        Some(p) => Runner::from_path(p, overrides),
        None => Runner::new(RunConfig::default(), overrides),
    }
    .and_then(|r| r.run(cmd));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("dtc {}: {e}", cmd.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
