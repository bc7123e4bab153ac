use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fluxsquid::config::SimulationConfig;
use fluxsquid::dynamics::GateScheme;
use fluxsquid::runner::{run, Command, RunOptions};
use fluxsquid::Error;

#[derive(Debug, Parser)]
#[command(name = "fluxsquid", version, about = "Two fluxonium qubits coupled by a dc SQUID")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads (defaults to the available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Reject unknown configuration keys instead of warning.
    #[arg(long, global = true)]
    strict: bool,

    /// Gate scheme override: coupler-only or detuned.
    #[arg(long, global = true, value_parser = parse_scheme)]
    scheme: Option<GateScheme>,

    /// SQUID junction asymmetry override.
    #[arg(long, global = true, allow_negative_numbers = true)]
    d: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Cmd {
    /// Labeled spectrum versus coupler flux.
    Spectrum,
    /// Static ZZ over (E_J,Σ, d).
    ZzMap,
    /// Capacitive coupling that cancels the static ZZ.
    JcStar,
    /// Two-level model parameters versus coupler flux.
    TwoLevel,
    /// One gate, closed and with decoherence.
    GateSim,
    /// Gate error over (x, t_g).
    Landscape,
    /// Optimized gate time over x for each asymmetry.
    Optimize,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Spectrum => Command::Spectrum,
            Cmd::ZzMap => Command::ZzMap,
            Cmd::JcStar => Command::JcStar,
            Cmd::TwoLevel => Command::TwoLevel,
            Cmd::GateSim => Command::GateSim,
            Cmd::Landscape => Command::Landscape,
            Cmd::Optimize => Command::Optimize,
        }
    }
}

fn parse_scheme(s: &str) -> Result<GateScheme, String> {
    match s {
        "coupler-only" | "coupler_only" => Ok(GateScheme::CouplerOnly),
        "detuned" => Ok(GateScheme::Detuned),
        _ => Err(format!("unknown scheme '{s}' (expected coupler-only or detuned)")),
    }
}

fn load_config(cli: &Cli) -> fluxsquid::Result<SimulationConfig> {
    let mut cfg = match &cli.config {
        Some(p) => SimulationConfig::load(p, cli.strict)?,
        None => SimulationConfig::default(),
    };
    if let Some(s) = cli.scheme {
        cfg.set_scheme(s);
    }
    if let Some(d) = cli.d {
        cfg.set_asymmetry(d)?;
    }
    Ok(cfg)
}

/// 2 for configuration problems, 1 for everything else.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    let workers = cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cmd = Command::from(cli.command);
    match run(cmd, &cfg, &RunOptions::new(&cli.out, workers)) {
        Ok(m) => {
            eprintln!("{cmd}: ok in {:.2} s, outputs in {}", m.wall_time_s, cli.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
