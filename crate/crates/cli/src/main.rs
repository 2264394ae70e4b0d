use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vvbath_cli::config::{self, Experiment, RunConfig};
use vvbath_cli::{run, RunError, EXIT_CONFIG, EXIT_OK};

#[derive(Parser)]
#[command(name = "vvbath", version, about = "Divacancy nuclear-memory simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config key, e.g. `--set census.f_min=0.95`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Ensemble-mean dynamical-decoupling spectrum.
    Spectrum(Common),
    /// Coherence decay and T2 fits.
    Coherence(Common),
    /// Usable-memory census at the configured isotope fractions.
    Census(Common),
    /// Census over a log-spaced concentration grid.
    Sweep(Common),
    /// Register cooling, entanglement, tomography and ODMR.
    Register(Common),
    /// Randomized benchmarking.
    Rb(Common),
    /// Check a config without running anything.
    Validate(Common),
}

fn load(common: &Common) -> Result<RunConfig, RunError> {
    let mut overrides = common.set.clone();
    if let Some(s) = common.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(w) = common.workers {
        overrides.push(format!("workers={w}"));
    }
    if let Some(o) = &common.out {
        overrides.push(format!("out={}", toml::Value::String(o.display().to_string())));
    }
    let cfg = match &common.config {
        Some(path) => config::load_file(path, &overrides)?,
        None => config::load_str("", &overrides)?,
    };
    Ok(cfg)
}

fn report(e: &RunError) -> ExitCode {
    eprintln!(
        "{}",
        serde_json::to_string(&e.record()).unwrap_or_else(|_| e.to_string())
    );
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, common) = match cli.command {
        Command::Spectrum(c) => (Experiment::Spectrum, c),
        Command::Coherence(c) => (Experiment::Coherence, c),
        Command::Census(c) => (Experiment::Census, c),
        Command::Sweep(c) => (Experiment::Sweep, c),
        Command::Register(c) => (Experiment::Register, c),
        Command::Rb(c) => (Experiment::Rb, c),
        Command::Validate(c) => {
            return match load(&c) {
                Ok(_) => {
                    println!("[]");
                    ExitCode::from(EXIT_OK as u8)
                }
                Err(RunError::Config(e)) => {
                    println!("{}", serde_json::to_string_pretty(&e.diagnostics).unwrap_or_default());
                    ExitCode::from(EXIT_CONFIG as u8)
                }
                Err(e) => report(&e),
            };
        }
    };
    let cfg = match load(&common) {
        Ok(c) => c,
        Err(e) => return report(&e),
    };
    match run(experiment, &cfg) {
        Ok(files) => {
            for f in files {
                println!("{}  {}", f.sha256, f.path);
            }
            ExitCode::SUCCESS
        }
        Err(e) => report(&e),
    }
}
