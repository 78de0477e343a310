use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fragility_core::model::calibrate;
use fragility_core::scenario::{
    calibration_block, parse_config, run_scenario, Output, ScenarioConfig,
};

#[derive(Parser)]
#[command(
    name = "fragility",
    version,
    about = "Mean-field financial fragility scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed in the scenario file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the calibrated rates.
    Calibrate(Common),
    /// One trajectory plus the ensemble statistics.
    Simulate(Common),
    /// Integrate the master equation.
    Master(Common),
    /// Drift, spread variance and aggregate output.
    Macro(Common),
    /// MaxEnt equilibrium diagnostics and the potential profile.
    Equilibrium(Common),
    /// Simulation, master equation and Gaussian approximation side by side.
    Compare(Common),
    /// Produce whatever the scenario's `outputs` key lists.
    Run(Common),
}

fn load(common: &Common) -> Result<ScenarioConfig, ExitCode> {
    let mut cfg = parse_config(&common.config).map_err(|e| {
        eprintln!("config error: {}: {e}", common.config.display());
        ExitCode::from(2)
    })?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn execute(common: &Common, outputs: Option<Vec<Output>>) -> ExitCode {
    let mut cfg = match load(common) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    if let Some(outputs) = outputs {
        cfg.outputs = outputs;
    }
    match run_scenario(&cfg, &common.out) {
        Ok(run) => {
            for artifact in &run.artifacts {
                println!("{}", common.out.join(&artifact.name).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Calibrate(common) => {
            let cfg = match load(common) {
                Ok(cfg) => cfg,
                Err(code) => return code,
            };
            match calibrate(&cfg.params) {
                Ok(rates) => {
                    print!("{}", calibration_block(&rates));
                    if rates.is_degenerate() {
                        eprintln!("numeric error: degenerate rates λ = γ = 0");
                        return ExitCode::from(3);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("numeric error: {e}");
                    ExitCode::from(3)
                }
            }
        }
        Command::Simulate(c) => execute(c, Some(vec![Output::Trajectory, Output::Ensemble])),
        Command::Master(c) => execute(c, Some(vec![Output::Master])),
        Command::Macro(c) => execute(c, Some(vec![Output::Macro])),
        Command::Equilibrium(c) => execute(c, Some(vec![Output::Equilibrium])),
        Command::Compare(c) => execute(c, Some(vec![Output::Compare])),
        Command::Run(c) => execute(c, None),
    }
}
