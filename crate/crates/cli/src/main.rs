//! `abaa`: command-line front end for junction trimming, frequency
//! calibration, lattice targeting and yield projection.
//!
//! Exit codes: 0 success, 2 invalid input or arguments, 3 infeasible request.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "abaa", version)]
#[command(about = "Frequency trimming of tunable transmons by junction annealing")]
struct Cli {
    /// Directory for outputs and the run manifest.
    #[arg(long, global = true, default_value = "abaa-out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the closed-loop tuning controller over a simulated batch.
    SimulateTuning(SimulateTuningArgs),
    /// Fit the resistance to f01max power law.
    CalibrateFreq(CalibrateFreqArgs),
    /// Turn a lattice design into per-qubit target resistances.
    AssignTargets(AssignTargetsArgs),
    /// Fit a segmented power law to a post-pulse relaxation trace.
    FitRelaxation(FitRelaxationArgs),
    /// Detunings, modulation assignment and design deviations of a lattice.
    AnalyzeLattice(AnalyzeLatticeArgs),
    /// Park qubits below f01max so every edge lands in the window.
    Park(ParkArgs),
    /// Monte Carlo chip yield of a tiled unit cell.
    Yield(YieldArgs),
    /// Summarise a saved campaign.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateTuningArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Batch size of the bundled scenario.
    #[arg(long, default_value_t = 221)]
    pub qubits: usize,
    /// Stop every qubit at this common threshold (ohm) instead of
    /// per-qubit targets.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = abaa_core::freq::DEFAULT_AGING_BUDGET)]
    pub aging_budget: f64,
    #[arg(long, default_value_t = abaa_core::tuning::DEFAULT_RESERVE)]
    pub reserve: f64,
    /// Hours between the last pulse and the probe.
    #[arg(long, default_value_t = 5.0)]
    pub probe_delay: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CalibrateFreqArgs {
    /// CSV with columns qubit_id,resistance_ohm,f01max_mhz.
    #[arg(long, conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,
    /// Generate 60 noisy points instead of reading a file.
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AssignTargetsArgs {
    #[arg(long)]
    pub calibration: PathBuf,
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long, default_value_t = abaa_core::freq::DEFAULT_AGING_BUDGET)]
    pub aging_budget: f64,
    #[arg(long, default_value_t = abaa_core::tuning::DEFAULT_RESERVE)]
    pub reserve: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitRelaxationArgs {
    /// Resistance log holding a pulse row followed by probe rows.
    #[arg(long, conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,
    /// Fit a generated three-regime trace (1000 points, 2% noise).
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Qubit to fit; defaults to the first one in the log.
    #[arg(long)]
    pub qubit: Option<String>,
    /// Comma-separated breakpoints in hours, or `auto`.
    #[arg(long, default_value = "auto")]
    pub breakpoints: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeLatticeArgs {
    #[arg(long)]
    pub design: PathBuf,
    /// Detuning window `lo,hi` in MHz; defaults to the design window.
    #[arg(long)]
    pub window: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ParkArgs {
    /// Design with measured frequencies.
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long, default_value = "20,130")]
    pub window: String,
    #[arg(long, default_value_t = 50.0)]
    pub max_park: f64,
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
    /// Allow offsets above f01max as well.
    #[arg(long)]
    pub symmetric: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct YieldArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// One or more comma-separated frequency spreads in MHz.
    #[arg(long, default_value = "18.4")]
    pub sigma: String,
    /// One or more comma-separated tilings `MxN` of 3x3 cells.
    #[arg(long, default_value = "1x1")]
    pub cells: String,
    #[arg(long, default_value_t = abaa_core::yield_mc::DEFAULT_TRIALS)]
    pub trials: u64,
    #[arg(long, default_value = "20,130")]
    pub window: String,
    /// Window the generated unit cell must satisfy.
    #[arg(long, default_value = "40,110")]
    pub design_window: String,
    #[arg(long, default_value_t = abaa_core::yield_mc::DICE_PER_WAFER)]
    pub dice: u32,
    /// Use the 3x3 cell of this design file instead of generating one.
    #[arg(long)]
    pub design: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    /// Campaign CSV written by simulate-tuning.
    #[arg(long)]
    pub campaign: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    let ctx = commands::Context { out: cli.out, argv };
    let outcome = match cli.command {
        Command::SimulateTuning(a) => commands::simulate_tuning(&ctx, &a),
        Command::CalibrateFreq(a) => commands::calibrate_freq(&ctx, &a),
        Command::AssignTargets(a) => commands::assign_targets(&ctx, &a),
        Command::FitRelaxation(a) => commands::fit_relaxation(&ctx, &a),
        Command::AnalyzeLattice(a) => commands::analyze_lattice(&ctx, &a),
        Command::Park(a) => commands::park(&ctx, &a),
        Command::Yield(a) => commands::yield_cmd(&ctx, &a),
        Command::Report(a) => commands::report(&ctx, &a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
