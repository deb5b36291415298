use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "rsf", version, about = "Delay / Doppler-stretch estimation with stepped-frequency pulse trains")]
pub struct Cli {
    /// Scenario JSON file. Without it (and without --preset) the reference
    /// Costas scene is used.
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "preset")]
    pub scenario: Option<PathBuf>,

    /// Built-in figure preset (fig1 .. fig10) as the scenario source.
    #[arg(long, global = true, value_name = "NAME")]
    pub preset: Option<String>,

    /// Master seed; overrides the scenario's.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Trials per SNR point; overrides the scenario's.
    #[arg(long, global = true)]
    pub trials: Option<usize>,

    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".", value_name = "DIR")]
    pub out: PathBuf,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Suppress the progress counter.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the sampled transmit signal and echo of one trial.
    Synth(SynthArgs),
    /// Print exact, approximate, compact and CRLB values.
    Theory(TheoryArgs),
    /// Run the AF estimator on one record.
    Estimate(EstimateArgs),
    /// Monte Carlo sweep over the scenario's SNR grid.
    Sweep,
    /// Run a figure preset and emit its combined CSV and SVG.
    Figure(FigureArgs),
}

#[derive(Debug, Args)]
pub struct TrialSelect {
    /// Curve of a multi-curve preset.
    #[arg(long, default_value_t = 0)]
    pub curve: usize,
    /// SNR grid index of the trial.
    #[arg(long, default_value_t = 0)]
    pub snr_index: usize,
    /// Trial index within the SNR point.
    #[arg(long, default_value_t = 0)]
    pub trial: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub select: TrialSelect,
    /// Also write the noisy received record as column `rx`.
    #[arg(long)]
    pub noisy: bool,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    /// Also report absolute values at this SNR (dB).
    #[arg(long)]
    pub snr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub select: TrialSelect,
    /// Sample CSV to estimate from instead of simulating the trial.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Column of --input holding the record.
    #[arg(long, default_value = "rx")]
    pub column: String,
    /// Write the coarse |A| surface to surface.csv.
    #[arg(long)]
    pub surface: bool,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    /// fig1 .. fig10
    pub preset: String,
}
