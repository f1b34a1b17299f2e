//! Command-line orchestration: subcommands wiring generation → denoising →
//! scoring → limits, a single JSON configuration with flag overrides, and
//! per-file provenance records.
//!
//! Exit codes: 0 success, 2 usage error, 3 data/format error, 4 numerical
//! failure.

pub mod config;
mod denoise_cmd;
mod export;
mod generate;
mod limit;
mod provenance;
mod score_cmd;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::score::ScoreMode;
use crate::simgen::ToneMode;

use config::PipelineConfig;
pub use provenance::Provenance;

#[derive(Debug, Parser)]
#[command(
    name = "haloscope",
    version,
    about = "Synthetic detector data, denoising benchmarks, and axion limit analysis"
)]
pub struct Cli {
    /// JSON configuration file; defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Master seed for stochastic steps (overrides the config key).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 = one per core (overrides the config key).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Directory for generated datasets (overrides the config key).
    #[arg(long, global = true, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// Directory for reports and curves (overrides the config key).
    #[arg(long, global = true, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ToneModeArg {
    Standard,
    Weak,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScoreModeArg {
    Fine,
    Coarse,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DenoiserKindArg {
    None,
    MovingAverage,
    SavitzkyGolay,
    External,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Overwrite existing dataset files.
    #[arg(long)]
    pub force: bool,
    /// Allow synthesis beyond 10¹⁰ samples.
    #[arg(long)]
    pub big_data: bool,
    #[arg(long)]
    pub sample_rate_hz: Option<u64>,
    #[arg(long)]
    pub train_seconds: Option<f64>,
    #[arg(long)]
    pub validation_seconds: Option<f64>,
    #[arg(long)]
    pub science_seconds: Option<f64>,
    /// Injection amplitude class for pair datasets.
    #[arg(long, value_enum)]
    pub tone_mode: Option<ToneModeArg>,
    /// Per-tone dwell of the injection schedule, seconds.
    #[arg(long)]
    pub dwell_seconds: Option<f64>,
    /// White-noise standard deviation on the SQUID channel, mV.
    #[arg(long)]
    pub noise_sigma_mv: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    /// Input pair container.
    pub input: PathBuf,
    /// Output container.
    pub output: PathBuf,
    #[arg(long)]
    pub force: bool,
    /// Denoiser kind (overrides the config's denoiser spec).
    #[arg(long, value_enum)]
    pub kind: Option<DenoiserKindArg>,
    /// Filter window length, samples.
    #[arg(long)]
    pub window: Option<usize>,
    /// Polynomial order (Savitzky-Golay).
    #[arg(long)]
    pub order: Option<usize>,
    /// External denoiser argv; repeat the flag once per token
    /// (e.g. --command python3 --command filter.py).
    #[arg(long = "command", value_name = "TOKEN", action = clap::ArgAction::Append)]
    pub command: Vec<String>,
    /// External denoiser timeout, seconds.
    #[arg(long)]
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Denoised container (channel 0 is scored).
    pub denoised: PathBuf,
    /// Raw pair container carrying the clean injected channel.
    pub raw: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Option<ScoreModeArg>,
    /// Logarithm base; omitted → auto-calibrate on the raw pair.
    #[arg(long)]
    pub base: Option<f64>,
    #[arg(long)]
    pub segment_seconds: Option<f64>,
    /// Report path (default: <output-dir>/score_report.json).
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    /// Science-run container (channel 0 is analyzed).
    pub science: PathBuf,
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub mass_lo_hz: Option<f64>,
    #[arg(long)]
    pub mass_hi_hz: Option<f64>,
    #[arg(long)]
    pub mass_points: Option<usize>,
    /// Use the full-scale 11.1M-point grid, streaming the CSV to disk.
    #[arg(long)]
    pub full_scale: bool,
    /// PSD-averaging segment length, seconds.
    #[arg(long)]
    pub average_seconds: Option<u64>,
    /// Also compute the expected-limit band (needs a seed).
    #[arg(long)]
    pub with_band: bool,
    /// Pseudo-experiment count for --with-band.
    #[arg(long)]
    pub n_trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BandArgs {
    /// Science-run container (channel 0 is analyzed).
    pub science: PathBuf,
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub mass_lo_hz: Option<f64>,
    #[arg(long)]
    pub mass_hi_hz: Option<f64>,
    #[arg(long)]
    pub mass_points: Option<usize>,
    #[arg(long)]
    pub average_seconds: Option<u64>,
    #[arg(long)]
    pub n_trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// JSON artifacts to convert (score reports, robustness grids, limit
    /// curves, bands, spectra).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Destination directory (default: beside each input).
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize train/validation/science datasets plus a manifest.
    Generate(GenerateArgs),
    /// Run the configured denoiser over a container, segment by segment.
    Denoise(DenoiseArgs),
    /// Score a denoised dataset against the clean injected channel.
    Score(ScoreArgs),
    /// Average science PSDs and scan mass points for 95% CL limits.
    Limit(LimitArgs),
    /// Compute the expected-limit (Brazil) band from pseudo-experiments.
    Band(BandArgs),
    /// Convert JSON artifacts into plain CSV files.
    Export(ExportArgs),
}

/// Parse argv and run; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Run a parsed invocation (separated from `main` for tests).
pub fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::with_defaults(),
    };
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }
    if let Some(dir) = &cli.data_dir {
        config.data_dir = dir.clone();
    }
    if let Some(dir) = &cli.output_dir {
        config.output_dir = dir.clone();
    }

    match cli.command {
        Command::Generate(args) => generate::run(&mut config, &args),
        Command::Denoise(args) => denoise_cmd::run(&mut config, &args),
        Command::Score(args) => score_cmd::run(&mut config, &args),
        Command::Limit(args) => limit::run(&mut config, &args),
        Command::Band(args) => limit::run_band(&mut config, &args),
        Command::Export(args) => export::run(&config, &args),
    }
}

/// Refuse to overwrite an existing file unless forced.
pub(crate) fn guard_overwrite(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Usage(format!(
            "{} already exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

/// Create a directory (and parents) if needed.
pub(crate) fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Stage-level progress reporting to standard error with throughput.
pub(crate) struct Stage {
    name: &'static str,
    started: Instant,
    samples: u64,
}

impl Stage {
    pub fn new(name: &'static str) -> Self {
        eprintln!("[{name}] started");
        Self {
            name,
            started: Instant::now(),
            samples: 0,
        }
    }

    pub fn add_samples(&mut self, n: u64) {
        self.samples += n;
    }

    pub fn finish(self) {
        let elapsed = self.started.elapsed().as_secs_f64().max(1e-9);
        if self.samples > 0 {
            eprintln!(
                "[{}] done: {} samples in {:.2} s ({:.3e} samples/s)",
                self.name, self.samples, elapsed, self.samples as f64 / elapsed
            );
        } else {
            eprintln!("[{}] done in {:.2} s", self.name, elapsed);
        }
        let _ = std::io::stderr().flush();
    }
}

impl From<ToneModeArg> for ToneMode {
    fn from(a: ToneModeArg) -> Self {
        match a {
            ToneModeArg::Standard => ToneMode::Standard,
            ToneModeArg::Weak => ToneMode::Weak,
        }
    }
}

impl From<ScoreModeArg> for ScoreMode {
    fn from(a: ScoreModeArg) -> Self {
        match a {
            ScoreModeArg::Fine => ScoreMode::Fine,
            ScoreModeArg::Coarse => ScoreMode::Coarse,
        }
    }
}
