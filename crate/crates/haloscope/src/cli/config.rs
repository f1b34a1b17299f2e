//! Pipeline configuration: one JSON document covering every subcommand,
//! with command-line flags overriding individual keys.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::denoise::DenoiserSpec;
use crate::error::{Error, Result};
use crate::limits::fit::Calibration;
use crate::limits::halo::HaloModel;
use crate::limits::scan::{
    DEFAULT_AVERAGE_SECONDS, DEFAULT_GRID_HI_HZ, DEFAULT_GRID_LO_HZ, DEFAULT_GRID_POINTS,
};
use crate::model::{PhysicalConstants, DEFAULT_SAMPLE_RATE_HZ};
use crate::score::ScoreMode;
use crate::simgen::{NoiseModel, PlantedTone, ToneMode};

/// Full-scale mass-grid size (the documented big flag).
pub const FULL_SCALE_GRID_POINTS: usize = 11_100_000;
/// Synthesis requests above this many total samples need --big-data.
pub const BIG_DATA_SAMPLE_LIMIT: u64 = 10_000_000_000;

fn default_sample_rate() -> u64 {
    DEFAULT_SAMPLE_RATE_HZ
}
fn default_train_seconds() -> f64 {
    60.0
}
fn default_validation_seconds() -> f64 {
    60.0
}
fn default_science_seconds() -> f64 {
    300.0
}
fn default_dwell_seconds() -> f64 {
    1.6
}
fn default_white_sigma() -> f64 {
    5.0
}
fn default_segment_seconds() -> f64 {
    1.0
}
fn default_average_seconds() -> u64 {
    DEFAULT_AVERAGE_SECONDS
}
fn default_grid_lo() -> f64 {
    DEFAULT_GRID_LO_HZ
}
fn default_grid_hi() -> f64 {
    DEFAULT_GRID_HI_HZ
}
fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}
fn default_n_trials() -> usize {
    100
}
fn default_data_dir() -> PathBuf {
    PathBuf::from("data")
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Synthetic-dataset settings for `generate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub sample_rate_hz: u64,
    pub train_seconds: f64,
    pub validation_seconds: f64,
    pub science_seconds: f64,
    /// Injection-tone amplitude class for the pair datasets.
    pub tone_mode: ToneMode,
    /// Per-tone dwell of the default injection schedule, seconds.
    pub dwell_seconds: f64,
    /// SQUID-channel noise background.  Its `seed` field is ignored: the
    /// top-level pipeline seed keys all streams.
    pub noise: NoiseModel,
    /// Optional signal planted into the science run.
    pub planted: Option<PlantedTone>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: default_sample_rate(),
            train_seconds: default_train_seconds(),
            validation_seconds: default_validation_seconds(),
            science_seconds: default_science_seconds(),
            tone_mode: ToneMode::Standard,
            dwell_seconds: default_dwell_seconds(),
            noise: NoiseModel::white(default_white_sigma(), 0),
            planted: None,
        }
    }
}

/// Scoring settings for `score`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub mode: ScoreMode,
    /// Logarithm base; absent → auto-calibrate on the raw pair.
    pub base: Option<f64>,
    pub segment_seconds: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            mode: ScoreMode::Fine,
            base: None,
            segment_seconds: default_segment_seconds(),
        }
    }
}

/// Mass-grid settings for `limit`/`band`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MassGridConfig {
    pub lo_hz: f64,
    pub hi_hz: f64,
    pub points: usize,
}

impl Default for MassGridConfig {
    fn default() -> Self {
        Self {
            lo_hz: default_grid_lo(),
            hi_hz: default_grid_hi(),
            points: default_grid_points(),
        }
    }
}

/// Limit-analysis settings for `limit`/`band`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitConfig {
    pub mass_grid: MassGridConfig,
    pub halo: HaloModel,
    /// PSD-power ↔ flux-power calibration; defaults to the synthetic
    /// detector's own gain so closed-loop tests are exact.
    pub calibration: Calibration,
    pub constants: PhysicalConstants,
    /// Pseudo-experiment count for the expected-limit band.
    pub n_trials: usize,
    /// Segment length for science PSD averaging, seconds.
    pub average_seconds: u64,
}

impl Default for LimitConfig {
    fn default() -> Self {
        Self {
            mass_grid: MassGridConfig::default(),
            halo: HaloModel::default(),
            calibration: Calibration::default(),
            constants: PhysicalConstants::default(),
            n_trials: default_n_trials(),
            average_seconds: default_average_seconds(),
        }
    }
}

/// The single configuration document shared by all subcommands.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Master seed; mandatory for any stochastic step.
    pub seed: Option<u64>,
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    pub generator: GeneratorConfig,
    pub denoiser: DenoiserSpec,
    pub score: ScoreConfig,
    pub limit: LimitConfig,
}

impl PipelineConfig {
    pub fn with_defaults() -> Self {
        Self {
            data_dir: default_data_dir(),
            output_dir: default_output_dir(),
            seed: None,
            workers: 0,
            generator: GeneratorConfig::default(),
            denoiser: DenoiserSpec::default(),
            score: ScoreConfig::default(),
            limit: LimitConfig::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: PipelineConfig = serde_json::from_str(&text).map_err(|e| {
            Error::Format(format!("config {}: {e}", path.display()))
        })?;
        Ok(config)
    }

    /// The seed, or a usage error for stochastic steps run without one.
    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| {
            Error::Usage(
                "this step is stochastic and needs an explicit seed; \
                 set \"seed\" in the config or pass --seed"
                    .into(),
            )
        })
    }

    /// Resolved worker count (0 → available cores).
    pub fn effective_workers(&self) -> usize {
        if self.workers == 0 {
            crate::parallel::default_workers()
        } else {
            self.workers
        }
    }

    /// Canonical serialization used for hashing and provenance.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, hex-encoded.
    pub fn sha256_hex(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_json().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
