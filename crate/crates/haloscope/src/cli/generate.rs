//! `generate`: synthesize train/validation pair datasets and a science run,
//! streaming chunks to disk, plus a manifest describing every file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{ContainerWriter, SampleFormat};
use crate::simgen::{
    InjectionSchedule, NoiseModel, PairGenerator, PlantedTone, ScheduleEntry, ScienceGenerator,
    SynthStats, ToneMode,
};

use super::config::{PipelineConfig, BIG_DATA_SAMPLE_LIMIT};
use super::provenance::Provenance;
use super::{ensure_dir, guard_overwrite, GenerateArgs, Stage};

/// Samples written per streaming chunk (one second at the configured rate).
fn chunk_len(rate: u64) -> usize {
    rate as usize
}

/// Seed offsets per split, applied to the master seed.
const TRAIN_SEED_OFFSET: u64 = 0;
const VALIDATION_SEED_OFFSET: u64 = 1;
const SCIENCE_SEED_OFFSET: u64 = 2;

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    path: PathBuf,
    role: String,
    seconds: f64,
    sample_rate_hz: u64,
    channels: u8,
    noise_seed: u64,
    saturated_injected: u64,
    saturated_squid: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    files: Vec<ManifestFile>,
    schedule: InjectionSchedule,
    tone_mode: ToneMode,
    noise: NoiseModel,
    planted: Option<PlantedTone>,
    master_seed: u64,
    config_sha256: String,
}

/// The injection sweep used by `generate`: 38 geometric tones from 1.1 kHz
/// up to min(4.9 MHz, 0.49 × sample rate), held `dwell_s` each, tiled
/// cyclically until the sweep covers `cover_seconds`.
fn sweep_for_rate(
    mode: ToneMode,
    dwell_s: f64,
    rate: u64,
    cover_seconds: f64,
) -> Result<InjectionSchedule> {
    const N: usize = 38;
    const F_FIRST: f64 = 1_100.0;
    let f_last = (0.49 * rate as f64).min(4_900_000.0);
    if f_last <= F_FIRST {
        return Err(Error::Usage(format!(
            "sample rate {rate} Hz is too low for the injection sweep \
             (needs Nyquist above {F_FIRST} Hz)"
        )));
    }
    let amplitude = mode.amplitude_mv();
    let log_step = (f_last / F_FIRST).ln() / (N - 1) as f64;
    let one_pass: Vec<ScheduleEntry> = (0..N)
        .map(|i| {
            let frequency_hz = if i == 0 {
                F_FIRST
            } else if i == N - 1 {
                f_last
            } else {
                F_FIRST * (log_step * i as f64).exp()
            };
            ScheduleEntry {
                frequency_hz,
                amplitude_mv: amplitude,
                duration_s: dwell_s,
            }
        })
        .collect();
    let pass_seconds = dwell_s * N as f64;
    let repeats = (cover_seconds / pass_seconds).ceil().max(1.0) as usize;
    let mut entries = Vec::with_capacity(N * repeats);
    for _ in 0..repeats {
        entries.extend(one_pass.iter().copied());
    }
    InjectionSchedule::new(entries)
}

/// Stream a pair dataset into a two-channel int8 container.
fn write_pair(
    path: &Path,
    generator: &PairGenerator,
    force: bool,
    stage: &mut Stage,
) -> Result<SynthStats> {
    guard_overwrite(path, force)?;
    let total = generator.total_samples();
    let rate = generator.sample_rate();
    let mut writer =
        ContainerWriter::create(path, SampleFormat::Int8, rate, &[total, total], true)?;
    let mut stats = SynthStats::default();
    let step = chunk_len(rate);
    let mut start = 0u64;
    while start < total {
        let len = step.min((total - start) as usize);
        let chunk = generator.chunk(start, len);
        writer.write_i8(0, &chunk.squid)?;
        writer.write_i8(1, &chunk.injected)?;
        stats.saturated_injected += chunk.saturated_injected;
        stats.saturated_squid += chunk.saturated_squid;
        stage.add_samples(2 * len as u64);
        start += len as u64;
    }
    writer.finish()?;
    Ok(stats)
}

/// Stream a science run into a single-channel int8 container.
fn write_science(
    path: &Path,
    generator: &ScienceGenerator,
    force: bool,
    stage: &mut Stage,
) -> Result<SynthStats> {
    guard_overwrite(path, force)?;
    let total = generator.total_samples();
    let rate = generator.sample_rate();
    let mut writer = ContainerWriter::create(path, SampleFormat::Int8, rate, &[total], true)?;
    let mut stats = SynthStats::default();
    let step = chunk_len(rate);
    let mut start = 0u64;
    while start < total {
        let len = step.min((total - start) as usize);
        let (samples, saturated) = generator.chunk(start, len);
        writer.write_i8(0, &samples)?;
        stats.saturated_squid += saturated;
        stage.add_samples(len as u64);
        start += len as u64;
    }
    writer.finish()?;
    Ok(stats)
}

pub fn run(config: &mut PipelineConfig, args: &GenerateArgs) -> Result<()> {
    let g = &mut config.generator;
    if let Some(v) = args.sample_rate_hz {
        g.sample_rate_hz = v;
    }
    if let Some(v) = args.train_seconds {
        g.train_seconds = v;
    }
    if let Some(v) = args.validation_seconds {
        g.validation_seconds = v;
    }
    if let Some(v) = args.science_seconds {
        g.science_seconds = v;
    }
    if let Some(v) = args.tone_mode {
        g.tone_mode = v.into();
    }
    if let Some(v) = args.dwell_seconds {
        g.dwell_seconds = v;
    }
    if let Some(v) = args.noise_sigma_mv {
        g.noise.white_sigma_mv = v;
    }
    let seed = config.require_seed()?;
    let g = config.generator.clone();
    let rate = g.sample_rate_hz;

    // Size guard: pair splits carry two channels, the science run one.
    let pair_samples =
        2.0 * (g.train_seconds + g.validation_seconds) * rate as f64;
    let science_samples = g.science_seconds * rate as f64;
    let total_samples = (pair_samples + science_samples).round();
    if total_samples > BIG_DATA_SAMPLE_LIMIT as f64 && !args.big_data {
        return Err(Error::Usage(format!(
            "refusing to synthesize {:.2} Gigasamples ({:.0} samples, ≈ {:.1} GB \
             of int8 data) without --big-data",
            total_samples / 1e9,
            total_samples,
            total_samples / 1e9
        )));
    }

    ensure_dir(&config.data_dir)?;
    let cover = g.train_seconds.max(g.validation_seconds);
    let schedule = sweep_for_rate(g.tone_mode, g.dwell_seconds, rate, cover)?;

    let split_noise = |offset: u64| -> NoiseModel {
        let mut noise = g.noise.clone();
        noise.seed = seed + offset;
        noise
    };

    let mut files = Vec::new();
    let mut outputs: Vec<PathBuf> = Vec::new();

    let mut stage = Stage::new("generate");
    for (name, seconds, offset) in [
        ("train", g.train_seconds, TRAIN_SEED_OFFSET),
        ("validation", g.validation_seconds, VALIDATION_SEED_OFFSET),
    ] {
        let noise = split_noise(offset);
        let generator = PairGenerator::new(&schedule, &noise, seconds, rate)?;
        let path = config.data_dir.join(format!("{name}.tsd"));
        let stats = write_pair(&path, &generator, args.force, &mut stage)?;
        files.push(ManifestFile {
            path: path.clone(),
            role: name.to_string(),
            seconds,
            sample_rate_hz: rate,
            channels: 2,
            noise_seed: noise.seed,
            saturated_injected: stats.saturated_injected,
            saturated_squid: stats.saturated_squid,
        });
        outputs.push(path);
    }
    {
        let noise = split_noise(SCIENCE_SEED_OFFSET);
        let generator = ScienceGenerator::new(&noise, g.science_seconds, rate, g.planted.as_ref())?;
        let path = config.data_dir.join("science.tsd");
        let stats = write_science(&path, &generator, args.force, &mut stage)?;
        files.push(ManifestFile {
            path: path.clone(),
            role: "science".to_string(),
            seconds: g.science_seconds,
            sample_rate_hz: rate,
            channels: 1,
            noise_seed: noise.seed,
            saturated_injected: 0,
            saturated_squid: stats.saturated_squid,
        });
        outputs.push(path);
    }
    stage.finish();

    let manifest = Manifest {
        files,
        schedule,
        tone_mode: g.tone_mode,
        noise: g.noise.clone(),
        planted: g.planted.clone(),
        master_seed: seed,
        config_sha256: config.sha256_hex(),
    };
    let manifest_path = config.data_dir.join("manifest.json");
    guard_overwrite(&manifest_path, args.force)?;
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    outputs.push(manifest_path);

    let record = Provenance::for_command("generate", config, &[]);
    for path in &outputs {
        record.write_for(path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
