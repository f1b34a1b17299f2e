//! `limit` and `band`: average science-run PSDs, scan the mass grid for
//! 95% CL coupling limits, and optionally bound them with expected-limit
//! (Brazil) bands from pseudo-experiments.

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::Container;
use crate::limits::band::brazil_band;
use crate::limits::fit::MIN_AVERAGES;
use crate::limits::scan::{
    geometric_mass_grid, scan_masses, scan_masses_streaming, ScanFailure,
};
use crate::limits::{averaged_container_psd, BrazilBand, LimitCurve};
use crate::model::PowerSpectrum;

use super::config::{PipelineConfig, FULL_SCALE_GRID_POINTS};
use super::provenance::Provenance;
use super::{ensure_dir, guard_overwrite, BandArgs, LimitArgs, Stage};

/// Warn when the averaged PSD is too coarse to resolve the signal line
/// shape at the low end of the mass grid.
fn warn_if_grid_coarse(masses: &[f64], psd: &PowerSpectrum) {
    if let Some(&lo) = masses.first() {
        if !crate::limits::grid_adequate(lo, psd.df) {
            eprintln!(
                "warning: frequency resolution {:.3e} Hz is coarser than 1e-6 \
                 of the lowest scan frequency {:.3e} Hz; limits at the low end \
                 will under-resolve the line shape (average longer segments)",
                psd.df, lo
            );
        }
    }
}

/// Shared mass-grid override plumbing for `limit` and `band`.
struct GridOverride {
    lo_hz: Option<f64>,
    hi_hz: Option<f64>,
    points: Option<usize>,
}

fn resolve_masses(config: &PipelineConfig, over: &GridOverride, full_scale: bool) -> Result<Vec<f64>> {
    let grid = &config.limit.mass_grid;
    let lo = over.lo_hz.unwrap_or(grid.lo_hz);
    let hi = over.hi_hz.unwrap_or(grid.hi_hz);
    let points = if full_scale {
        FULL_SCALE_GRID_POINTS
    } else {
        over.points.unwrap_or(grid.points)
    };
    geometric_mass_grid(lo, hi, points)
}

/// Open the science container and compute its averaged PSD, refusing runs
/// too short to meet the averaging minimum.
fn averaged_science_psd(
    config: &PipelineConfig,
    science: &Path,
    average_seconds: u64,
) -> Result<(PowerSpectrum, u64)> {
    let container = Container::open(science)?;
    let rate = container.header().sample_rate_hz;
    let total = container.header().channel_lengths[0];
    let required = MIN_AVERAGES * average_seconds * rate;
    if total < required {
        return Err(Error::Usage(format!(
            "science run {} holds {:.1} s at {rate} Hz; the limit analysis \
             needs at least {} s ({MIN_AVERAGES} averages of {average_seconds} s)",
            science.display(),
            total as f64 / rate as f64,
            MIN_AVERAGES * average_seconds
        )));
    }
    let mut stage = Stage::new("average-psd");
    let psd = averaged_container_psd(&container, 0, average_seconds, config.effective_workers())?;
    stage.add_samples(total);
    stage.finish();
    Ok((psd, rate))
}

fn write_json<T: Serialize>(path: &Path, value: &T, force: bool) -> Result<()> {
    guard_overwrite(path, force)?;
    let text = serde_json::to_string_pretty(value).expect("artifact serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str, force: bool) -> Result<()> {
    guard_overwrite(path, force)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Summary stored as JSON when the full curve streams to CSV only.
#[derive(Serialize)]
struct StreamedScanSummary {
    n_points: usize,
    n_failures: usize,
    failures: Vec<ScanFailure>,
    n_averaged: u64,
    df: f64,
    csv_path: PathBuf,
}

pub fn run(config: &mut PipelineConfig, args: &LimitArgs) -> Result<()> {
    if let Some(s) = args.average_seconds {
        config.limit.average_seconds = s;
    }
    if let Some(n) = args.n_trials {
        config.limit.n_trials = n;
    }
    let over = GridOverride {
        lo_hz: args.mass_lo_hz,
        hi_hz: args.mass_hi_hz,
        points: args.mass_points,
    };
    let masses = resolve_masses(config, &over, args.full_scale)?;
    let (psd, _rate) = averaged_science_psd(config, &args.science, config.limit.average_seconds)?;
    ensure_dir(&config.output_dir)?;
    let workers = config.effective_workers();
    let limit_cfg = &config.limit;

    warn_if_grid_coarse(&masses, &psd);
    let csv_path = config.output_dir.join("limit_curve.csv");
    let json_path = config.output_dir.join("limit_curve.json");
    let mut outputs: Vec<PathBuf> = Vec::new();

    let stage = Stage::new("scan");
    if args.full_scale {
        // Stream rows straight to disk; keep only counts and failures.
        guard_overwrite(&csv_path, args.force)?;
        let file = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        let mut out = BufWriter::new(file);
        out.write_all(b"mass_ev,frequency_hz,a95,g95,ts_at_zero\n")
            .map_err(|e| Error::io(&csv_path, e))?;
        let (n_points, failures) = scan_masses_streaming(
            &psd,
            &masses,
            &limit_cfg.halo,
            &limit_cfg.calibration,
            &limit_cfg.constants,
            workers,
            |p| {
                writeln!(
                    out,
                    "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
                    p.mass_ev, p.frequency_hz, p.a_95, p.g_95, p.ts_at_zero
                )
                .map_err(|e| Error::io(&csv_path, e))
            },
        )?;
        out.flush().map_err(|e| Error::io(&csv_path, e))?;
        let summary = StreamedScanSummary {
            n_points,
            n_failures: failures.len(),
            failures,
            n_averaged: psd.n_averaged,
            df: psd.df,
            csv_path: csv_path.clone(),
        };
        write_json(&json_path, &summary, args.force)?;
        println!(
            "scanned {} masses ({} failures)",
            n_points + summary.n_failures,
            summary.n_failures
        );
    } else {
        let curve: LimitCurve = scan_masses(
            &psd,
            &masses,
            &limit_cfg.halo,
            &limit_cfg.calibration,
            &limit_cfg.constants,
            workers,
        )?;
        write_text(&csv_path, &curve.to_csv(), args.force)?;
        write_json(&json_path, &curve, args.force)?;
        println!(
            "scanned {} masses ({} limits, {} failures)",
            masses.len(),
            curve.points.len(),
            curve.failures.len()
        );
    }
    stage.finish();
    outputs.push(csv_path);
    outputs.push(json_path);

    if args.with_band {
        let band = compute_band(config, &psd, &masses)?;
        let band_csv = config.output_dir.join("band.csv");
        let band_json = config.output_dir.join("band.json");
        write_text(&band_csv, &band.to_csv(), args.force)?;
        write_json(&band_json, &band, args.force)?;
        println!(
            "band over {} masses ({} failures)",
            band.points.len(),
            band.failures.len()
        );
        outputs.push(band_csv);
        outputs.push(band_json);
    }

    let record = Provenance::for_command("limit", config, &[args.science.as_path()]);
    for path in &outputs {
        record.write_for(path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn compute_band(
    config: &PipelineConfig,
    psd: &PowerSpectrum,
    masses: &[f64],
) -> Result<BrazilBand> {
    let seed = config.require_seed()?;
    let limit_cfg = &config.limit;
    let mut stage = Stage::new("band");
    let band = brazil_band(
        psd,
        masses,
        &limit_cfg.halo,
        &limit_cfg.calibration,
        &limit_cfg.constants,
        limit_cfg.n_trials,
        seed,
        config.effective_workers(),
    )?;
    stage.add_samples((band.points.len() * limit_cfg.n_trials) as u64);
    stage.finish();
    Ok(band)
}

pub fn run_band(config: &mut PipelineConfig, args: &BandArgs) -> Result<()> {
    if let Some(s) = args.average_seconds {
        config.limit.average_seconds = s;
    }
    if let Some(n) = args.n_trials {
        config.limit.n_trials = n;
    }
    let over = GridOverride {
        lo_hz: args.mass_lo_hz,
        hi_hz: args.mass_hi_hz,
        points: args.mass_points,
    };
    let masses = resolve_masses(config, &over, false)?;
    let (psd, _rate) = averaged_science_psd(config, &args.science, config.limit.average_seconds)?;
    warn_if_grid_coarse(&masses, &psd);
    ensure_dir(&config.output_dir)?;

    let band = compute_band(config, &psd, &masses)?;
    let band_csv = config.output_dir.join("band.csv");
    let band_json = config.output_dir.join("band.json");
    write_text(&band_csv, &band.to_csv(), args.force)?;
    write_json(&band_json, &band, args.force)?;
    println!(
        "band over {} masses ({} failures)",
        band.points.len(),
        band.failures.len()
    );
    let record = Provenance::for_command("band", config, &[args.science.as_path()]);
    for path in [&band_csv, &band_json] {
        record.write_for(path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
