//! `export`: convert JSON analysis artifacts (score reports, robustness
//! grids, limit curves, expected-limit bands, spectra) into plain CSV for
//! plotting. The artifact kind is detected from the document's keys.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{Error, Result};
use crate::limits::{BrazilBand, LimitCurve};
use crate::model::PowerSpectrum;
use crate::score::{NoiseRobustnessGrid, ScoreReport};

use super::config::PipelineConfig;
use super::provenance::Provenance;
use super::{ensure_dir, guard_overwrite, ExportArgs};

fn score_report_csv(report: &ScoreReport) -> String {
    let mut out = String::from("segment_index,nu0,snr_squid,snr_injected,snr_injected_norm\n");
    for r in &report.records {
        writeln!(
            out,
            "{},{:.9e},{:.9e},{:.9e},{:.9e}",
            r.segment_index, r.nu0, r.snr_squid, r.snr_injected, r.snr_injected_norm
        )
        .expect("write to String cannot fail");
    }
    out
}

/// Matrix layout: one row per perturbation amplitude, one column per σ;
/// the header carries the σ values.
fn robustness_csv(grid: &NoiseRobustnessGrid) -> String {
    let mut out = String::from("amplitude_mv");
    for s in &grid.sigmas_mv {
        write!(out, ",{s}").expect("write to String cannot fail");
    }
    out.push('\n');
    for (i, a) in grid.amplitudes_mv.iter().enumerate() {
        write!(out, "{a}").expect("write to String cannot fail");
        for v in &grid.scores[i] {
            write!(out, ",{v:.6}").expect("write to String cannot fail");
        }
        out.push('\n');
    }
    out
}

/// Minimal plotting form of a limit curve: mass against the 95% CL coupling.
fn limit_curve_csv(curve: &LimitCurve) -> String {
    let mut out = String::from("mass_ev,g95\n");
    for p in &curve.points {
        writeln!(out, "{:.9e},{:.9e}", p.mass_ev, p.g_95).expect("write to String cannot fail");
    }
    out
}

fn spectrum_csv(psd: &PowerSpectrum) -> String {
    let mut out = String::from("frequency_hz,value\n");
    for (i, v) in psd.values.iter().enumerate() {
        writeln!(out, "{:.9e},{:.9e}", psd.frequency(i), v).expect("write to String cannot fail");
    }
    out
}

fn parse<T: serde::de::DeserializeOwned>(value: Value, input: &Path, kind: &str) -> Result<T> {
    serde_json::from_value(value).map_err(|e| {
        Error::Format(format!(
            "{} looks like a {kind} but does not parse as one: {e}",
            input.display()
        ))
    })
}

/// Detect the artifact kind from its top-level keys and render it as CSV.
fn convert(value: Value, input: &Path) -> Result<String> {
    let Some(obj) = value.as_object() else {
        return Err(Error::Format(format!(
            "{}: expected a JSON object at the top level",
            input.display()
        )));
    };
    let has = |k: &str| obj.contains_key(k);
    if has("records") && has("lambda") {
        let report: ScoreReport = parse(value, input, "score report")?;
        Ok(score_report_csv(&report))
    } else if has("amplitudes_mv") && has("scores") {
        let grid: NoiseRobustnessGrid = parse(value, input, "noise robustness grid")?;
        if grid.scores.len() != grid.amplitudes_mv.len()
            || grid.scores.iter().any(|row| row.len() != grid.sigmas_mv.len())
        {
            return Err(Error::Format(format!(
                "{}: score matrix shape does not match its amplitude/σ axes",
                input.display()
            )));
        }
        Ok(robustness_csv(&grid))
    } else if has("points") && has("n_trials") {
        let band: BrazilBand = parse(value, input, "expected-limit band")?;
        Ok(band.to_csv())
    } else if has("points") {
        let curve: LimitCurve = parse(value, input, "limit curve")?;
        Ok(limit_curve_csv(&curve))
    } else if has("values") && has("df") && has("f0") {
        let psd: PowerSpectrum = parse(value, input, "power spectrum")?;
        Ok(spectrum_csv(&psd))
    } else {
        Err(Error::Format(format!(
            "{}: unrecognized artifact (expected a score report, noise \
             robustness grid, limit curve, expected-limit band, or power \
             spectrum)",
            input.display()
        )))
    }
}

fn output_path(input: &Path, out_dir: Option<&Path>) -> Result<PathBuf> {
    let stem = input.file_stem().ok_or_else(|| {
        Error::Usage(format!("input path {} has no file name", input.display()))
    })?;
    let mut name = stem.to_os_string();
    name.push(".csv");
    Ok(match out_dir {
        Some(dir) => dir.join(name),
        None => input.with_file_name(name),
    })
}

pub fn run(config: &PipelineConfig, args: &ExportArgs) -> Result<()> {
    if let Some(dir) = &args.out_dir {
        ensure_dir(dir)?;
    }
    for input in &args.inputs {
        let text = fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
        let value: Value = serde_json::from_str(&text).map_err(|e| {
            Error::Format(format!("{}: not valid JSON: {e}", input.display()))
        })?;
        let csv = convert(value, input)?;
        let out = output_path(input, args.out_dir.as_deref())?;
        guard_overwrite(&out, args.force)?;
        fs::write(&out, csv).map_err(|e| Error::io(&out, e))?;
        Provenance::for_command("export", config, &[input.as_path()]).write_for(&out)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
