//! `score`: evaluate a denoised dataset against the clean injected channel,
//! auto-calibrating the logarithm base on the raw pair when none is set.

use crate::error::{Error, Result};
use crate::io::Container;
use crate::score::{calibrate_base, score_dataset, ContainerPairSource, ScoreMode, ScoreReport};

use super::config::PipelineConfig;
use super::provenance::Provenance;
use super::{ensure_dir, guard_overwrite, ScoreArgs, Stage};

/// Coarse-mode statistics derived from a fine report's per-segment records
/// (identical to a direct coarse run: same segments, same fold order).
fn coarse_from_fine(report: &ScoreReport) -> Option<(f64, f64)> {
    if report.mode != ScoreMode::Coarse && !report.records.is_empty() {
        let subset: Vec<_> = report
            .records
            .iter()
            .filter(|r| r.segment_index % 10 == 0)
            .collect();
        let max_inj = subset
            .iter()
            .map(|r| r.snr_injected)
            .fold(f64::NEG_INFINITY, f64::max);
        if !(max_inj > 0.0) {
            return None;
        }
        let lambda = subset
            .iter()
            .map(|r| r.snr_squid * (r.snr_injected / max_inj))
            .sum::<f64>()
            / subset.len() as f64;
        if lambda <= 0.0 {
            return None;
        }
        return Some((lambda, lambda.ln() / report.base.ln()));
    }
    None
}

pub fn run(config: &mut PipelineConfig, args: &ScoreArgs) -> Result<()> {
    if let Some(mode) = args.mode {
        config.score.mode = mode.into();
    }
    if let Some(base) = args.base {
        config.score.base = Some(base);
    }
    if let Some(s) = args.segment_seconds {
        config.score.segment_seconds = s;
    }

    let denoised = Container::open(&args.denoised)?;
    let raw = Container::open(&args.raw)?;
    let rate = denoised.header().sample_rate_hz;
    let segment_len = (config.score.segment_seconds * rate as f64).round() as u64;
    if segment_len == 0 {
        return Err(Error::Usage(format!(
            "segment length of {} s at {rate} Hz is empty",
            config.score.segment_seconds
        )));
    }
    let injected_channel = if raw.header().n_channels() == 2 { 1 } else { 0 };

    let workers = config.effective_workers();
    let base = match config.score.base {
        Some(base) => base,
        None => {
            if raw.header().n_channels() != 2 {
                return Err(Error::Usage(format!(
                    "auto-calibration needs the raw pair container (2 channels), \
                     but {} has {}; pass --base or point the second argument at \
                     the raw pair",
                    args.raw.display(),
                    raw.header().n_channels()
                )));
            }
            let mut stage = Stage::new("calibrate");
            let mut raw_pair = ContainerPairSource::new(&raw, 0, &raw, 1, segment_len)?;
            let base = calibrate_base(&mut raw_pair, workers)?;
            stage.add_samples(2 * raw.header().channel_lengths[0]);
            stage.finish();
            base
        }
    };

    let mut stage = Stage::new("score");
    let mut pair = ContainerPairSource::new(&denoised, 0, &raw, injected_channel, segment_len)?;
    let report = score_dataset(&mut pair, base, config.score.mode, workers)?;
    stage.add_samples(2 * report.n_segments * segment_len);
    stage.finish();

    match report.mode {
        ScoreMode::Fine => {
            println!("fine score: {:.4}", report.score);
            if let Some((lambda, score)) = coarse_from_fine(&report) {
                println!("coarse score: {score:.4}");
                eprintln!(
                    "[score] fine Λ = {:.6e}, coarse Λ = {lambda:.6e}, base = {:.6e}, \
                     {} segments",
                    report.lambda, report.base, report.n_segments
                );
            }
        }
        ScoreMode::Coarse => {
            println!("coarse score: {:.4}", report.score);
            eprintln!(
                "[score] coarse Λ = {:.6e}, base = {:.6e}, {} segments \
                 (fine mode not run; rerun with --mode fine for both)",
                report.lambda, report.base, report.n_segments
            );
        }
    }

    let report_path = match &args.report {
        Some(p) => p.clone(),
        None => config.output_dir.join("score_report.json"),
    };
    if let Some(parent) = report_path.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    guard_overwrite(&report_path, args.force)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&report_path, text).map_err(|e| Error::io(&report_path, e))?;
    Provenance::for_command(
        "score",
        config,
        &[args.denoised.as_path(), args.raw.as_path()],
    )
    .write_for(&report_path)?;
    println!("wrote {}", report_path.display());
    Ok(())
}
