//! Expected-limit ("Brazil") bands: quantiles of the 95% CL coupling limit
//! over an ensemble of background-only pseudo-experiments.
//!
//! Pseudo-data are drawn at the averaged-PSD level around the measured
//! background: d_i = b_i·(1 + z_i/√n_averaged) with standard-normal z_i,
//! clamped positive.  Draws are keyed by (seed, trial, absolute bin), so a
//! bin shared by two overlapping windows sees the same fluctuation within a
//! trial — each trial is one coherent pseudo-dataset — and results do not
//! depend on worker scheduling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{frequency_to_mass_ev, PhysicalConstants, PowerSpectrum};
use crate::parallel::ordered_map_reduce;
use crate::rng::CounterRng;

use super::fit::{fit_from_parts, upper_limit, window_shape, Calibration};
use super::halo::HaloModel;
use super::scan::{validate_grid_coverage, ScanFailure};
use super::template::{build_template, GridSpec};

/// Minimum ensemble size for meaningful outer quantiles.
pub const MIN_BAND_TRIALS: usize = 100;
/// RNG stream base for band trials (trial t draws from stream base + t).
pub const BAND_STREAM_BASE: u64 = 0x200;
/// Relative floor applied when clamping pseudo-data positive.
const PSEUDO_DATA_FLOOR: f64 = 1.0e-6;

/// Expected-limit quantiles at one mass point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandPoint {
    pub frequency_hz: f64,
    pub mass_ev: f64,
    /// 2.5% quantile of g_95 (outer rank rounded outward).
    pub g_q2p5: f64,
    /// 16% quantile (−1σ).
    pub g_q16: f64,
    /// Median expected limit.
    pub g_median: f64,
    /// 84% quantile (+1σ).
    pub g_q84: f64,
    /// 97.5% quantile (outer rank rounded outward).
    pub g_q97p5: f64,
    /// Number of pseudo-experiments that produced a limit here.
    pub n_trials_used: usize,
}

/// Expected-limit band over a mass grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BrazilBand {
    pub points: Vec<BandPoint>,
    pub failures: Vec<ScanFailure>,
    pub n_trials: usize,
    pub seed: u64,
    pub n_averaged: u64,
    pub df: f64,
}

impl BrazilBand {
    /// CSV rendering: one row per mass point, five quantile columns.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("mass_ev,frequency_hz,g95_q2p5,g95_q16,g95_median,g95_q84,g95_q97p5\n");
        for p in &self.points {
            out.push_str(&format!(
                "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}\n",
                p.mass_ev, p.frequency_hz, p.g_q2p5, p.g_q16, p.g_median, p.g_q84, p.g_q97p5
            ));
        }
        out
    }
}

/// Standard nearest-rank quantile (1-based rank round(p·(n+1)), clamped).
fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let r = (p * (n + 1) as f64).round().clamp(1.0, n as f64) as usize;
    sorted[r - 1]
}

/// Lower outer quantile, rank rounded outward (down) by one.
fn outward_low(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len() as i64;
    let r = ((p * (n + 1) as f64).floor() as i64 - 1).clamp(1, n) as usize;
    sorted[r - 1]
}

/// Upper outer quantile, rank rounded outward (up) by one.
fn outward_high(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len() as i64;
    let r = ((p * (n + 1) as f64).ceil() as i64 + 1).clamp(1, n) as usize;
    sorted[r - 1]
}

/// Compute the expected-limit band over `masses` for a measured background.
///
/// Per-mass templates and windows are built once and shared by all trials;
/// a mass whose template or window fails — or where no trial yields a
/// limit — is recorded in `failures` and skipped.
#[allow(clippy::too_many_arguments)]
pub fn brazil_band(
    background: &PowerSpectrum,
    masses: &[f64],
    halo: &HaloModel,
    calibration: &Calibration,
    constants: &PhysicalConstants,
    n_trials: usize,
    seed: u64,
    workers: usize,
) -> Result<BrazilBand> {
    if n_trials < MIN_BAND_TRIALS {
        return Err(Error::Usage(format!(
            "expected-limit band needs at least {MIN_BAND_TRIALS} trials for \
             stable outer quantiles, got {n_trials}"
        )));
    }
    halo.validate()?;
    calibration.validate()?;
    constants.validate()?;
    let empty = BrazilBand {
        points: Vec::new(),
        failures: Vec::new(),
        n_trials,
        seed,
        n_averaged: background.n_averaged,
        df: background.df,
    };
    if masses.is_empty() {
        return Ok(empty);
    }
    validate_grid_coverage(masses, background, None)?;

    let grid = GridSpec::from_psd(background);
    let sqrt_n = (background.n_averaged as f64).sqrt();
    let items = masses.iter().copied().enumerate().collect::<Vec<_>>();

    let map = |(index, f_a): (usize, f64)| -> std::result::Result<BandPoint, ScanFailure> {
        let fail = |message: String| ScanFailure {
            index,
            frequency_hz: f_a,
            message,
        };
        let template = build_template(f_a, &grid, halo).map_err(|e| fail(e.to_string()))?;
        let (start, len, shape) =
            window_shape(&grid, &template, calibration).map_err(|e| fail(e.to_string()))?;
        let bg = &background.values[start..start + len];

        let mut g95s: Vec<f64> = Vec::with_capacity(n_trials);
        for trial in 0..n_trials {
            let rng = CounterRng::new(seed, BAND_STREAM_BASE + trial as u64);
            let data: Vec<f64> = bg
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let z = rng.normal((start + i) as u64);
                    b * (1.0 + z / sqrt_n).max(PSEUDO_DATA_FLOOR)
                })
                .collect();
            let outcome = fit_from_parts(f_a, start, data, shape.clone(), background.n_averaged)
                .and_then(|fit| upper_limit(&fit, constants));
            if let Ok(point) = outcome {
                g95s.push(point.g_95);
            }
        }
        if g95s.is_empty() {
            return Err(fail("no pseudo-experiment produced a limit".into()));
        }
        g95s.sort_by(f64::total_cmp);
        Ok(BandPoint {
            frequency_hz: f_a,
            mass_ev: frequency_to_mass_ev(f_a),
            g_q2p5: outward_low(&g95s, 0.025),
            g_q16: nearest_rank(&g95s, 0.16),
            g_median: nearest_rank(&g95s, 0.50),
            g_q84: nearest_rank(&g95s, 0.84),
            g_q97p5: outward_high(&g95s, 0.975),
            n_trials_used: g95s.len(),
        })
    };

    let (points, failures) = ordered_map_reduce(
        items,
        workers,
        map,
        (Vec::new(), Vec::new()),
        |(mut pts, mut fails): (Vec<BandPoint>, Vec<ScanFailure>), r| {
            match r {
                Ok(p) => pts.push(p),
                Err(f) => fails.push(f),
            }
            (pts, fails)
        },
    );

    Ok(BrazilBand {
        points,
        failures,
        ..empty
    })
}
