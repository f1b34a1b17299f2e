//! Mass-grid scans: run the windowed fit and 95% limit at each candidate
//! rest frequency over an averaged science PSD.

use serde::{Deserialize, Serialize};

use crate::dsp::{self, PsdAccumulator};
use crate::error::{Error, Result};
use crate::io::Container;
use crate::model::{PhysicalConstants, PowerSpectrum, SeriesData};
use crate::parallel::ordered_map_reduce;

use super::fit::{fit_window, upper_limit, Calibration, LimitPoint};
use super::halo::HaloModel;
use super::template::{build_template, GridSpec};

/// Keep-out margin below Nyquist for the top of a mass grid.
pub const NYQUIST_MARGIN: f64 = 1.0e-4;
/// Desk-scale default grid: number of points …
pub const DEFAULT_GRID_POINTS: usize = 10_000;
/// … spanning this frequency range, geometrically.
pub const DEFAULT_GRID_LO_HZ: f64 = 100_000.0;
pub const DEFAULT_GRID_HI_HZ: f64 = 2_000_000.0;
/// Segment length used when averaging science-run PSDs, seconds.
pub const DEFAULT_AVERAGE_SECONDS: u64 = 10;

/// A mass point the scan could not convert into a limit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanFailure {
    pub index: usize,
    pub frequency_hz: f64,
    pub message: String,
}

/// Upper-limit curve over a mass grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitCurve {
    pub points: Vec<LimitPoint>,
    pub failures: Vec<ScanFailure>,
    /// Number of averaged spectra behind the scanned PSD.
    pub n_averaged: u64,
    /// Frequency resolution of the scanned PSD, Hz.
    pub df: f64,
}

impl LimitCurve {
    /// CSV rendering: one row per successful mass point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mass_ev,frequency_hz,a95,g95,ts_at_zero\n");
        for p in &self.points {
            out.push_str(&format!(
                "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}\n",
                p.mass_ev, p.frequency_hz, p.a_95, p.g_95, p.ts_at_zero
            ));
        }
        out
    }
}

/// Geometric frequency grid with exact endpoints.
pub fn geometric_mass_grid(lo_hz: f64, hi_hz: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo_hz > 0.0) || !(hi_hz > lo_hz) || !lo_hz.is_finite() || !hi_hz.is_finite() {
        return Err(Error::Usage(format!(
            "mass grid needs 0 < lo < hi, got [{lo_hz}, {hi_hz}]"
        )));
    }
    if n < 2 {
        return Err(Error::Usage(format!(
            "mass grid needs at least 2 points, got {n}"
        )));
    }
    let log_lo = lo_hz.ln();
    let log_hi = hi_hz.ln();
    let mut grid: Vec<f64> = (0..n)
        .map(|i| (log_lo + (log_hi - log_lo) * i as f64 / (n - 1) as f64).exp())
        .collect();
    grid[0] = lo_hz;
    grid[n - 1] = hi_hz;
    Ok(grid)
}

/// The desk-scale default: 10⁴ geometric points, 100 kHz – 2 MHz.
pub fn default_mass_grid() -> Vec<f64> {
    geometric_mass_grid(DEFAULT_GRID_LO_HZ, DEFAULT_GRID_HI_HZ, DEFAULT_GRID_POINTS)
        .expect("default grid parameters are valid")
}

/// Check a mass grid against the PSD's frequency coverage.
pub(crate) fn validate_grid_coverage(
    masses: &[f64],
    psd: &PowerSpectrum,
    sample_rate: Option<u64>,
) -> Result<()> {
    let top = psd.f0 + (psd.len().saturating_sub(1)) as f64 * psd.df;
    let ceiling = match sample_rate {
        Some(rate) => (rate as f64 / 2.0) * (1.0 - NYQUIST_MARGIN),
        None => top * (1.0 - NYQUIST_MARGIN),
    };
    for &f in masses {
        if !f.is_finite() || f <= 0.0 {
            return Err(Error::Usage(format!(
                "mass grid entries must be positive and finite, got {f}"
            )));
        }
        if f < psd.f0 {
            return Err(Error::Usage(format!(
                "mass grid entry {f} Hz lies below the PSD start {} Hz",
                psd.f0
            )));
        }
        if f > ceiling {
            return Err(Error::Usage(format!(
                "mass grid entry {f} Hz exceeds the usable ceiling {ceiling:.3} Hz \
                 (Nyquist margin {NYQUIST_MARGIN})"
            )));
        }
    }
    Ok(())
}

/// Scan a mass grid, handing each successful point to `sink` in mass order
/// instead of collecting the curve; failures are recorded and the scan
/// continues past them.  Suits grids too large to hold in memory.
///
/// Deterministic: sink calls and the returned failures are a pure function
/// of the inputs, independent of `workers`.
pub fn scan_masses_streaming<F>(
    psd: &PowerSpectrum,
    masses: &[f64],
    halo: &HaloModel,
    calibration: &Calibration,
    constants: &PhysicalConstants,
    workers: usize,
    mut sink: F,
) -> Result<(usize, Vec<ScanFailure>)>
where
    F: FnMut(&LimitPoint) -> Result<()>,
{
    halo.validate()?;
    calibration.validate()?;
    constants.validate()?;
    if masses.is_empty() {
        return Ok((0, Vec::new()));
    }
    validate_grid_coverage(masses, psd, None)?;

    let grid = GridSpec::from_psd(psd);
    let items = masses.iter().copied().enumerate().collect::<Vec<_>>();
    let map = |(index, f_a): (usize, f64)| -> std::result::Result<LimitPoint, ScanFailure> {
        let run = || -> Result<LimitPoint> {
            let template = build_template(f_a, &grid, halo)?;
            let fit = fit_window(psd, &template, calibration)?;
            upper_limit(&fit, constants)
        };
        run().map_err(|e| ScanFailure {
            index,
            frequency_hz: f_a,
            message: e.to_string(),
        })
    };
    let folded = ordered_map_reduce(
        items,
        workers,
        map,
        Ok((0usize, Vec::new())),
        |state: Result<(usize, Vec<ScanFailure>)>, r| {
            let (mut n_points, mut fails) = state?;
            match r {
                Ok(p) => {
                    sink(&p)?;
                    n_points += 1;
                }
                Err(f) => fails.push(f),
            }
            Ok((n_points, fails))
        },
    );
    folded
}

/// Scan a mass grid over an averaged PSD, collecting the limit curve.
pub fn scan_masses(
    psd: &PowerSpectrum,
    masses: &[f64],
    halo: &HaloModel,
    calibration: &Calibration,
    constants: &PhysicalConstants,
    workers: usize,
) -> Result<LimitCurve> {
    let mut points = Vec::new();
    let (_, failures) = scan_masses_streaming(
        psd,
        masses,
        halo,
        calibration,
        constants,
        workers,
        |p| {
            points.push(p.clone());
            Ok(())
        },
    )?;
    Ok(LimitCurve {
        points,
        failures,
        n_averaged: psd.n_averaged,
        df: psd.df,
    })
}

/// Stream a container channel through segment PSDs and average them.
///
/// Segments are `segment_seconds` long; a trailing partial segment is
/// discarded.  Memory stays proportional to one segment.
pub fn averaged_container_psd(
    container: &Container,
    channel: usize,
    segment_seconds: u64,
    workers: usize,
) -> Result<PowerSpectrum> {
    let rate = container.header().sample_rate_hz;
    let segment_len = rate * segment_seconds;
    if segment_len == 0 {
        return Err(Error::Usage(format!(
            "segment length of {segment_seconds} s at {rate} Hz is empty"
        )));
    }
    let n_segments = container.n_segments(channel, segment_len)?;
    if n_segments == 0 {
        return Err(Error::Usage(format!(
            "channel {channel} holds fewer than one {segment_seconds}-s segment"
        )));
    }
    let segments = container.segments(channel, segment_len)?;
    let mut acc = PsdAccumulator::new();
    let folded = ordered_map_reduce(
        segments,
        workers,
        |seg: Result<(u64, SeriesData)>| seg.and_then(|(_, s)| dsp::psd_series(&s)),
        Ok(&mut acc),
        |acc: Result<&mut PsdAccumulator>, spectrum: Result<PowerSpectrum>| {
            let acc = acc?;
            acc.add(&spectrum?)?;
            Ok(acc)
        },
    );
    folded?;
    acc.finish()
}

/// Average `segment_seconds` PSDs over an in-memory series (same policy as
/// [`averaged_container_psd`]).
pub fn averaged_series_psd(
    series: &SeriesData,
    segment_seconds: u64,
    workers: usize,
) -> Result<PowerSpectrum> {
    let rate = series.sample_rate();
    let segment_len = (rate * segment_seconds) as usize;
    if segment_len == 0 || series.len() < segment_len {
        return Err(Error::Usage(format!(
            "series of {} samples holds fewer than one {segment_seconds}-s segment at {rate} Hz",
            series.len()
        )));
    }
    let n_segments = series.len() / segment_len;
    let mut acc = PsdAccumulator::new();
    let folded = ordered_map_reduce(
        (0..n_segments).map(|i| series.slice(i * segment_len, segment_len)),
        workers,
        |seg: SeriesData| dsp::psd_series(&seg),
        Ok(&mut acc),
        |acc: Result<&mut PsdAccumulator>, spectrum: Result<PowerSpectrum>| {
            let acc = acc?;
            acc.add(&spectrum?)?;
            Ok(acc)
        },
    );
    folded?;
    acc.finish()
}

/// Write the limit-curve CSV directly to a stream, for scans too large to
/// hold in memory comfortably.
pub fn write_curve_csv<W: std::io::Write>(curve: &LimitCurve, out: &mut W) -> Result<()> {
    out.write_all(curve.to_csv().as_bytes())
        .map_err(|e| Error::Io {
            path: "<stream>".into(),
            source: e,
        })
}
