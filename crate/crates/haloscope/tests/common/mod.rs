//! Shared oracles and fixture builders for the integration suites.
//!
//! The spectral oracle here is deliberately independent of the library's FFT
//! path: a quadratic-time direct DFT using incremental rotations with
//! periodic exact resynchronization, so agreement between the two routes
//! checks the transform itself, not a shared implementation.

#![allow(dead_code)]

use haloscope::model::{ChannelRole, PowerSpectrum, SampleSeries, SeriesData};
use haloscope::simgen::{
    InjectionSchedule, NoiseModel, PairGenerator, PlantedTone, ScheduleEntry, ScienceGenerator,
};

/// One-sided PSD by direct O(N²) DFT, same conventions as the library:
/// rectangular window, df = fs/N, interior bins doubled, DC and (even-N)
/// Nyquist not doubled.
///
/// Each output bin accumulates x[n]·e^{−2πikn/N} with an incrementally
/// rotated phasor, resynchronized from exact integer-reduced angles every
/// `RESYNC` samples to keep the rotation error far below 1e−9.
pub fn quadratic_dft_psd(samples: &[f64], sample_rate_hz: u64) -> PowerSpectrum {
    const RESYNC: usize = 1024;
    let n = samples.len();
    assert!(n > 0, "oracle needs a nonempty series");
    let fs = sample_rate_hz as f64;
    let n_bins = n / 2 + 1;
    let scale = 1.0 / (fs * n as f64);
    let mut values = Vec::with_capacity(n_bins);
    for k in 0..n_bins {
        // Per-sample rotation e^{−2πik/N}.
        let theta = -std::f64::consts::TAU * k as f64 / n as f64;
        let (step_sin, step_cos) = theta.sin_cos();
        let mut re = 0.0;
        let mut im = 0.0;
        let mut cr = 1.0;
        let mut ci = 0.0;
        for (idx, &x) in samples.iter().enumerate() {
            if idx % RESYNC == 0 {
                // Exact phase: reduce k·idx modulo N in integers first, so
                // the sin/cos argument stays small and fully accurate.
                let phase =
                    -std::f64::consts::TAU * ((k as u64 * idx as u64) % n as u64) as f64
                        / n as f64;
                let (s, c) = phase.sin_cos();
                cr = c;
                ci = s;
            }
            re += x * cr;
            im += x * ci;
            let next_cr = cr * step_cos - ci * step_sin;
            ci = cr * step_sin + ci * step_cos;
            cr = next_cr;
        }
        let mut v = (re * re + im * im) * scale;
        let interior = k != 0 && !(n % 2 == 0 && k == n / 2);
        if interior {
            v *= 2.0;
        }
        values.push(v);
    }
    PowerSpectrum {
        values,
        df: fs / n as f64,
        f0: 0.0,
        n_averaged: 1,
    }
}

/// Geometric tone ladder from `f_lo` to `f_hi` (exact endpoints), all at one
/// amplitude and dwell.
pub fn geometric_schedule(
    f_lo: f64,
    f_hi: f64,
    n_tones: usize,
    amplitude_mv: f64,
    dwell_s: f64,
) -> InjectionSchedule {
    assert!(n_tones >= 2);
    let log_step = (f_hi / f_lo).ln() / (n_tones - 1) as f64;
    let entries = (0..n_tones)
        .map(|i| {
            let frequency_hz = if i == 0 {
                f_lo
            } else if i == n_tones - 1 {
                f_hi
            } else {
                f_lo * (log_step * i as f64).exp()
            };
            ScheduleEntry {
                frequency_hz,
                amplitude_mv,
                duration_s: dwell_s,
            }
        })
        .collect();
    InjectionSchedule::new(entries).expect("fixture schedule is valid")
}

/// Synthesize a full aligned pair in memory, chunked the same way the CLI
/// writes files (1-second chunks), returned as (squid, injected).
pub fn generate_pair(
    schedule: &InjectionSchedule,
    noise: &NoiseModel,
    seconds: f64,
    sample_rate: u64,
) -> (SeriesData, SeriesData) {
    let generator =
        PairGenerator::new(schedule, noise, seconds, sample_rate).expect("fixture generates");
    let total = generator.total_samples();
    let mut squid = Vec::with_capacity(total as usize);
    let mut injected = Vec::with_capacity(total as usize);
    let chunk_len = sample_rate.max(1) as usize;
    let mut start = 0u64;
    while start < total {
        let len = chunk_len.min((total - start) as usize);
        let chunk = generator.chunk(start, len);
        squid.extend_from_slice(&chunk.squid);
        injected.extend_from_slice(&chunk.injected);
        start += len as u64;
    }
    (
        SeriesData::Int8(
            SampleSeries::new(squid, sample_rate, ChannelRole::Squid, 0).expect("valid series"),
        ),
        SeriesData::Int8(
            SampleSeries::new(injected, sample_rate, ChannelRole::Injected, 0)
                .expect("valid series"),
        ),
    )
}

/// Stream a science run (noise plus optional planted tone) straight into an
/// averaged PSD without ever holding more than one averaging segment.
pub fn science_averaged_psd(
    noise: &NoiseModel,
    seconds: f64,
    sample_rate: u64,
    planted: Option<&PlantedTone>,
    average_seconds: u64,
) -> PowerSpectrum {
    use haloscope::dsp::{psd, PsdAccumulator};
    use haloscope::model::raw_to_millivolts;

    let generator =
        ScienceGenerator::new(noise, seconds, sample_rate, planted).expect("fixture generates");
    let total = generator.total_samples();
    let segment_len = (sample_rate * average_seconds) as usize;
    assert!(segment_len > 0 && total >= segment_len as u64);
    let n_segments = total / segment_len as u64;
    let mut acc = PsdAccumulator::new();
    for i in 0..n_segments {
        let (raw, _saturated) = generator.chunk(i * segment_len as u64, segment_len);
        let mv: Vec<f64> = raw.iter().map(|&s| raw_to_millivolts(s)).collect();
        acc.add(&psd(&mv, sample_rate).expect("segment spectrum"))
            .expect("same grid");
    }
    acc.finish().expect("at least one segment")
}

/// Coefficient of determination of the least-squares line through (x, y).
pub fn linear_r2(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    assert!(n >= 3.0, "R² needs at least 3 points");
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    (sxy * sxy) / (sxx * syy)
}

/// Median of a slice (averaging the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Sample standard deviation (n − 1 denominator).
pub fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    assert!(n >= 2.0);
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Relative difference |a − b| / max(|a|, |b|), 0 when both are 0.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
