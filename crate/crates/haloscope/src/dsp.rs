//! One-sided power spectral densities and their averaging.
//!
//! Conventions, fixed across the crate:
//!
//! - rectangular window, no zero padding, full segment length N;
//! - frequency grid f_k = k·df with df = fs/N, k = 0 … ⌊N/2⌋;
//! - interior bins carry 2·|X_k|²/(fs·N); the DC bin and (for even N) the
//!   Nyquist bin carry |X_k|²/(fs·N) — for odd N the last bin is interior
//!   and is doubled;
//! - consequently Σ_k PSD_k·df equals the mean square of the input exactly
//!   (discrete Parseval identity), and a white-noise input of variance σ²
//!   has expected level 2σ²/fs on interior bins.
//!
//! Averaging is weighted by each spectrum's `n_averaged` and accumulated in
//! a fixed sequential order, so a given input sequence always reproduces the
//! same bits.

use std::cell::RefCell;

use realfft::RealFftPlanner;

use crate::error::{Error, Result};
use crate::model::{PowerSpectrum, SeriesData};

thread_local! {
    static PLANNER: RefCell<RealFftPlanner<f64>> = RefCell::new(RealFftPlanner::new());
}

/// One-sided PSD of a real series in millivolts; units mV²/Hz.
pub fn psd(samples: &[f64], sample_rate_hz: u64) -> Result<PowerSpectrum> {
    if samples.is_empty() {
        return Err(Error::Usage("cannot take the spectrum of an empty series".into()));
    }
    if sample_rate_hz == 0 {
        return Err(Error::Usage("sample rate must be positive".into()));
    }
    let n = samples.len();
    let fs = sample_rate_hz as f64;
    let spectrum = PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_forward(n);
        let mut input = samples.to_vec();
        let mut output = fft.make_output_vec();
        fft.process(&mut input, &mut output)
            .map_err(|e| Error::Numerical(format!("FFT failed for length {n}: {e}")))?;
        Ok::<_, Error>(output)
    })?;

    let scale = 1.0 / (fs * n as f64);
    let n_bins = n / 2 + 1;
    let mut values = Vec::with_capacity(n_bins);
    for (k, c) in spectrum.iter().enumerate() {
        let mut v = (c.re * c.re + c.im * c.im) * scale;
        let is_dc = k == 0;
        let is_nyquist = n % 2 == 0 && k == n / 2;
        if !is_dc && !is_nyquist {
            v *= 2.0;
        }
        values.push(v);
    }
    debug_assert_eq!(values.len(), n_bins);
    Ok(PowerSpectrum {
        values,
        df: fs / n as f64,
        f0: 0.0,
        n_averaged: 1,
    })
}

/// PSD of a stored series, computed on its millivolt values.
pub fn psd_series(data: &SeriesData) -> Result<PowerSpectrum> {
    psd(&data.to_millivolts().samples, data.sample_rate())
}

fn grid_mismatch(a: &PowerSpectrum, b: &PowerSpectrum) -> Option<String> {
    if a.len() != b.len() || a.df != b.df || a.f0 != b.f0 {
        Some(format!(
            "incompatible frequency grids: {} bins, df = {} Hz, f0 = {} Hz vs {} bins, df = {} Hz, f0 = {} Hz",
            a.len(),
            a.df,
            a.f0,
            b.len(),
            b.df,
            b.f0
        ))
    } else {
        None
    }
}

/// Streaming weighted average of spectra sharing one frequency grid.
pub struct PsdAccumulator {
    sum: Vec<f64>,
    df: f64,
    f0: f64,
    n_averaged: u64,
}

impl PsdAccumulator {
    pub fn new() -> Self {
        Self {
            sum: Vec::new(),
            df: 0.0,
            f0: 0.0,
            n_averaged: 0,
        }
    }

    pub fn n_averaged(&self) -> u64 {
        self.n_averaged
    }

    /// Fold one spectrum in, weighted by its own `n_averaged`.
    pub fn add(&mut self, spectrum: &PowerSpectrum) -> Result<()> {
        if spectrum.n_averaged == 0 {
            return Err(Error::Usage(
                "cannot average a spectrum with n_averaged = 0".into(),
            ));
        }
        if self.n_averaged == 0 {
            self.sum = spectrum
                .values
                .iter()
                .map(|v| v * spectrum.n_averaged as f64)
                .collect();
            self.df = spectrum.df;
            self.f0 = spectrum.f0;
            self.n_averaged = spectrum.n_averaged;
            return Ok(());
        }
        let reference = PowerSpectrum {
            values: vec![0.0; self.sum.len()],
            df: self.df,
            f0: self.f0,
            n_averaged: self.n_averaged,
        };
        if let Some(msg) = grid_mismatch(&reference, spectrum) {
            return Err(Error::Usage(msg));
        }
        let w = spectrum.n_averaged as f64;
        for (acc, v) in self.sum.iter_mut().zip(&spectrum.values) {
            *acc += v * w;
        }
        self.n_averaged += spectrum.n_averaged;
        Ok(())
    }

    pub fn finish(self) -> Result<PowerSpectrum> {
        if self.n_averaged == 0 {
            return Err(Error::Usage("cannot average zero spectra".into()));
        }
        let w = self.n_averaged as f64;
        Ok(PowerSpectrum {
            values: self.sum.iter().map(|s| s / w).collect(),
            df: self.df,
            f0: self.f0,
            n_averaged: self.n_averaged,
        })
    }
}

impl Default for PsdAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

/// Weighted average of spectra on one grid (weights = `n_averaged`).
pub fn average_psds<'a>(spectra: impl IntoIterator<Item = &'a PowerSpectrum>) -> Result<PowerSpectrum> {
    let mut acc = PsdAccumulator::new();
    for s in spectra {
        acc.add(s)?;
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn sine(n: usize, fs: f64, f: f64, a: f64, phase: f64) -> Vec<f64> {
        (0..n)
            .map(|i| a * (TAU * f * i as f64 / fs + phase).sin())
            .collect()
    }

    #[test]
    fn frequency_axis_and_length() {
        let s = psd(&vec![0.0; 1000], 10_000).unwrap();
        assert_eq!(s.len(), 501);
        assert_eq!(s.df, 10.0);
        assert_eq!(s.f0, 0.0);
        assert_eq!(s.frequency(3), 30.0);
        let s_odd = psd(&vec![0.0; 999], 10_000).unwrap();
        assert_eq!(s_odd.len(), 500);
    }

    #[test]
    fn bin_centered_sine_concentrates_its_mean_square() {
        let n = 4096;
        let fs = 8192.0;
        let k = 100;
        let df = fs / n as f64;
        let a = 3.0;
        let x = sine(n, fs, k as f64 * df, a, 0.4);
        let s = psd(&x, fs as u64).unwrap();
        // All of the sine's mean-square power a²/2 lands in bin k.
        assert_relative_eq!(s.values[k] * s.df, a * a / 2.0, max_relative = 1e-9);
        let peak = s.values[k];
        for (i, v) in s.values.iter().enumerate() {
            if i != k {
                assert!(*v < peak * 1e-12, "leakage at bin {i}: {v}");
            }
        }
    }

    #[test]
    fn dc_and_nyquist_bins_not_doubled() {
        let n = 1024;
        let c = 2.5;
        let constant = vec![c; n];
        let s = psd(&constant, 1024).unwrap();
        assert_relative_eq!(s.values[0] * s.df, c * c, max_relative = 1e-12);
        let alternating: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { c } else { -c }).collect();
        let s2 = psd(&alternating, 1024).unwrap();
        assert_relative_eq!(s2.values[n / 2] * s2.df, c * c, max_relative = 1e-12);
    }

    #[test]
    fn parseval_identity_even_and_odd_lengths() {
        let rng = CounterRng::new(11, 0);
        for &n in &[1024usize, 999, 2, 3, 1] {
            let x: Vec<f64> = (0..n).map(|i| rng.normal(i as u64)).collect();
            let s = psd(&x, 5000).unwrap();
            let lhs: f64 = s.values.iter().sum::<f64>() * s.df;
            let rhs = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn white_noise_interior_level_is_2_sigma2_over_fs() {
        let n = 1 << 16;
        let fs = 1.0e6;
        let sigma = 4.0;
        let rng = CounterRng::new(77, 3);
        let x: Vec<f64> = (0..n).map(|i| sigma * rng.normal(i as u64)).collect();
        let s = psd(&x, fs as u64).unwrap();
        let interior = &s.values[1..s.len() - 1];
        let mean = interior.iter().sum::<f64>() / interior.len() as f64;
        assert_relative_eq!(mean, 2.0 * sigma * sigma / fs, max_relative = 0.03);
    }

    #[test]
    fn scaling_input_scales_power_quadratically() {
        let rng = CounterRng::new(5, 1);
        let x: Vec<f64> = (0..500).map(|i| rng.normal(i as u64)).collect();
        let c = 7.25;
        let xc: Vec<f64> = x.iter().map(|v| v * c).collect();
        let s1 = psd(&x, 1000).unwrap();
        let s2 = psd(&xc, 1000).unwrap();
        for (a, b) in s1.values.iter().zip(&s2.values) {
            if *a > 0.0 {
                assert_relative_eq!(b / a, c * c, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn averaging_weights_by_n_averaged() {
        let p1 = PowerSpectrum {
            values: vec![1.0, 2.0],
            df: 1.0,
            f0: 0.0,
            n_averaged: 1,
        };
        let p2 = PowerSpectrum {
            values: vec![5.0, 6.0],
            df: 1.0,
            f0: 0.0,
            n_averaged: 3,
        };
        let avg = average_psds([&p1, &p2]).unwrap();
        assert_eq!(avg.n_averaged, 4);
        assert_relative_eq!(avg.values[0], (1.0 + 3.0 * 5.0) / 4.0);
        assert_relative_eq!(avg.values[1], (2.0 + 3.0 * 6.0) / 4.0);
    }

    #[test]
    fn averaging_is_permutation_stable() {
        let rng = CounterRng::new(9, 9);
        let spectra: Vec<PowerSpectrum> = (0..20)
            .map(|j| PowerSpectrum {
                values: (0..64)
                    .map(|i| rng.normal((j * 64 + i) as u64).abs() + 1.0)
                    .collect(),
                df: 2.0,
                f0: 0.0,
                n_averaged: 1 + (j % 3) as u64,
            })
            .collect();
        let forward = average_psds(spectra.iter()).unwrap();
        let reversed = average_psds(spectra.iter().rev()).unwrap();
        for (a, b) in forward.values.iter().zip(&reversed.values) {
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }
    }

    #[test]
    fn mismatched_grids_report_both_sides() {
        let p1 = PowerSpectrum {
            values: vec![1.0; 10],
            df: 1.0,
            f0: 0.0,
            n_averaged: 1,
        };
        let p2 = PowerSpectrum {
            values: vec![1.0; 12],
            df: 0.5,
            f0: 0.0,
            n_averaged: 1,
        };
        let err = average_psds([&p1, &p2]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("10 bins"), "{msg}");
        assert!(msg.contains("12 bins"), "{msg}");
        assert!(msg.contains("df = 1"), "{msg}");
        assert!(msg.contains("df = 0.5"), "{msg}");
    }

    #[test]
    fn empty_average_rejected() {
        assert!(average_psds([]).is_err());
        assert!(psd(&[], 100).is_err());
    }
}
