//! Core domain types: raw 8-bit sample streams, real-valued series, power
//! spectra, digitizer scaling, and the physical constants of the detector.
//!
//! Samples are stored as signed 8-bit integers end-to-end (1 byte/sample for
//! multi-gigasample streams); conversion to millivolts happens only at
//! processing boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Digitizer scale: one count = 40/128 mV (exact binary fraction, 0.3125).
pub const MV_PER_COUNT: f64 = 40.0 / 128.0;

/// Default digitizer sample rate in Hz.
pub const DEFAULT_SAMPLE_RATE_HZ: u64 = 10_000_000;

/// Planck constant in eV·s: converts a frequency in Hz to a mass in eV.
pub const PLANCK_EV_S: f64 = 4.135_667_696e-15;

/// Which physical channel a sample stream carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelRole {
    /// Noisy detector readout (container channel 0).
    Squid,
    /// Clean hardware-injected ground truth (container channel 1).
    Injected,
}

/// Convert one raw digitizer count to millivolts. Exact: 40/128 is dyadic.
#[inline]
pub fn raw_to_millivolts(raw: i8) -> f64 {
    raw as f64 * MV_PER_COUNT
}

/// Quantize a millivolt value to a digitizer count: round half away from
/// zero, clamp to [-128, 127]. Returns the count and whether the value
/// saturated at a rail.
#[inline]
pub fn quantize_millivolts(v: f64) -> (i8, bool) {
    debug_assert!(v.is_finite());
    // f64::round rounds half away from zero, matching the digitizer model.
    let counts = (v / MV_PER_COUNT).round();
    if counts > 127.0 {
        (127, true)
    } else if counts < -128.0 {
        (-128, true)
    } else {
        (counts as i8, false)
    }
}

/// A raw signed-8-bit sample stream with its acquisition metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSeries {
    pub samples: Vec<i8>,
    /// Sample rate in Hz; strictly positive.
    pub sample_rate: u64,
    pub channel_role: ChannelRole,
    /// Offset of `samples[0]` within the parent dataset, in samples.
    pub start_index: u64,
}

impl SampleSeries {
    pub fn new(
        samples: Vec<i8>,
        sample_rate: u64,
        channel_role: ChannelRole,
        start_index: u64,
    ) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Usage("sample rate must be positive".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
            channel_role,
            start_index,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Convert to millivolts.
    pub fn to_millivolts(&self) -> FloatSeries {
        FloatSeries {
            samples: self.samples.iter().map(|&s| raw_to_millivolts(s)).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// A real-valued (millivolt) series: carrier for denoiser outputs and any
/// non-integer processing product. Invariant: all values finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatSeries {
    pub samples: Vec<f64>,
    /// Sample rate in Hz; strictly positive.
    pub sample_rate: u64,
}

impl FloatSeries {
    /// Construct, validating finiteness of every value.
    pub fn new(samples: Vec<f64>, sample_rate: u64) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Usage("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!(
                "non-finite sample value at index {i}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Construct from values already known finite (internal fast path:
    /// outputs of arithmetic on finite inputs).
    pub(crate) fn from_finite(samples: Vec<f64>, sample_rate: u64) -> Self {
        debug_assert!(samples.iter().all(|v| v.is_finite()));
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Quantize to digitizer counts; returns the series and how many samples
    /// saturated at the rails.
    pub fn quantize(&self, role: ChannelRole, start_index: u64) -> (SampleSeries, u64) {
        let mut saturated = 0u64;
        let samples = self
            .samples
            .iter()
            .map(|&v| {
                let (s, sat) = quantize_millivolts(v);
                saturated += sat as u64;
                s
            })
            .collect();
        (
            SampleSeries {
                samples,
                sample_rate: self.sample_rate,
                channel_role: role,
                start_index,
            },
            saturated,
        )
    }
}

/// Either kind of series, as read from a container or produced by a denoiser.
#[derive(Debug, Clone)]
pub enum SeriesData {
    Int8(SampleSeries),
    Real(FloatSeries),
}

impl SeriesData {
    pub fn len(&self) -> usize {
        match self {
            SeriesData::Int8(s) => s.len(),
            SeriesData::Real(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u64 {
        match self {
            SeriesData::Int8(s) => s.sample_rate,
            SeriesData::Real(s) => s.sample_rate,
        }
    }

    /// View as millivolt values, converting if stored as counts.
    pub fn to_millivolts(&self) -> FloatSeries {
        match self {
            SeriesData::Int8(s) => s.to_millivolts(),
            SeriesData::Real(s) => s.clone(),
        }
    }

    /// Copy out the sub-series `[start, start + len)`.
    ///
    /// Panics if the range exceeds the series; callers segmenting a series
    /// are expected to have computed in-bounds ranges.
    pub fn slice(&self, start: usize, len: usize) -> SeriesData {
        assert!(
            start + len <= self.len(),
            "slice [{start}, {}) exceeds series length {}",
            start + len,
            self.len()
        );
        match self {
            SeriesData::Int8(s) => SeriesData::Int8(SampleSeries {
                samples: s.samples[start..start + len].to_vec(),
                sample_rate: s.sample_rate,
                channel_role: s.channel_role,
                start_index: s.start_index + start as u64,
            }),
            SeriesData::Real(s) => SeriesData::Real(FloatSeries {
                samples: s.samples[start..start + len].to_vec(),
                sample_rate: s.sample_rate,
            }),
        }
    }
}

/// One-sided power spectral density on a uniform frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    /// Power per bin (mV²/Hz when fed millivolt series); all values ≥ 0.
    pub values: Vec<f64>,
    /// Bin spacing in Hz; > 0.
    pub df: f64,
    /// Frequency of bin 0, in Hz.
    pub f0: f64,
    /// How many raw periodograms are averaged into this spectrum; ≥ 1.
    pub n_averaged: u64,
}

impl PowerSpectrum {
    /// Frequency of bin `i`.
    #[inline]
    pub fn frequency(&self, i: usize) -> f64 {
        self.f0 + i as f64 * self.df
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Detector constants entering the coupling conversion
/// g² · rho_dm · G² · V² · B² = A.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Dimensionless geometric coupling factor of the pickup.
    pub geometric_coupling: f64,
    /// Detector volume in cm³.
    pub volume_cm3: f64,
    /// Peak magnetic field in Tesla.
    pub b_max_tesla: f64,
    /// Local dark-matter density in GeV/cm³.
    pub rho_dm_gev_cm3: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            geometric_coupling: 0.0217,
            volume_cm3: 890.0,
            b_max_tesla: 1.0,
            // Conventional local-density benchmark; configurable.
            rho_dm_gev_cm3: 0.4,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.geometric_coupling,
            self.volume_cm3,
            self.b_max_tesla,
            self.rho_dm_gev_cm3,
        ];
        if all.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Usage(
                "physical constants must all be strictly positive and finite".into(),
            ));
        }
        Ok(())
    }

    /// The factor k in g² · k = A (signal-power units per coupling²).
    pub fn coupling_power_factor(&self) -> f64 {
        self.rho_dm_gev_cm3
            * self.geometric_coupling.powi(2)
            * self.volume_cm3.powi(2)
            * self.b_max_tesla.powi(2)
    }
}

/// Convert a frequency in Hz to the corresponding particle mass in eV.
#[inline]
pub fn frequency_to_mass_ev(frequency_hz: f64) -> f64 {
    PLANCK_EV_S * frequency_hz
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversion_fixed_points() {
        assert_eq!(raw_to_millivolts(0), 0.0);
        assert_eq!(raw_to_millivolts(127), 39.6875);
        assert_eq!(raw_to_millivolts(-128), -40.0);
    }

    #[test]
    fn quantize_fixed_points() {
        assert_eq!(quantize_millivolts(0.0), (0, false));
        assert_eq!(quantize_millivolts(39.6875), (127, false));
        assert_eq!(quantize_millivolts(1000.0), (127, true));
        assert_eq!(quantize_millivolts(-1000.0), (-128, true));
        // Round half away from zero at the LSB midpoint: 0.5 counts = 0.15625 mV.
        assert_eq!(quantize_millivolts(MV_PER_COUNT / 2.0), (1, false));
        assert_eq!(quantize_millivolts(-MV_PER_COUNT / 2.0), (-1, false));
    }

    #[test]
    fn round_trip_every_code() {
        for s in i8::MIN..=i8::MAX {
            let (back, sat) = quantize_millivolts(raw_to_millivolts(s));
            assert_eq!(back, s);
            assert!(!sat);
        }
    }

    #[test]
    fn conversion_is_linear_in_exact_arithmetic() {
        // 40/128 mV/count is a dyadic rational, so sums of in-range counts
        // convert exactly: mv(a) + mv(b) = (a+b) * MV_PER_COUNT bit-for-bit.
        for a in [-128i16, -77, -1, 0, 1, 63, 127] {
            for b in [-128i16, -50, 0, 1, 127] {
                let sum = a + b;
                let direct = sum as f64 * MV_PER_COUNT;
                let parts = a as f64 * MV_PER_COUNT + b as f64 * MV_PER_COUNT;
                assert_eq!(direct, parts);
            }
        }
    }

    #[test]
    fn float_series_rejects_non_finite() {
        assert!(FloatSeries::new(vec![0.0, f64::NAN], 1000).is_err());
        assert!(FloatSeries::new(vec![0.0, f64::INFINITY], 1000).is_err());
        assert!(FloatSeries::new(vec![0.0, 1.0], 1000).is_ok());
    }

    #[test]
    fn quantize_series_counts_saturations() {
        let fs = FloatSeries::new(vec![0.0, 50.0, -50.0, 10.0], 1000).unwrap();
        let (s, saturated) = fs.quantize(ChannelRole::Squid, 0);
        assert_eq!(saturated, 2);
        assert_eq!(s.samples, vec![0, 127, -128, 32]);
    }

    #[test]
    fn coupling_power_factor_matches_definition() {
        let c = PhysicalConstants::default();
        let k = c.coupling_power_factor();
        let expect = 0.4 * 0.0217f64.powi(2) * 890.0f64.powi(2) * 1.0;
        assert!((k - expect).abs() / expect < 1e-15);
    }

    #[test]
    fn mass_frequency_correspondence() {
        // 100 kHz corresponds to ~0.414 neV; 2 MHz to ~8.27 neV.
        let m = frequency_to_mass_ev(1.0e5);
        assert!((m - 4.135667696e-10).abs() < 1e-18);
    }
}
