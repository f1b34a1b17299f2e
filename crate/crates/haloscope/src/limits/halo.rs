//! Galactic dark-matter velocity distribution in the laboratory frame.
//!
//! Speeds follow a Maxwell–Boltzmann halo boosted by the observer's motion:
//!
//! ```text
//! f(v) = v / (√π · v0 · vobs) · [exp(−(v−vobs)²/v0²) − exp(−(v+vobs)²/v0²)],  v ≥ 0
//! ```
//!
//! with circular speed `v0` and observer speed `vobs`. The CDF has a closed
//! form in terms of the error function, used both for frequency-bin weights
//! (integrating the line shape exactly over bins) and for inverse-transform
//! speed sampling in the generator.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};

/// Speed of light in km/s, matching the velocity units used here.
pub const C_KM_S: f64 = 299_792.458;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Halo velocity-distribution parameters (km/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HaloModel {
    #[serde(default = "default_v0")]
    pub v0_km_s: f64,
    #[serde(default = "default_vobs")]
    pub vobs_km_s: f64,
}

fn default_v0() -> f64 {
    220.0
}

fn default_vobs() -> f64 {
    232.0
}

impl Default for HaloModel {
    fn default() -> Self {
        Self {
            v0_km_s: default_v0(),
            vobs_km_s: default_vobs(),
        }
    }
}

impl HaloModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("v0_km_s", self.v0_km_s), ("vobs_km_s", self.vobs_km_s)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Usage(format!(
                    "halo parameter {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Probability density of lab-frame speed `v` (km/s), zero for v < 0.
    pub fn speed_pdf(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        let v0 = self.v0_km_s;
        let vobs = self.vobs_km_s;
        let um = (v - vobs) / v0;
        let up = (v + vobs) / v0;
        v / (SQRT_PI * v0 * vobs) * ((-um * um).exp() - (-up * up).exp())
    }

    /// Antiderivative of s·exp(−(s−vobs)²/v0²) expressed in u = (s−vobs)/v0.
    fn g_minus(&self, u: f64) -> f64 {
        let v0 = self.v0_km_s;
        let vobs = self.vobs_km_s;
        -(v0 * v0 / 2.0) * (-u * u).exp() + vobs * v0 * (SQRT_PI / 2.0) * erf(u)
    }

    /// Antiderivative of s·exp(−(s+vobs)²/v0²) expressed in u = (s+vobs)/v0.
    fn g_plus(&self, u: f64) -> f64 {
        let v0 = self.v0_km_s;
        let vobs = self.vobs_km_s;
        -(v0 * v0 / 2.0) * (-u * u).exp() - vobs * v0 * (SQRT_PI / 2.0) * erf(u)
    }

    /// Cumulative distribution of lab-frame speed, F(v) = P(speed ≤ v).
    pub fn speed_cdf(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        let v0 = self.v0_km_s;
        let vobs = self.vobs_km_s;
        let r = vobs / v0;
        let um = (v - vobs) / v0;
        let up = (v + vobs) / v0;
        let raw = (self.g_minus(um) - self.g_minus(-r)) - (self.g_plus(up) - self.g_plus(r));
        (raw / (SQRT_PI * v0 * vobs)).clamp(0.0, 1.0)
    }

    /// Inverse-transform sampling: map a uniform draw u ∈ (0, 1] to a speed
    /// by bisecting the CDF. Deterministic in `u`.
    pub fn sample_speed(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let mut lo = 0.0;
        let mut hi = self.vobs_km_s + 10.0 * self.v0_km_s;
        while self.speed_cdf(hi) < u {
            hi *= 2.0;
        }
        // ~60 halvings take the bracket below f64 resolution of the scale.
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.speed_cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-10 * self.v0_km_s {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// ⟨v²⟩ = 3·v0²/2 + vobs² (km²/s²), exact for this distribution.
    pub fn mean_square_speed(&self) -> f64 {
        1.5 * self.v0_km_s * self.v0_km_s + self.vobs_km_s * self.vobs_km_s
    }

    /// Fractional frequency offset ν/f_a − 1 = v²/(2c²) for speed `v` in km/s.
    pub fn doppler_shift(&self, v: f64) -> f64 {
        v * v / (2.0 * C_KM_S * C_KM_S)
    }

    /// Mean fractional frequency offset ⟨v²⟩/(2c²).
    pub fn mean_doppler_shift(&self) -> f64 {
        self.mean_square_speed() / (2.0 * C_KM_S * C_KM_S)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pdf_nonnegative_and_zero_below_zero() {
        let h = HaloModel::default();
        assert_eq!(h.speed_pdf(-10.0), 0.0);
        assert_eq!(h.speed_pdf(0.0), 0.0);
        for i in 1..200 {
            let v = i as f64 * 10.0;
            assert!(h.speed_pdf(v) >= 0.0, "pdf negative at v = {v}");
        }
    }

    #[test]
    fn cdf_limits_and_monotonicity() {
        let h = HaloModel::default();
        assert_eq!(h.speed_cdf(0.0), 0.0);
        assert_relative_eq!(h.speed_cdf(3000.0), 1.0, epsilon = 1e-12);
        let mut prev = 0.0;
        for i in 0..=300 {
            let v = i as f64 * 10.0;
            let c = h.speed_cdf(v);
            assert!(c >= prev, "cdf not monotone at v = {v}");
            prev = c;
        }
    }

    #[test]
    fn cdf_matches_numeric_pdf_integral() {
        let h = HaloModel::default();
        // Trapezoidal integration of the PDF up to several checkpoints.
        let dv = 0.01;
        let mut acc = 0.0;
        let mut v = 0.0;
        let checkpoints = [100.0, 232.0, 452.0, 700.0, 1200.0];
        let mut k = 0;
        while k < checkpoints.len() {
            let next = v + dv;
            acc += 0.5 * dv * (h.speed_pdf(v) + h.speed_pdf(next));
            v = next;
            if (v - checkpoints[k]).abs() < 1e-9 {
                assert_relative_eq!(acc, h.speed_cdf(v), epsilon = 1e-7, max_relative = 1e-6);
                k += 1;
            }
        }
    }

    #[test]
    fn inverse_cdf_round_trips() {
        let h = HaloModel::default();
        for &u in &[1e-6, 0.01, 0.1, 0.5, 0.9, 0.99, 0.999_999] {
            let v = h.sample_speed(u);
            assert_relative_eq!(h.speed_cdf(v), u, epsilon = 1e-8, max_relative = 1e-8);
        }
        // u = 1 maps to a finite speed in the far tail.
        let v1 = h.sample_speed(1.0);
        assert!(v1.is_finite() && v1 > 1000.0);
    }

    #[test]
    fn mean_square_speed_matches_stratified_sampling() {
        let h = HaloModel::default();
        let n = 200_000;
        let mut sum = 0.0;
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64;
            let v = h.sample_speed(u);
            sum += v * v;
        }
        let mc = sum / n as f64;
        assert_relative_eq!(mc, h.mean_square_speed(), max_relative = 1e-3);
    }

    #[test]
    fn default_mean_doppler_shift_value() {
        let h = HaloModel::default();
        // (1.5·220² + 232²) / (2c²) with c = 299792.458 km/s.
        assert_relative_eq!(h.mean_doppler_shift(), 7.033e-7, max_relative = 1e-3);
    }

    #[test]
    fn invalid_parameters_rejected() {
        let bad = HaloModel {
            v0_km_s: 0.0,
            vobs_km_s: 232.0,
        };
        assert!(bad.validate().is_err());
        let nan = HaloModel {
            v0_km_s: f64::NAN,
            vobs_km_s: 232.0,
        };
        assert!(nan.validate().is_err());
    }
}
