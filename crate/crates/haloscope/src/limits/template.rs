//! Per-mass signal templates: the halo speed distribution mapped onto the
//! science PSD's frequency grid.
//!
//! A signal of rest frequency f_a appears Doppler-broadened at
//! ν = f_a·(1 + v²/2c²); each grid bin receives the probability mass of the
//! speeds landing in it, integrated exactly with the closed-form halo CDF
//! and normalized to unit sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::halo::{HaloModel, C_KM_S};
use crate::model::PowerSpectrum;

/// Hard cap on template support width, relative to f_a.
pub const TEMPLATE_WIDTH_CAP_REL: f64 = 20.0e-6;
/// Tail mass beyond which the template is truncated (kept: 1 − this).
pub const TEMPLATE_TAIL_MASS: f64 = 1.0e-10;
/// Recommended upper bound on df relative to f_a for faithful templates.
pub const RECOMMENDED_DF_REL: f64 = 1.0e-6;

/// A uniform frequency grid (subset description of a PSD's axis).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub df: f64,
    pub f0: f64,
    pub n_bins: usize,
}

impl GridSpec {
    pub fn from_psd(psd: &PowerSpectrum) -> Self {
        Self {
            df: psd.df,
            f0: psd.f0,
            n_bins: psd.len(),
        }
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        self.f0 + bin as f64 * self.df
    }
}

/// Whether `df` is fine enough for a faithful template at `f_a`.
pub fn grid_adequate(f_a_hz: f64, df: f64) -> bool {
    df <= RECOMMENDED_DF_REL * f_a_hz
}

/// Doppler-broadened line template on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxionTemplate {
    /// Rest-mass frequency, Hz.
    pub f_a_hz: f64,
    /// Grid bin index of `weights[0]`.
    pub start_bin: usize,
    /// Non-negative bin weights over a contiguous range; sum = 1.
    pub weights: Vec<f64>,
    pub halo: HaloModel,
}

impl AxionTemplate {
    pub fn end_bin(&self) -> usize {
        self.start_bin + self.weights.len()
    }

    /// Center bin of the support (for window placement).
    pub fn center_bin(&self) -> usize {
        self.start_bin + self.weights.len() / 2
    }

    /// Support width in Hz.
    pub fn support_width_hz(&self, grid: &GridSpec) -> f64 {
        self.weights.len() as f64 * grid.df
    }
}

/// Lab-frame speed whose Doppler shift lands at frequency `nu` (km/s).
fn speed_at_frequency(f_a: f64, nu: f64) -> f64 {
    if nu <= f_a {
        return 0.0;
    }
    C_KM_S * (2.0 * (nu - f_a) / f_a).sqrt()
}

/// Build the template for rest frequency `f_a` on `grid`.
///
/// Bin i (covering [ν_i − df/2, ν_i + df/2)) receives the halo CDF mass of
/// the speeds mapping into it; accumulation stops once 1 − 1e−10 of the
/// distribution is covered or the width cap (20 ppm of f_a) is reached, and
/// the kept weights are renormalized to unit sum.
pub fn build_template(f_a_hz: f64, grid: &GridSpec, halo: &HaloModel) -> Result<AxionTemplate> {
    halo.validate()?;
    if !f_a_hz.is_finite() || f_a_hz <= 0.0 {
        return Err(Error::Usage(format!(
            "template frequency must be positive and finite, got {f_a_hz}"
        )));
    }
    if !(grid.df > 0.0) || grid.n_bins == 0 {
        return Err(Error::Usage(format!(
            "invalid frequency grid: df = {}, {} bins",
            grid.df, grid.n_bins
        )));
    }
    if f_a_hz < grid.f0 {
        return Err(Error::Usage(format!(
            "template frequency {f_a_hz} Hz lies below the grid start {} Hz",
            grid.f0
        )));
    }

    let cdf_at = |nu: f64| halo.speed_cdf(speed_at_frequency(f_a_hz, nu));

    // First bin whose upper edge lies above f_a.
    let first = ((f_a_hz - grid.f0) / grid.df - 0.5).floor() as i64 + 1;
    let first = first.max(0) as usize;

    let mut weights = Vec::new();
    let mut bin = first;
    loop {
        if bin >= grid.n_bins {
            return Err(Error::Usage(format!(
                "template support for f_a = {f_a_hz} Hz exceeds the grid end \
                 ({} bins, top {} Hz)",
                grid.n_bins,
                grid.frequency(grid.n_bins - 1)
            )));
        }
        let lower = grid.frequency(bin) - 0.5 * grid.df;
        let upper = grid.frequency(bin) + 0.5 * grid.df;
        let cumulative = cdf_at(upper);
        weights.push((cumulative - cdf_at(lower)).max(0.0));
        let width = upper - f_a_hz;
        if cumulative >= 1.0 - TEMPLATE_TAIL_MASS || width >= TEMPLATE_WIDTH_CAP_REL * f_a_hz {
            break;
        }
        bin += 1;
    }

    // Drop leading zero-mass bins (cannot drop everything: the distribution
    // has positive mass arbitrarily close to v = 0⁺).
    let lead = weights.iter().take_while(|w| **w == 0.0).count();
    let start_bin = first + lead;
    let mut weights: Vec<f64> = weights.split_off(lead);
    if weights.is_empty() || weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Numerical(format!(
            "template for f_a = {f_a_hz} Hz collected no probability mass \
             (df = {} Hz too coarse?)",
            grid.df
        )));
    }

    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);

    Ok(AxionTemplate {
        f_a_hz,
        start_bin,
        weights,
        halo: *halo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(df: f64, f0: f64, n_bins: usize) -> GridSpec {
        GridSpec { df, f0, n_bins }
    }

    #[test]
    fn weights_sum_to_one() {
        let halo = HaloModel::default();
        let g = grid(0.1, 0.0, 30_000_000);
        for &f_a in &[100_000.0, 567_891.0, 2_000_000.0] {
            let t = build_template(f_a, &g, &halo).unwrap();
            assert!((t.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(t.weights.iter().all(|w| *w >= 0.0));
        }
    }

    #[test]
    fn support_sits_at_and_above_f_a() {
        let halo = HaloModel::default();
        let g = grid(0.1, 0.0, 30_000_000);
        let f_a = 1_000_000.0;
        let t = build_template(f_a, &g, &halo).unwrap();
        // Every kept bin's upper edge lies above f_a …
        let first_upper = g.frequency(t.start_bin) + 0.05;
        assert!(first_upper > f_a);
        // … and the bin just below the support has zero mass by construction.
        let below_upper = g.frequency(t.start_bin - 1) + 0.05;
        if below_upper <= f_a {
            // Fully below the line: would have carried no mass.
            assert!(below_upper <= f_a);
        }
        // Width cap honored.
        assert!(t.support_width_hz(&g) <= TEMPLATE_WIDTH_CAP_REL * f_a + g.df);
    }

    #[test]
    fn mean_offset_matches_continuum_mean_square_speed() {
        let halo = HaloModel::default();
        let g = grid(0.05, 0.0, 60_000_000);
        let f_a = 1_000_000.0;
        let t = build_template(f_a, &g, &halo).unwrap();
        let mean_nu: f64 = t
            .weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * g.frequency(t.start_bin + k))
            .sum();
        let offset = (mean_nu - f_a) / f_a;
        assert_relative_eq!(offset, halo.mean_doppler_shift(), max_relative = 0.01);
    }

    #[test]
    fn support_start_is_monotone_in_f_a() {
        let halo = HaloModel::default();
        let g = grid(0.1, 0.0, 30_000_000);
        let mut prev = 0usize;
        for i in 0..60 {
            let f_a = 100_000.0 * (1.0 + i as f64 * 0.31);
            let t = build_template(f_a, &g, &halo).unwrap();
            assert!(
                t.start_bin >= prev,
                "support start moved backwards at f_a = {f_a}"
            );
            prev = t.start_bin;
        }
    }

    #[test]
    fn below_grid_and_overflow_rejected() {
        let halo = HaloModel::default();
        let g = grid(0.1, 500_000.0, 100);
        let err = build_template(100_000.0, &g, &halo).unwrap_err();
        assert!(err.to_string().contains("below the grid start"));
        // Support needs ~a few ppm of f_a; a 100-bin grid at the edge can't
        // hold it.
        let tight = grid(0.1, 0.0, 5_000_010);
        let err2 = build_template(500_000.0, &tight, &halo).unwrap_err();
        assert!(err2.to_string().contains("exceeds the grid end"), "{err2}");
    }

    #[test]
    fn adequacy_helper_flags_coarse_grids() {
        assert!(grid_adequate(1_000_000.0, 0.5));
        assert!(!grid_adequate(100_000.0, 0.5));
    }

    #[test]
    fn coarse_grid_still_normalizes() {
        // df far above the recommendation: everything lands in few bins.
        let halo = HaloModel::default();
        let g = grid(2.0, 0.0, 2_000_000);
        let t = build_template(1_000_000.0, &g, &halo).unwrap();
        assert!((t.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert!(!t.weights.is_empty());
    }
}
