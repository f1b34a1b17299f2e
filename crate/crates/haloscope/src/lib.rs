//! Synthetic broadband axion-search data and its full analysis chain:
//! generate detector-faithful two-channel time series, denoise them,
//! score denoiser quality, and set dark-matter coupling limits.
//!
//! The crate models a toroidal-magnet haloscope readout: a SQUID channel
//! carrying weak science signals buried in noise, and an injected channel
//! carrying clean calibration tones. Everything downstream — power spectra,
//! SNR-based denoising scores, and profile-likelihood coupling limits with
//! expected-sensitivity bands — operates on that pair.
//!
//! # Start with the examples
//!
//! Each capability has a runnable example (`cargo run --release --example …`):
//!
//! - `generate_dataset` — synthesize a calibration pair and a science run
//! - `denoise_filters` — built-in moving-average and polynomial filters
//! - `external_denoiser` — plug in any executable as a denoiser
//! - `denoising_score` — the SNR-efficiency score for a denoised pair
//! - `noise_robustness` — score degradation under added noise
//! - `limit_scan` — coupling upper limits across a mass grid
//! - `brazil_band` — expected-sensitivity quantile bands
//!
//! The same capabilities are exposed by the `haloscope` binary
//! (`generate`, `denoise`, `score`, `limit`, `band`, `export`).
//!
//! # Module map
//!
//! - [`model`] — physical units, quantization, series types, constants
//! - [`rng`] — counter-based deterministic random numbers
//! - [`simgen`] — two-channel signal/noise synthesis
//! - [`io`] — the `.tsd` container: streaming readers and writers
//! - [`dsp`] — power spectral densities and averaging
//! - [`denoise`] — built-in filters and the external-command protocol
//! - [`score`] — SNR extraction and the denoising score
//! - [`limits`] — halo line shape, likelihood fits, scans, bands
//! - [`parallel`] — deterministic ordered map-reduce over worker threads
//! - [`cli`] — configuration, provenance, and the command implementations

pub mod cli;
pub mod denoise;
pub mod dsp;
pub mod error;
pub mod io;
pub mod limits;
pub mod model;
pub mod parallel;
pub mod rng;
pub mod score;
pub mod simgen;

pub use error::{Error, Result};
