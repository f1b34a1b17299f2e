//! Frequentist axion-coupling limit analysis: halo line shape, per-frequency
//! signal templates, profile-likelihood fits, mass-grid scans, and expected
//! sensitivity bands.

pub mod band;
pub mod fit;
pub mod halo;
pub mod scan;
pub mod template;

pub use band::{brazil_band, BandPoint, BrazilBand};
pub use fit::{fit_window, upper_limit, Calibration, LimitPoint, WindowFit, TS_THRESHOLD_95};
pub use halo::HaloModel;
pub use scan::{
    averaged_container_psd, averaged_series_psd, default_mass_grid, geometric_mass_grid,
    scan_masses, scan_masses_streaming, LimitCurve, ScanFailure,
};
pub use template::{build_template, grid_adequate, AxionTemplate, GridSpec};
