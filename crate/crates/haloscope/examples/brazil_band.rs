//! Expected-sensitivity (Brazil) band: where would the 95% CL limit fall
//! if there were no signal, and how wide is its scatter?
//!
//! Pseudo-experiments resample the measured background level and re-run
//! the limit machinery; the per-mass quantiles of those limits form the
//! band an observed curve is judged against.
//!
//!     cargo run --release --example brazil_band

use haloscope::limits::{averaged_series_psd, brazil_band, scan_masses, Calibration, HaloModel};
use haloscope::model::{PhysicalConstants, SeriesData};
use haloscope::simgen::{synth_science, GainModel, NoiseModel};
use haloscope::Result;

fn main() -> Result<()> {
    let rate = 200_000u64;
    println!("synthesizing 150 s at {rate} Hz ...");
    let (series, _) = synth_science(&NoiseModel::white(5.0, 33), 150.0, rate, None)?;
    let psd = averaged_series_psd(&SeriesData::Int8(series), 5, 1)?;

    let masses = haloscope::limits::geometric_mass_grid(45_000.0, 90_000.0, 6)?;
    let halo = HaloModel::default();
    let calibration = Calibration::Gain {
        gain: GainModel::Unity,
    };
    let constants = PhysicalConstants::default();

    let band = brazil_band(&psd, &masses, &halo, &calibration, &constants, 100, 17, 1)?;
    let observed = scan_masses(&psd, &masses, &halo, &calibration, &constants, 1)?;

    println!(
        "\n{:>12} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11}",
        "freq (Hz)", "q2.5%", "q16%", "median", "q84%", "q97.5%", "observed"
    );
    for (b, o) in band.points.iter().zip(&observed.points) {
        println!(
            "{:>12.0} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e}",
            b.frequency_hz, b.g_q2p5, b.g_q16, b.g_median, b.g_q84, b.g_q97p5, o.g_95
        );
    }
    println!(
        "\nWith no signal planted, the observed limit should land inside the \
         band at roughly 95% of masses; an excursion above q97.5% is what a \
         discovery (or a glitch) looks like."
    );
    Ok(())
}
