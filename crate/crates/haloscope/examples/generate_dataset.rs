//! Synthesize a calibration pair and a science run, stream both into `.tsd`
//! containers, and read them back.
//!
//!     cargo run --release --example generate_dataset

use std::fs;
use std::path::PathBuf;

use haloscope::io::{Container, ContainerWriter, SampleFormat};
use haloscope::model::raw_to_millivolts;
use haloscope::simgen::{
    InjectionSchedule, NoiseModel, PairGenerator, PlantedTone, ScheduleEntry, ScienceGenerator,
};
use haloscope::Result;

fn main() -> Result<()> {
    let out_dir = PathBuf::from("examples_output");
    fs::create_dir_all(&out_dir).expect("create output directory");
    let rate = 200_000u64;

    // A short injection sweep: four calibration tones, two seconds each.
    let schedule = InjectionSchedule::new(
        [2_500.0, 11_000.0, 30_000.0, 72_000.0]
            .iter()
            .map(|&frequency_hz| ScheduleEntry {
                frequency_hz,
                amplitude_mv: 30.0,
                duration_s: 2.0,
            })
            .collect(),
    )?;
    let noise = NoiseModel::white(5.0, 42);

    // Stream the pair to disk in one-second chunks: channel 0 is the noisy
    // SQUID readout, channel 1 the clean injected copy.
    let pair_path = out_dir.join("pair.tsd");
    let generator = PairGenerator::new(&schedule, &noise, 8.0, rate)?;
    let total = generator.total_samples();
    let mut writer =
        ContainerWriter::create(&pair_path, SampleFormat::Int8, rate, &[total, total], true)?;
    let mut saturated = (0u64, 0u64);
    let chunk_len = rate as usize;
    let mut start = 0u64;
    while start < total {
        let len = chunk_len.min((total - start) as usize);
        let chunk = generator.chunk(start, len);
        writer.write_i8(0, &chunk.squid)?;
        writer.write_i8(1, &chunk.injected)?;
        saturated.0 += chunk.saturated_squid;
        saturated.1 += chunk.saturated_injected;
        start += len as u64;
    }
    writer.finish()?;
    println!(
        "pair:    {} ({} samples/channel, {} squid / {} injected samples railed)",
        pair_path.display(),
        total,
        saturated.0,
        saturated.1
    );

    // A science run carries only the SQUID channel; here with a faint
    // axion-like line planted for later recovery by the limit scan.
    let planted = PlantedTone::Pure {
        frequency_hz: 70_000.0,
        amplitude_mv: 0.4,
    };
    let science_path = out_dir.join("science.tsd");
    let science = ScienceGenerator::new(&NoiseModel::white(5.0, 43), 10.0, rate, Some(&planted))?;
    let total = science.total_samples();
    let mut writer =
        ContainerWriter::create(&science_path, SampleFormat::Int8, rate, &[total], true)?;
    let mut start = 0u64;
    while start < total {
        let len = chunk_len.min((total - start) as usize);
        let (samples, _) = science.chunk(start, len);
        writer.write_i8(0, &samples)?;
        start += len as u64;
    }
    writer.finish()?;
    println!("science: {} ({} samples)", science_path.display(), total);

    // Containers re-open with full metadata; samples decode to millivolts.
    let container = Container::open(&pair_path)?;
    let header = container.header();
    println!(
        "reopened pair: {} channels at {} Hz, {:?} storage",
        header.n_channels(),
        header.sample_rate_hz,
        header.sample_format
    );
    let first = container.read_range(1, 0, 8)?;
    let mv: Vec<f64> = match &first {
        haloscope::model::SeriesData::Int8(s) => {
            s.samples.iter().map(|&x| raw_to_millivolts(x)).collect()
        }
        haloscope::model::SeriesData::Real(s) => s.samples.clone(),
    };
    println!("first injected samples (mV): {mv:.3?}");
    Ok(())
}
