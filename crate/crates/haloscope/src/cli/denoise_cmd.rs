//! `denoise`: run the configured denoiser over a container's SQUID channel
//! segment by segment, passing any injected channel through unchanged.

use crate::denoise::{
    DenoiserSpec, DEFAULT_EXTERNAL_TIMEOUT_SECS, DEFAULT_MA_WINDOW, DEFAULT_SG_ORDER,
    DEFAULT_SG_WINDOW,
};
use crate::error::{Error, Result};
use crate::io::{Container, ContainerWriter, SampleFormat};
use crate::model::SeriesData;
use crate::parallel::ordered_map_reduce;

use super::config::PipelineConfig;
use super::provenance::Provenance;
use super::{guard_overwrite, DenoiseArgs, DenoiserKindArg, Stage};

/// Denoising operates on one-second segments.
const SEGMENT_SECONDS: u64 = 1;

/// Build the effective denoiser spec from config and flags.
fn resolve_spec(config: &PipelineConfig, args: &DenoiseArgs) -> Result<DenoiserSpec> {
    let spec = match args.kind {
        None => config.denoiser.clone(),
        Some(DenoiserKindArg::None) => DenoiserSpec::None,
        Some(DenoiserKindArg::MovingAverage) => DenoiserSpec::MovingAverage {
            window: args.window.unwrap_or(DEFAULT_MA_WINDOW),
        },
        Some(DenoiserKindArg::SavitzkyGolay) => DenoiserSpec::SavitzkyGolay {
            window: args.window.unwrap_or(DEFAULT_SG_WINDOW),
            order: args.order.unwrap_or(DEFAULT_SG_ORDER),
        },
        Some(DenoiserKindArg::External) => {
            if args.command.is_empty() {
                return Err(Error::Usage(
                    "--kind external needs the denoiser argv; repeat --command \
                     once per token (e.g. --command python3 --command filter.py)"
                        .into(),
                ));
            }
            DenoiserSpec::External {
                command: args.command.clone(),
                timeout_secs: args.timeout_secs.unwrap_or(DEFAULT_EXTERNAL_TIMEOUT_SECS),
            }
        }
    };
    spec.validate()?;
    Ok(spec)
}

/// The segment spans covering a channel completely: full 1-s segments plus
/// a trailing partial segment if any.
fn segment_spans(total: u64, segment_len: u64) -> Vec<(u64, u64)> {
    let mut spans = Vec::new();
    let mut start = 0;
    while start < total {
        let len = segment_len.min(total - start);
        spans.push((start, len));
        start += len;
    }
    spans
}

struct WriterState {
    writer: Option<ContainerWriter>,
    format: Option<SampleFormat>,
}

fn format_of(series: &SeriesData) -> SampleFormat {
    match series {
        SeriesData::Int8(_) => SampleFormat::Int8,
        SeriesData::Real(_) => SampleFormat::Real32,
    }
}

fn write_segment(writer: &mut ContainerWriter, channel: usize, series: &SeriesData) -> Result<()> {
    match series {
        SeriesData::Int8(s) => writer.write_i8(channel, &s.samples),
        SeriesData::Real(s) => writer.write_f64(channel, &s.samples),
    }
}

pub fn run(config: &mut PipelineConfig, args: &DenoiseArgs) -> Result<()> {
    let spec = resolve_spec(config, args)?;
    config.denoiser = spec.clone();
    guard_overwrite(&args.output, args.force)?;

    let input = Container::open(&args.input)?;
    let header = input.header().clone();
    let rate = header.sample_rate_hz;
    let n_channels = header.n_channels();
    let segment_len = rate * SEGMENT_SECONDS;
    let spans = segment_spans(header.channel_lengths[0], segment_len);
    let input_path = args.input.clone();
    let amend = |segment: usize, e: Error| -> Error {
        let msg = format!("file {} segment {segment}: {e}", input_path.display());
        match e {
            Error::Io { .. } | Error::Format(_) => Error::Format(msg),
            Error::External(_) => Error::Format(msg),
            Error::Numerical(_) => Error::Numerical(msg),
            Error::Usage(_) => Error::Usage(msg),
        }
    };

    let mut stage = Stage::new("denoise");
    // Items fetch lazily inside the iterator (serial under the scheduler's
    // lock); the denoiser itself runs in parallel; writes fold in order.
    let items = spans.iter().copied().enumerate().map(|(i, (start, len))| {
        let squid = input.read_range(0, start, len);
        let passthrough = if n_channels == 2 {
            Some(input.read_range(1, start, len))
        } else {
            None
        };
        (i, squid, passthrough)
    });
    let spec_ref = &spec;
    let map = move |(i, squid, passthrough): (
        usize,
        Result<SeriesData>,
        Option<Result<SeriesData>>,
    )| {
        let denoised = squid.and_then(|s| spec_ref.apply(&s)).map_err(|e| amend(i, e))?;
        let passthrough = match passthrough {
            Some(r) => Some(r.map_err(|e| amend(i, e))?),
            None => None,
        };
        Ok::<_, Error>((i, denoised, passthrough))
    };

    let state = WriterState {
        writer: None,
        format: None,
    };
    let folded = ordered_map_reduce(
        items,
        config.effective_workers(),
        map,
        Ok(state),
        |state: Result<WriterState>, item| {
            let mut state = state?;
            let (i, denoised, passthrough) = item?;
            let fmt = format_of(&denoised);
            if state.writer.is_none() {
                state.format = Some(fmt);
                // The overwrite decision was made up front by guard_overwrite.
                state.writer = Some(ContainerWriter::create(
                    &args.output,
                    fmt,
                    rate,
                    &header.channel_lengths,
                    true,
                )?);
            }
            if state.format != Some(fmt) {
                return Err(Error::Format(format!(
                    "file {} segment {i}: denoiser changed output format mid-stream",
                    args.input.display()
                )));
            }
            let writer = state.writer.as_mut().expect("writer created");
            write_segment(writer, 0, &denoised)?;
            if let Some(clean) = passthrough {
                match (fmt, &clean) {
                    // Same-format passthrough keeps raw samples bit-identical.
                    (SampleFormat::Int8, SeriesData::Int8(_))
                    | (SampleFormat::Real32, SeriesData::Real(_)) => {
                        write_segment(writer, 1, &clean)?;
                    }
                    // Format promoted by the denoiser: convert to millivolts.
                    (SampleFormat::Real32, SeriesData::Int8(_)) => {
                        writer.write_f64(1, &clean.to_millivolts().samples)?;
                    }
                    (SampleFormat::Int8, SeriesData::Real(_)) => {
                        return Err(Error::Format(format!(
                            "file {} segment {i}: cannot narrow a real32 \
                             injected channel into an int8 output",
                            args.input.display()
                        )));
                    }
                }
            }
            Ok(state)
        },
    );
    let state = folded?;
    let writer = state.writer.ok_or_else(|| {
        Error::Format(format!("file {}: no segments to denoise", args.input.display()))
    })?;
    writer.finish()?;
    stage.add_samples(header.channel_lengths.iter().sum());
    stage.finish();

    Provenance::for_command("denoise", config, &[args.input.as_path()])
        .write_for(&args.output)?;
    println!(
        "wrote {} (denoiser: {})",
        args.output.display(),
        spec.label()
    );
    Ok(())
}
