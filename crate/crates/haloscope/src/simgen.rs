//! Deterministic, seeded synthesis of detector-faithful datasets: aligned
//! injected/SQUID channel pairs for denoising benchmarks, and SQUID-only
//! science runs (optionally with a planted axion-like tone) for the limit
//! pipeline.
//!
//! All randomness is counter-keyed by absolute sample index (see
//! [`crate::rng`]), so any chunk of the output can be generated on any
//! worker, in any order, with bit-identical results.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::halo::HaloModel;
use crate::model::{quantize_millivolts, ChannelRole, SampleSeries};
use crate::rng::CounterRng;

/// Stream ids for the independent noise components of one seed.
mod stream {
    pub const WHITE: u64 = 1;
    /// Pink octave rows occupy PINK_BASE .. PINK_BASE + PINK_ROWS.
    pub const PINK_BASE: u64 = 0x10;
    /// Planted-tone lineshape jitter: speed draw and phase draw.
    pub const PLANT_SPEED: u64 = 0x40;
    pub const PLANT_PHASE: u64 = 0x41;
}

/// Number of octave rows summed for the pink (1/f-like) component.
const PINK_ROWS: usize = 16;

/// One held tone of the injection sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub frequency_hz: f64,
    pub amplitude_mv: f64,
    pub duration_s: f64,
}

/// Ordered sweep of injected tones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionSchedule {
    entries: Vec<ScheduleEntry>,
}

/// Injection amplitude variant: 50 mV standard or 10 mV weak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToneMode {
    Standard,
    Weak,
}

impl ToneMode {
    pub fn amplitude_mv(self) -> f64 {
        match self {
            ToneMode::Standard => 50.0,
            ToneMode::Weak => 10.0,
        }
    }
}

impl InjectionSchedule {
    /// Build a schedule, validating per-entry invariants (positive finite
    /// frequency, amplitude, duration). The Nyquist bound is checked when a
    /// sample rate is known, at generator construction.
    pub fn new(entries: Vec<ScheduleEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Usage("schedule must contain at least one entry".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if !(e.frequency_hz > 0.0) || !e.frequency_hz.is_finite() {
                return Err(Error::Usage(format!(
                    "schedule entry {i}: frequency must be positive and finite"
                )));
            }
            if !(e.amplitude_mv > 0.0) || !e.amplitude_mv.is_finite() {
                return Err(Error::Usage(format!(
                    "schedule entry {i}: amplitude must be positive and finite"
                )));
            }
            if !(e.duration_s > 0.0) || !e.duration_s.is_finite() {
                return Err(Error::Usage(format!(
                    "schedule entry {i}: duration must be positive and finite"
                )));
            }
        }
        Ok(Self { entries })
    }

    /// A single tone held for `duration_s`.
    pub fn single_tone(frequency_hz: f64, amplitude_mv: f64, duration_s: f64) -> Result<Self> {
        Self::new(vec![ScheduleEntry {
            frequency_hz,
            amplitude_mv,
            duration_s,
        }])
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    /// Total scheduled duration in seconds.
    pub fn total_duration_s(&self) -> f64 {
        self.entries.iter().map(|e| e.duration_s).sum()
    }

    /// Highest frequency in the sweep.
    pub fn max_frequency_hz(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.frequency_hz)
            .fold(0.0, f64::max)
    }
}

/// The default sweep: 38 log-spaced tones from 1.1 kHz to 4.9 MHz, each held
/// for `dwell_s` seconds, at the standard (50 mV) or weak (10 mV) amplitude.
/// The endpoints are exact; the interior spacing is geometric.
pub fn default_schedule_with_dwell(mode: ToneMode, dwell_s: f64) -> InjectionSchedule {
    const N: usize = 38;
    const F_FIRST: f64 = 1_100.0;
    const F_LAST: f64 = 4_900_000.0;
    let amplitude = mode.amplitude_mv();
    let log_step = (F_LAST / F_FIRST).ln() / (N - 1) as f64;
    let entries = (0..N)
        .map(|i| {
            let frequency_hz = if i == 0 {
                F_FIRST
            } else if i == N - 1 {
                F_LAST
            } else {
                F_FIRST * (log_step * i as f64).exp()
            };
            ScheduleEntry {
                frequency_hz,
                amplitude_mv: amplitude,
                duration_s: dwell_s,
            }
        })
        .collect();
    InjectionSchedule { entries }
}

/// [`default_schedule_with_dwell`] with the default 1-second dwell.
pub fn default_schedule(mode: ToneMode) -> InjectionSchedule {
    default_schedule_with_dwell(mode, 1.0)
}

/// Frequency response applied to injected signals on the SQUID channel,
/// standing in for the analog chain between pickup and digitizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GainModel {
    /// Flat unit response.
    Unity,
    /// Two-pole band-pass: one high-pass corner, one low-pass corner,
    /// unity in mid-band.
    BandPass { f_low_hz: f64, f_high_hz: f64 },
}

impl GainModel {
    /// The default analog chain: corners at 1 kHz and 5 MHz.
    pub fn default_band_pass() -> Self {
        GainModel::BandPass {
            f_low_hz: 1_000.0,
            f_high_hz: 5_000_000.0,
        }
    }

    /// Amplitude response at frequency `f` (Hz); dimensionless, ≥ 0.
    pub fn amplitude(&self, f: f64) -> f64 {
        match *self {
            GainModel::Unity => 1.0,
            GainModel::BandPass { f_low_hz, f_high_hz } => {
                let r_low = f / f_low_hz;
                let r_high = f / f_high_hz;
                (r_low / (1.0 + r_low * r_low).sqrt()) / (1.0 + r_high * r_high).sqrt()
            }
        }
    }

    /// Power response `amplitude²` at frequency `f`.
    pub fn power(&self, f: f64) -> f64 {
        let a = self.amplitude(f);
        a * a
    }
}

/// One narrowband interference tone of the noise background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineTone {
    pub frequency_hz: f64,
    pub amplitude_mv: f64,
}

/// The SQUID-channel noise background: white + optional pink component +
/// narrowband lines, plus the analog gain applied to injected signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub white_sigma_mv: f64,
    /// RMS amplitude of the pink (1/f-like) component; 0 disables it.
    pub pink_amplitude_mv: f64,
    #[serde(default)]
    pub lines: Vec<LineTone>,
    pub gain: GainModel,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::white(5.0, 0)
    }
}

impl NoiseModel {
    /// White noise only, unity gain: the workhorse for benchmark datasets.
    pub fn white(white_sigma_mv: f64, seed: u64) -> Self {
        Self {
            white_sigma_mv,
            pink_amplitude_mv: 0.0,
            lines: Vec::new(),
            gain: GainModel::Unity,
            seed,
        }
    }

    fn validate(&self, sample_rate: u64) -> Result<()> {
        if !(self.white_sigma_mv >= 0.0) || !self.white_sigma_mv.is_finite() {
            return Err(Error::Usage("white noise sigma must be ≥ 0 and finite".into()));
        }
        if !(self.pink_amplitude_mv >= 0.0) || !self.pink_amplitude_mv.is_finite() {
            return Err(Error::Usage("pink noise amplitude must be ≥ 0 and finite".into()));
        }
        let nyquist = sample_rate as f64 / 2.0;
        for (i, line) in self.lines.iter().enumerate() {
            if !(line.frequency_hz > 0.0) || line.frequency_hz >= nyquist {
                return Err(Error::Usage(format!(
                    "noise line {i} at {} Hz is outside (0, {nyquist} Hz)",
                    line.frequency_hz
                )));
            }
        }
        Ok(())
    }

    /// Expected one-sided PSD level of the noise background at frequency `f`
    /// for bin width `df`, including the quantizer's own noise floor.
    /// Narrowband lines contribute `a²/(2 df)` at their own bin only and are
    /// not included here.
    pub fn mean_psd_floor(&self, f: f64, sample_rate: u64) -> f64 {
        let fs = sample_rate as f64;
        let quant_var = crate::model::MV_PER_COUNT * crate::model::MV_PER_COUNT / 12.0;
        let white = 2.0 * (self.white_sigma_mv * self.white_sigma_mv + quant_var) / fs;
        // Octave-row sum: rows at hold lengths 2^k have power concentrated
        // below fs/2^k, approximating 1/f. Coarse model: total row variance
        // spread with density ∝ 1/f between fs/2^PINK_ROWS and fs/2.
        let pink = if self.pink_amplitude_mv > 0.0 && f > 0.0 {
            let p_total = self.pink_amplitude_mv * self.pink_amplitude_mv;
            let f_lo = fs / (1u64 << PINK_ROWS) as f64;
            let f_hi = fs / 2.0;
            let norm = (f_hi / f_lo).ln();
            if f >= f_lo && f <= f_hi {
                2.0 * p_total / (f * norm)
            } else {
                0.0
            }
        } else {
            0.0
        };
        white + pink
    }
}

/// An axion-like signal planted into a science run for closed-loop tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlantedTone {
    /// A persistent pure tone.
    Pure { frequency_hz: f64, amplitude_mv: f64 },
    /// A tone whose frequency is redrawn each second from the halo-model
    /// line shape (frequency offset f·v²/2c², random phase per block):
    /// an incoherent block approximation of the finite-coherence signal.
    Lineshape {
        frequency_hz: f64,
        amplitude_mv: f64,
        halo: HaloModel,
    },
}

impl PlantedTone {
    pub fn frequency_hz(&self) -> f64 {
        match *self {
            PlantedTone::Pure { frequency_hz, .. } => frequency_hz,
            PlantedTone::Lineshape { frequency_hz, .. } => frequency_hz,
        }
    }

    pub fn amplitude_mv(&self) -> f64 {
        match *self {
            PlantedTone::Pure { amplitude_mv, .. } => amplitude_mv,
            PlantedTone::Lineshape { amplitude_mv, .. } => amplitude_mv,
        }
    }
}

/// Caches one Box–Muller pair so sequential counter access costs half a
/// draw per sample.
struct NormalCache {
    rng: CounterRng,
    block: u64,
    pair: (f64, f64),
    valid: bool,
}

impl NormalCache {
    fn new(rng: CounterRng) -> Self {
        Self {
            rng,
            block: 0,
            pair: (0.0, 0.0),
            valid: false,
        }
    }

    #[inline]
    fn get(&mut self, counter: u64) -> f64 {
        let block = counter >> 1;
        if !self.valid || block != self.block {
            self.pair = self.rng.normal_pair(block);
            self.block = block;
            self.valid = true;
        }
        if counter & 1 == 0 {
            self.pair.0
        } else {
            self.pair.1
        }
    }
}

/// Incremental octave-row pink noise evaluator. Row k holds a value for
/// 2^k consecutive samples; the value for block m of row k is
/// normal(stream PINK_BASE+k, m), so the sequence is chunk-independent.
struct PinkState {
    rows: [CounterRng; PINK_ROWS],
    values: [f64; PINK_ROWS],
    sum: f64,
    scale: f64,
}

impl PinkState {
    fn new(seed: u64, amplitude: f64, start: u64) -> Self {
        let rows =
            core::array::from_fn(|k| CounterRng::new(seed, stream::PINK_BASE + k as u64));
        let mut s = Self {
            rows,
            values: [0.0; PINK_ROWS],
            sum: 0.0,
            scale: amplitude / (PINK_ROWS as f64).sqrt(),
        };
        for k in 0..PINK_ROWS {
            s.values[k] = s.rows[k].normal(start >> k);
            s.sum += s.values[k];
        }
        s
    }

    /// Value at sample `n`; must be called with consecutive n after `new(n0)`.
    #[inline]
    fn next(&mut self, n: u64) -> f64 {
        // Row k refreshes when n is a multiple of 2^k (k ≥ 1; row 0 always).
        let tz = if n == 0 { PINK_ROWS - 1 } else { (n.trailing_zeros() as usize).min(PINK_ROWS - 1) };
        for k in 0..=tz {
            let fresh = self.rows[k].normal(n >> k);
            self.sum += fresh - self.values[k];
            self.values[k] = fresh;
        }
        self.scale * self.sum
    }
}

/// Tone phase at offset `k` samples into a tone at normalized frequency
/// `f_over_fs`: 2π·frac(f/fs · k), keeping the sine argument in [0, 2π).
#[inline]
fn tone_phase(f_over_fs: f64, k: u64) -> f64 {
    let r = f_over_fs * k as f64;
    TAU * (r - r.floor())
}

struct EntrySpan {
    start: u64,
    end: u64,
    f_over_fs: f64,
    amplitude_mv: f64,
    /// Amplitude after the analog gain at this tone's frequency.
    squid_amplitude_mv: f64,
}

/// Chunk-capable generator of aligned (injected, squid) channel pairs.
pub struct PairGenerator {
    spans: Vec<EntrySpan>,
    noise: NoiseModel,
    sample_rate: u64,
    total_samples: u64,
}

/// One generated chunk of an aligned pair.
pub struct PairChunk {
    pub injected: Vec<i8>,
    pub squid: Vec<i8>,
    pub saturated_injected: u64,
    pub saturated_squid: u64,
}

/// Saturation diagnostics of a full synthesis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthStats {
    pub saturated_injected: u64,
    pub saturated_squid: u64,
}

impl PairGenerator {
    pub fn new(
        schedule: &InjectionSchedule,
        noise: &NoiseModel,
        seconds: f64,
        sample_rate: u64,
    ) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Usage("sample rate must be positive".into()));
        }
        if !(seconds > 0.0) || !seconds.is_finite() {
            return Err(Error::Usage("duration must be positive and finite".into()));
        }
        noise.validate(sample_rate)?;
        let nyquist = sample_rate as f64 / 2.0;
        if schedule.max_frequency_hz() >= nyquist {
            return Err(Error::Usage(format!(
                "schedule contains a tone at {} Hz, at or above the Nyquist frequency {nyquist} Hz",
                schedule.max_frequency_hz()
            )));
        }
        let total_samples = (seconds * sample_rate as f64).round() as u64;
        // Entry boundaries in integer samples, accumulated without float drift.
        let mut spans = Vec::with_capacity(schedule.entries.len());
        let mut cursor = 0u64;
        for e in &schedule.entries {
            let len = (e.duration_s * sample_rate as f64).round() as u64;
            spans.push(EntrySpan {
                start: cursor,
                end: cursor + len,
                f_over_fs: e.frequency_hz / sample_rate as f64,
                amplitude_mv: e.amplitude_mv,
                squid_amplitude_mv: e.amplitude_mv * noise.gain.amplitude(e.frequency_hz),
            });
            cursor += len;
        }
        if cursor < total_samples {
            return Err(Error::Usage(format!(
                "schedule covers {cursor} samples but {total_samples} were requested; \
                 extend the schedule or shorten the duration"
            )));
        }
        Ok(Self {
            spans,
            noise: noise.clone(),
            sample_rate,
            total_samples,
        })
    }

    pub fn total_samples(&self) -> u64 {
        self.total_samples
    }

    pub fn sample_rate(&self) -> u64 {
        self.sample_rate
    }

    /// Generate samples [start, start+len). Pure: any partition of the range
    /// into chunks yields bit-identical output.
    pub fn chunk(&self, start: u64, len: usize) -> PairChunk {
        assert!(
            start + len as u64 <= self.total_samples,
            "chunk [{start}, {}) exceeds the {}-sample stream",
            start + len as u64,
            self.total_samples
        );
        let mut injected = Vec::with_capacity(len);
        let mut squid = Vec::with_capacity(len);
        let mut saturated_injected = 0u64;
        let mut saturated_squid = 0u64;

        let mut white = NormalCache::new(CounterRng::new(self.noise.seed, stream::WHITE));
        let mut pink = (self.noise.pink_amplitude_mv > 0.0)
            .then(|| PinkState::new(self.noise.seed, self.noise.pink_amplitude_mv, start));
        let sigma = self.noise.white_sigma_mv;
        let lines: Vec<(f64, f64)> = self
            .noise
            .lines
            .iter()
            .map(|l| (l.frequency_hz / self.sample_rate as f64, l.amplitude_mv))
            .collect();

        // Walk schedule entries across the chunk.
        let mut span_idx = match self.spans.binary_search_by(|s| {
            if start < s.start {
                std::cmp::Ordering::Greater
            } else if start >= s.end {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Equal
            }
        }) {
            Ok(i) => i,
            Err(i) => i,
        };

        let end = start + len as u64;
        let mut n = start;
        while n < end {
            let span = &self.spans[span_idx];
            let span_end = span.end.min(end);
            for m in n..span_end {
                let phase = tone_phase(span.f_over_fs, m - span.start);
                let s = phase.sin();
                let tone = span.amplitude_mv * s;

                let (inj, sat_i) = quantize_millivolts(tone);
                injected.push(inj);
                saturated_injected += sat_i as u64;

                let mut v = span.squid_amplitude_mv * s;
                if sigma > 0.0 {
                    v += sigma * white.get(m);
                }
                if let Some(p) = pink.as_mut() {
                    v += p.next(m);
                }
                for &(f_over_fs, a) in &lines {
                    v += a * tone_phase(f_over_fs, m).sin();
                }
                let (sq, sat_s) = quantize_millivolts(v);
                squid.push(sq);
                saturated_squid += sat_s as u64;
            }
            n = span_end;
            if n < end {
                span_idx += 1;
            }
        }

        PairChunk {
            injected,
            squid,
            saturated_injected,
            saturated_squid,
        }
    }
}

/// Full in-memory synthesis of an aligned pair.
#[derive(Debug)]
pub struct PairData {
    pub injected: SampleSeries,
    pub squid: SampleSeries,
    pub stats: SynthStats,
}

/// Synthesize `seconds` of an aligned (injected, squid) pair at `sample_rate`.
pub fn synth_pair(
    schedule: &InjectionSchedule,
    noise: &NoiseModel,
    seconds: f64,
    sample_rate: u64,
) -> Result<PairData> {
    let generator = PairGenerator::new(schedule, noise, seconds, sample_rate)?;
    let n = generator.total_samples();
    let chunk = generator.chunk(0, n as usize);
    Ok(PairData {
        injected: SampleSeries::new(chunk.injected, sample_rate, ChannelRole::Injected, 0)?,
        squid: SampleSeries::new(chunk.squid, sample_rate, ChannelRole::Squid, 0)?,
        stats: SynthStats {
            saturated_injected: chunk.saturated_injected,
            saturated_squid: chunk.saturated_squid,
        },
    })
}

/// Chunk-capable generator of SQUID-only science runs.
pub struct ScienceGenerator {
    noise: NoiseModel,
    sample_rate: u64,
    total_samples: u64,
    planted: Option<PlantedSpans>,
}

struct PlantedSpans {
    /// Per-second blocks: (f_over_fs, phase offset). A pure tone has one
    /// entry applied with block-relative... (see `value`).
    amplitude_mv: f64,
    kind: PlantedKind,
}

enum PlantedKind {
    Pure {
        f_over_fs: f64,
    },
    /// Per-1-second blocks with jittered frequency and random phase.
    Lineshape {
        block_len: u64,
        blocks: Vec<(f64, f64)>,
    },
}

impl PlantedSpans {
    #[inline]
    fn value(&self, n: u64) -> f64 {
        match &self.kind {
            PlantedKind::Pure { f_over_fs } => {
                self.amplitude_mv * tone_phase(*f_over_fs, n).sin()
            }
            PlantedKind::Lineshape { block_len, blocks } => {
                let b = (n / block_len) as usize;
                let (f_over_fs, phase0) = blocks[b];
                let k = n % block_len;
                let arg = tone_phase(f_over_fs, k) + phase0;
                self.amplitude_mv * arg.sin()
            }
        }
    }
}

impl ScienceGenerator {
    pub fn new(
        noise: &NoiseModel,
        seconds: f64,
        sample_rate: u64,
        planted: Option<&PlantedTone>,
    ) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Usage("sample rate must be positive".into()));
        }
        if !(seconds > 0.0) || !seconds.is_finite() {
            return Err(Error::Usage("duration must be positive and finite".into()));
        }
        noise.validate(sample_rate)?;
        let nyquist = sample_rate as f64 / 2.0;
        let total_samples = (seconds * sample_rate as f64).round() as u64;
        let planted = match planted {
            None => None,
            Some(p) => {
                if p.frequency_hz() >= nyquist {
                    return Err(Error::Usage(format!(
                        "planted tone at {} Hz is at or above the Nyquist frequency {nyquist} Hz",
                        p.frequency_hz()
                    )));
                }
                let gain_amp = noise.gain.amplitude(p.frequency_hz());
                let amplitude_mv = p.amplitude_mv() * gain_amp;
                let kind = match p {
                    PlantedTone::Pure { frequency_hz, .. } => PlantedKind::Pure {
                        f_over_fs: frequency_hz / sample_rate as f64,
                    },
                    PlantedTone::Lineshape {
                        frequency_hz,
                        halo,
                        ..
                    } => {
                        let block_len = sample_rate; // 1-second blocks
                        let n_blocks = total_samples.div_ceil(block_len) as usize;
                        let speed_rng = CounterRng::new(noise.seed, stream::PLANT_SPEED);
                        let phase_rng = CounterRng::new(noise.seed, stream::PLANT_PHASE);
                        let blocks = (0..n_blocks)
                            .map(|b| {
                                let v = halo.sample_speed(speed_rng.uniform(b as u64));
                                let f = frequency_hz * (1.0 + halo.doppler_shift(v));
                                (f / sample_rate as f64, TAU * phase_rng.uniform(b as u64))
                            })
                            .collect();
                        PlantedKind::Lineshape { block_len, blocks }
                    }
                };
                Some(PlantedSpans { amplitude_mv, kind })
            }
        };
        Ok(Self {
            noise: noise.clone(),
            sample_rate,
            total_samples,
            planted,
        })
    }

    pub fn total_samples(&self) -> u64 {
        self.total_samples
    }

    pub fn sample_rate(&self) -> u64 {
        self.sample_rate
    }

    /// Generate SQUID samples [start, start+len); pure and chunk-independent.
    pub fn chunk(&self, start: u64, len: usize) -> (Vec<i8>, u64) {
        assert!(
            start + len as u64 <= self.total_samples,
            "chunk [{start}, {}) exceeds the {}-sample stream",
            start + len as u64,
            self.total_samples
        );
        let mut out = Vec::with_capacity(len);
        let mut saturated = 0u64;
        let mut white = NormalCache::new(CounterRng::new(self.noise.seed, stream::WHITE));
        let mut pink = (self.noise.pink_amplitude_mv > 0.0)
            .then(|| PinkState::new(self.noise.seed, self.noise.pink_amplitude_mv, start));
        let sigma = self.noise.white_sigma_mv;
        let lines: Vec<(f64, f64)> = self
            .noise
            .lines
            .iter()
            .map(|l| (l.frequency_hz / self.sample_rate as f64, l.amplitude_mv))
            .collect();

        for n in start..start + len as u64 {
            let mut v = 0.0;
            if let Some(p) = &self.planted {
                v += p.value(n);
            }
            if sigma > 0.0 {
                v += sigma * white.get(n);
            }
            if let Some(p) = pink.as_mut() {
                v += p.next(n);
            }
            for &(f_over_fs, a) in &lines {
                v += a * tone_phase(f_over_fs, n).sin();
            }
            let (s, sat) = quantize_millivolts(v);
            out.push(s);
            saturated += sat as u64;
        }
        (out, saturated)
    }
}

/// Full in-memory synthesis of a science run.
pub fn synth_science(
    noise: &NoiseModel,
    seconds: f64,
    sample_rate: u64,
    planted: Option<&PlantedTone>,
) -> Result<(SampleSeries, u64)> {
    let generator = ScienceGenerator::new(noise, seconds, sample_rate, planted)?;
    let n = generator.total_samples();
    let (samples, saturated) = generator.chunk(0, n as usize);
    Ok((
        SampleSeries::new(samples, sample_rate, ChannelRole::Squid, 0)?,
        saturated,
    ))
}
