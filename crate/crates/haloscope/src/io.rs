//! Bit-exact native container for long multi-channel time series, with
//! streaming readers and writers.
//!
//! Layout (all integers little-endian), extension `.tsd`:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "TIDM"
//! 4       2     version = 1
//! 6       1     sample_format: 0 = signed int8, 1 = real32 (IEEE 754 LE)
//! 7       1     n_channels ∈ {1, 2}
//! 8       8     sample_rate_hz
//! 16      8·n   channel_lengths[n] (samples)
//! 16+8n   ...   channel payloads, in channel order, contiguous, no padding
//! ```
//!
//! Convention: channel 0 carries the SQUID (noisy) stream, channel 1 the
//! injected (clean) stream. By this crate's convention files from other
//! sources with per-channel datasets "ch1"/"ch2" map to channels 0/1.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{ChannelRole, FloatSeries, SampleSeries, SeriesData};

const MAGIC: &[u8; 4] = b"TIDM";
const VERSION: u16 = 1;

/// On-disk sample encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Int8,
    Real32,
}

impl SampleFormat {
    pub fn bytes_per_sample(self) -> u64 {
        match self {
            SampleFormat::Int8 => 1,
            SampleFormat::Real32 => 4,
        }
    }

    fn code(self) -> u8 {
        match self {
            SampleFormat::Int8 => 0,
            SampleFormat::Real32 => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(SampleFormat::Int8),
            1 => Ok(SampleFormat::Real32),
            other => Err(Error::Format(format!(
                "unknown sample format code {other} (expected 0 = int8 or 1 = real32)"
            ))),
        }
    }
}

/// Parsed and validated container header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainerHeader {
    pub sample_format: SampleFormat,
    pub sample_rate_hz: u64,
    pub channel_lengths: Vec<u64>,
}

impl ContainerHeader {
    pub fn new(
        sample_format: SampleFormat,
        sample_rate_hz: u64,
        channel_lengths: Vec<u64>,
    ) -> Result<Self> {
        if channel_lengths.is_empty() || channel_lengths.len() > 2 {
            return Err(Error::Format(format!(
                "container must have 1 or 2 channels, got {}",
                channel_lengths.len()
            )));
        }
        if sample_rate_hz == 0 {
            return Err(Error::Format("container sample rate must be positive".into()));
        }
        Ok(Self {
            sample_format,
            sample_rate_hz,
            channel_lengths,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.channel_lengths.len()
    }

    /// Header size in bytes: 16 + 8 per channel.
    pub fn header_len(&self) -> u64 {
        16 + 8 * self.channel_lengths.len() as u64
    }

    /// Total payload size in bytes.
    pub fn payload_len(&self) -> u64 {
        let bps = self.sample_format.bytes_per_sample();
        self.channel_lengths.iter().map(|&l| l * bps).sum()
    }

    /// Expected total file size in bytes.
    pub fn file_len(&self) -> u64 {
        self.header_len() + self.payload_len()
    }

    /// Byte offset of sample `sample_index` within `channel`.
    fn sample_offset(&self, channel: usize, sample_index: u64) -> u64 {
        let bps = self.sample_format.bytes_per_sample();
        let before: u64 = self.channel_lengths[..channel].iter().map(|&l| l * bps).sum();
        self.header_len() + before + sample_index * bps
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.header_len() as usize);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.sample_format.code());
        out.push(self.channel_lengths.len() as u8);
        out.extend_from_slice(&self.sample_rate_hz.to_le_bytes());
        for &len in &self.channel_lengths {
            out.extend_from_slice(&len.to_le_bytes());
        }
        out
    }

    fn read_from(file: &mut File, path: &Path) -> Result<Self> {
        let mut fixed = [0u8; 16];
        file.read_exact(&mut fixed)
            .map_err(|e| Error::Format(format!("{}: header truncated: {e}", path.display())))?;
        if &fixed[0..4] != MAGIC {
            return Err(Error::Format(format!(
                "{}: bad magic {:02x?} (expected \"TIDM\")",
                path.display(),
                &fixed[0..4]
            )));
        }
        let version = u16::from_le_bytes([fixed[4], fixed[5]]);
        if version != VERSION {
            return Err(Error::Format(format!(
                "{}: unsupported container version {version} (expected {VERSION})",
                path.display()
            )));
        }
        let sample_format = SampleFormat::from_code(fixed[6])?;
        let n_channels = fixed[7] as usize;
        if n_channels == 0 || n_channels > 2 {
            return Err(Error::Format(format!(
                "{}: n_channels = {n_channels} outside {{1, 2}}",
                path.display()
            )));
        }
        let sample_rate_hz = u64::from_le_bytes(fixed[8..16].try_into().unwrap());
        let mut lengths = vec![0u8; 8 * n_channels];
        file.read_exact(&mut lengths)
            .map_err(|e| Error::Format(format!("{}: header truncated: {e}", path.display())))?;
        let channel_lengths = lengths
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        ContainerHeader::new(sample_format, sample_rate_hz, channel_lengths)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

/// Borrowed view of a channel to write.
pub enum SeriesRef<'a> {
    Int8(&'a SampleSeries),
    Real(&'a FloatSeries),
}

impl SeriesRef<'_> {
    fn len(&self) -> u64 {
        match self {
            SeriesRef::Int8(s) => s.len() as u64,
            SeriesRef::Real(s) => s.len() as u64,
        }
    }

    fn sample_rate(&self) -> u64 {
        match self {
            SeriesRef::Int8(s) => s.sample_rate,
            SeriesRef::Real(s) => s.sample_rate,
        }
    }

    fn format(&self) -> SampleFormat {
        match self {
            SeriesRef::Int8(_) => SampleFormat::Int8,
            SeriesRef::Real(_) => SampleFormat::Real32,
        }
    }
}

/// Write a 1- or 2-channel container in one call. All channels must share
/// one sample rate and one storage format. Refuses to replace an existing
/// file unless `overwrite` is set.
pub fn write_container(path: &Path, channels: &[SeriesRef<'_>], overwrite: bool) -> Result<()> {
    if channels.is_empty() || channels.len() > 2 {
        return Err(Error::Usage(format!(
            "container must have 1 or 2 channels, got {}",
            channels.len()
        )));
    }
    let format = channels[0].format();
    let rate = channels[0].sample_rate();
    for c in channels {
        if c.format() != format {
            return Err(Error::Usage(
                "all channels in one container must share a storage format".into(),
            ));
        }
        if c.sample_rate() != rate {
            return Err(Error::Usage(
                "all channels in one container must share a sample rate".into(),
            ));
        }
    }
    let lengths: Vec<u64> = channels.iter().map(|c| c.len()).collect();
    let mut writer = ContainerWriter::create(path, format, rate, &lengths, overwrite)?;
    for (i, c) in channels.iter().enumerate() {
        match c {
            SeriesRef::Int8(s) => writer.write_i8(i, &s.samples)?,
            SeriesRef::Real(s) => writer.write_f64(i, &s.samples)?,
        }
    }
    writer.finish()
}

/// Streaming writer with declared channel lengths. Chunks are appended per
/// channel in order; channels may be interleaved (the writer seeks to each
/// channel's precomputed region). `finish` verifies completeness.
pub struct ContainerWriter {
    file: File,
    path: PathBuf,
    header: ContainerHeader,
    /// Next sample index to be written, per channel.
    cursors: Vec<u64>,
    finished: bool,
}

impl ContainerWriter {
    pub fn create(
        path: &Path,
        sample_format: SampleFormat,
        sample_rate_hz: u64,
        channel_lengths: &[u64],
        overwrite: bool,
    ) -> Result<Self> {
        let header = ContainerHeader::new(sample_format, sample_rate_hz, channel_lengths.to_vec())
            .map_err(|e| Error::Usage(e.to_string()))?;
        if !overwrite && path.exists() {
            return Err(Error::Usage(format!(
                "{} already exists; enable overwrite (force) to replace it",
                path.display()
            )));
        }
        let mut file = OpenOptions::new()
            .write(true)
            .create(true)
            .truncate(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        file.write_all(&header.to_bytes())
            .map_err(|e| Error::io(path, e))?;
        let n = header.n_channels();
        Ok(Self {
            file,
            path: path.to_path_buf(),
            header,
            cursors: vec![0; n],
            finished: false,
        })
    }

    pub fn header(&self) -> &ContainerHeader {
        &self.header
    }

    fn check_channel(&self, channel: usize, extra: u64) -> Result<()> {
        if channel >= self.header.n_channels() {
            return Err(Error::Usage(format!(
                "channel {channel} out of range for a {}-channel container",
                self.header.n_channels()
            )));
        }
        let after = self.cursors[channel] + extra;
        if after > self.header.channel_lengths[channel] {
            return Err(Error::Usage(format!(
                "write of {extra} samples would exceed channel {channel}'s declared length {} \
                 (already written: {})",
                self.header.channel_lengths[channel], self.cursors[channel]
            )));
        }
        Ok(())
    }

    fn seek_to(&mut self, channel: usize) -> Result<()> {
        let offset = self.header.sample_offset(channel, self.cursors[channel]);
        self.file
            .seek(SeekFrom::Start(offset))
            .map_err(|e| Error::io(&self.path, e))?;
        Ok(())
    }

    /// Append int8 samples to a channel (int8 containers only).
    pub fn write_i8(&mut self, channel: usize, samples: &[i8]) -> Result<()> {
        if self.header.sample_format != SampleFormat::Int8 {
            return Err(Error::Usage(
                "cannot write int8 samples to a real32 container".into(),
            ));
        }
        self.check_channel(channel, samples.len() as u64)?;
        self.seek_to(channel)?;
        let bytes: Vec<u8> = samples.iter().map(|&s| s as u8).collect();
        self.file
            .write_all(&bytes)
            .map_err(|e| Error::io(&self.path, e))?;
        self.cursors[channel] += samples.len() as u64;
        Ok(())
    }

    /// Append real samples to a channel (real32 containers only); values are
    /// stored as 32-bit floats.
    pub fn write_f64(&mut self, channel: usize, samples: &[f64]) -> Result<()> {
        if self.header.sample_format != SampleFormat::Real32 {
            return Err(Error::Usage(
                "cannot write real samples to an int8 container".into(),
            ));
        }
        self.check_channel(channel, samples.len() as u64)?;
        self.seek_to(channel)?;
        let mut bytes = Vec::with_capacity(samples.len() * 4);
        for &v in samples {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        self.file
            .write_all(&bytes)
            .map_err(|e| Error::io(&self.path, e))?;
        self.cursors[channel] += samples.len() as u64;
        Ok(())
    }

    /// Flush and verify every channel was written to its declared length.
    pub fn finish(mut self) -> Result<()> {
        for (c, (&cursor, &declared)) in self
            .cursors
            .iter()
            .zip(&self.header.channel_lengths)
            .enumerate()
        {
            if cursor != declared {
                return Err(Error::Usage(format!(
                    "channel {c} incomplete: wrote {cursor} of {declared} declared samples"
                )));
            }
        }
        self.file.flush().map_err(|e| Error::io(&self.path, e))?;
        self.finished = true;
        Ok(())
    }
}

impl Drop for ContainerWriter {
    fn drop(&mut self) {
        // An unfinished writer leaves a file that fails size validation on
        // open; nothing further to do here.
    }
}

/// A validated container opened for reading.
#[derive(Debug)]
pub struct Container {
    path: PathBuf,
    header: ContainerHeader,
}

impl Container {
    /// Open and validate: header well-formed and file size exactly equal to
    /// header + payload.
    pub fn open(path: &Path) -> Result<Self> {
        let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
        let header = ContainerHeader::read_from(&mut file, path)?;
        let actual = file
            .metadata()
            .map_err(|e| Error::io(path, e))?
            .len();
        let expected = header.file_len();
        if actual != expected {
            let detail = if actual < expected {
                format!("{} bytes missing", expected - actual)
            } else {
                format!("{} trailing bytes", actual - expected)
            };
            return Err(Error::Format(format!(
                "{}: payload size mismatch: expected {expected} bytes, found {actual} ({detail})",
                path.display()
            )));
        }
        Ok(Self {
            path: path.to_path_buf(),
            header,
        })
    }

    pub fn header(&self) -> &ContainerHeader {
        &self.header
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Role assigned to a channel index by the container convention.
    pub fn role(channel: usize) -> ChannelRole {
        if channel == 0 {
            ChannelRole::Squid
        } else {
            ChannelRole::Injected
        }
    }

    fn check_channel(&self, channel: usize) -> Result<()> {
        if channel >= self.header.n_channels() {
            return Err(Error::Usage(format!(
                "channel {channel} out of range for a {}-channel container",
                self.header.n_channels()
            )));
        }
        Ok(())
    }

    /// Read one whole channel into memory.
    pub fn read_channel(&self, channel: usize) -> Result<SeriesData> {
        self.check_channel(channel)?;
        let len = self.header.channel_lengths[channel];
        self.read_range(channel, 0, len)
    }

    /// Read `len` samples of `channel` starting at `start` (sample units).
    pub fn read_range(&self, channel: usize, start: u64, len: u64) -> Result<SeriesData> {
        self.check_channel(channel)?;
        if start + len > self.header.channel_lengths[channel] {
            return Err(Error::Usage(format!(
                "range [{start}, {}) exceeds channel {channel}'s length {}",
                start + len,
                self.header.channel_lengths[channel]
            )));
        }
        let mut file = File::open(&self.path).map_err(|e| Error::io(&self.path, e))?;
        let offset = self.header.sample_offset(channel, start);
        file.seek(SeekFrom::Start(offset))
            .map_err(|e| Error::io(&self.path, e))?;
        let bps = self.header.sample_format.bytes_per_sample();
        let mut bytes = vec![0u8; (len * bps) as usize];
        file.read_exact(&mut bytes)
            .map_err(|e| Error::io(&self.path, e))?;
        decode_samples(
            &bytes,
            self.header.sample_format,
            self.header.sample_rate_hz,
            Container::role(channel),
            start,
            &self.path,
        )
    }

    /// Stream consecutive non-overlapping segments of `segment_len` samples.
    /// A trailing partial segment is discarded (its size is reported by
    /// [`SegmentReader::discarded_samples`]). Peak memory is O(segment_len).
    pub fn segments(&self, channel: usize, segment_len: u64) -> Result<SegmentReader> {
        self.segments_strided(channel, segment_len, 1)
    }

    /// Like [`Container::segments`] but yielding only segments with index
    /// 0, stride, 2·stride, …; skipped segments are never read from disk.
    pub fn segments_strided(
        &self,
        channel: usize,
        segment_len: u64,
        stride: u64,
    ) -> Result<SegmentReader> {
        self.check_channel(channel)?;
        if segment_len == 0 {
            return Err(Error::Usage("segment length must be positive".into()));
        }
        if stride == 0 {
            return Err(Error::Usage("stride must be positive".into()));
        }
        let channel_len = self.header.channel_lengths[channel];
        let n_full = channel_len / segment_len;
        let file = File::open(&self.path).map_err(|e| Error::io(&self.path, e))?;
        Ok(SegmentReader {
            file,
            path: self.path.clone(),
            header: self.header.clone(),
            channel,
            segment_len,
            stride,
            n_full_segments: n_full,
            next_segment: 0,
            discarded: channel_len % segment_len,
        })
    }

    /// Number of full segments of `segment_len` in `channel`.
    pub fn n_segments(&self, channel: usize, segment_len: u64) -> Result<u64> {
        self.check_channel(channel)?;
        if segment_len == 0 {
            return Err(Error::Usage("segment length must be positive".into()));
        }
        Ok(self.header.channel_lengths[channel] / segment_len)
    }
}

fn decode_samples(
    bytes: &[u8],
    format: SampleFormat,
    sample_rate: u64,
    role: ChannelRole,
    start_index: u64,
    path: &Path,
) -> Result<SeriesData> {
    match format {
        SampleFormat::Int8 => {
            let samples: Vec<i8> = bytes.iter().map(|&b| b as i8).collect();
            Ok(SeriesData::Int8(SampleSeries {
                samples,
                sample_rate,
                channel_role: role,
                start_index,
            }))
        }
        SampleFormat::Real32 => {
            let mut samples = Vec::with_capacity(bytes.len() / 4);
            for (i, c) in bytes.chunks_exact(4).enumerate() {
                let v = f32::from_le_bytes(c.try_into().unwrap()) as f64;
                if !v.is_finite() {
                    return Err(Error::Format(format!(
                        "{}: non-finite real32 sample at offset {} of the read range",
                        path.display(),
                        start_index + i as u64
                    )));
                }
                samples.push(v);
            }
            Ok(SeriesData::Real(FloatSeries::from_finite(
                samples,
                sample_rate,
            )))
        }
    }
}

/// Streaming per-segment reader; see [`Container::segments`].
pub struct SegmentReader {
    file: File,
    path: PathBuf,
    header: ContainerHeader,
    channel: usize,
    segment_len: u64,
    stride: u64,
    n_full_segments: u64,
    next_segment: u64,
    discarded: u64,
}

impl SegmentReader {
    /// Samples in the discarded trailing partial segment (possibly 0).
    pub fn discarded_samples(&self) -> u64 {
        self.discarded
    }

    /// Segments this reader will yield in total.
    pub fn n_yielded(&self) -> u64 {
        self.n_full_segments.div_ceil(self.stride)
    }

    fn read_segment(&mut self, segment: u64) -> Result<SeriesData> {
        let start = segment * self.segment_len;
        let offset = self.header.sample_offset(self.channel, start);
        self.file
            .seek(SeekFrom::Start(offset))
            .map_err(|e| Error::io(&self.path, e))?;
        let bps = self.header.sample_format.bytes_per_sample();
        let mut bytes = vec![0u8; (self.segment_len * bps) as usize];
        self.file
            .read_exact(&mut bytes)
            .map_err(|e| Error::io(&self.path, e))?;
        decode_samples(
            &bytes,
            self.header.sample_format,
            self.header.sample_rate_hz,
            Container::role(self.channel),
            start,
            &self.path,
        )
    }
}

impl Iterator for SegmentReader {
    /// (segment index, data)
    type Item = Result<(u64, SeriesData)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next_segment >= self.n_full_segments {
            return None;
        }
        let segment = self.next_segment;
        self.next_segment += self.stride;
        Some(self.read_segment(segment).map(|d| (segment, d)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ChannelRole;
    use tempfile::tempdir;

    fn int8_series(samples: Vec<i8>, rate: u64) -> SampleSeries {
        SampleSeries::new(samples, rate, ChannelRole::Squid, 0).unwrap()
    }

    #[test]
    fn header_layout_is_exact() {
        let h = ContainerHeader::new(SampleFormat::Int8, 10_000_000, vec![5, 7]).unwrap();
        let bytes = h.to_bytes();
        assert_eq!(bytes.len(), 32);
        assert_eq!(&bytes[0..4], b"TIDM");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(bytes[6], 0); // int8
        assert_eq!(bytes[7], 2); // channels
        assert_eq!(
            u64::from_le_bytes(bytes[8..16].try_into().unwrap()),
            10_000_000
        );
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 5);
        assert_eq!(u64::from_le_bytes(bytes[24..32].try_into().unwrap()), 7);
    }

    #[test]
    fn int8_round_trip_two_channels() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("pair.tsd");
        let a = int8_series(vec![1, -2, 3, -128, 127], 1000);
        let b = int8_series(vec![9, 8, 7, 6, 5], 1000);
        write_container(
            &path,
            &[SeriesRef::Int8(&a), SeriesRef::Int8(&b)],
            false,
        )
        .unwrap();

        let expected_size = 32 + 10;
        assert_eq!(std::fs::metadata(&path).unwrap().len(), expected_size);

        let c = Container::open(&path).unwrap();
        assert_eq!(c.header().sample_rate_hz, 1000);
        match c.read_channel(0).unwrap() {
            SeriesData::Int8(s) => {
                assert_eq!(s.samples, a.samples);
                assert_eq!(s.channel_role, ChannelRole::Squid);
            }
            _ => panic!("wrong format"),
        }
        match c.read_channel(1).unwrap() {
            SeriesData::Int8(s) => {
                assert_eq!(s.samples, b.samples);
                assert_eq!(s.channel_role, ChannelRole::Injected);
            }
            _ => panic!("wrong format"),
        }
    }

    #[test]
    fn real32_round_trip_with_f32_precision() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("real.tsd");
        let vals = vec![0.0, 1.5, -2.25, 0.3125];
        let s = FloatSeries::new(vals.clone(), 500).unwrap();
        write_container(&path, &[SeriesRef::Real(&s)], false).unwrap();
        let c = Container::open(&path).unwrap();
        match c.read_channel(0).unwrap() {
            SeriesData::Real(r) => {
                // These values are exactly representable in f32.
                assert_eq!(r.samples, vals);
            }
            _ => panic!("wrong format"),
        }
    }

    #[test]
    fn three_channels_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.tsd");
        let a = int8_series(vec![1], 10);
        let err = write_container(
            &path,
            &[
                SeriesRef::Int8(&a),
                SeriesRef::Int8(&a),
                SeriesRef::Int8(&a),
            ],
            false,
        )
        .unwrap_err();
        assert!(err.to_string().contains("1 or 2 channels"));
    }

    #[test]
    fn existing_file_requires_overwrite() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("x.tsd");
        let a = int8_series(vec![1, 2], 10);
        write_container(&path, &[SeriesRef::Int8(&a)], false).unwrap();
        let err = write_container(&path, &[SeriesRef::Int8(&a)], false).unwrap_err();
        assert!(err.to_string().contains("already exists"));
        write_container(&path, &[SeriesRef::Int8(&a)], true).unwrap();
    }

    #[test]
    fn truncated_payload_reports_byte_counts() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("trunc.tsd");
        let a = int8_series((0..100).map(|i| i as i8).collect(), 10);
        write_container(&path, &[SeriesRef::Int8(&a)], false).unwrap();
        // Chop 30 bytes off the end.
        let f = OpenOptions::new().write(true).open(&path).unwrap();
        f.set_len(24 + 70).unwrap();
        let err = Container::open(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("expected 124 bytes"), "{msg}");
        assert!(msg.contains("found 94"), "{msg}");
        assert!(msg.contains("30 bytes missing"), "{msg}");
    }

    #[test]
    fn corrupt_magic_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("magic.tsd");
        let a = int8_series(vec![0; 8], 10);
        write_container(&path, &[SeriesRef::Int8(&a)], false).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, bytes).unwrap();
        let err = Container::open(&path).unwrap_err();
        assert!(err.to_string().contains("bad magic"));
    }

    #[test]
    fn segment_iteration_floors_and_reports_discard() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("segs.tsd");
        let a = int8_series((0..25).map(|i| i as i8).collect(), 10);
        write_container(&path, &[SeriesRef::Int8(&a)], false).unwrap();
        let c = Container::open(&path).unwrap();
        let reader = c.segments(0, 10).unwrap();
        assert_eq!(reader.discarded_samples(), 5);
        let segs: Vec<_> = reader.map(|r| r.unwrap()).collect();
        assert_eq!(segs.len(), 2);
        match &segs[0].1 {
            SeriesData::Int8(s) => {
                assert_eq!(s.start_index, 0);
                assert_eq!(s.samples, (0..10).map(|i| i as i8).collect::<Vec<_>>());
            }
            _ => panic!(),
        }
        match &segs[1].1 {
            SeriesData::Int8(s) => {
                assert_eq!(s.start_index, 10);
                assert_eq!(s.samples, (10..20).map(|i| i as i8).collect::<Vec<_>>());
            }
            _ => panic!(),
        }
    }

    #[test]
    fn strided_segments_skip_indices() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("stride.tsd");
        let a = int8_series((0..120).map(|i| (i % 100) as i8).collect(), 10);
        write_container(&path, &[SeriesRef::Int8(&a)], false).unwrap();
        let c = Container::open(&path).unwrap();
        let reader = c.segments_strided(0, 5, 10).unwrap();
        assert_eq!(reader.n_yielded(), 3); // segments 0, 10, 20 of 24 full
        let idx: Vec<u64> = reader.map(|r| r.unwrap().0).collect();
        assert_eq!(idx, vec![0, 10, 20]);
    }

    #[test]
    fn streaming_writer_interleaves_channels() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("interleave.tsd");
        let mut w =
            ContainerWriter::create(&path, SampleFormat::Int8, 100, &[6, 4], false).unwrap();
        w.write_i8(0, &[1, 2, 3]).unwrap();
        w.write_i8(1, &[10, 20]).unwrap();
        w.write_i8(0, &[4, 5, 6]).unwrap();
        w.write_i8(1, &[30, 40]).unwrap();
        w.finish().unwrap();
        let c = Container::open(&path).unwrap();
        match c.read_channel(0).unwrap() {
            SeriesData::Int8(s) => assert_eq!(s.samples, vec![1, 2, 3, 4, 5, 6]),
            _ => panic!(),
        }
        match c.read_channel(1).unwrap() {
            SeriesData::Int8(s) => assert_eq!(s.samples, vec![10, 20, 30, 40]),
            _ => panic!(),
        }
    }

    #[test]
    fn incomplete_writer_fails_finish_and_leaves_invalid_file() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("incomplete.tsd");
        let w = ContainerWriter::create(&path, SampleFormat::Int8, 100, &[10], false).unwrap();
        let err = w.finish().unwrap_err();
        assert!(err.to_string().contains("incomplete"));
        assert!(Container::open(&path).is_err());
    }

    #[test]
    fn nan_real32_payload_rejected_on_read() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("nan.tsd");
        let s = FloatSeries::new(vec![1.0, 2.0], 10).unwrap();
        write_container(&path, &[SeriesRef::Real(&s)], false).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let nan = f32::NAN.to_le_bytes();
        let off = bytes.len() - 4;
        bytes[off..].copy_from_slice(&nan);
        std::fs::write(&path, bytes).unwrap();
        let c = Container::open(&path).unwrap();
        let err = c.read_channel(0).unwrap_err();
        assert!(err.to_string().contains("non-finite"));
    }
}
