//! Denoisers applied to SQUID segments before scoring or limit setting:
//! two built-in linear filters and a process-boundary protocol that lets any
//! executable act as a denoiser.
//!
//! Built-ins operate on millivolt values and return real-valued series; no
//! re-quantization to int8 is applied afterwards (downstream consumers accept
//! real series directly). `None` passes segments through bit-identically.
//!
//! External protocol: the command is invoked as
//! `command <input.tsd> <output.tsd>` in an isolated temporary directory,
//! must exit with status 0, and must write a single-channel container of
//! exactly the input's length and sample rate (int8 or real32). Violations
//! map to distinct error variants.

use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, ExternalError, Result};
use crate::io::{write_container, Container, SeriesRef};
use crate::model::{FloatSeries, SeriesData};

/// Default moving-average window, in samples.
pub const DEFAULT_MA_WINDOW: usize = 100;
/// Default least-squares smoother window, in samples (odd).
pub const DEFAULT_SG_WINDOW: usize = 101;
/// Default least-squares smoother polynomial order.
pub const DEFAULT_SG_ORDER: usize = 11;
/// Default wall-clock budget for one external-denoiser invocation.
pub const DEFAULT_EXTERNAL_TIMEOUT_SECS: u64 = 600;

fn default_ma_window() -> usize {
    DEFAULT_MA_WINDOW
}

fn default_sg_window() -> usize {
    DEFAULT_SG_WINDOW
}

fn default_sg_order() -> usize {
    DEFAULT_SG_ORDER
}

fn default_timeout() -> u64 {
    DEFAULT_EXTERNAL_TIMEOUT_SECS
}

/// Which denoiser to run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DenoiserSpec {
    /// Pass-through: output is bit-identical to input.
    None,
    MovingAverage {
        #[serde(default = "default_ma_window")]
        window: usize,
    },
    SavitzkyGolay {
        #[serde(default = "default_sg_window")]
        window: usize,
        #[serde(default = "default_sg_order")]
        order: usize,
    },
    External {
        /// Program plus leading arguments; input/output paths are appended.
        command: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
}

impl Default for DenoiserSpec {
    fn default() -> Self {
        DenoiserSpec::None
    }
}

impl DenoiserSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DenoiserSpec::None => Ok(()),
            DenoiserSpec::MovingAverage { window } => {
                if *window < 2 {
                    return Err(Error::Usage(format!(
                        "moving-average window must be at least 2, got {window}"
                    )));
                }
                Ok(())
            }
            DenoiserSpec::SavitzkyGolay { window, order } => {
                check_sg_parameters(*window, *order)
            }
            DenoiserSpec::External { command, .. } => {
                if command.is_empty() {
                    return Err(Error::Usage(
                        "external denoiser command must not be empty".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Apply this denoiser to one segment. Built-in filters return real
    /// series in millivolts; `None` returns a bit-identical clone; external
    /// commands return whatever storage format the command emitted.
    pub fn apply(&self, segment: &SeriesData) -> Result<SeriesData> {
        self.validate()?;
        match self {
            DenoiserSpec::None => Ok(segment.clone()),
            DenoiserSpec::MovingAverage { window } => {
                let x = segment.to_millivolts();
                let y = moving_average(&x.samples, *window)?;
                Ok(SeriesData::Real(FloatSeries::from_finite(y, x.sample_rate)))
            }
            DenoiserSpec::SavitzkyGolay { window, order } => {
                let x = segment.to_millivolts();
                let y = savitzky_golay(&x.samples, *window, *order)?;
                Ok(SeriesData::Real(FloatSeries::from_finite(y, x.sample_rate)))
            }
            DenoiserSpec::External {
                command,
                timeout_secs,
            } => run_external(segment, command, Duration::from_secs(*timeout_secs)),
        }
    }

    /// Human-readable name for reports.
    pub fn label(&self) -> String {
        match self {
            DenoiserSpec::None => "none".into(),
            DenoiserSpec::MovingAverage { window } => format!("moving_average(window={window})"),
            DenoiserSpec::SavitzkyGolay { window, order } => {
                format!("savitzky_golay(window={window}, order={order})")
            }
            DenoiserSpec::External { command, .. } => {
                format!("external({})", command.join(" "))
            }
        }
    }
}

/// Centered moving average: y[t] = mean of x[t−⌊w/2⌋ .. t+⌈w/2⌉−1], with the
/// window shrunk to the valid range near the edges. Output length equals
/// input length. Uses prefix sums, so each output is O(1).
pub fn moving_average(x: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 2 {
        return Err(Error::Usage(format!(
            "moving-average window must be at least 2, got {window}"
        )));
    }
    let n = x.len();
    if window > n {
        return Err(Error::Usage(format!(
            "moving-average window {window} exceeds series length {n}"
        )));
    }
    let back = window / 2; // ⌊w/2⌋ samples behind t
    let ahead = window - back; // ⌈w/2⌉ samples from t forward
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in x {
        acc += v;
        prefix.push(acc);
    }
    let mut y = Vec::with_capacity(n);
    for t in 0..n {
        let lo = t.saturating_sub(back);
        let hi = (t + ahead).min(n);
        let count = (hi - lo) as f64;
        y.push((prefix[hi] - prefix[lo]) / count);
    }
    Ok(y)
}

fn check_sg_parameters(window: usize, order: usize) -> Result<()> {
    if window < 2 {
        return Err(Error::Usage(format!(
            "smoothing window must be at least 2, got {window}"
        )));
    }
    if window % 2 == 0 {
        return Err(Error::Usage(format!(
            "Savitzky-Golay window must be odd: got {window}; use {} or {}",
            window - 1,
            window + 1
        )));
    }
    if order >= window {
        return Err(Error::Usage(format!(
            "Savitzky-Golay order {order} must be smaller than window {window}"
        )));
    }
    Ok(())
}

/// Savitzky–Golay smoothing: least-squares fit of a degree-`order`
/// polynomial over each centered odd `window`, evaluated at the center.
/// Edges are mirror-padded (x[−k] = x[k], x[N−1+k] = x[N−1−k]).
pub fn savitzky_golay(x: &[f64], window: usize, order: usize) -> Result<Vec<f64>> {
    check_sg_parameters(window, order)?;
    let n = x.len();
    if window > n {
        return Err(Error::Usage(format!(
            "Savitzky-Golay window {window} exceeds series length {n}"
        )));
    }
    let weights = sg_weights(window, order)?;
    let h = (window as isize - 1) / 2;
    let mirror = |i: isize| -> f64 {
        let m = if i < 0 {
            -i
        } else if i >= n as isize {
            2 * (n as isize - 1) - i
        } else {
            i
        };
        x[m as usize]
    };
    let mut y = Vec::with_capacity(n);
    for t in 0..n as isize {
        let mut acc = 0.0;
        for (k, w) in weights.iter().enumerate() {
            acc += w * mirror(t + k as isize - h);
        }
        y.push(acc);
    }
    Ok(y)
}

/// Center-evaluation weights for the least-squares smoother, computed by
/// forming and solving the normal equations of the polynomial fit on the
/// scaled abscissa u = j/h (conditioning) with partial-pivoted elimination.
fn sg_weights(window: usize, order: usize) -> Result<Vec<f64>> {
    let h = ((window - 1) / 2) as f64;
    let m = order + 1;
    // Vandermonde basis a[j][p] = (j/h)^p for j = −h..h.
    let mut basis = Vec::with_capacity(window);
    for j in 0..window {
        let u = (j as f64 - h) / h.max(1.0);
        let mut row = Vec::with_capacity(m);
        let mut pow = 1.0;
        for _ in 0..m {
            row.push(pow);
            pow *= u;
        }
        basis.push(row);
    }
    // Normal matrix N = AᵀA.
    let mut normal = vec![vec![0.0; m]; m];
    for row in &basis {
        for p in 0..m {
            for q in 0..m {
                normal[p][q] += row[p] * row[q];
            }
        }
    }
    // Solve N z = e0; weights w = A z give ŷ(center) = wᵀx.
    let mut rhs = vec![0.0; m];
    rhs[0] = 1.0;
    let z = solve_dense(&mut normal, &mut rhs).ok_or_else(|| {
        Error::Numerical(format!(
            "normal equations singular for window {window}, order {order}"
        ))
    })?;
    Ok(basis
        .iter()
        .map(|row| row.iter().zip(&z).map(|(a, b)| a * b).sum())
        .collect())
}

/// In-place Gaussian elimination with partial pivoting; returns the solution
/// of `a·x = b` or None if the matrix is numerically singular.
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].abs() < f64::MIN_POSITIVE * 1e4 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

fn command_display(command: &[String]) -> String {
    command.join(" ")
}

/// Run an external denoiser on one segment through the file protocol.
///
/// The segment is written as a single-channel container to a fresh temporary
/// directory, the command is invoked with the input and output paths
/// appended, and the output container is validated and read back.
pub fn run_external(
    segment: &SeriesData,
    command: &[String],
    timeout: Duration,
) -> Result<SeriesData> {
    if command.is_empty() {
        return Err(Error::Usage(
            "external denoiser command must not be empty".into(),
        ));
    }
    let dir = tempfile::Builder::new()
        .prefix("denoiser-")
        .tempdir()
        .map_err(|e| Error::io(Path::new("<temp dir>"), e))?;
    let input_path = dir.path().join("input.tsd");
    let output_path = dir.path().join("output.tsd");
    match segment {
        SeriesData::Int8(s) => write_container(&input_path, &[SeriesRef::Int8(s)], false)?,
        SeriesData::Real(s) => write_container(&input_path, &[SeriesRef::Real(s)], false)?,
    }

    let display = command_display(command);
    // Child stderr goes to a file, not a pipe: the child can then never block
    // on a full pipe while this process is waiting for exit.
    let stderr_path = dir.path().join("stderr.log");
    let stderr_file = std::fs::File::create(&stderr_path)
        .map_err(|e| Error::io(&stderr_path, e))?;
    let mut child = Command::new(&command[0])
        .args(&command[1..])
        .arg(&input_path)
        .arg(&output_path)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::from(stderr_file))
        .spawn()
        .map_err(|source| ExternalError::Spawn {
            command: display.clone(),
            source,
        })?;

    let started = Instant::now();
    let status = loop {
        match child.try_wait().map_err(|source| ExternalError::Spawn {
            command: display.clone(),
            source,
        })? {
            Some(status) => break status,
            None => {
                if started.elapsed() >= timeout {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(ExternalError::Timeout {
                        command: display,
                        timeout_secs: timeout.as_secs(),
                    }
                    .into());
                }
                std::thread::sleep(Duration::from_millis(10));
            }
        }
    };

    if !status.success() {
        return Err(ExternalError::NonzeroExit {
            command: display,
            status: status.to_string(),
            stderr: read_tail(&stderr_path, 2000),
        }
        .into());
    }

    let container = match Container::open(&output_path) {
        Ok(c) => c,
        Err(e) => {
            return Err(ExternalError::OutputMissing {
                path: output_path,
                detail: e.to_string(),
            }
            .into())
        }
    };
    let header = container.header();
    if header.n_channels() != 1 {
        return Err(ExternalError::OutputMissing {
            path: output_path,
            detail: format!(
                "expected a single-channel container, got {} channels",
                header.n_channels()
            ),
        }
        .into());
    }
    let expected = segment.len() as u64;
    let got = header.channel_lengths[0];
    if got != expected {
        return Err(ExternalError::OutputLength { expected, got }.into());
    }
    if header.sample_rate_hz != segment.sample_rate() {
        return Err(ExternalError::OutputRate {
            expected: segment.sample_rate(),
            got: header.sample_rate_hz,
        }
        .into());
    }
    container.read_channel(0)
}

fn read_tail(path: &Path, max_bytes: usize) -> String {
    let mut content = Vec::new();
    if std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut content))
        .is_err()
    {
        return String::new();
    }
    let start = content.len().saturating_sub(max_bytes);
    String::from_utf8_lossy(&content[start..]).into_owned()
}
