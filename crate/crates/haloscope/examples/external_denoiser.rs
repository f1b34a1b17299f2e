//! Plug an arbitrary executable into the denoising stage.
//!
//! The protocol: the command is invoked per segment as
//! `command <input.tsd> <output.tsd>`, reads a single-channel container,
//! and must write one of the same length and rate. Anything that can parse
//! 24 bytes of header plus a flat payload qualifies — shell, python, a
//! compiled binary.
//!
//!     cargo run --release --example external_denoiser

use std::fs;

use haloscope::denoise::DenoiserSpec;
use haloscope::model::{ChannelRole, SampleSeries, SeriesData};
use haloscope::rng::CounterRng;
use haloscope::Result;

fn main() -> Result<()> {
    let dir = std::env::temp_dir().join("haloscope_external_example");
    fs::create_dir_all(&dir).expect("create script directory");

    // A noisy input series.
    let rate = 8_000u64;
    let rng = CounterRng::new(1, 0);
    let samples: Vec<i8> = (0..2 * rate).map(|i| (rng.bits(i) & 0x3f) as i8 - 32).collect();
    let input = SeriesData::Int8(SampleSeries::new(samples, rate, ChannelRole::Squid, 0)?);

    // 1. The identity denoiser: copy input to output. Exercises the full
    //    protocol round trip without touching a sample.
    let identity = DenoiserSpec::External {
        command: vec![
            "/bin/sh".into(),
            "-c".into(),
            "cp \"$1\" \"$2\"".into(),
            "identity".into(),
        ],
        timeout_secs: 30,
    };
    let output = identity.apply(&input)?;
    let same = match (&input, &output) {
        (SeriesData::Int8(a), SeriesData::Int8(b)) => a.samples == b.samples,
        _ => false,
    };
    println!("identity copy: round-tripped bit-exactly = {same}");

    // 2. A misbehaving denoiser: whatever it prints on stderr comes back in
    //    the error, along with its exit status.
    let failing = DenoiserSpec::External {
        command: vec![
            "/bin/sh".into(),
            "-c".into(),
            "echo 'model file not found' >&2; exit 9".into(),
            "broken".into(),
        ],
        timeout_secs: 30,
    };
    match failing.apply(&input) {
        Ok(_) => println!("unexpected success"),
        Err(e) => println!("failing command surfaced as: {e}"),
    }

    // 3. A hung denoiser is killed at the timeout.
    let hung = DenoiserSpec::External {
        command: vec![
            "/bin/sh".into(),
            "-c".into(),
            "sleep 600".into(),
            "hung".into(),
        ],
        timeout_secs: 1,
    };
    match hung.apply(&input) {
        Ok(_) => println!("unexpected success"),
        Err(e) => println!("hung command surfaced as: {e}"),
    }

    // 4. A real external filter: a shell one-liner is too weak for DSP, so
    //    write a tiny python script clipping the payload to +/- 8 counts.
    //    (Any language works; only the container bytes matter.)
    let script = dir.join("clip.py");
    fs::write(
        &script,
        r#"
import struct, sys
data = open(sys.argv[1], 'rb').read()
n = struct.unpack('<Q', data[16:24])[0]
payload = bytearray(data[24:24 + n])
for i, b in enumerate(payload):
    v = b - 256 if b >= 128 else b
    payload[i] = (max(-8, min(8, v))) & 0xff
open(sys.argv[2], 'wb').write(data[:24] + bytes(payload))
"#,
    )
    .expect("write script");
    let clipper = DenoiserSpec::External {
        command: vec!["python3".into(), script.to_str().unwrap().into()],
        timeout_secs: 60,
    };
    match clipper.apply(&input) {
        Ok(SeriesData::Int8(s)) => {
            let max = s.samples.iter().map(|x| x.abs()).max().unwrap();
            println!("python clipper: output max |sample| = {max} (clipped to 8)");
        }
        Ok(_) => println!("python clipper: unexpected output format"),
        Err(e) => println!("python clipper unavailable here: {e}"),
    }
    Ok(())
}
