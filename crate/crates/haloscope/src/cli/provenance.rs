//! Provenance records: every file a command writes is accompanied by a
//! `<file>.provenance.json` describing exactly how to reproduce it.
//!
//! Records are deliberately timestamp-free so that reruns with identical
//! inputs produce bit-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::PipelineConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    /// Producing tool and version.
    pub tool: String,
    pub version: String,
    /// Subcommand that produced the file.
    pub command: String,
    /// SHA-256 of the resolved configuration document.
    pub config_sha256: String,
    /// Master seed, when the step was stochastic.
    pub seed: Option<u64>,
    /// Worker count the step was configured with.
    pub workers: usize,
    /// Input files the output was derived from.
    pub inputs: Vec<PathBuf>,
}

impl Provenance {
    pub fn for_command(command: &str, config: &PipelineConfig, inputs: &[&Path]) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_sha256: config.sha256_hex(),
            seed: config.seed,
            workers: config.workers,
            inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
        }
    }

    /// Write `<output>.provenance.json` beside the output file.
    pub fn write_for(&self, output: &Path) -> Result<()> {
        let mut name = output
            .file_name()
            .ok_or_else(|| {
                Error::Usage(format!("output path {} has no file name", output.display()))
            })?
            .to_os_string();
        name.push(".provenance.json");
        let path = output.with_file_name(name);
        let text = serde_json::to_string_pretty(self).expect("provenance serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_written_beside_output_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("curve.csv");
        fs::write(&out, "x\n").unwrap();
        let config = PipelineConfig::with_defaults();
        let record = Provenance::for_command("limit", &config, &[Path::new("science.tsd")]);
        record.write_for(&out).unwrap();
        record.write_for(&out).unwrap();
        let text = fs::read_to_string(dir.path().join("curve.csv.provenance.json")).unwrap();
        let back: Provenance = serde_json::from_str(&text).unwrap();
        assert_eq!(back.command, "limit");
        assert_eq!(back.config_sha256, config.sha256_hex());
        assert_eq!(back.inputs, vec![PathBuf::from("science.tsd")]);
        // No timestamps or other run-dependent content.
        assert!(!text.contains("time"));
    }
}
