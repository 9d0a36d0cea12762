//! Subcommand implementations. Each returns whether every hard gate held.

pub mod minimizers;
pub mod potential;
pub mod simulate;
pub mod verify;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::InputRecord;
use crate::io;

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub struct CmdError {
    pub usage: bool,
    pub error: anyhow::Error,
}

impl CmdError {
    /// 2 for usage errors, 1 otherwise.
    pub fn code(&self) -> u8 {
        if self.usage {
            2
        } else {
            1
        }
    }
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub fn usage(e: impl Into<anyhow::Error>) -> CmdError {
    CmdError { usage: true, error: e.into() }
}

pub fn runtime(e: impl Into<anyhow::Error>) -> CmdError {
    CmdError { usage: false, error: e.into() }
}

/// Bad inputs are usage errors; numerical breakdowns are runtime errors.
pub fn classify(e: scoremix_core::Error) -> CmdError {
    use scoremix_core::Error as E;
    match e {
        E::Empty
        | E::DimensionMismatch { .. }
        | E::NonFinitePoint { .. }
        | E::InvalidWeight { .. }
        | E::NonPositiveTime(_)
        | E::InvalidParameter { .. }
        | E::Unsupported(_) => usage(e),
        _ => runtime(e),
    }
}

pub type CmdResult = std::result::Result<bool, CmdError>;

#[derive(Clone, Debug, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
}

#[derive(Serialize)]
struct Metadata<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    config: &'a C,
    inputs: &'a [InputRecord],
    outputs: &'a [OutputRecord],
    warnings: &'a [String],
}

/// Output directory that remembers what was written to it.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<OutputRecord>,
    pub warnings: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new(), warnings: Vec::new() })
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        io::write_text(&self.root.join(name), text)?;
        self.written.push(OutputRecord { file: name.to_string(), sha256: io::content_hash(text.as_bytes()) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Writes `metadata.json`: config echo, input hashes and the output list.
    pub fn finish<C: Serialize>(self, command: &str, config: &C, inputs: &[InputRecord]) -> Result<()> {
        let meta = Metadata {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config,
            inputs,
            outputs: &self.written,
            warnings: &self.warnings,
        };
        io::write_json(&self.root.join("metadata.json"), &meta)
    }
}
