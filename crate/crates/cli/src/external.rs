//! A codec backed by an external program.
//!
//! The program is invoked as `<command...> <decode|encode> <input> <output>`
//! with RHRT files on both sides and must exit with status 0.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};

use rhr_core::codec::Codec;
use rhr_core::{Error, LatentGrid, Result};

use crate::rhrt;

static CALLS: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone)]
pub struct ExternalCodec {
    program: String,
    args: Vec<String>,
    granularity: usize,
    scratch: PathBuf,
}

impl ExternalCodec {
    /// `command` is split on whitespace into program and leading arguments.
    pub fn new(command: &str, granularity: usize, scratch: impl Into<PathBuf>) -> Result<Self> {
        let mut parts = command.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| Error::Codec("empty codec command".into()))?;
        Ok(Self {
            program,
            args: parts.collect(),
            granularity: granularity.max(1),
            scratch: scratch.into(),
        })
    }

    fn call(&self, mode: &str, grid: &LatentGrid) -> Result<LatentGrid> {
        let id = CALLS.fetch_add(1, Ordering::Relaxed);
        let stem = format!("rhr-codec-{}-{id}", std::process::id());
        let input = self.scratch.join(format!("{stem}-in.rhrt"));
        let output = self.scratch.join(format!("{stem}-out.rhrt"));
        let result = self.exchange(mode, grid, &input, &output);
        let _ = std::fs::remove_file(&input);
        let _ = std::fs::remove_file(&output);
        result
    }

    fn exchange(
        &self,
        mode: &str,
        grid: &LatentGrid,
        input: &Path,
        output: &Path,
    ) -> Result<LatentGrid> {
        rhrt::write_grid(input, grid).map_err(|e| Error::Codec(e.to_string()))?;
        let status = Command::new(&self.program)
            .args(&self.args)
            .arg(mode)
            .arg(input)
            .arg(output)
            .status()
            .map_err(|e| Error::Codec(format!("cannot run {}: {e}", self.program)))?;
        if !status.success() {
            return Err(Error::Codec(format!(
                "{} {mode} exited with {status}",
                self.program
            )));
        }
        rhrt::read_grid(output).map_err(|e| Error::Codec(e.to_string()))
    }
}

impl Codec for ExternalCodec {
    fn granularity(&self) -> usize {
        self.granularity
    }

    fn decode(&mut self, latent: &LatentGrid) -> Result<LatentGrid> {
        self.call("decode", latent)
    }

    fn encode(&mut self, image: &LatentGrid) -> Result<LatentGrid> {
        self.call("encode", image)
    }
}
