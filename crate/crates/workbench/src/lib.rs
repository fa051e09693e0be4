//! Configuration files, file formats, threaded rollouts and the command
//! implementations behind the `ctap` binary.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod manifest;
pub mod runner;

use std::path::Path;

pub use error::{Result, WorkbenchError};
use manifest::RunManifest;

/// Creates `out`, runs `body` and writes the manifest whatever the outcome.
pub fn run_in_dir<T>(
    command: &str,
    out: &Path,
    seed: u64,
    body: impl FnOnce(&mut RunManifest) -> Result<T>,
) -> Result<T> {
    std::fs::create_dir_all(out).map_err(|e| WorkbenchError::io(out, e))?;
    let mut manifest = RunManifest::start(command, seed);
    let result = body(&mut manifest);
    manifest.finish(result.as_ref().map(|_| ()).map_err(|e| e.to_string()));
    manifest.write(out)?;
    result
}
