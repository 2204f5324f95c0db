use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::error::Result;
use crate::io;

pub const FILE_NAME: &str = "manifest.json";

/// Provenance record written next to every set of outputs. Everything but
/// `wall_time_s` is a function of the invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Option<PathBuf>,
    pub inputs: Vec<PathBuf>,
    pub seed: u64,
    pub output: PathBuf,
    pub outputs: Vec<String>,
    pub version: String,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        io::write_json(&dir.join(FILE_NAME), self)
    }
}

pub fn seconds(d: Duration) -> f64 {
    (d.as_secs_f64() * 1000.0).round() / 1000.0
}
