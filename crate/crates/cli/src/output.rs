//! Input digests, atomic output files and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use mixval::Result;

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    version: &'a str,
    seed: Option<u64>,
    inputs: &'a [InputDigest],
    outputs: Vec<String>,
    wall_seconds: f64,
}

/// Tracks inputs and staged outputs of one run. Nothing touches the output
/// directory until [`Run::commit`].
pub struct Run {
    subcommand: &'static str,
    started: Instant,
    inputs: Vec<InputDigest>,
    outputs: Vec<(PathBuf, Vec<u8>)>,
    pub seed: Option<u64>,
}

impl Run {
    pub fn new(subcommand: &'static str) -> Self {
        Self {
            subcommand,
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
        }
    }

    /// Reads an input file and records its digest.
    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path)?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(bytes)
    }

    /// Stages an output at `relative` below the output directory.
    pub fn stage(&mut self, relative: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.outputs.push((relative.into(), bytes));
    }

    pub fn stage_json<T: Serialize>(&mut self, relative: impl Into<PathBuf>, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("report serialises");
        bytes.push(b'\n');
        self.stage(relative, bytes);
    }

    /// Writes every staged output atomically and prints the manifest.
    pub fn commit(self, out_dir: &Path) -> Result<()> {
        let mut written = Vec::with_capacity(self.outputs.len());
        for (rel, bytes) in &self.outputs {
            let path = out_dir.join(rel);
            let dir = path.parent().unwrap_or(out_dir);
            fs::create_dir_all(dir)?;
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            tmp.persist(&path).map_err(|e| e.error)?;
            written.push(path.display().to_string());
        }
        let manifest = Manifest {
            subcommand: self.subcommand,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.seed,
            inputs: &self.inputs,
            outputs: written,
            wall_seconds: self.started.elapsed().as_secs_f64(),
        };
        println!("{}", serde_json::to_string(&manifest).expect("manifest serialises"));
        Ok(())
    }
}
