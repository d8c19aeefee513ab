use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use sac_core::{Error, Result};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one invocation, written as `manifest.json` in its output
/// directory.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<PathBuf>,
    pub version: String,
    pub wall_seconds: f64,
    #[serde(skip)]
    started: Option<Instant>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

impl RunManifest {
    pub fn start(subcommand: &str) -> Self {
        RunManifest {
            command_line: std::env::args().collect(),
            subcommand: subcommand.to_string(),
            config: serde_json::Value::Null,
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_seconds: 0.0,
            started: Some(Instant::now()),
        }
    }

    pub fn config(&mut self, value: &impl Serialize) -> Result<()> {
        self.config = serde_json::to_value(value)?;
        Ok(())
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(InputDigest {
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Writes `manifest.json` into `dir`, replacing any earlier one.
    pub fn finish(mut self, dir: &Path) -> Result<PathBuf> {
        if let Some(t) = self.started {
            self.wall_seconds = t.elapsed().as_secs_f64();
        }
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self)?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
