use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use authorlm::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

/// Record of one command run, written as `manifest.json` into its output
/// directory.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: BTreeMap<String, InputFile>,
    pub outputs: Vec<PathBuf>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(command: &str, config: impl Serialize, seed: Option<u64>) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            seed,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            started_unix: now(),
            finished_unix: 0,
        })
    }

    /// Reads `path`, records its hash under `role` and returns the bytes.
    pub fn read_input(&mut self, role: &str, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs.insert(
            role.to_string(),
            InputFile {
                path: path.to_path_buf(),
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            },
        );
        Ok(bytes)
    }

    pub fn read_text(&mut self, role: &str, path: &Path) -> Result<String> {
        let bytes = self.read_input(role, path)?;
        String::from_utf8(bytes).map_err(|e| {
            Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::InvalidData, e.utf8_error()),
            )
        })
    }

    /// Writes `contents` to `dir/name` and lists it as an output.
    pub fn write_output(
        &mut self,
        dir: &Path,
        name: &str,
        contents: impl AsRef<[u8]>,
    ) -> Result<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.outputs.push(PathBuf::from(name));
        Ok(path)
    }

    pub fn add_output(&mut self, name: &str) {
        self.outputs.push(PathBuf::from(name));
    }

    pub fn finish(mut self, dir: &Path) -> Result<()> {
        self.finished_unix = now();
        let json = serde_json::to_string_pretty(&self)?;
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}
