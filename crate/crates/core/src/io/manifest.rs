//! Run manifests: config echo, versions, conventions and a checksummed
//! inventory of every file a command wrote.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::propagator::Abort;
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub package: String,
    pub manifest_schema: u32,
    pub snapshot_format: u32,
    pub backend: String,
}

impl Versions {
    pub fn current() -> Self {
        Versions {
            package: env!("CARGO_PKG_VERSION").to_string(),
            manifest_schema: MANIFEST_SCHEMA,
            snapshot_format: super::snapshot::FORMAT_VERSION,
            backend: crate::par::MODE.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub equation: String,
    pub free_multiplier: String,
    /// Energy functional reported in the `energy` column.
    pub energy_variant: String,
    pub energy_formula: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            equation: "i du/dt = -Δu + V u + λ|u|^α u, λ = 1 (0 with nonlinear = false)".into(),
            free_multiplier: "exp(-i|k|²t)".into(),
            energy_variant: crate::propagator::EnergyVariant::Hamiltonian.label().into(),
            energy_formula: "½∫|∇u|² + ½∫V|u|² + λ/(α+2)∫|u|^(α+2)".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    InvariantFailure,
    NumericalAbort,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::InvariantFailure => 2,
            RunStatus::NumericalAbort => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub status: RunStatus,
    pub exit_code: i32,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub versions: Versions,
    pub conventions: Conventions,
    pub files: Vec<FileEntry>,
    /// Set when the run stopped early; the files cover the part completed.
    pub abort: Option<Abort>,
    /// Failed invariant checks, one line each.
    pub failures: Vec<String>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Re-hashes every listed file; returns the paths that are missing or
    /// no longer match.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|f| match std::fs::read(dir.join(&f.path)) {
                Ok(bytes) => sha256_hex(&bytes) != f.sha256 || bytes.len() as u64 != f.bytes,
                Err(_) => true,
            })
            .map(|f| f.path.clone())
            .collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes files into an output directory and keeps their inventory.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    /// Writes `manifest.json` (not listed in its own inventory).
    pub fn finish(
        self,
        command: &str,
        status: RunStatus,
        seed: u64,
        config: &ExperimentConfig,
        abort: Option<Abort>,
        failures: Vec<String>,
    ) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: command.to_string(),
            status,
            exit_code: status.exit_code(),
            seed,
            config: config.clone(),
            versions: Versions::current(),
            conventions: Conventions::default(),
            files: self.files,
            abort,
            failures,
        };
        let path = self.dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}
