use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channels::sha256_hex;
use crate::error::{io_err, HarnessError, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Summary of one run, written last as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// `sha256:` of the canonical config JSON.
    pub config_hash: String,
    pub library_version: String,
    pub harness_version: String,
    pub kind: String,
    pub rng_seed: u64,
    pub rng_algorithm: String,
    pub quick: bool,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let p = dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&p).map_err(io_err(&p))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))
    }

    /// Re-hashes every listed file and reports the first mismatch.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for f in &self.files {
            let p = dir.join(&f.path);
            let bytes = fs::read(&p).map_err(io_err(&p))?;
            if sha256_hex(&bytes) != f.sha256 {
                return Err(HarnessError::Config(format!("checksum mismatch for {}", f.path)));
            }
        }
        Ok(())
    }
}

/// Collects the files of one run in `dir`. Dropping it without calling
/// [`RunOutput::finish`] deletes everything it wrote.
#[derive(Debug)]
pub struct RunOutput {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<String>,
    finished: bool,
}

impl RunOutput {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        let created_dir = !dir.exists();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Self { dir, created_dir, files: Vec::new(), finished: false })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Path for a new output file, registered for cleanup.
    pub fn claim(&mut self, name: &str) -> Result<PathBuf> {
        if name == MANIFEST_NAME || self.files.iter().any(|f| f == name) {
            return Err(HarnessError::Config(format!("output {name} written twice")));
        }
        self.files.push(name.to_string());
        Ok(self.dir.join(name))
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let p = self.claim(name)?;
        fs::write(&p, contents).map_err(io_err(&p))
    }

    /// Hashes the outputs and writes the manifest.
    pub fn finish(
        mut self,
        config_hash: String,
        kind: &str,
        rng_seed: u64,
        rng_algorithm: &str,
        quick: bool,
    ) -> Result<RunManifest> {
        let mut files = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let p = self.dir.join(name);
            let bytes = fs::read(&p).map_err(io_err(&p))?;
            files.push(FileEntry { path: name.clone(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
        }
        let manifest = RunManifest {
            config_hash,
            library_version: nfbeam::VERSION.to_string(),
            harness_version: env!("CARGO_PKG_VERSION").to_string(),
            kind: kind.to_string(),
            rng_seed,
            rng_algorithm: rng_algorithm.to_string(),
            quick,
            files,
        };
        let p = self.dir.join(MANIFEST_NAME);
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&p, text).map_err(io_err(&p))?;
        self.finished = true;
        Ok(manifest)
    }
}

impl Drop for RunOutput {
    fn drop(&mut self) {
        if self.finished {
            return;
        }
        for name in &self.files {
            let _ = fs::remove_file(self.dir.join(name));
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}
