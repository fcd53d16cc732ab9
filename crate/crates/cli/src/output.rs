//! Output directory bookkeeping: every file a command writes is registered so
//! a failed run can remove what it produced.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use cxr_core::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

pub struct OutputDir {
    dir: PathBuf,
    created: bool,
    files: Vec<String>,
    committed: bool,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        let created = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            created,
            files: Vec::new(),
            committed: false,
        })
    }

    /// Registers `name` and returns its full path.
    pub fn file(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.dir.join(name)
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn write_manifest(&mut self, manifest: &Manifest) -> Result<()> {
        let path = self.file(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(manifest)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.committed = true;
        Ok(())
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(self.dir.join(f));
        }
        if self.created {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

/// A config-like input and the hash of its bytes.
#[derive(Debug, Clone, Serialize)]
pub struct Source {
    /// File path, or `builtin` for the shipped default.
    pub path: String,
    pub sha256: String,
}

impl Source {
    pub fn new(path: Option<&Path>, bytes: &[u8]) -> Self {
        Source {
            path: path.map_or_else(|| "builtin".to_string(), |p| p.display().to_string()),
            sha256: sha256_hex(bytes),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: Option<Source>,
    pub rules: Source,
    pub knowledge_graph: Option<Source>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
