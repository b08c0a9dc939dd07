use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use spreadguard::Error;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(Error::Infeasible(_)) => 2,
            Failure::Core(Error::NoConvergence(_) | Error::Convergence { .. } | Error::Solver(_)) => 3,
            Failure::Core(Error::Parse { .. } | Error::InvalidInput(_)) | Failure::Read { .. } | Failure::Usage(_) => 4,
            Failure::Core(Error::Consistency(_)) | Failure::Write { .. } => 1,
        }
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;

/// Input file contents plus a manifest entry recording their digest.
pub struct Inputs {
    entries: Vec<Value>,
}

impl Inputs {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn read(&mut self, role: &str, path: &Path) -> Outcome<String> {
        let text = std::fs::read_to_string(path).map_err(|source| Failure::Read { path: path.into(), source })?;
        let digest = Sha256::digest(text.as_bytes());
        self.entries.push(json!({
            "role": role,
            "path": path.display().to_string(),
            "bytes": text.len(),
            "sha256": digest.iter().map(|b| format!("{b:02x}")).collect::<String>(),
        }));
        Ok(text)
    }
}

/// Output directory that remembers what was written for the manifest.
pub struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Outcome<Self> {
        std::fs::create_dir_all(dir).map_err(|source| Failure::Write { path: dir.into(), source })?;
        Ok(Self { dir: dir.into(), written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Outcome {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|source| Failure::Write { path, source })?;
        self.written.push(name.into());
        Ok(())
    }

    /// Writes `manifest.json`. It records no timestamps, so an identical
    /// rerun reproduces every file byte for byte.
    pub fn finish(mut self, command: &str, args: &[String], inputs: Inputs, settings: Map<String, Value>) -> Outcome {
        let manifest = json!({
            "tool": "spreadguard",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "arguments": args,
            "inputs": inputs.entries,
            "settings": settings,
            "outputs": self.written,
        });
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n";
        self.write("manifest.json", &text)
    }
}
