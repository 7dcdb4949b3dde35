//! Every artifact the binary writes gets a sidecar manifest recording the
//! command, a digest of the inputs, the seed and the effective settings.
//! Two runs with identical manifests produce identical artifacts, which is
//! the whole reproducibility contract in one file.

use crate::CliError;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 over the raw bytes of the input files, in argument order.
    pub input_hash: String,
    pub seed: u64,
    /// Snapshot of the knobs that shaped the run: the full integration
    /// config for simulation commands, the flag values elsewhere.
    pub config: serde_json::Value,
    pub tool_version: String,
}

pub fn input_hash(chunks: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for c in chunks {
        h.update(c);
    }
    let digest = h.finalize();
    let mut out = String::with_capacity(2 * digest.len());
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

impl RunManifest {
    pub fn new(command: &str, inputs: &[&[u8]], seed: u64, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            input_hash: input_hash(inputs),
            seed,
            config,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn path_for(artifact: &Path) -> PathBuf {
        let mut s = artifact.as_os_str().to_os_string();
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    pub fn write_alongside(&self, artifact: &Path) -> Result<(), CliError> {
        let path = Self::path_for(artifact);
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Failed(format!("manifest serialisation: {e}")))?;
        text.push('\n');
        crate::io::write_text(&path, &text)
    }
}
