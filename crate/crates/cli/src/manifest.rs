//! Run manifest: config echo + hash, seed, poses and the SHA-256 of every
//! file the command wrote, so reruns can be verified byte for byte.

use crate::config::RunConfig;
use crate::error::CliError;
use panosynth_core::sphere_geom::CameraPose;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub struct Manifest {
    command: &'static str,
    config: RunConfig,
    poses: Vec<CameraPose>,
    outputs: Vec<(PathBuf, String, u64)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new(command: &'static str, config: &RunConfig, poses: &[CameraPose]) -> Self {
        Manifest {
            command,
            config: config.clone(),
            poses: poses.to_vec(),
            outputs: Vec::new(),
        }
    }

    /// Registers a file that was already written to disk.
    pub fn add_output(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Io(format!("cannot hash {}: {e}", path.display())))?;
        self.outputs
            .push((path.to_path_buf(), sha256_hex(&bytes), bytes.len() as u64));
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let config_json =
            serde_json::to_string(&self.config).map_err(|e| CliError::Io(e.to_string()))?;
        let doc = serde_json::json!({
            "command": self.command,
            "seed": self.config.seed,
            "config": self.config,
            "config_sha256": sha256_hex(config_json.as_bytes()),
            "poses": self.poses,
            "outputs": self.outputs.iter().map(|(p, h, n)| serde_json::json!({
                "path": p.file_name().map(|s| s.to_string_lossy().into_owned()),
                "sha256": h,
                "bytes": n,
            })).collect::<Vec<_>>(),
        });
        let bytes =
            serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        panosynth_core::io::write_atomic(&dir.join("manifest.json"), &bytes)?;
        Ok(())
    }
}
