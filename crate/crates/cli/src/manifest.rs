//! Per-command run manifest: config echo, component versions, timestamps and
//! SHA-256 digests of every input and output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::model::MODEL_FORMAT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: RunConfig,
    pub versions: BTreeMap<String, String>,
    pub started: String,
    pub finished: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn digests(paths: &[PathBuf]) -> Result<BTreeMap<String, String>, CliError> {
    paths.iter().map(|p| Ok((p.display().to_string(), sha256_file(p)?))).collect()
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("cdg-risk-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("model-format".to_string(), MODEL_FORMAT.to_string()),
    ])
}

impl RunManifest {
    pub fn build(
        command: &str,
        config: &RunConfig,
        started: chrono::DateTime<chrono::Utc>,
        inputs: &[PathBuf],
        outputs: &[PathBuf],
        warnings: &[String],
    ) -> Result<Self, CliError> {
        Ok(Self {
            command: command.to_string(),
            config: config.clone(),
            versions: versions(),
            started: started.to_rfc3339(),
            finished: chrono::Utc::now().to_rfc3339(),
            inputs: digests(inputs)?,
            outputs: digests(outputs)?,
            warnings: warnings.to_vec(),
        })
    }

    pub fn file_name(command: &str) -> String {
        format!("manifest-{command}.json")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc.txt");
        std::fs::write(&p, b"abc").unwrap();
        assert_eq!(sha256_file(&p).unwrap(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
