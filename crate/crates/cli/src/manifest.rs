use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Provenance written next to every file a command produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    /// sha256 of each input file, keyed by the path as given.
    pub input_digests: BTreeMap<String, String>,
    pub tool_version: String,
    pub timestamp: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new<T: Serialize>(command: &str, settings: &T, inputs: &[PathBuf]) -> anyhow::Result<Self> {
        let canonical = serde_json::to_vec(settings)?;
        let mut input_digests = BTreeMap::new();
        for path in inputs {
            let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
            input_digests.insert(path.display().to_string(), sha256_hex(&bytes));
        }
        Ok(Self {
            command: command.to_owned(),
            config_digest: sha256_hex(&canonical),
            input_digests,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        })
    }

    /// `<output>.manifest.json`
    pub fn path_for(output: &Path) -> PathBuf {
        let mut p = output.as_os_str().to_owned();
        p.push(".manifest.json");
        PathBuf::from(p)
    }

    pub fn write_beside(&self, output: &Path) -> anyhow::Result<PathBuf> {
        let path = Self::path_for(output);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}
