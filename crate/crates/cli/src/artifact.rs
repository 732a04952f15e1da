//! Output files with a JSON metadata header, and the shared input loaders.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use interaction_primitives::io::{read_interactions, Dataset};
use interaction_primitives::procrustes::distance_matrix;
use interaction_primitives::trajectory::{resample, uniform_measure};
use interaction_primitives::{DistanceMatrix, TimeMeasure};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::CliError;

/// Provenance attached to every artifact. Contains nothing run-specific
/// beyond the settings and input digests, so reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub settings: serde_json::Value,
    /// SHA-256 of each input file, keyed by role.
    pub inputs: BTreeMap<String, String>,
    pub notes: BTreeMap<String, String>,
}

impl Meta {
    pub fn new(command: &str, config: &PipelineConfig) -> Self {
        Self {
            tool: "iprim".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: config.seed,
            config_hash: config.hash(),
            settings: config.settings(),
            inputs: BTreeMap::new(),
            notes: BTreeMap::new(),
        }
    }

    pub fn input(mut self, role: &str, digest: &str) -> Self {
        self.inputs.insert(role.into(), digest.into());
        self
    }

    pub fn note(mut self, key: &str, value: &str) -> Self {
        self.notes.insert(key.into(), value.into());
        self
    }
}

/// A JSON artifact: metadata plus payload.
#[derive(Debug, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub meta: Meta,
    pub data: T,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, meta: &Meta, data: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(&Artifact { meta: meta.clone(), data })?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Writes `body` below a `# {metadata}` line.
pub fn write_csv(path: &Path, meta: &Meta, body: &[u8]) -> Result<(), CliError> {
    let mut out = format!("# {}\n", serde_json::to_string(meta)?).into_bytes();
    out.extend_from_slice(body);
    write_file(path, &out)
}

/// Reads the payload of a JSON artifact, or a bare payload.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let bytes = read_bytes(path)?;
    let value: serde_json::Value = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let payload = match value {
        serde_json::Value::Object(mut map) if map.contains_key("meta") && map.contains_key("data") => {
            map.remove("data").expect("checked above")
        }
        other => other,
    };
    serde_json::from_value(payload).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Interactions resampled onto the configured grid, with the matching
/// uniform measure and the digest of the source file.
pub struct Loaded {
    pub data: Dataset,
    pub mu: TimeMeasure,
    pub digest: String,
}

pub fn load_data(path: &Path, grid_len: usize) -> Result<Loaded, CliError> {
    let bytes = read_bytes(path)?;
    let raw = read_interactions(&bytes[..]).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if raw.is_empty() {
        return Err(CliError::Data(format!("{}: no interactions", path.display())));
    }
    let interactions = raw
        .interactions
        .iter()
        .map(|i| resample(i, grid_len))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Loaded {
        data: Dataset {
            ids: raw.ids,
            interactions,
        },
        mu: uniform_measure(grid_len)?,
        digest: sha256_hex(&bytes),
    })
}

/// Cache key: the input digest, the grid length and the normalization flag.
pub fn cache_key(digest: &str, grid_len: usize, normalize: bool) -> String {
    let mut h = Sha256::new();
    h.update(digest.as_bytes());
    h.update((grid_len as u64).to_le_bytes());
    h.update([normalize as u8]);
    hex::encode(h.finalize())
}

/// The distance matrix of `loaded`, from the binary cache when present.
pub fn distances(loaded: &Loaded, config: &PipelineConfig) -> Result<DistanceMatrix, CliError> {
    let dir = config.cache_dir();
    let path = dir.join(format!("{}.bin", cache_key(&loaded.digest, config.grid_len, config.normalize)));
    if let Ok(bytes) = fs::read(&path) {
        if let Ok(d) = DistanceMatrix::from_bytes(&bytes) {
            if d.n() == loaded.data.len() {
                return Ok(d);
            }
        }
    }
    let d = distance_matrix(&loaded.data.interactions, &loaded.mu, config.normalize)?;
    write_file(&path, &d.to_bytes())?;
    Ok(d)
}
