use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CompletionRequest, GatewayError};

/// Identity of a completion: model, prompt digest, temperature and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheKey {
    pub model_id: String,
    pub prompt_sha256: String,
    pub temperature: f64,
    pub seed: u64,
}

impl CacheKey {
    pub fn new(model_id: &str, request: &CompletionRequest) -> Self {
        CacheKey {
            model_id: model_id.to_string(),
            prompt_sha256: hex::encode(Sha256::digest(request.prompt.as_bytes())),
            temperature: request.temperature,
            seed: request.seed,
        }
    }

    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("key serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// Full request/response pair kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: CacheKey,
    pub prompt: String,
    pub max_tokens: u32,
    pub response: String,
    pub created_at: DateTime<Utc>,
}

/// One JSON file per key under a cache directory.
pub struct ResponseCache {
    dir: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResponseCache {
            dir: dir.into(),
            locks: Mutex::new(HashMap::new()),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, digest: &str) -> PathBuf {
        self.dir.join(&digest[..2]).join(format!("{digest}.json"))
    }

    /// Per-key lock so concurrent misses on one key make a single backend call.
    pub(crate) fn key_lock(&self, digest: &str) -> Arc<Mutex<()>> {
        self.locks
            .lock()
            .unwrap()
            .entry(digest.to_string())
            .or_default()
            .clone()
    }

    pub fn get(&self, key: &CacheKey) -> Result<Option<CacheEntry>, GatewayError> {
        let path = self.path(&key.digest());
        match std::fs::read_to_string(&path) {
            Ok(text) => {
                let entry: CacheEntry =
                    serde_json::from_str(&text).map_err(|e| GatewayError::Cache(format!("{}: {e}", path.display())))?;
                Ok((entry.key == *key).then_some(entry))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(GatewayError::Cache(format!("{}: {e}", path.display()))),
        }
    }

    /// Writes to a temp file in the target directory, then renames into place.
    pub fn put(&self, entry: &CacheEntry) -> Result<(), GatewayError> {
        let path = self.path(&entry.key.digest());
        let parent = path.parent().expect("cache path has a parent");
        let io = |e: std::io::Error| GatewayError::Cache(format!("{}: {e}", path.display()));
        std::fs::create_dir_all(parent).map_err(io)?;
        let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(io)?;
        let json = serde_json::to_string_pretty(entry).expect("entry serializes");
        std::io::Write::write_all(&mut tmp, json.as_bytes()).map_err(io)?;
        tmp.persist(&path).map_err(|e| io(e.error))?;
        Ok(())
    }
}
