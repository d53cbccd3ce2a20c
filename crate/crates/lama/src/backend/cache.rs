//! Append-only response cache for replayable runs.
//!
//! One JSON object per line: key hash, the request fields, the response text,
//! and a timestamp. The cache key hashes (model, system prompt, user prompt,
//! nonce) — the pipeline makes exactly one call per (prompt, stage), so a
//! cached run replays one frozen sample of the model and reruns over a fixed
//! input set are bit-identical. Concurrent readers share the in-memory map;
//! writers serialize on the file handle.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BackendError, ChatBackend, ChatRequest, ChatResponse};

/// Hash identifying a request for cache purposes.
pub fn cache_key(req: &ChatRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(req.model_id.as_bytes());
    hasher.update([0]);
    hasher.update(req.system_prompt.as_bytes());
    hasher.update([0]);
    hasher.update(req.user_prompt.as_bytes());
    hasher.update([0]);
    hasher.update(req.nonce.to_le_bytes());
    hex::encode(hasher.finalize())
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    key: String,
    model_id: String,
    system_prompt: String,
    user_prompt: String,
    nonce: u32,
    response_text: String,
    unix_ms: u64,
}

/// On-disk response cache. Open once per run and share.
pub struct ResponseCache {
    path: PathBuf,
    map: RwLock<HashMap<String, String>>,
    file: Mutex<File>,
}

impl ResponseCache {
    /// Open (creating if needed) the cache file and load existing records.
    /// Later records win when a key appears more than once.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|source| BackendError::Cache {
                    path: path.display().to_string(),
                    source,
                })?;
            }
        }
        let mut map = HashMap::new();
        if path.exists() {
            let file = File::open(&path).map_err(|source| BackendError::Cache {
                path: path.display().to_string(),
                source,
            })?;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|source| BackendError::Cache {
                    path: path.display().to_string(),
                    source,
                })?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheRecord>(&line) {
                    Ok(rec) => {
                        map.insert(rec.key, rec.response_text);
                    }
                    Err(_) => continue, // tolerate a torn trailing line
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| BackendError::Cache {
                path: path.display().to_string(),
                source,
            })?;
        Ok(ResponseCache {
            path,
            map: RwLock::new(map),
            file: Mutex::new(file),
        })
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.map.read().expect("cache lock").get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn put(
        &self,
        req: &ChatRequest,
        key: &str,
        response_text: &str,
    ) -> Result<(), BackendError> {
        let record = CacheRecord {
            key: key.to_string(),
            model_id: req.model_id.clone(),
            system_prompt: req.system_prompt.clone(),
            user_prompt: req.user_prompt.clone(),
            nonce: req.nonce,
            response_text: response_text.to_string(),
            unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .unwrap_or_default()
                .as_millis() as u64,
        };
        let line = serde_json::to_string(&record).expect("cache record serializes");
        {
            let mut file = self.file.lock().expect("cache file lock");
            writeln!(file, "{line}").map_err(|source| BackendError::Cache {
                path: self.path.display().to_string(),
                source,
            })?;
        }
        self.map
            .write()
            .expect("cache lock")
            .insert(key.to_string(), response_text.to_string());
        Ok(())
    }
}

/// Wraps any backend with the replay cache.
pub struct CachedBackend {
    inner: Arc<dyn ChatBackend>,
    cache: ResponseCache,
}

impl CachedBackend {
    pub fn new(inner: Arc<dyn ChatBackend>, cache: ResponseCache) -> Self {
        CachedBackend { inner, cache }
    }

    pub fn open(inner: Arc<dyn ChatBackend>, path: impl AsRef<Path>) -> Result<Self, BackendError> {
        Ok(CachedBackend::new(inner, ResponseCache::open(path)?))
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }
}

#[async_trait]
impl ChatBackend for CachedBackend {
    async fn send_chat(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let key = cache_key(req);
        if let Some(text) = self.cache.get(&key) {
            return Ok(ChatResponse {
                text,
                latency: Duration::ZERO,
                from_cache: true,
            });
        }
        let resp = self.inner.send_chat(req).await?;
        self.cache.put(req, &key, &resp.text)?;
        Ok(resp)
    }
}
