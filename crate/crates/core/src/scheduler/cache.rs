use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SchedulerError;
use crate::providers::ProviderResponse;

pub const CACHE_SCHEMA_VERSION: u32 = 1;

/// `<provider id>:<sha256 of text>`.
pub fn cache_key(provider_id: &str, text: &str) -> String {
    format!("{provider_id}:{}", crate::sha256_hex(text))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub response: ProviderResponse,
    pub schema_version: u32,
}

/// A line of the cache file that could not be used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorruptLine {
    /// 1-based line number.
    pub line: usize,
    /// Key recovered from the damaged line, when it survived.
    pub key: Option<String>,
    pub detail: String,
}

/// Append-only JSONL response cache for one provider.
#[derive(Debug)]
pub struct ResponseCache {
    provider_id: String,
    path: PathBuf,
    entries: HashMap<String, ProviderResponse>,
    corrupt: Vec<CorruptLine>,
    writes: usize,
}

impl ResponseCache {
    pub fn path_for(cache_dir: &Path, provider_id: &str) -> PathBuf {
        cache_dir.join(format!("{provider_id}.jsonl"))
    }

    /// Loads `cache_dir/<provider>.jsonl`, creating the directory if needed.
    pub fn open(cache_dir: &Path, provider_id: &str) -> Result<Self, SchedulerError> {
        fs::create_dir_all(cache_dir).map_err(|e| SchedulerError::io(cache_dir, e))?;
        let path = Self::path_for(cache_dir, provider_id);
        let mut cache = Self {
            provider_id: provider_id.to_string(),
            path,
            entries: HashMap::new(),
            corrupt: Vec::new(),
            writes: 0,
        };
        let text = match fs::read_to_string(&cache.path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(SchedulerError::io(&cache.path, e)),
        };
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<CacheEntry>(line) {
                Ok(entry) if entry.schema_version == CACHE_SCHEMA_VERSION => {
                    cache.entries.insert(entry.key, entry.response);
                }
                Ok(entry) => cache.corrupt.push(CorruptLine {
                    line: i + 1,
                    key: Some(entry.key),
                    detail: format!("unsupported schema_version {}", entry.schema_version),
                }),
                Err(e) => cache.corrupt.push(CorruptLine {
                    line: i + 1,
                    key: salvage_key(line),
                    detail: e.to_string(),
                }),
            }
        }
        for c in &cache.corrupt {
            log::warn!(
                "{}:{}: skipping corrupt cache entry: {}",
                cache.path.display(),
                c.line,
                c.detail
            );
        }
        Ok(cache)
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn corrupt_lines(&self) -> &[CorruptLine] {
        &self.corrupt
    }

    /// Lines appended since opening.
    pub fn writes(&self) -> usize {
        self.writes
    }

    pub fn get(&self, text: &str) -> Option<&ProviderResponse> {
        self.entries.get(&cache_key(&self.provider_id, text))
    }

    /// Like [`get`](Self::get), but a miss on a key that may be hidden in a
    /// corrupt line is an error rather than `None`.
    pub fn lookup(&self, text: &str) -> Result<Option<&ProviderResponse>, SchedulerError> {
        let key = cache_key(&self.provider_id, text);
        if let Some(r) = self.entries.get(&key) {
            return Ok(Some(r));
        }
        let suspect = self
            .corrupt
            .iter()
            .find(|c| c.key.as_deref().is_none_or(|k| k == key));
        match suspect {
            Some(c) => Err(SchedulerError::CacheCorrupt {
                path: self.path.clone(),
                line: c.line,
                key,
                detail: c.detail.clone(),
            }),
            None => Ok(None),
        }
    }

    /// Appends an entry unless the key is already present.
    pub fn put(&mut self, text: &str, response: &ProviderResponse) -> Result<(), SchedulerError> {
        let key = cache_key(&self.provider_id, text);
        if self.entries.contains_key(&key) {
            return Ok(());
        }
        let entry = CacheEntry {
            key: key.clone(),
            response: response.clone(),
            schema_version: CACHE_SCHEMA_VERSION,
        };
        let mut line = serde_json::to_string(&entry).expect("cache entry serializes");
        line.push('\n');
        let io = |e| SchedulerError::io(&self.path, e);
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&self.path)
            .map_err(io)?;
        if needs_newline(&mut file).map_err(io)? {
            line.insert(0, '\n');
        }
        file.write_all(line.as_bytes()).map_err(io)?;
        self.entries.insert(key, response.clone());
        self.writes += 1;
        Ok(())
    }
}

/// True when the file is non-empty and does not end with a newline, which
/// happens after an interrupted write.
fn needs_newline(file: &mut File) -> std::io::Result<bool> {
    let len = file.metadata()?.len();
    if len == 0 {
        return Ok(false);
    }
    file.seek(SeekFrom::Start(len - 1))?;
    let mut last = [0u8; 1];
    file.read_exact(&mut last)?;
    Ok(last[0] != b'\n')
}

fn salvage_key(line: &str) -> Option<String> {
    let rest = line.trim_start().strip_prefix("{\"key\":\"")?;
    let end = rest.find('"')?;
    Some(rest[..end].to_string())
}

/// One-shot lookup of `text` in `cache_dir/<provider>.jsonl`.
pub fn cache_lookup(
    cache_dir: &Path,
    provider_id: &str,
    text: &str,
) -> Result<Option<ProviderResponse>, SchedulerError> {
    let cache = ResponseCache::open(cache_dir, provider_id)?;
    cache.lookup(text).map(|r| r.cloned())
}
