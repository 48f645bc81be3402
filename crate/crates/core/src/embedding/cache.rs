use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingProvider, FeatureVector};

#[derive(Serialize, Deserialize)]
struct CacheLine {
    provider: String,
    text: String,
    embedding: Vec<f64>,
}

/// Memoizes an inner provider, keyed by (provider id, text), with an
/// optional JSONL sidecar file. The file is rewritten sorted on `flush`.
pub struct CachedEmbedder<P> {
    inner: P,
    entries: RwLock<BTreeMap<(String, String), Vec<f64>>>,
    path: Option<PathBuf>,
    file_lock: Mutex<()>,
}

impl<P: EmbeddingProvider> CachedEmbedder<P> {
    pub fn in_memory(inner: P) -> Self {
        Self {
            inner,
            entries: RwLock::new(BTreeMap::new()),
            path: None,
            file_lock: Mutex::new(()),
        }
    }

    /// Open (or start) a sidecar cache file.
    pub fn open(inner: P, path: &Path) -> Result<Self, EmbedError> {
        let mut entries = BTreeMap::new();
        if path.exists() {
            let f = fs::File::open(path).map_err(|e| EmbedError::Cache(e.to_string()))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| EmbedError::Cache(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: CacheLine = serde_json::from_str(&line)
                    .map_err(|e| EmbedError::Cache(format!("line {}: {e}", i + 1)))?;
                entries.insert((rec.provider, rec.text), rec.embedding);
            }
        }
        Ok(Self {
            inner,
            entries: RwLock::new(entries),
            path: Some(path.to_path_buf()),
            file_lock: Mutex::new(()),
        })
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Persist all entries in key order.
    pub fn flush(&self) -> Result<(), EmbedError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let _guard = self.file_lock.lock().expect("cache file lock");
        let mut buf = String::new();
        for ((provider, text), embedding) in self.entries.read().expect("cache lock").iter() {
            let line = CacheLine {
                provider: provider.clone(),
                text: text.clone(),
                embedding: embedding.clone(),
            };
            buf.push_str(
                &serde_json::to_string(&line).map_err(|e| EmbedError::Cache(e.to_string()))?,
            );
            buf.push('\n');
        }
        let mut f = fs::File::create(path).map_err(|e| EmbedError::Cache(e.to_string()))?;
        f.write_all(buf.as_bytes())
            .map_err(|e| EmbedError::Cache(e.to_string()))
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedEmbedder<P> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn dimension(&self) -> Option<usize> {
        self.inner.dimension()
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<FeatureVector>, EmbedError> {
        let id = self.inner.id().to_string();
        let mut misses: Vec<String> = {
            let entries = self.entries.read().expect("cache lock");
            texts
                .iter()
                .filter(|t| !entries.contains_key(&(id.clone(), (*t).clone())))
                .cloned()
                .collect()
        };
        misses.sort();
        misses.dedup();
        if !misses.is_empty() {
            let fresh = self.inner.embed_batch(&misses)?;
            let mut entries = self.entries.write().expect("cache lock");
            for (t, v) in misses.into_iter().zip(fresh) {
                entries.insert((id.clone(), t), v.values().to_vec());
            }
        }
        let entries = self.entries.read().expect("cache lock");
        texts
            .iter()
            .map(|t| {
                if t.is_empty() {
                    return Err(EmbedError::EmptyText);
                }
                let v = entries
                    .get(&(id.clone(), t.clone()))
                    .ok_or_else(|| EmbedError::Cache(format!("entry vanished for {t:?}")))?;
                FeatureVector::new(v.clone(), id.clone())
            })
            .collect()
    }
}
