use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::EmbeddingError;

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    model_id: String,
    source_hash: String,
    values: Vec<f64>,
}

#[derive(Default)]
struct State {
    vectors: HashMap<(String, String), Vec<f64>>,
    dims: HashMap<String, usize>,
}

/// Append-only JSONL store keyed by `(model_id, sha256(text))`.
///
/// Reads go through a shared lock; writes are serialized through a single
/// file handle.
pub struct EmbeddingCache {
    path: Option<PathBuf>,
    state: RwLock<State>,
    writer: Mutex<Option<BufWriter<File>>>,
}

impl std::fmt::Debug for EmbeddingCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EmbeddingCache")
            .field("path", &self.path)
            .field("len", &self.len())
            .finish()
    }
}

impl EmbeddingCache {
    pub fn in_memory() -> Self {
        EmbeddingCache {
            path: None,
            state: RwLock::new(State::default()),
            writer: Mutex::new(None),
        }
    }

    /// Opens (or creates) the cache file and loads its contents.
    pub fn open(path: &Path) -> Result<Self, EmbeddingError> {
        let err = |message: String| EmbeddingError::Cache {
            path: path.display().to_string(),
            message,
        };
        let state = if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
            Self::parse_state(&text)?
        } else {
            State::default()
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| err(e.to_string()))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| err(e.to_string()))?;
        Ok(EmbeddingCache {
            path: Some(path.to_path_buf()),
            state: RwLock::new(state),
            writer: Mutex::new(Some(BufWriter::new(file))),
        })
    }

    /// Parses cache text without touching the filesystem.
    pub fn from_jsonl_str(text: &str) -> Result<Self, EmbeddingError> {
        Ok(EmbeddingCache {
            path: None,
            state: RwLock::new(Self::parse_state(text)?),
            writer: Mutex::new(None),
        })
    }

    fn parse_state(text: &str) -> Result<State, EmbeddingError> {
        let mut state = State::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: CacheLine =
                serde_json::from_str(line).map_err(|e| EmbeddingError::CacheParse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            Self::admit(&mut state, parsed.model_id, parsed.source_hash, parsed.values)
                .map_err(|e| EmbeddingError::CacheParse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
        }
        Ok(state)
    }

    fn admit(
        state: &mut State,
        model_id: String,
        hash: String,
        values: Vec<f64>,
    ) -> Result<(), EmbeddingError> {
        let expected = *state.dims.entry(model_id.clone()).or_insert(values.len());
        if expected != values.len() {
            return Err(EmbeddingError::DimensionMismatch {
                model_id,
                expected,
                actual: values.len(),
            });
        }
        state.vectors.insert((model_id, hash), values);
        Ok(())
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.state.read().expect("cache lock").vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dimension(&self, model_id: &str) -> Option<usize> {
        self.state.read().expect("cache lock").dims.get(model_id).copied()
    }

    pub fn get(&self, model_id: &str, source_hash: &str) -> Option<Vec<f64>> {
        self.state
            .read()
            .expect("cache lock")
            .vectors
            .get(&(model_id.to_string(), source_hash.to_string()))
            .cloned()
    }

    /// Stores a vector, appending it to the backing file when there is one.
    pub fn insert(&self, model_id: &str, source_hash: &str, values: Vec<f64>) -> Result<(), EmbeddingError> {
        let line = serde_json::to_string(&CacheLine {
            model_id: model_id.to_string(),
            source_hash: source_hash.to_string(),
            values: values.clone(),
        })
        .map_err(|e| EmbeddingError::Response(e.to_string()))?;
        {
            let mut state = self.state.write().expect("cache lock");
            if state.vectors.contains_key(&(model_id.to_string(), source_hash.to_string())) {
                return Ok(());
            }
            Self::admit(&mut state, model_id.to_string(), source_hash.to_string(), values)?;
        }
        let mut writer = self.writer.lock().expect("cache writer");
        if let Some(w) = writer.as_mut() {
            let io = |e: std::io::Error| EmbeddingError::Cache {
                path: self.path.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
                message: e.to_string(),
            };
            w.write_all(line.as_bytes()).map_err(io)?;
            w.write_all(b"\n").map_err(io)?;
            w.flush().map_err(io)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let cache = EmbeddingCache::open(&path).unwrap();
            cache.insert("m", "h1", vec![1.0, 0.5]).unwrap();
            cache.insert("m", "h2", vec![0.25, -1.0]).unwrap();
        }
        let cache = EmbeddingCache::open(&path).unwrap();
        assert_eq!(cache.len(), 2);
        assert_eq!(cache.get("m", "h2"), Some(vec![0.25, -1.0]));
        assert_eq!(cache.get("other", "h2"), None);
        assert_eq!(cache.dimension("m"), Some(2));
    }

    #[test]
    fn rejects_dimension_change() {
        let cache = EmbeddingCache::in_memory();
        cache.insert("m", "a", vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            cache.insert("m", "b", vec![1.0]),
            Err(EmbeddingError::DimensionMismatch { expected: 2, actual: 1, .. })
        ));
        let text = "{\"model_id\":\"m\",\"source_hash\":\"a\",\"values\":[1.0]}\n\
                    {\"model_id\":\"m\",\"source_hash\":\"b\",\"values\":[1.0,2.0]}";
        assert!(matches!(
            EmbeddingCache::from_jsonl_str(text),
            Err(EmbeddingError::CacheParse { line: 2, .. })
        ));
    }
}
