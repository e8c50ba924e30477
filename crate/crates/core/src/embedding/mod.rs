//! Sentence embeddings of canonical entry texts and cosine similarity over them.

mod cache;
mod provider;

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{canonical_text, Entry};
use crate::http::HttpError;

pub use cache::EmbeddingCache;
pub use provider::{parse_embedding_response, EmbeddingProvider, HashingEmbedder, HttpEmbeddingProvider, OfflineEmbedder};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("provider error: {0}")]
    Provider(#[from] HttpError),
    #[error("provider response: {0}")]
    Response(String),
    #[error("dimension mismatch for {model_id}: expected {expected}, got {actual}")]
    DimensionMismatch {
        model_id: String,
        expected: usize,
        actual: usize,
    },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("embedding for {0} not available offline")]
    Offline(String),
    #[error("cache {path}: {message}")]
    Cache { path: String, message: String },
    #[error("cache line {line}: {message}")]
    CacheParse { line: usize, message: String },
    #[error("missing embedding for entry {0}")]
    Missing(String),
    #[error("embeddings come from different models: {0} and {1}")]
    MixedModels(String, String),
}

/// Dense vector for one entry's canonical text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub model_id: String,
    pub source_hash: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, model_id: impl Into<String>, source_hash: impl Into<String>) -> Self {
        EmbeddingVector {
            values,
            model_id: model_id.into(),
            source_hash: source_hash.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Embeddings keyed by entry id.
pub type EmbeddingMap = BTreeMap<String, EmbeddingVector>;

/// Cosine similarity in double precision, clamped to [-1, 1].
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimensionMismatch {
            model_id: b.model_id.clone(),
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::Degenerate("zero-norm vector".into()));
    }
    Ok(cosine_with_norms(&a.values, &b.values, na, nb))
}

pub(crate) fn cosine_with_norms(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

pub(crate) fn validated_norms(vectors: &[&EmbeddingVector]) -> Result<Vec<f64>, EmbeddingError> {
    let dim = vectors.first().map(|v| v.dim()).unwrap_or(0);
    vectors
        .iter()
        .map(|v| {
            if v.dim() != dim {
                return Err(EmbeddingError::DimensionMismatch {
                    model_id: v.model_id.clone(),
                    expected: dim,
                    actual: v.dim(),
                });
            }
            let n = v.norm();
            if n == 0.0 || !n.is_finite() {
                return Err(EmbeddingError::Degenerate(format!(
                    "vector {} has zero or non-finite norm",
                    v.source_hash
                )));
            }
            Ok(n)
        })
        .collect()
}

/// Upper-triangular pairwise cosine similarities (i < j), row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
    mean: f64,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn offset(&self, i: usize) -> usize {
        // pairs before row i: sum_{r<i} (n - 1 - r)
        i * (2 * self.n - i - 1) / 2
    }

    /// Similarity of `i` and `j`; `None` when `i == j` or out of range.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        if i == j || j >= self.n {
            return None;
        }
        self.values.get(self.offset(i) + (j - i - 1)).copied()
    }

    /// `(i, j, cosine)` for every pair with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| ((i + 1)..self.n).map(move |j| (i, j)))
            .zip(self.values.iter())
            .map(|((i, j), &v)| (i, j, v))
    }
}

pub fn pairwise_similarity(vectors: &[&EmbeddingVector]) -> Result<SimilarityMatrix, EmbeddingError> {
    if vectors.len() < 2 {
        return Err(EmbeddingError::Degenerate(format!(
            "need at least 2 vectors, got {}",
            vectors.len()
        )));
    }
    let norms = validated_norms(vectors)?;
    let n = vectors.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| cosine_with_norms(&vectors[i].values, &vectors[j].values, norms[i], norms[j]))
                .collect()
        })
        .collect();
    let values: Vec<f64> = rows.into_iter().flatten().collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(SimilarityMatrix { n, values, mean })
}

/// Looks up the embedding of every entry, in order.
pub fn vectors_for<'a>(
    entries: &[Entry],
    embeddings: &'a EmbeddingMap,
) -> Result<Vec<&'a EmbeddingVector>, EmbeddingError> {
    entries
        .iter()
        .map(|e| embeddings.get(&e.id).ok_or_else(|| EmbeddingError::Missing(e.id.clone())))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedOptions {
    pub batch_size: usize,
    pub parallelism: usize,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        EmbedOptions {
            batch_size: 64,
            parallelism: 4,
        }
    }
}

/// Embeds the canonical text of every entry, serving cached vectors first and
/// sending only misses to the provider in batches.
pub fn embed_all(
    entries: &[Entry],
    provider: &dyn EmbeddingProvider,
    cache: &EmbeddingCache,
    opts: EmbedOptions,
) -> Result<EmbeddingMap, EmbeddingError> {
    let model_id = provider.model_id().to_string();
    let keyed: Vec<(String, String, String)> = entries
        .iter()
        .map(|e| {
            let text = canonical_text(e);
            (e.id.clone(), text.sha256(), text.into_string())
        })
        .collect();

    let mut misses: Vec<(String, String)> = Vec::new();
    let mut queued = std::collections::HashSet::new();
    for (_, hash, text) in &keyed {
        if cache.get(&model_id, hash).is_none() && queued.insert(hash.clone()) {
            misses.push((hash.clone(), text.clone()));
        }
    }

    if !misses.is_empty() {
        let batch_size = opts.batch_size.max(1);
        let batches: Vec<&[(String, String)]> = misses.chunks(batch_size).collect();
        let run = |batch: &&[(String, String)]| -> Result<(), EmbeddingError> {
            let texts: Vec<String> = batch.iter().map(|(_, t)| t.clone()).collect();
            let vectors = provider.embed_batch(&texts)?;
            if vectors.len() != texts.len() {
                return Err(EmbeddingError::Response(format!(
                    "expected {} vectors, got {}",
                    texts.len(),
                    vectors.len()
                )));
            }
            for ((hash, _), values) in batch.iter().zip(vectors) {
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(EmbeddingError::Response("non-finite component".into()));
                }
                cache.insert(&model_id, hash, values)?;
            }
            Ok(())
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.parallelism.max(1))
            .build()
            .map_err(|e| EmbeddingError::Response(e.to_string()))?;
        pool.install(|| batches.par_iter().try_for_each(run))?;
    }

    let mut out = EmbeddingMap::new();
    let mut by_hash: HashMap<&str, Vec<f64>> = HashMap::new();
    for (id, hash, _) in &keyed {
        let values = match by_hash.get(hash.as_str()) {
            Some(v) => v.clone(),
            None => {
                let v = cache
                    .get(&model_id, hash)
                    .ok_or_else(|| EmbeddingError::Missing(id.clone()))?;
                by_hash.insert(hash, v.clone());
                v
            }
        };
        out.insert(id.clone(), EmbeddingVector::new(values, model_id.clone(), hash.clone()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn v(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec(), "m", "h")
    }

    /// Returns the basis vector e_i for the i-th distinct text it sees.
    struct BasisProvider {
        dim: usize,
        calls: AtomicUsize,
        seen: std::sync::Mutex<Vec<String>>,
    }

    impl EmbeddingProvider for BasisProvider {
        fn model_id(&self) -> &str {
            "basis"
        }

        fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let mut seen = self.seen.lock().unwrap();
            Ok(texts
                .iter()
                .map(|t| {
                    let i = seen.iter().position(|s| s == t).unwrap_or_else(|| {
                        seen.push(t.clone());
                        seen.len() - 1
                    });
                    let mut e = vec![0.0; self.dim];
                    e[i] = 1.0;
                    e
                })
                .collect())
        }
    }

    fn entries(n: usize) -> Vec<Entry> {
        (0..n)
            .map(|i| Entry::new(format!("e{i}"), format!("Question {i}?"), vec!["a".into(), "b".into()], 0).unwrap())
            .collect()
    }

    #[test]
    fn cosine_basics() {
        assert!((cosine(&v(&[1.0, 2.0]), &v(&[1.0, 2.0])).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&v(&[1.0, 0.0]), &v(&[0.0, 3.0])).unwrap(), 0.0);
        assert!(matches!(
            cosine(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])),
            Err(EmbeddingError::Degenerate(_))
        ));
        assert!(cosine(&v(&[1.0]), &v(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn similarity_matrix_matches_pair_loop() {
        let vs = [
            v(&[1.0, 0.0, 0.0]),
            v(&[0.6, 0.8, 0.0]),
            v(&[-1.0, 2.0, 0.5]),
            v(&[0.3, -0.2, 4.0]),
        ];
        let refs: Vec<&EmbeddingVector> = vs.iter().collect();
        let m = pairwise_similarity(&refs).unwrap();
        assert_eq!(m.len(), 6);
        let mut sum = 0.0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                let (a, b) = (&vs[i].values, &vs[j].values);
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                let want = dot / (na * nb);
                assert!((m.get(i, j).unwrap() - want).abs() < 1e-15);
                assert_eq!(m.get(j, i), m.get(i, j));
                sum += want;
            }
        }
        assert!((m.mean() - sum / 6.0).abs() < 1e-15);
        assert_eq!(m.get(2, 2), None);
    }

    #[test]
    fn identical_vectors_have_unit_similarity() {
        let vs = vec![v(&[0.3, 0.4]); 5];
        let refs: Vec<&EmbeddingVector> = vs.iter().collect();
        let m = pairwise_similarity(&refs).unwrap();
        assert!(m.values().iter().all(|&x| (x - 1.0).abs() < 1e-15));
        assert!(pairwise_similarity(&refs[..1]).is_err());
    }

    #[test]
    fn embed_all_uses_provider_then_cache() {
        let provider = BasisProvider { dim: 5, calls: AtomicUsize::new(0), seen: Default::default() };
        let cache = EmbeddingCache::in_memory();
        let es = entries(5);
        let map = embed_all(&es, &provider, &cache, EmbedOptions { batch_size: 2, parallelism: 1 }).unwrap();
        assert_eq!(map.len(), 5);
        assert_eq!(provider.calls.load(Ordering::SeqCst), 3);
        let vs: Vec<&EmbeddingVector> = map.values().collect();
        for i in 0..5 {
            for j in (i + 1)..5 {
                assert_eq!(cosine(vs[i], vs[j]).unwrap(), 0.0);
            }
        }
        let again = embed_all(&es, &provider, &cache, EmbedOptions::default()).unwrap();
        assert_eq!(again, map);
        assert_eq!(provider.calls.load(Ordering::SeqCst), 3);
        let empty = embed_all(&[], &provider, &cache, EmbedOptions::default()).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn cache_key_includes_model() {
        let cache = EmbeddingCache::in_memory();
        let es = entries(2);
        embed_all(&es, &HashingEmbedder::new(8), &cache, EmbedOptions::default()).unwrap();
        let provider = BasisProvider { dim: 4, calls: AtomicUsize::new(0), seen: Default::default() };
        embed_all(&es, &provider, &cache, EmbedOptions::default()).unwrap();
        assert_eq!(provider.calls.load(Ordering::SeqCst), 1);
    }

    proptest! {
        #[test]
        fn cosine_properties(
            a in proptest::collection::vec(-10.0f64..10.0, 4),
            b in proptest::collection::vec(-10.0f64..10.0, 4),
            scale in 0.01f64..100.0,
        ) {
            let (va, vb) = (v(&a), v(&b));
            prop_assume!(va.norm() > 1e-6 && vb.norm() > 1e-6);
            let c = cosine(&va, &vb).unwrap();
            prop_assert!((-1.0..=1.0).contains(&c));
            prop_assert!((c - cosine(&vb, &va).unwrap()).abs() < 1e-12);
            let scaled = v(&a.iter().map(|x| x * scale).collect::<Vec<_>>());
            prop_assert!((c - cosine(&scaled, &vb).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn matrix_mean_matches_brute_force(
            raw in proptest::collection::vec(proptest::collection::vec(0.1f64..1.0, 3), 2..100)
        ) {
            let vs: Vec<EmbeddingVector> = raw.iter().map(|x| v(x)).collect();
            let refs: Vec<&EmbeddingVector> = vs.iter().collect();
            let m = pairwise_similarity(&refs).unwrap();
            let n = vs.len();
            prop_assert_eq!(m.len(), n * (n - 1) / 2);
            let mut sum = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    sum += cosine(&vs[i], &vs[j]).unwrap();
                }
            }
            prop_assert!((m.mean() - sum / m.len() as f64).abs() < 1e-12);
        }
    }
}
