//! Synthetic multiple-choice datasets for calibration and power studies.
//!
//! Texts are bags of pseudo-words drawn from a numbered vocabulary, so two
//! datasets are identically distributed when they share a vocabulary range
//! and clearly separable when their ranges are disjoint.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dataset::{canonical_text, Dataset, DatasetError, DatasetPair, Entry};
use crate::embedding::{EmbeddingMap, EmbeddingProvider, EmbeddingVector, HashingEmbedder};

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ne", "ru", "sa", "ti", "vo", "ze", "pa", "qui", "do", "fe", "gu", "ha", "jo",
];

/// The `i`-th pseudo-word; distinct for distinct `i`.
pub fn word(i: usize) -> String {
    let mut n = i + 16;
    let mut parts = Vec::new();
    while n > 0 {
        parts.push(SYLLABLES[n % 16]);
        n /= 16;
    }
    parts.concat()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    /// First vocabulary index used.
    pub vocab_offset: usize,
    pub vocab_size: usize,
    pub question_words: (usize, usize),
    pub option_words: (usize, usize),
    pub n_options: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            vocab_offset: 0,
            vocab_size: 400,
            question_words: (6, 12),
            option_words: (1, 4),
            n_options: 4,
        }
    }
}

impl SynthSpec {
    pub fn topic(offset: usize) -> Self {
        SynthSpec { vocab_offset: offset, ..Default::default() }
    }

    fn draw_word<R: Rng>(&self, rng: &mut R) -> String {
        // Zipf-like skew: squaring a uniform favours low indices
        let u: f64 = rng.random();
        word(self.vocab_offset + ((u * u) * self.vocab_size as f64) as usize)
    }

    fn phrase<R: Rng>(&self, rng: &mut R, (lo, hi): (usize, usize)) -> String {
        let n = rng.random_range(lo..=hi);
        (0..n).map(|_| self.draw_word(rng)).collect::<Vec<_>>().join(" ")
    }
}

/// `n` entries with ids `{prefix}{i}`, deterministic in `seed`.
pub fn synthetic_dataset(name: &str, id_prefix: &str, n: usize, spec: &SynthSpec, seed: u64) -> Result<Dataset, DatasetError> {
    let mut rng = crate::rng::from_seed(seed);
    let mut seen = HashSet::new();
    let mut entries = Vec::with_capacity(n);
    while entries.len() < n {
        let question = format!("{}?", capitalize(&spec.phrase(&mut rng, spec.question_words)));
        if !seen.insert(question.clone()) {
            continue;
        }
        let mut options: Vec<String> = Vec::with_capacity(spec.n_options);
        while options.len() < spec.n_options {
            let o = spec.phrase(&mut rng, spec.option_words);
            if !options.iter().any(|x| x.eq_ignore_ascii_case(&o)) {
                options.push(o);
            }
        }
        let correct = rng.random_range(0..spec.n_options);
        entries.push(Entry::new(format!("{id_prefix}{}", entries.len()), question, options, correct)?);
    }
    Dataset::new(name, entries)
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

/// Splits one dataset at random into a pseudo target of `n_target` entries and
/// a pseudo retro of the rest.
pub fn pseudo_split(ds: &Dataset, n_target: usize, seed: u64) -> Result<DatasetPair, DatasetError> {
    if n_target == 0 || n_target >= ds.len() {
        return Err(DatasetError::Capacity { requested: n_target, available: ds.len() });
    }
    let mut entries = ds.entries.clone();
    entries.shuffle(&mut crate::rng::from_seed(seed));
    let retro = entries.split_off(n_target);
    DatasetPair::new(
        Dataset::new(format!("{}-pseudo-target", ds.name), entries)?,
        Dataset::new(format!("{}-pseudo-retro", ds.name), retro)?,
    )
}

/// Feature-hashing embeddings of every entry's canonical text. Offline and
/// cheap, so calibration studies can run thousands of pairs.
pub fn hash_embeddings<'a>(entries: impl IntoIterator<Item = &'a Entry>, dim: usize) -> EmbeddingMap {
    let h = HashingEmbedder::new(dim);
    entries
        .into_iter()
        .map(|e| {
            let t = canonical_text(e);
            (e.id.clone(), EmbeddingVector::new(h.embed_text(t.as_str()), h.model_id(), t.sha256()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_are_distinct() {
        let w: HashSet<String> = (0..5000).map(word).collect();
        assert_eq!(w.len(), 5000);
    }

    #[test]
    fn datasets_are_deterministic_and_valid() {
        let a = synthetic_dataset("s", "s", 50, &SynthSpec::default(), 3).unwrap();
        let b = synthetic_dataset("s", "s", 50, &SynthSpec::default(), 3).unwrap();
        assert_eq!(a, b);
        assert!(a.entries.iter().all(|e| e.validate().is_ok() && e.options.len() == 4));
    }

    #[test]
    fn split_partitions_entries() {
        let d = synthetic_dataset("s", "s", 40, &SynthSpec::default(), 1).unwrap();
        let p = pseudo_split(&d, 25, 9).unwrap();
        assert_eq!((p.n_target(), p.n_retro()), (25, 15));
        assert!(pseudo_split(&d, 40, 9).is_err());
    }
}
