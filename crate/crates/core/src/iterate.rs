//! Diagnostics that guide manual iteration on a retro dataset: n-gram
//! frequency differences, internal-similarity histograms, most similar pairs
//! and a 2-D projection of the pooled embeddings.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{canonical_text, Dataset, DatasetPair, Role};
use crate::embedding::{pairwise_similarity, vectors_for, EmbeddingError, EmbeddingMap};
use crate::svg::{Canvas, Scale};

#[derive(Debug, Error)]
pub enum IterateError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("pooled embeddings have zero variance")]
    ZeroVariance,
}

/// Lowercased alphanumeric word tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn ngrams(tokens: &[String], n: usize) -> Vec<String> {
    if tokens.len() < n {
        return Vec::new();
    }
    tokens.windows(n).map(|w| w.join(" ")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramRow {
    pub ngram: String,
    pub total_freq_target: u64,
    pub total_freq_retro: u64,
    pub doc_freq_target: u64,
    pub doc_freq_retro: u64,
    /// Difference of the n-gram's share of all n-grams, target minus retro.
    pub delta_total: f64,
    /// Difference of the fraction of entries containing the n-gram.
    pub delta_doc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramReport {
    pub n: usize,
    pub corpus_total_target: u64,
    pub corpus_total_retro: u64,
    pub rows: Vec<NgramRow>,
}

#[derive(Default)]
struct Counts {
    total: BTreeMap<String, u64>,
    docs: BTreeMap<String, u64>,
    corpus: u64,
}

fn count_ngrams(ds: &Dataset, n: usize) -> Counts {
    let mut c = Counts::default();
    for e in &ds.entries {
        let grams = ngrams(&tokenize(canonical_text(e).as_str()), n);
        c.corpus += grams.len() as u64;
        let mut seen = BTreeSet::new();
        for g in grams {
            if seen.insert(g.clone()) {
                *c.docs.entry(g.clone()).or_default() += 1;
            }
            *c.total.entry(g).or_default() += 1;
        }
    }
    c
}

/// Compares 1- or 2-gram frequencies of the canonical entry texts. Rows with
/// no difference are dropped; the rest are ranked by `|delta_total|`.
pub fn ngram_diff(pair: &DatasetPair, n: usize, top: usize) -> Result<NgramReport, IterateError> {
    ngram_diff_datasets(&pair.target, &pair.retro, n, top)
}

/// [`ngram_diff`] over any two datasets, without the pair's disjointness checks.
pub fn ngram_diff_datasets(target: &Dataset, retro: &Dataset, n: usize, top: usize) -> Result<NgramReport, IterateError> {
    if !(1..=2).contains(&n) {
        return Err(IterateError::Invalid(format!("n must be 1 or 2, got {n}")));
    }
    let t = count_ngrams(target, n);
    let r = count_ngrams(retro, n);
    let share = |count: u64, of: u64| if of == 0 { 0.0 } else { count as f64 / of as f64 };
    let (nt, nr) = (target.len() as u64, retro.len() as u64);

    let keys: BTreeSet<&String> = t.total.keys().chain(r.total.keys()).collect();
    let mut rows: Vec<NgramRow> = keys
        .into_iter()
        .map(|g| {
            let get = |m: &BTreeMap<String, u64>| m.get(g).copied().unwrap_or(0);
            let (tt, tr, dt, dr) = (get(&t.total), get(&r.total), get(&t.docs), get(&r.docs));
            NgramRow {
                ngram: g.clone(),
                total_freq_target: tt,
                total_freq_retro: tr,
                doc_freq_target: dt,
                doc_freq_retro: dr,
                delta_total: share(tt, t.corpus) - share(tr, r.corpus),
                delta_doc: share(dt, nt) - share(dr, nr),
            }
        })
        .filter(|row| row.delta_total.abs() > 1e-15 || row.delta_doc.abs() > 1e-15)
        .collect();
    rows.sort_by(|a, b| {
        b.delta_total
            .abs()
            .total_cmp(&a.delta_total.abs())
            .then_with(|| a.ngram.cmp(&b.ngram))
    });
    rows.truncate(top);
    Ok(NgramReport {
        n,
        corpus_total_target: t.corpus,
        corpus_total_retro: r.corpus,
        rows,
    })
}

impl NgramReport {
    pub fn to_markdown(&self) -> String {
        let mut s = format!("| {}-gram | total target | total retro | docs target | docs retro | delta total | delta docs |\n", self.n);
        s.push_str("|---|---:|---:|---:|---:|---:|---:|\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {:+.5} | {:+.4} |",
                r.ngram.replace('|', "\\|"),
                r.total_freq_target,
                r.total_freq_retro,
                r.doc_freq_target,
                r.doc_freq_retro,
                r.delta_total,
                r.delta_doc
            );
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges spanning [-1, 1].
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Counts scaled so the histogram integrates to 1.
    pub density: Vec<f64>,
    pub mean: f64,
}

fn bin_of(v: f64, bins: usize) -> usize {
    let i = ((v.clamp(-1.0, 1.0) + 1.0) / 2.0 * bins as f64).floor() as usize;
    i.min(bins - 1)
}

/// Density-normalised histogram over [-1, 1] of every internal pair cosine.
pub fn internal_similarity_histogram(
    ds: &Dataset,
    embeddings: &EmbeddingMap,
    bins: usize,
) -> Result<Histogram, IterateError> {
    if bins == 0 {
        return Err(IterateError::Invalid("need at least one bin".into()));
    }
    let vectors = vectors_for(&ds.entries, embeddings)?;
    let matrix = pairwise_similarity(&vectors)?;
    let mut counts = vec![0u64; bins];
    for &v in matrix.values() {
        counts[bin_of(v, bins)] += 1;
    }
    let width = 2.0 / bins as f64;
    let total = matrix.len() as f64;
    Ok(Histogram {
        edges: (0..=bins).map(|i| -1.0 + i as f64 * width).collect(),
        density: counts.iter().map(|&c| c as f64 / (total * width)).collect(),
        counts,
        mean: matrix.mean(),
    })
}

impl Histogram {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_start,bin_end,count,density\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{}", self.edges[i], self.edges[i + 1], c, self.density[i]);
        }
        s
    }

    pub fn to_svg(&self, title: &str) -> String {
        let mut c = Canvas::new(640.0, 400.0, title);
        let top = self.density.iter().cloned().fold(0.0, f64::max);
        let xs = Scale::new((-1.0, 1.0), c.x_range());
        let ys = Scale::new((0.0, top.max(1e-9)), c.y_range());
        for (i, d) in self.density.iter().enumerate() {
            let (x0, x1) = (xs.at(self.edges[i]), xs.at(self.edges[i + 1]));
            let tip = format!("[{:.3}, {:.3}): {}", self.edges[i], self.edges[i + 1], self.counts[i]);
            c.rect(x0, ys.at(0.0), x1 - x0, ys.at(*d) - ys.at(0.0), "bar", &tip);
        }
        c.axes("cosine similarity", "density");
        c.finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarPair {
    pub id_a: String,
    pub id_b: String,
    pub text_a: String,
    pub text_b: String,
    pub cosine: f64,
}

/// The `k` most similar internal pairs, most similar first.
pub fn top_similar_pairs(ds: &Dataset, embeddings: &EmbeddingMap, k: usize) -> Result<Vec<SimilarPair>, IterateError> {
    let vectors = vectors_for(&ds.entries, embeddings)?;
    let matrix = pairwise_similarity(&vectors)?;
    let mut all: Vec<(usize, usize, f64)> = matrix.pairs().collect();
    all.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| (a.0, a.1).cmp(&(b.0, b.1))));
    all.truncate(k);
    Ok(all
        .into_iter()
        .map(|(i, j, v)| SimilarPair {
            id_a: ds.entries[i].id.clone(),
            id_b: ds.entries[j].id.clone(),
            text_a: canonical_text(&ds.entries[i]).into_string(),
            text_b: canonical_text(&ds.entries[j]).into_string(),
            cosine: v,
        })
        .collect())
}

pub fn pairs_to_markdown(pairs: &[SimilarPair]) -> String {
    let cell = |t: &str| t.replace('|', "\\|").replace('\n', "<br>");
    let mut s = String::from("| cosine | entry A | entry B |\n|---:|---|---|\n");
    for p in pairs {
        let _ = writeln!(s, "| {:.6} | {} | {} |", p.cosine, cell(&p.text_a), cell(&p.text_b));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionPoint {
    pub id: String,
    pub role: Role,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub points: Vec<ProjectionPoint>,
    /// Variance captured by each of the two components.
    pub variance: [f64; 2],
}

const PCA_TOL: f64 = 1e-9;
const PCA_MAX_ITER: usize = 1000;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Makes the largest-magnitude component positive so the sign is canonical.
fn fix_sign(v: &mut [f64]) {
    let pivot = v.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Leading principal directions of the rows of `x` (already centred), by power
/// iteration on `X^T X` with Gram-Schmidt deflation.
pub(crate) fn principal_components(x: &[Vec<f64>], k: usize, seed: u64) -> Vec<(Vec<f64>, f64)> {
    let d = x.first().map_or(0, Vec::len);
    let n = x.len().max(1) as f64;
    let mut rng = crate::rng::from_seed(seed);
    let mut found: Vec<(Vec<f64>, f64)> = Vec::new();
    let deflate = |v: &mut Vec<f64>, found: &[(Vec<f64>, f64)]| {
        for (u, _) in found {
            let c = dot(v, u);
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
        }
    };
    for _ in 0..k.min(d) {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
        deflate(&mut v, &found);
        normalize(&mut v);
        for _ in 0..PCA_MAX_ITER {
            let xv: Vec<f64> = x.iter().map(|row| dot(row, &v)).collect();
            let mut next = vec![0.0; d];
            for (row, s) in x.iter().zip(&xv) {
                next.iter_mut().zip(row).for_each(|(a, b)| *a += s * b);
            }
            deflate(&mut next, &found);
            if normalize(&mut next) <= f64::MIN_POSITIVE {
                break;
            }
            fix_sign(&mut next);
            let delta = next.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            v = next;
            if delta < PCA_TOL {
                break;
            }
        }
        fix_sign(&mut v);
        let var = x.iter().map(|row| dot(row, &v).powi(2)).sum::<f64>() / n;
        found.push((v, var));
    }
    found
}

/// Projects the pooled, mean-centred embeddings onto their top two principal
/// components.
pub fn project_2d(pair: &DatasetPair, embeddings: &EmbeddingMap, seed: u64) -> Result<Projection, IterateError> {
    let pooled: Vec<(Role, &crate::dataset::Entry)> = pair.pooled().collect();
    if pooled.len() < 3 {
        return Err(IterateError::Invalid(format!("need at least 3 entries, got {}", pooled.len())));
    }
    let mut rows = Vec::with_capacity(pooled.len());
    for (_, e) in &pooled {
        let v = embeddings.get(&e.id).ok_or_else(|| EmbeddingError::Missing(e.id.clone()))?;
        rows.push(v.values.clone());
    }
    let d = rows[0].len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(IterateError::Invalid("embeddings have inconsistent dimensions".into()));
    }
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    for r in &mut rows {
        r.iter_mut().zip(&mean).for_each(|(a, m)| *a -= m);
    }
    let total_var: f64 = rows.iter().map(|r| dot(r, r)).sum::<f64>() / n;
    if total_var < 1e-18 {
        return Err(IterateError::ZeroVariance);
    }
    let mut pcs = principal_components(&rows, 2, seed);
    while pcs.len() < 2 {
        pcs.push((vec![0.0; d], 0.0));
    }
    let points = pooled
        .iter()
        .zip(&rows)
        .map(|((role, e), r)| ProjectionPoint {
            id: e.id.clone(),
            role: *role,
            x: dot(r, &pcs[0].0),
            y: dot(r, &pcs[1].0),
        })
        .collect();
    Ok(Projection { points, variance: [pcs[0].1, pcs[1].1] })
}

impl Projection {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,role,x,y\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{},{},{}", csv_field(&p.id), p.role, p.x, p.y);
        }
        s
    }

    pub fn to_svg(&self, title: &str) -> String {
        let mut c = Canvas::new(640.0, 480.0, title);
        let span = |f: fn(&ProjectionPoint) -> f64| {
            self.points.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        };
        let xs = Scale::new(span(|p| p.x), c.x_range());
        let ys = Scale::new(span(|p| p.y), c.y_range());
        for p in &self.points {
            let class = match p.role {
                Role::Target => "point target",
                Role::Retro => "point retro",
            };
            c.circle(xs.at(p.x), ys.at(p.y), 3.0, class, &p.id);
        }
        c.axes("PC1", "PC2");
        c.finish()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Raw pooled embeddings as CSV (`id,role,v0,v1,..`) for external projection tools.
pub fn export_embeddings_csv(pair: &DatasetPair, embeddings: &EmbeddingMap) -> Result<String, IterateError> {
    let mut s = String::new();
    let mut header = false;
    for (role, e) in pair.pooled() {
        let v = embeddings.get(&e.id).ok_or_else(|| EmbeddingError::Missing(e.id.clone()))?;
        if !header {
            s.push_str("id,role");
            for i in 0..v.values.len() {
                let _ = write!(s, ",v{i}");
            }
            s.push('\n');
            header = true;
        }
        let _ = write!(s, "{},{}", csv_field(&e.id), role);
        for x in &v.values {
            let _ = write!(s, ",{x}");
        }
        s.push('\n');
    }
    Ok(s)
}
