use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::prompt::{match_option, match_top_k, normalize_response, prompt_body};
use super::provider::{ChatProvider, ChatRequest, RequestContext};
use super::{EvalError, PromptVariant, Stage};
use crate::dataset::{Dataset, Entry, Role};
use crate::stats::{AccuracyEstimate, StatsError};

pub const MIN_ATTEMPTS: u32 = 5;
pub const MAX_ATTEMPTS: u32 = 100;
/// The leading answer must beat every alternative by this many selections.
pub const DOMINANCE_MARGIN: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCall {
    pub stage: Stage,
    pub raw_response: String,
    pub normalized_response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_option: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_set: Option<Vec<usize>>,
}

/// One resample: up to three stage calls at a single rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub rotation_offset: usize,
    pub calls: Vec<StageCall>,
}

impl Attempt {
    pub fn selection(&self) -> Option<Vec<usize>> {
        self.calls.last().and_then(|c| {
            c.matched_set.clone().or_else(|| c.matched_option.map(|i| vec![i]))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionReason {
    Dominance,
    CapReached,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryErrorKind {
    /// The provider failed; the entry is retried when a run is resumed.
    Provider,
    /// No response in any attempt matched an option.
    NoMatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryError {
    pub kind: EntryErrorKind,
    pub message: String,
}

/// Full trace of evaluating one entry once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub entry_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
    pub repeat: u32,
    pub model_id: String,
    pub temperature: f64,
    pub variant_key: String,
    pub attempts: Vec<Attempt>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_option: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_set: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_reason: Option<SelectionReason>,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<EntryError>,
}

impl EvalRecord {
    pub fn is_errored(&self) -> bool {
        self.error.is_some()
    }

    /// Whether a resumed run may keep this record.
    pub fn is_final(&self) -> bool {
        !matches!(&self.error, Some(e) if e.kind == EntryErrorKind::Provider)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub temperature: f64,
    pub max_tokens: u32,
    pub repeats: u32,
    pub parallelism: usize,
    pub seed: u64,
    pub role: Option<Role>,
    /// JSONL file of records; existing final records are reused.
    pub records_path: Option<PathBuf>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            temperature: 0.5,
            max_tokens: 64,
            repeats: 1,
            parallelism: 4,
            seed: 0,
            role: None,
            records_path: None,
        }
    }
}

#[derive(Default)]
struct Tally {
    counts: HashMap<Vec<usize>, (u32, u32)>,
}

impl Tally {
    fn add(&mut self, key: Vec<usize>, attempt: u32) {
        let slot = self.counts.entry(key).or_insert((0, 0));
        slot.0 += 1;
        slot.1 = attempt;
    }

    fn dominant(&self) -> Option<&Vec<usize>> {
        let mut top: Option<(&Vec<usize>, u32)> = None;
        let mut second = 0;
        for (k, &(c, _)) in &self.counts {
            match top {
                Some((_, t)) if c <= t => second = second.max(c),
                _ => {
                    if let Some((_, t)) = top {
                        second = second.max(t);
                    }
                    top = Some((k, c));
                }
            }
        }
        top.filter(|&(_, t)| t >= second + DOMINANCE_MARGIN).map(|(k, _)| k)
    }

    /// Among the most selected keys, the one whose final selection came first,
    /// i.e. the first to reach the final maximum.
    fn first_top(&self) -> Option<&Vec<usize>> {
        let max = self.counts.values().map(|v| v.0).max()?;
        self.counts
            .iter()
            .filter(|(_, v)| v.0 == max)
            .min_by_key(|(_, v)| v.1)
            .map(|(k, _)| k)
    }
}

/// Runs the staged, rotating, resample-to-dominance protocol on one entry.
pub fn evaluate_entry(
    entry: &Entry,
    provider: &dyn ChatProvider,
    variant: &PromptVariant,
    opts: &EvalOptions,
    repeat: u32,
) -> Result<EvalRecord, EvalError> {
    variant.validate_for(entry)?;
    let n = entry.options.len();
    let k = variant.k_set();
    let stages: &[Stage] = match k {
        Some(_) => &[Stage::NumericIndex, Stage::LetterIndex],
        None => &[Stage::Literal, Stage::NumericIndex, Stage::LetterIndex],
    };
    let mut record = EvalRecord {
        entry_id: entry.id.clone(),
        role: opts.role,
        repeat,
        model_id: provider.model_id().to_string(),
        temperature: opts.temperature,
        variant_key: variant.key(),
        attempts: Vec::new(),
        selected_option: None,
        selected_set: None,
        selection_reason: None,
        correct: false,
        error: None,
    };
    let mut tally = Tally::default();
    let mut decided: Option<(Vec<usize>, SelectionReason)> = None;

    for attempt in 0..MAX_ATTEMPTS {
        let offset = attempt as usize % n;
        let mut calls = Vec::new();
        for &stage in stages {
            let request = ChatRequest {
                body: prompt_body(entry, stage, offset, variant),
                temperature: opts.temperature,
                max_tokens: opts.max_tokens,
                context: RequestContext {
                    entry_id: entry.id.clone(),
                    repeat,
                    attempt,
                    stage,
                    rotation_offset: offset,
                    top_k: k,
                },
            };
            let raw = match provider.complete(&request) {
                Ok(raw) => raw,
                Err(e) => {
                    record.attempts.push(Attempt { rotation_offset: offset, calls });
                    record.error = Some(EntryError { kind: EntryErrorKind::Provider, message: e.to_string() });
                    return Ok(record);
                }
            };
            let normalized = normalize_response(&raw);
            let (matched_option, matched_set) = match k {
                Some(k) => (None, match_top_k(&normalized, entry, stage, offset, k)),
                None => (match_option(&normalized, entry, stage, offset), None),
            };
            let hit = matched_option.is_some() || matched_set.is_some();
            calls.push(StageCall { stage, raw_response: raw, normalized_response: normalized, matched_option, matched_set });
            if hit {
                break;
            }
        }
        let attempt_rec = Attempt { rotation_offset: offset, calls };
        if let Some(sel) = attempt_rec.selection() {
            tally.add(sel, attempt);
        }
        record.attempts.push(attempt_rec);
        if attempt + 1 >= MIN_ATTEMPTS {
            if let Some(d) = tally.dominant() {
                decided = Some((d.clone(), SelectionReason::Dominance));
                break;
            }
        }
    }
    if decided.is_none() {
        decided = tally.first_top().map(|k| (k.clone(), SelectionReason::CapReached));
    }
    match decided {
        Some((sel, reason)) => {
            record.correct = sel.contains(&entry.correct_index);
            if k.is_some() {
                record.selected_set = Some(sel);
            } else {
                record.selected_option = Some(sel[0]);
            }
            record.selection_reason = Some(reason);
        }
        None => {
            record.error = Some(EntryError {
                kind: EntryErrorKind::NoMatch,
                message: format!("no response matched an option in {MAX_ATTEMPTS} attempts"),
            });
        }
    }
    Ok(record)
}

/// Aggregate over all records of one model on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub model_id: String,
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
    pub variant_key: String,
    pub temperature: f64,
    pub run_seed: u64,
    pub repeats: u32,
    /// Pooled over every non-errored record of every repeat.
    pub accuracy: AccuracyEstimate,
    pub per_repeat_accuracy: Vec<f64>,
    /// Sample standard deviation of the per-repeat accuracies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical_sigma: Option<f64>,
    pub errored: u64,
    /// Entries with at least one scored record.
    pub entries_scored: u64,
    /// Sum over entries of the fraction of repeats answered correctly.
    pub entry_score_sum: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records_path: Option<String>,
}

impl EvalSummary {
    pub fn from_records(
        dataset: &str,
        variant_key: &str,
        opts: &EvalOptions,
        model_id: &str,
        records: &[EvalRecord],
    ) -> Result<Self, EvalError> {
        let scored: Vec<&EvalRecord> = records.iter().filter(|r| !r.is_errored()).collect();
        let correct = scored.iter().filter(|r| r.correct).count() as u64;
        let accuracy = AccuracyEstimate::new(correct, scored.len() as u64).map_err(|e| match e {
            StatsError::Insufficient(_) => {
                StatsError::Insufficient(format!("every entry of {dataset} errored for {model_id}"))
            }
            other => other,
        })?;
        let repeats = opts.repeats.max(1);
        let per_repeat_accuracy: Vec<f64> = (0..repeats)
            .map(|r| {
                let rs: Vec<_> = scored.iter().filter(|x| x.repeat == r).collect();
                if rs.is_empty() {
                    0.0
                } else {
                    rs.iter().filter(|x| x.correct).count() as f64 / rs.len() as f64
                }
            })
            .collect();
        let empirical_sigma = (repeats > 1).then(|| {
            let m = per_repeat_accuracy.iter().sum::<f64>() / repeats as f64;
            let ss: f64 = per_repeat_accuracy.iter().map(|a| (a - m).powi(2)).sum();
            (ss / (repeats - 1) as f64).sqrt()
        });
        let mut per_entry: BTreeMap<&str, (u32, u32)> = BTreeMap::new();
        for r in &scored {
            let slot = per_entry.entry(&r.entry_id).or_default();
            slot.0 += r.correct as u32;
            slot.1 += 1;
        }
        Ok(EvalSummary {
            model_id: model_id.to_string(),
            dataset: dataset.to_string(),
            role: opts.role,
            variant_key: variant_key.to_string(),
            temperature: opts.temperature,
            run_seed: opts.seed,
            repeats,
            accuracy,
            per_repeat_accuracy,
            empirical_sigma,
            errored: records.iter().filter(|r| r.is_errored()).count() as u64,
            entries_scored: per_entry.len() as u64,
            entry_score_sum: per_entry.values().map(|&(c, t)| c as f64 / t as f64).sum(),
            records_path: None,
        })
    }

    /// One observation per entry (repeats averaged), as used by the
    /// difficulty test and the inflation report.
    pub fn per_entry_estimate(&self) -> Result<AccuracyEstimate, StatsError> {
        let correct = self.entry_score_sum.round() as u64;
        AccuracyEstimate::new(correct.min(self.entries_scored), self.entries_scored)
    }
}

fn record_order(a: &EvalRecord, b: &EvalRecord, pos: &HashMap<&str, usize>) -> std::cmp::Ordering {
    let pa = pos.get(a.entry_id.as_str()).copied().unwrap_or(usize::MAX);
    let pb = pos.get(b.entry_id.as_str()).copied().unwrap_or(usize::MAX);
    (a.repeat, pa, &a.entry_id).cmp(&(b.repeat, pb, &b.entry_id))
}

/// Reads records JSONL, ignoring a truncated final line.
pub fn read_records(path: &Path) -> Result<Vec<EvalRecord>, EvalError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| EvalError::Io { path: path.display().to_string(), source })?;
    parse_records(&text, &path.display().to_string())
}

pub fn parse_records(text: &str, origin: &str) -> Result<Vec<EvalRecord>, EvalError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() && !text.ends_with('\n') => break,
            Err(e) => {
                return Err(EvalError::Parse { path: origin.to_string(), line: i + 1, message: e.to_string() })
            }
        }
    }
    Ok(out)
}

pub fn write_records(path: &Path, records: &[EvalRecord]) -> Result<(), EvalError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| EvalError::Io { path: path.display().to_string(), source })
}

/// Evaluates every entry `opts.repeats` times. Entries run in parallel; the
/// attempts of one entry are sequential. With `records_path` set, final
/// records already on disk are reused and new ones are appended as they
/// finish, so an interrupted run can be resumed.
pub fn evaluate_dataset(
    ds: &Dataset,
    provider: &dyn ChatProvider,
    variant: &PromptVariant,
    opts: &EvalOptions,
) -> Result<(EvalSummary, Vec<EvalRecord>), EvalError> {
    if opts.repeats == 0 {
        return Err(EvalError::Variant("repeats must be at least 1".into()));
    }
    for e in &ds.entries {
        variant.validate_for(e)?;
    }
    let model_id = provider.model_id().to_string();
    let variant_key = variant.key();
    let ids: HashSet<&str> = ds.entries.iter().map(|e| e.id.as_str()).collect();

    let mut done: HashMap<(String, u32), EvalRecord> = HashMap::new();
    if let Some(path) = opts.records_path.as_deref().filter(|p| p.exists()) {
        let existing = read_records(path)?;
        // drop any torn final line before appending
        write_records(path, &existing)?;
        for r in existing {
            let reusable = r.is_final()
                && r.model_id == model_id
                && r.variant_key == variant_key
                && r.temperature == opts.temperature
                && r.repeat < opts.repeats
                && ids.contains(r.entry_id.as_str());
            if reusable {
                done.insert((r.entry_id.clone(), r.repeat), r);
            }
        }
    }
    let sink = match &opts.records_path {
        Some(path) => Some(Mutex::new(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|source| EvalError::Io { path: path.display().to_string(), source })?,
        )),
        None => None,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.parallelism.max(1))
        .build()
        .map_err(|e| EvalError::Response(e.to_string()))?;
    let mut records: Vec<EvalRecord> = Vec::with_capacity(ds.len() * opts.repeats as usize);
    for repeat in 0..opts.repeats {
        let todo: Vec<&Entry> = ds
            .entries
            .iter()
            .filter(|e| !done.contains_key(&(e.id.clone(), repeat)))
            .collect();
        let fresh: Vec<EvalRecord> = pool.install(|| {
            todo.par_iter()
                .map(|e| {
                    let r = evaluate_entry(e, provider, variant, opts, repeat)?;
                    if let Some(sink) = &sink {
                        let line = serde_json::to_string(&r).expect("record serializes");
                        let mut f = sink.lock().unwrap_or_else(|p| p.into_inner());
                        writeln!(f, "{line}").and_then(|_| f.flush()).map_err(|source| EvalError::Io {
                            path: opts.records_path.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
                            source,
                        })?;
                    }
                    Ok(r)
                })
                .collect::<Result<Vec<_>, EvalError>>()
        })?;
        records.extend(fresh);
    }
    records.extend(done.into_values());
    let pos: HashMap<&str, usize> = ds.entries.iter().enumerate().map(|(i, e)| (e.id.as_str(), i)).collect();
    records.sort_by(|a, b| record_order(a, b, &pos));

    let mut summary = EvalSummary::from_records(&ds.name, &variant_key, opts, &model_id, &records)?;
    if let Some(path) = &opts.records_path {
        drop(sink);
        write_records(path, &records)?;
        summary.records_path = path.file_name().map(|n| n.to_string_lossy().into_owned());
    }
    let errored = summary.errored;
    if errored > 0 {
        log::warn!("{errored} of {} evaluations of {} errored and were excluded", records.len(), ds.name);
    }
    Ok((summary, records))
}
