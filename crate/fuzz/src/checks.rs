//! One function per parser or decoder. Each must return without panicking on
//! any input, and inputs that parse must survive a write-and-reparse round trip.
//!
//! Also compiled into the CLI crate's `fuzz_corpus` test, which replays the
//! checked-in corpus seeds on stable Rust.

use retroholdout::dataset::Dataset;
use retroholdout::embedding::{parse_embedding_response, EmbeddingCache};
use retroholdout::eval::{parse_chat_response, parse_records, parse_transcript};
use retroholdout::inflation::{render_report, rows_from_csv, rows_from_json, ReportFormat};
use retroholdout::manifest::RunManifest;
use retroholdout::suite::{parse_responses_csv, responses_to_csv};
use retroholdout_cli::RunConfig;

/// Target name and check, in the order of `fuzz_targets/`.
pub const TARGETS: &[(&str, fn(&[u8]))] = &[
    ("dataset_jsonl", dataset_jsonl),
    ("dataset_csv", dataset_csv),
    ("embedding_cache", embedding_cache),
    ("embedding_response", embedding_response),
    ("chat_response", chat_response),
    ("eval_records", eval_records),
    ("transcript", transcript),
    ("survey_responses", survey_responses),
    ("run_config", run_config),
    ("run_manifest", run_manifest),
    ("inflation_json", inflation_json),
    ("inflation_csv", inflation_csv),
];

fn text(data: &[u8]) -> Option<&str> {
    std::str::from_utf8(data).ok()
}

pub fn dataset_jsonl(data: &[u8]) {
    let Some(t) = text(data) else { return };
    if let Ok(ds) = Dataset::from_jsonl_str("fuzz", t) {
        let again = Dataset::from_jsonl_str("fuzz", &ds.to_jsonl()).expect("written JSONL parses");
        assert_eq!(ds.entries, again.entries);
    }
}

pub fn dataset_csv(data: &[u8]) {
    if let Ok(ds) = Dataset::from_csv_reader("fuzz", data) {
        let again = Dataset::from_jsonl_str("fuzz", &ds.to_jsonl()).expect("written JSONL parses");
        assert_eq!(ds.entries, again.entries);
    }
}

pub fn embedding_cache(data: &[u8]) {
    if let Some(t) = text(data) {
        let _ = EmbeddingCache::from_jsonl_str(t);
    }
}

pub fn embedding_response(data: &[u8]) {
    if let Ok(v) = serde_json::from_slice(data) {
        if let Ok(rows) = parse_embedding_response(&v) {
            assert!(rows.iter().flatten().all(|x| x.is_finite()));
        }
    }
}

pub fn chat_response(data: &[u8]) {
    if let Ok(v) = serde_json::from_slice(data) {
        let _ = parse_chat_response(&v);
    }
}

pub fn eval_records(data: &[u8]) {
    let Some(t) = text(data) else { return };
    if let Ok(records) = parse_records(t, "fuzz") {
        let written: String = records.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
        assert_eq!(parse_records(&written, "fuzz").expect("written records parse"), records);
    }
}

pub fn transcript(data: &[u8]) {
    if let Some(t) = text(data) {
        let _ = parse_transcript(t, "fuzz");
    }
}

pub fn survey_responses(data: &[u8]) {
    let Some(t) = text(data) else { return };
    if let Ok(rows) = parse_responses_csv(t) {
        assert_eq!(parse_responses_csv(&responses_to_csv(&rows)).expect("written CSV parses"), rows);
    }
}

pub fn run_config(data: &[u8]) {
    if let Some(t) = text(data) {
        let _ = RunConfig::from_toml(t);
    }
}

pub fn run_manifest(data: &[u8]) {
    let Some(t) = text(data) else { return };
    if let Ok(m) = RunManifest::from_json(t) {
        assert_eq!(RunManifest::from_json(&m.to_json()).expect("written manifest parses"), m);
    }
}

pub fn inflation_json(data: &[u8]) {
    if let Some(t) = text(data) {
        let _ = rows_from_json(t);
    }
}

pub fn inflation_csv(data: &[u8]) {
    let Some(t) = text(data) else { return };
    if let Ok(rows) = rows_from_csv(t) {
        if let Ok(csv) = render_report(&rows, ReportFormat::Csv) {
            assert_eq!(rows_from_csv(&csv).expect("written CSV parses").len(), rows.len());
        }
    }
}
