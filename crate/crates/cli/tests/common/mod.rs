//! Fixtures shared by the CLI integration tests.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use retroholdout::embedding::HashingEmbedder;
use retroholdout::synth::{synthetic_dataset, SynthSpec};
use serde_json::{json, Value};

pub fn cli(args: &[&str]) -> i32 {
    retroholdout_cli::run(std::iter::once("retroholdout").chain(args.iter().copied()))
}

/// Runs `args` against `config`, writing under the config's directory.
pub fn cli_with(config: &Path, args: &[&str]) -> i32 {
    let c = config.to_str().unwrap();
    let mut all = vec!["--config", c];
    all.extend_from_slice(args);
    cli(&all)
}

/// Two synthetic datasets written as JSONL: `same_topic` draws both from one
/// vocabulary, otherwise the vocabularies are disjoint.
pub fn write_pair(dir: &Path, n_target: usize, n_retro: usize, same_topic: bool, seed: u64) -> (PathBuf, PathBuf) {
    let retro_spec = if same_topic { SynthSpec::default() } else { SynthSpec::topic(5_000) };
    let t = synthetic_dataset("target", "t", n_target, &SynthSpec::default(), seed).unwrap();
    let mut r = synthetic_dataset("retro", "r", n_retro, &retro_spec, seed + 1_000).unwrap();
    // keep questions distinct across the pair
    let taken: std::collections::HashSet<&str> = t.entries.iter().map(|e| e.question.as_str()).collect();
    r.entries.retain(|e| !taken.contains(e.question.as_str()));
    let (tp, rp) = (dir.join("target.jsonl"), dir.join("retro.jsonl"));
    t.save_jsonl(&tp).unwrap();
    r.save_jsonl(&rp).unwrap();
    (tp, rp)
}

pub const BASE_CONFIG: &str = r#"
seed = 7
parallelism = 2

[datasets.target]
path = "target.jsonl"
release_date = "2021-09-08"

[datasets.retro]
path = "retro.jsonl"

[embedding]
provider = "hashing"
dim = 128

[suite]
permutation_samples = 2000
classifier = { kind = "logreg", epochs = 200 }
"#;

/// Writes `retroholdout.toml` into `dir`: the base config plus `extra`.
/// Leading keys in `extra` land in the `[suite]` table.
pub fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let p = dir.join("retroholdout.toml");
    std::fs::write(&p, format!("{BASE_CONFIG}\n{extra}")).unwrap();
    p
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Local stand-in for an embeddings endpoint (`/embeddings`) and a chat
/// endpoint (`/chat`). Chat replies are a pure function of the prompt.
pub struct StubServer {
    pub base: String,
    pub hits: Arc<AtomicUsize>,
}

impl StubServer {
    pub fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        std::thread::spawn(move || {
            let embedder = HashingEmbedder::new(32);
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                let _ = reader.read_line(&mut request_line);
                let mut len = 0usize;
                let mut line = String::new();
                loop {
                    line.clear();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        break;
                    }
                    let l = line.trim_end();
                    if l.is_empty() {
                        break;
                    }
                    if let Some((k, v)) = l.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            len = v.trim().parse().unwrap_or(0);
                        }
                    }
                }
                let mut body = vec![0u8; len];
                let _ = reader.read_exact(&mut body);
                counter.fetch_add(1, Ordering::SeqCst);
                let req: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
                let reply = if request_line.contains("/embeddings") {
                    let data: Vec<Value> = req["input"]
                        .as_array()
                        .map(|a| a.iter().enumerate().map(|(i, t)| {
                            json!({"index": i, "embedding": embedder.embed_text(t.as_str().unwrap_or(""))})
                        }).collect())
                        .unwrap_or_default();
                    json!({"data": data})
                } else {
                    let prompt = req["messages"][0]["content"].as_str().unwrap_or("");
                    json!({"choices": [{"message": {"content": chat_reply(prompt)}}]})
                };
                let text = reply.to_string();
                let head = format!(
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                    text.len()
                );
                let _ = stream.write_all(head.as_bytes());
                let _ = stream.write_all(text.as_bytes());
            }
        });
        StubServer { base, hits }
    }
}

/// Picks an index from the prompt's length, so answers vary across entries
/// but never across runs.
fn chat_reply(prompt: &str) -> String {
    format!("{}", 1 + prompt.len() % 2)
}
