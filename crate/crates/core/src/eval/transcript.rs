use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::provider::{ChatProvider, ChatRequest, RequestContext};
use super::EvalError;

/// One recorded request/response exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub key: String,
    pub model_id: String,
    pub context: RequestContext,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Content key of a request: everything the provider sees plus where in the
/// protocol it was issued.
pub(crate) fn request_key(model_id: &str, request: &ChatRequest) -> String {
    let mut h = Sha256::new();
    h.update(model_id.as_bytes());
    h.update([0]);
    h.update(request.temperature.to_le_bytes());
    h.update(request.max_tokens.to_le_bytes());
    h.update(serde_json::to_vec(&request.context).expect("context serializes"));
    h.update([0]);
    h.update(request.body.as_bytes());
    hex::encode(h.finalize())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io { path: path.display().to_string(), source }
}

/// Passes requests through to another provider and appends every exchange to
/// a JSONL transcript.
pub struct RecordingProvider<P> {
    inner: P,
    path: PathBuf,
    state: Mutex<(File, Vec<TranscriptLine>)>,
}

impl<P: ChatProvider> RecordingProvider<P> {
    pub fn create(inner: P, path: impl Into<PathBuf>) -> Result<Self, EvalError> {
        let path = path.into();
        let existing = if path.exists() { read_transcript(&path)? } else { Vec::new() };
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        Ok(RecordingProvider { inner, path, state: Mutex::new((file, existing)) })
    }

    /// Rewrites the transcript in protocol order and returns the inner provider.
    pub fn finish(self) -> Result<P, EvalError> {
        let (_, mut lines) = self.state.into_inner().unwrap_or_else(|p| p.into_inner());
        lines.sort_by(|a, b| {
            (&a.context.entry_id, a.context.repeat, a.context.attempt, a.context.stage).cmp(&(
                &b.context.entry_id,
                b.context.repeat,
                b.context.attempt,
                b.context.stage,
            ))
        });
        lines.dedup_by(|a, b| a.key == b.key);
        let mut out = String::new();
        for l in &lines {
            out.push_str(&serde_json::to_string(l).expect("transcript serializes"));
            out.push('\n');
        }
        std::fs::write(&self.path, out).map_err(io_err(&self.path))?;
        Ok(self.inner)
    }
}

impl<P: ChatProvider> ChatProvider for RecordingProvider<P> {
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, EvalError> {
        let result = self.inner.complete(request);
        let line = TranscriptLine {
            key: request_key(self.model_id(), request),
            model_id: self.model_id().to_string(),
            context: request.context.clone(),
            body: request.body.clone(),
            response: result.as_ref().ok().cloned(),
            error: result.as_ref().err().map(|e| e.to_string()),
        };
        let mut guard = self.state.lock().unwrap_or_else(|p| p.into_inner());
        let json = serde_json::to_string(&line).expect("transcript serializes");
        writeln!(guard.0, "{json}").and_then(|_| guard.0.flush()).map_err(io_err(&self.path))?;
        guard.1.push(line);
        result
    }
}

pub(crate) fn read_transcript(path: &Path) -> Result<Vec<TranscriptLine>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_transcript(&text, &path.display().to_string())
}

/// Parses transcript JSONL. A truncated final line, as left by an
/// interrupted write, is ignored.
pub fn parse_transcript(text: &str, origin: &str) -> Result<Vec<TranscriptLine>, EvalError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TranscriptLine>(line) {
            Ok(l) => out.push(l),
            Err(_) if i + 1 == lines.len() && !text.ends_with('\n') => break,
            Err(e) => {
                return Err(EvalError::Parse { path: origin.to_string(), line: i + 1, message: e.to_string() })
            }
        }
    }
    Ok(out)
}

/// Serves responses from recorded transcripts; any unrecorded request is an error.
#[derive(Debug, Clone)]
pub struct ReplayProvider {
    model_id: String,
    responses: HashMap<String, Result<String, String>>,
}

impl ReplayProvider {
    pub fn from_lines(model_id: impl Into<String>, lines: impl IntoIterator<Item = TranscriptLine>) -> Self {
        let model_id = model_id.into();
        let responses = lines
            .into_iter()
            .filter(|l| l.model_id == model_id)
            .map(|l| {
                let r = match (l.response, l.error) {
                    (Some(r), _) => Ok(r),
                    (None, Some(e)) => Err(e),
                    (None, None) => Err("empty transcript line".to_string()),
                };
                (l.key, r)
            })
            .collect();
        ReplayProvider { model_id, responses }
    }

    pub fn open(model_id: impl Into<String>, path: &Path) -> Result<Self, EvalError> {
        Ok(Self::from_lines(model_id, read_transcript(path)?))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ChatProvider for ReplayProvider {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, EvalError> {
        let key = request_key(&self.model_id, request);
        match self.responses.get(&key) {
            Some(Ok(r)) => Ok(r.clone()),
            Some(Err(e)) => Err(EvalError::Replayed(e.clone())),
            None => Err(EvalError::TranscriptMiss(format!(
                "{} repeat {} attempt {} {:?}",
                request.context.entry_id, request.context.repeat, request.context.attempt, request.context.stage
            ))),
        }
    }
}
