//! The multiple-choice evaluation protocol: staged prompts with option
//! rotation, resampling until one answer dominates, and full per-entry traces.

mod harness;
mod prompt;
mod provider;
mod transcript;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{DatasetError, Entry};
use crate::http::HttpError;
use crate::stats::{AccuracyEstimate, StatsError};

pub use harness::{
    evaluate_dataset, evaluate_entry, parse_records, read_records, write_records, EvalOptions, EvalRecord, EvalSummary,
    SelectionReason, StageCall, Attempt, EntryErrorKind, EntryError, MAX_ATTEMPTS, MIN_ATTEMPTS, DOMINANCE_MARGIN,
};
pub use prompt::{
    build_prompt, displayed_order, index_label, match_option, match_top_k, normalize_response, prompt_body,
};
pub use provider::{
    parse_chat_response, ChatProvider, ChatRequest, HttpChatProvider, ProviderStyle, RequestContext, ScriptedProvider,
    SimulatedProvider,
};
pub use transcript::{parse_transcript, RecordingProvider, ReplayProvider, TranscriptLine};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("provider error: {0}")]
    Provider(#[from] HttpError),
    #[error("provider response: {0}")]
    Response(String),
    #[error("no recorded response for request {0}")]
    TranscriptMiss(String),
    /// A failure that was recorded in a transcript, replayed verbatim.
    #[error("{0}")]
    Replayed(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("invalid prompt variant: {0}")]
    Variant(String),
    #[error("mismatched summaries: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Literal,
    NumericIndex,
    LetterIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantMode {
    #[default]
    Standard,
    FiveShot,
    HelpfulPrompt,
    TopK,
}

/// How the question is posed. Five-shot and helpful-preamble decorations may
/// be combined by supplying both fields.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptVariant {
    pub mode: VariantMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shot_entries: Option<Vec<Entry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub helpful_preamble: Option<String>,
}

impl PromptVariant {
    pub fn standard() -> Self {
        PromptVariant::default()
    }

    pub fn top_k(k: usize) -> Self {
        PromptVariant { mode: VariantMode::TopK, k: Some(k), ..Default::default() }
    }

    pub fn five_shot(shots: Vec<Entry>) -> Self {
        PromptVariant { mode: VariantMode::FiveShot, shot_entries: Some(shots), ..Default::default() }
    }

    pub fn helpful(preamble: impl Into<String>) -> Self {
        PromptVariant {
            mode: VariantMode::HelpfulPrompt,
            helpful_preamble: Some(preamble.into()),
            ..Default::default()
        }
    }

    /// Checks the variant's own fields.
    pub fn validate(&self) -> Result<(), EvalError> {
        match self.mode {
            VariantMode::TopK => match self.k {
                Some(k) if k >= 1 => {}
                _ => return Err(EvalError::Variant("top_k needs k >= 1".into())),
            },
            VariantMode::FiveShot => match &self.shot_entries {
                Some(s) if s.len() == 5 => {}
                _ => return Err(EvalError::Variant("five_shot needs exactly 5 shot entries".into())),
            },
            VariantMode::HelpfulPrompt => {
                if self.helpful_preamble.as_deref().is_none_or(|p| p.trim().is_empty()) {
                    return Err(EvalError::Variant("helpful_prompt needs a preamble".into()));
                }
            }
            VariantMode::Standard => {}
        }
        Ok(())
    }

    /// Checks the variant against the entry it will be applied to.
    pub fn validate_for(&self, entry: &Entry) -> Result<(), EvalError> {
        self.validate()?;
        if let (VariantMode::TopK, Some(k)) = (self.mode, self.k) {
            if k >= entry.options.len() {
                return Err(EvalError::Variant(format!(
                    "top_k with k={k} needs more than {k} options, entry {} has {}",
                    entry.id,
                    entry.options.len()
                )));
            }
        }
        if let Some(shots) = &self.shot_entries {
            if shots.iter().any(|s| s.id == entry.id || s.question == entry.question) {
                return Err(EvalError::Variant(format!("entry {} is one of the shot examples", entry.id)));
            }
        }
        Ok(())
    }

    /// Short identifier; two summaries are comparable only if their keys match.
    pub fn key(&self) -> String {
        let mut parts = vec![match self.mode {
            VariantMode::Standard => "standard".to_string(),
            VariantMode::FiveShot => "five_shot".to_string(),
            VariantMode::HelpfulPrompt => "helpful_prompt".to_string(),
            VariantMode::TopK => format!("top_{}", self.k.unwrap_or(0)),
        }];
        if let Some(shots) = &self.shot_entries {
            let mut h = Sha256::new();
            for s in shots {
                h.update(s.id.as_bytes());
                h.update([0]);
            }
            parts.push(format!("shots:{}", &hex::encode(h.finalize())[..8]));
        }
        if let Some(p) = &self.helpful_preamble {
            parts.push(format!("preamble:{}", &hex::encode(Sha256::digest(p.as_bytes()))[..8]));
        }
        parts.join("+")
    }

    pub(crate) fn k_set(&self) -> Option<usize> {
        match self.mode {
            VariantMode::TopK => self.k,
            _ => None,
        }
    }
}

/// Per-model gap between target and retro summaries, checked for comparability.
pub fn paired_estimates(
    target: &EvalSummary,
    retro: &EvalSummary,
) -> Result<(AccuracyEstimate, AccuracyEstimate), EvalError> {
    if target.model_id != retro.model_id {
        return Err(EvalError::Mismatch(format!("models differ: {} vs {}", target.model_id, retro.model_id)));
    }
    if target.variant_key != retro.variant_key {
        return Err(EvalError::Mismatch(format!(
            "prompt variants differ: {} vs {}",
            target.variant_key, retro.variant_key
        )));
    }
    Ok((target.per_entry_estimate()?, retro.per_entry_estimate()?))
}
