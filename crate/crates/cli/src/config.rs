//! Run configuration: one TOML (or JSON) file, with secrets read from the
//! environment. Relative paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use retroholdout::dataset::{Format, QuestionType};
use retroholdout::eval::ProviderStyle;
use retroholdout::http::RetryPolicy;
use retroholdout::suite::{CalibrationConfig, LogRegConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub release_date: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qtype: Option<String>,
}

impl DatasetConfig {
    pub fn format(&self) -> Result<Format> {
        let f = match &self.format {
            Some(f) => f.clone(),
            None => self.path.extension().and_then(|e| e.to_str()).unwrap_or("jsonl").to_string(),
        };
        Ok(f.parse()?)
    }

    pub fn qtype(&self) -> Result<Option<QuestionType>> {
        self.qtype.as_deref().map(|q| q.parse().map_err(anyhow::Error::msg)).transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Datasets {
    pub target: DatasetConfig,
    pub retro: DatasetConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    /// OpenAI-style `/embeddings` endpoint.
    Http,
    /// Local feature hashing; needs no network.
    #[default]
    Hashing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    #[serde(default)]
    pub provider: EmbeddingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Name of the environment variable holding the API key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_cache")]
    pub cache: PathBuf,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
}

fn default_cache() -> PathBuf {
    PathBuf::from("cache/embeddings.jsonl")
}

fn default_dim() -> usize {
    256
}

fn default_batch() -> usize {
    64
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            provider: EmbeddingKind::Hashing,
            endpoint: None,
            model: None,
            api_key_env: None,
            cache: default_cache(),
            dim: default_dim(),
            batch_size: default_batch(),
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Http,
    /// Deterministic stand-in model, for dry runs and calibration.
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Model name, also sent to the endpoint.
    pub id: String,
    pub provider: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub style: ProviderStyle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub pre_release: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_cutoff: Option<NaiveDate>,
    #[serde(default = "default_skill")]
    pub skill: f64,
    #[serde(default)]
    pub retry: RetryPolicy,
}

fn default_skill() -> f64 {
    0.6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "one")]
    pub repeats: u32,
    /// `standard`, `top_k`, `five_shot` or `helpful`.
    #[serde(default = "default_variant")]
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// JSONL dataset whose first five entries serve as worked examples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preamble: Option<String>,
}

fn default_temperature() -> f64 {
    0.5
}

fn default_max_tokens() -> u32 {
    64
}

fn one() -> u32 {
    1
}

fn default_variant() -> String {
    "standard".into()
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            temperature: default_temperature(),
            max_tokens: default_max_tokens(),
            repeats: 1,
            variant: default_variant(),
            k: None,
            shots: None,
            preamble: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ClassifierConfig {
    Logreg {
        #[serde(flatten)]
        config: LogRegConfig,
    },
    Command {
        program: String,
        #[serde(default)]
        args: Vec<String>,
        #[serde(default)]
        send_features: bool,
    },
    Http {
        endpoint: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        api_key_env: Option<String>,
        #[serde(default)]
        send_features: bool,
    },
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig::Logreg { config: LogRegConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_samples")]
    pub permutation_samples: u64,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    /// Survey responses CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_responses: Option<PathBuf>,
    /// Answer keys written by `survey generate`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub survey_keys: Vec<PathBuf>,
    /// Model that takes the survey as an extra annotator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator_model: Option<String>,
    /// Survey form the annotator answers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator_form: Option<PathBuf>,
}

fn default_folds() -> usize {
    5
}

fn default_samples() -> u64 {
    10_000
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            folds: default_folds(),
            permutation_samples: default_samples(),
            classifier: ClassifierConfig::default(),
            human_responses: None,
            survey_keys: Vec::new(),
            annotator_model: None,
            annotator_form: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Never touch the network: embeddings come from the cache, chat replies
    /// from recorded transcripts.
    #[serde(default)]
    pub offline: bool,
    /// Recorded provider exchanges live here, one file per model.
    #[serde(default = "default_transcripts")]
    pub transcripts_dir: PathBuf,
    pub datasets: Datasets,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub models: Vec<ModelConfig>,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub suite: SuiteConfig,
    #[serde(default)]
    pub calibrate: CalibrationConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_parallelism() -> usize {
    4
}

fn default_transcripts() -> PathBuf {
    PathBuf::from("transcripts")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Makes every relative path absolute with respect to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let base = if base.as_os_str().is_empty() { Path::new(".") } else { base };
        let base = std::path::absolute(base).unwrap_or_else(|_| base.to_path_buf());
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        fix(&mut self.transcripts_dir);
        fix(&mut self.datasets.target.path);
        fix(&mut self.datasets.retro.path);
        fix(&mut self.embedding.cache);
        if let Some(p) = self.eval.shots.as_mut() {
            fix(p);
        }
        if let Some(p) = self.suite.human_responses.as_mut() {
            fix(p);
        }
        if let Some(p) = self.suite.annotator_form.as_mut() {
            fix(p);
        }
        self.suite.survey_keys.iter_mut().for_each(fix);
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = std::collections::HashSet::new();
        for m in &self.models {
            if !ids.insert(&m.id) {
                bail!("model {} is configured twice", m.id);
            }
            if m.provider == ModelKind::Http && m.endpoint.is_none() {
                bail!("model {} uses the http provider but has no endpoint", m.id);
            }
        }
        if self.embedding.provider == EmbeddingKind::Http && self.embedding.endpoint.is_none() {
            bail!("the http embedding provider needs an endpoint");
        }
        if let Some(a) = &self.suite.annotator_model {
            if !ids.contains(a) {
                bail!("annotator model {a} is not among the configured models");
            }
        }
        Ok(())
    }

    pub fn model(&self, id: &str) -> Result<&ModelConfig> {
        self.models
            .iter()
            .find(|m| m.id == id)
            .with_context(|| format!("model {id} is not configured"))
    }
}

/// Reads a secret from the named environment variable, if one is configured.
pub fn secret(var: Option<&str>) -> Result<Option<String>> {
    match var {
        None => Ok(None),
        Some(v) => std::env::var(v).map(Some).with_context(|| format!("environment variable {v} is not set")),
    }
}
