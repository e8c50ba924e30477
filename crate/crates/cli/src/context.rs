//! What every command shares: the resolved configuration, seeds, providers
//! and the output directory with its run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _, Result};
use retroholdout::dataset::{filter, load_dataset, Dataset, DatasetPair, Entry, Role};
use retroholdout::embedding::{
    embed_all, EmbedOptions, EmbeddingCache, EmbeddingMap, EmbeddingProvider, HashingEmbedder, HttpEmbeddingProvider,
    OfflineEmbedder,
};
use retroholdout::eval::{ChatProvider, HttpChatProvider, RecordingProvider, ReplayProvider, SimulatedProvider};
use retroholdout::manifest::{FileDigest, RunManifest};
use retroholdout::rng::derive_seed;
use serde_json::Value;

use crate::config::{secret, DatasetConfig, EmbeddingKind, ModelKind, RunConfig};
use crate::GlobalArgs;

pub const DEFAULT_CONFIG: &str = "retroholdout.toml";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone)]
pub struct Context {
    config: Option<RunConfig>,
    pub config_path: Option<PathBuf>,
    pub seed: u64,
    pub out_root: PathBuf,
    /// Where outputs of earlier commands are read from.
    pub inputs_root: PathBuf,
    pub parallelism: usize,
    pub offline: bool,
    pub argv: Vec<String>,
}

impl Context {
    pub fn new(global: &GlobalArgs, argv: Vec<String>) -> Result<Self> {
        let config_path = match &global.config {
            Some(p) => Some(p.clone()),
            None => Some(PathBuf::from(DEFAULT_CONFIG)).filter(|p| p.exists()),
        };
        let config = config_path.as_deref().map(RunConfig::load).transpose()?;
        let base = config.as_ref();
        let out_root = global
            .out
            .clone()
            .or_else(|| base.map(|c| c.out_dir.clone()))
            .unwrap_or_else(|| PathBuf::from("out"));
        let out_root = std::path::absolute(&out_root).unwrap_or(out_root);
        let inputs_root = match &global.inputs_root {
            Some(p) => std::path::absolute(p)?,
            None => out_root.clone(),
        };
        Ok(Context {
            seed: global.seed.or(base.map(|c| c.seed)).unwrap_or(0),
            parallelism: global.parallelism.or(base.map(|c| c.parallelism)).unwrap_or(4).max(1),
            offline: global.offline || base.is_some_and(|c| c.offline),
            out_root,
            inputs_root,
            config_path: config_path.map(|p| std::path::absolute(&p).unwrap_or(p)),
            config,
            argv,
        })
    }

    pub fn config(&self) -> Result<&RunConfig> {
        self.config
            .as_ref()
            .ok_or_else(|| anyhow!("this command needs a configuration file (--config, or ./{DEFAULT_CONFIG})"))
    }

    pub fn has_config(&self) -> bool {
        self.config.is_some()
    }

    /// Child seed for one stochastic step.
    pub fn derive(&self, label: &str) -> u64 {
        derive_seed(self.seed, label)
    }

    pub fn dataset(&self, role: Role, run: &mut RunOutput) -> Result<Dataset> {
        let cfg = self.config()?;
        let dc = match role {
            Role::Target => &cfg.datasets.target,
            Role::Retro => &cfg.datasets.retro,
        };
        run.input(&dc.path)?;
        load_configured(dc)
    }

    pub fn pair(&self, run: &mut RunOutput) -> Result<DatasetPair> {
        let target = self.dataset(Role::Target, run)?;
        let retro = self.dataset(Role::Retro, run)?;
        Ok(DatasetPair::new(target, retro)?)
    }

    fn embedder(&self) -> Result<Box<dyn EmbeddingProvider>> {
        let ec = &self.config()?.embedding;
        Ok(match ec.provider {
            EmbeddingKind::Hashing => Box::new(HashingEmbedder::new(ec.dim)),
            EmbeddingKind::Http => {
                let model = ec.model.clone().context("the http embedding provider needs a model name")?;
                if self.offline {
                    Box::new(OfflineEmbedder::new(model))
                } else {
                    let endpoint = ec.endpoint.clone().context("embedding endpoint")?;
                    Box::new(HttpEmbeddingProvider::new(endpoint, model, secret(ec.api_key_env.as_deref())?, ec.retry))
                }
            }
        })
    }

    /// Embeddings of `entries`, served from the cache where possible.
    pub fn embeddings<'a>(&self, entries: impl IntoIterator<Item = &'a Entry>, run: &mut RunOutput) -> Result<EmbeddingMap> {
        let ec = &self.config()?.embedding;
        let entries: Vec<Entry> = entries.into_iter().cloned().collect();
        let cache = EmbeddingCache::open(&ec.cache)?;
        let provider = self.embedder()?;
        let opts = EmbedOptions { batch_size: ec.batch_size, parallelism: self.parallelism };
        let map = embed_all(&entries, provider.as_ref(), &cache, opts)
            .with_context(|| format!("embedding with {}", provider.model_id()))?;
        drop(cache);
        run.input(&ec.cache)?;
        Ok(map)
    }

    pub fn transcript_path(&self, model_id: &str) -> Result<PathBuf> {
        Ok(self.config()?.transcripts_dir.join(format!("{}.jsonl", file_safe(model_id))))
    }

    /// Chat provider for a configured model. `entries` are what a simulated
    /// model may be asked about.
    pub fn chat_provider<'a>(
        &self,
        model_id: &str,
        entries: impl IntoIterator<Item = &'a Entry>,
        run: &mut RunOutput,
    ) -> Result<ModelProvider> {
        let m = self.config()?.model(model_id)?;
        Ok(match m.provider {
            ModelKind::Simulated => ModelProvider::Plain(Box::new(SimulatedProvider::new(
                &m.id,
                entries,
                m.skill,
                self.derive(&format!("simulated-{}", m.id)),
            ))),
            ModelKind::Http => {
                let path = self.transcript_path(&m.id)?;
                if self.offline {
                    if !path.exists() {
                        bail!("offline run needs a recorded transcript for {} at {}", m.id, path.display());
                    }
                    run.input(&path)?;
                    ModelProvider::Plain(Box::new(ReplayProvider::open(&m.id, &path)?))
                } else {
                    let endpoint = m.endpoint.clone().context("model endpoint")?;
                    let http = HttpChatProvider::new(endpoint, &m.id, secret(m.api_key_env.as_deref())?, m.style, m.retry);
                    if let Some(dir) = path.parent() {
                        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                    }
                    ModelProvider::Recording(RecordingProvider::create(http, path)?)
                }
            }
        })
    }

    /// Output directory `<out>/<parts..>` for one command.
    pub fn output(&self, command: &str, parts: &[&str]) -> Result<RunOutput> {
        let mut dir = self.out_root.clone();
        let mut rel = Vec::new();
        for p in parts {
            dir.push(p);
            rel.push(*p);
        }
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(RunOutput {
            command: command.to_string(),
            dir,
            rel: rel.join("/"),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            args: BTreeMap::new(),
            started_at: chrono::Utc::now().to_rfc3339(),
        })
    }

    pub fn finish(&self, run: RunOutput) -> Result<PathBuf> {
        let config = match &self.config {
            Some(c) => serde_json::to_value(c)?,
            None => Value::Null,
        };
        let mut args = run.args;
        args.insert("argv".into(), Value::from(self.argv.clone()));
        args.insert("out_root".into(), Value::from(self.out_root.display().to_string()));
        args.insert("inputs_root".into(), Value::from(self.inputs_root.display().to_string()));
        args.insert("output_dir".into(), Value::from(run.rel.clone()));
        let outputs = run
            .outputs
            .iter()
            .map(|p| FileDigest::of(p).with_context(|| format!("hashing {}", p.display())))
            .collect::<Result<Vec<_>>>()?;
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: run.command,
            args,
            seed: self.seed,
            offline: self.offline,
            config,
            inputs: run.inputs.into_values().collect(),
            outputs,
            started_at: run.started_at,
            finished_at: chrono::Utc::now().to_rfc3339(),
        };
        let path = run.dir.join(MANIFEST);
        std::fs::write(&path, manifest.to_json()).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// `s` with everything but ASCII alphanumerics, `-`, `_` and `.` replaced by `_`.
pub fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

/// Loads one configured dataset with its filters, name and release date applied.
pub fn load_configured(dc: &DatasetConfig) -> Result<Dataset> {
    let ds = load_dataset(&dc.path, dc.format()?).with_context(|| format!("loading {}", dc.path.display()))?;
    let filtered = filter(&ds, dc.category.as_deref(), dc.qtype()?);
    if filtered.empty {
        bail!("the filters on {} matched no entries", dc.path.display());
    }
    let mut ds = filtered.dataset;
    if let Some(name) = &dc.name {
        ds.name = name.clone();
    }
    if let Some(d) = dc.release_date {
        ds = ds.with_release_date(d);
    }
    Ok(ds)
}

/// A chat provider; live HTTP providers record every exchange.
pub enum ModelProvider {
    Plain(Box<dyn ChatProvider>),
    Recording(RecordingProvider<HttpChatProvider>),
}

impl ModelProvider {
    pub fn as_dyn(&self) -> &dyn ChatProvider {
        match self {
            ModelProvider::Plain(p) => p.as_ref(),
            ModelProvider::Recording(p) => p,
        }
    }

    /// Flushes the transcript, if any.
    pub fn finish(self) -> Result<()> {
        if let ModelProvider::Recording(p) = self {
            p.finish()?;
        }
        Ok(())
    }
}

/// Files read and written by one command.
#[derive(Debug)]
pub struct RunOutput {
    command: String,
    pub dir: PathBuf,
    rel: String,
    inputs: BTreeMap<String, FileDigest>,
    outputs: Vec<PathBuf>,
    pub args: BTreeMap<String, Value>,
    started_at: String,
}

impl RunOutput {
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let d = FileDigest::of(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.insert(d.path.clone(), d);
        Ok(())
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.produced(path.clone());
        Ok(path)
    }

    pub fn write_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        self.write(name, serde_json::to_string_pretty(value)? + "\n")
    }

    /// Registers a file written by someone else.
    pub fn produced(&mut self, path: PathBuf) {
        if !self.outputs.contains(&path) {
            self.outputs.push(path);
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}
