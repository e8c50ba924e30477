use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use retroholdout::dataset::{load_dataset, Format, Role};
use retroholdout::eval::{evaluate_dataset, EvalOptions, EvalSummary, PromptVariant};

use crate::config::RunConfig;
use crate::context::file_safe;
use crate::{Context, RoleArg, Status};

/// Builds the prompt variant named `name` from the eval settings.
pub fn variant(cfg: &RunConfig, name: &str) -> Result<PromptVariant> {
    let ec = &cfg.eval;
    let v = match name {
        "standard" => PromptVariant::standard(),
        "top_k" => PromptVariant::top_k(ec.k.context("the top_k variant needs eval.k")?),
        "five_shot" => {
            let path = ec.shots.as_deref().context("the five_shot variant needs eval.shots")?;
            let ds = load_dataset(path, Format::Jsonl)?;
            if ds.len() < 5 {
                bail!("{} holds {} entries; five are needed as worked examples", path.display(), ds.len());
            }
            PromptVariant::five_shot(ds.entries.into_iter().take(5).collect())
        }
        "helpful" => PromptVariant::helpful(ec.preamble.clone().context("the helpful variant needs eval.preamble")?),
        other => bail!("unknown prompt variant {other:?}"),
    };
    v.validate()?;
    Ok(v)
}

/// Directory name for a variant: its key without the hashed qualifiers.
pub fn variant_dir(v: &PromptVariant) -> String {
    let key = v.key();
    file_safe(key.split('+').next().unwrap_or(&key))
}

/// Where `eval` writes a model's files for one variant.
pub fn eval_dir(out_root: &Path, model_id: &str, variant_dir: &str) -> PathBuf {
    out_root.join("eval").join(file_safe(model_id)).join(variant_dir)
}

pub fn summary_name(role: Role) -> String {
    format!("{role}.summary.json")
}

pub fn read_summary(path: &Path) -> Result<EvalSummary> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn run(ctx: &Context, model_id: &str, which: RoleArg, variant_name: Option<&str>, repeats: Option<u32>) -> Result<Status> {
    let cfg = ctx.config()?;
    let model = cfg.model(model_id)?;
    let v = variant(cfg, variant_name.unwrap_or(&cfg.eval.variant))?;
    let vdir = variant_dir(&v);
    let mut run = ctx.output("eval", &["eval", &file_safe(&model.id), &vdir])?;
    run.args.insert("model".into(), model.id.clone().into());
    let pair = ctx.pair(&mut run)?;
    let provider = ctx.chat_provider(&model.id, pair.pooled().map(|(_, e)| e), &mut run)?;
    let roles: &[Role] = match which {
        RoleArg::Target => &[Role::Target],
        RoleArg::Retro => &[Role::Retro],
        RoleArg::Both => &[Role::Target, Role::Retro],
    };
    let mut result = Ok(());
    for &role in roles {
        let records = run.path(&format!("{role}.records.jsonl"));
        let opts = EvalOptions {
            temperature: cfg.eval.temperature,
            max_tokens: cfg.eval.max_tokens,
            repeats: repeats.unwrap_or(cfg.eval.repeats),
            parallelism: ctx.parallelism,
            seed: ctx.derive(&format!("eval-{}-{role}", model.id)),
            role: Some(role),
            records_path: Some(records.clone()),
        };
        match evaluate_dataset(pair.dataset(role), provider.as_dyn(), &v, &opts) {
            Ok((summary, _)) => {
                run.produced(records);
                run.write_json(&summary_name(role), &summary)?;
                let a = summary.accuracy;
                println!(
                    "{} on {} ({role}): {}/{} = {:.2}% ± {:.2}",
                    model.id,
                    summary.dataset,
                    a.correct,
                    a.total,
                    100.0 * a.acc,
                    100.0 * a.sigma
                );
            }
            Err(e) => {
                result = Err(e).with_context(|| format!("evaluating {} on the {role} dataset", model.id));
                break;
            }
        }
    }
    // keep whatever was recorded, even when the run failed part way
    provider.finish()?;
    result?;
    ctx.finish(run)?;
    Ok(Status::Success)
}
