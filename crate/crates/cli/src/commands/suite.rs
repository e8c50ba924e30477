use std::path::Path;

use anyhow::{Context as _, Result};
use retroholdout::dataset::{DatasetPair, Role};
use retroholdout::eval::PromptVariant;
use retroholdout::suite::{
    annotate_survey, difficulty_test, parse_responses_csv, prediction_accuracy_test, responses_to_csv, score_survey,
    semantic_test, DifficultyInput, ExternalCommandClassifier, FoldPlan, HttpClassifier, LogisticClassifier, RoleClassifier,
    SemanticConfig, SuiteReport, SurveyForm, SurveyKey, SurveyOutcome, Verdict,
};

use super::eval::{eval_dir, read_summary, summary_name, variant_dir};
use crate::config::{secret, ClassifierConfig, RunConfig};
use crate::context::RunOutput;
use crate::{Context, Status};

pub fn classifier(cfg: &RunConfig) -> Result<Box<dyn RoleClassifier>> {
    Ok(match &cfg.suite.classifier {
        ClassifierConfig::Logreg { config } => Box::new(LogisticClassifier { config: *config }),
        ClassifierConfig::Command { program, args, send_features } => Box::new(ExternalCommandClassifier {
            program: program.clone(),
            args: args.clone(),
            send_features: *send_features,
        }),
        ClassifierConfig::Http { endpoint, api_key_env, send_features } => Box::new(HttpClassifier::new(
            endpoint.clone(),
            secret(api_key_env.as_deref())?,
            Default::default(),
            *send_features,
        )),
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, run: &mut RunOutput) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    run.input(path)?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn keys(cfg: &RunConfig, run: &mut RunOutput) -> Result<Vec<SurveyKey>> {
    cfg.suite.survey_keys.iter().map(|p| read_json(p, run)).collect()
}

/// Standard-variant summaries of every pre-release model evaluated on both datasets.
fn difficulty_inputs(ctx: &Context, cfg: &RunConfig, run: &mut RunOutput) -> Result<Vec<DifficultyInput>> {
    let vdir = variant_dir(&PromptVariant::standard());
    let mut inputs = Vec::new();
    for m in cfg.models.iter().filter(|m| m.pre_release) {
        let dir = eval_dir(&ctx.inputs_root, &m.id, &vdir);
        let (t, r) = (dir.join(summary_name(Role::Target)), dir.join(summary_name(Role::Retro)));
        if !(t.exists() && r.exists()) {
            log::warn!("no paired evaluation of pre-release model {} under {}", m.id, dir.display());
            continue;
        }
        run.input(&t)?;
        run.input(&r)?;
        inputs.push(DifficultyInput {
            target: read_summary(&t)?,
            retro: read_summary(&r)?,
            pre_release: m.pre_release,
            training_cutoff: m.training_cutoff,
        });
    }
    Ok(inputs)
}

fn human(cfg: &RunConfig, run: &mut RunOutput) -> Result<Option<SurveyOutcome>> {
    let Some(path) = &cfg.suite.human_responses else {
        return Ok(None);
    };
    if !path.exists() {
        log::warn!("survey responses {} not found; the human test is left out", path.display());
        return Ok(None);
    }
    run.input(path)?;
    let text = std::fs::read_to_string(path)?;
    let responses = parse_responses_csv(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Some(score_survey(&responses, &keys(cfg, run)?)?))
}

fn annotator(ctx: &Context, cfg: &RunConfig, pair: &DatasetPair, run: &mut RunOutput) -> Result<Option<(String, SurveyOutcome)>> {
    let Some(model) = &cfg.suite.annotator_model else {
        return Ok(None);
    };
    let form_path = cfg.suite.annotator_form.as_deref().context("suite.annotator_model needs suite.annotator_form")?;
    let form: SurveyForm = read_json(form_path, run)?;
    let provider = ctx.chat_provider(model, pair.pooled().map(|(_, e)| e), run)?;
    let responses = annotate_survey(
        &form,
        provider.as_dyn(),
        &format!("annotator-{model}"),
        cfg.eval.temperature,
        cfg.eval.max_tokens,
    );
    provider.finish()?;
    let responses = responses?;
    run.write("annotator_responses.csv", responses_to_csv(&responses))?;
    Ok(Some((model.clone(), score_survey(&responses, &keys(cfg, run)?)?)))
}

pub fn run(ctx: &Context) -> Result<Status> {
    let cfg = ctx.config()?;
    let mut run = ctx.output("suite", &["suite"])?;
    let pair = ctx.pair(&mut run)?;
    let emb = ctx.embeddings(pair.pooled().map(|(_, e)| e), &mut run)?;

    let semantic = semantic_test(
        &pair,
        &emb,
        &SemanticConfig { num_samples: cfg.suite.permutation_samples, seed: ctx.derive("semantic") },
    )?;
    let plan = FoldPlan::new(&pair, cfg.suite.folds, ctx.derive("folds"))?;
    run.write_json("folds.json", &plan)?;
    let prediction = prediction_accuracy_test(&pair, &emb, &plan, classifier(cfg)?.as_ref())?;

    let inputs = difficulty_inputs(ctx, cfg, &mut run)?;
    let difficulty = if inputs.is_empty() { None } else { Some(difficulty_test(&pair, &inputs)?) };
    let human = human(cfg, &mut run)?;
    let annotator = annotator(ctx, cfg, &pair, &mut run)?;

    let report = SuiteReport::assemble(
        &pair.target.name,
        &pair.retro.name,
        difficulty,
        Some(prediction),
        Some(semantic),
        human,
        annotator,
    );
    run.write("report.json", report.to_json())?;
    let md = report.to_markdown();
    run.write("report.md", &md)?;
    print!("{md}");
    ctx.finish(run)?;
    Ok(match report.verdict {
        Verdict::SufficientlyIndistinguishable => Status::Success,
        Verdict::Rejected => Status::Rejected,
        Verdict::Incomplete => Status::Incomplete,
    })
}
