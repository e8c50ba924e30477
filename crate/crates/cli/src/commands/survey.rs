use anyhow::{Context as _, Result};
use retroholdout::suite::{generate_survey, parse_responses_csv, score_survey, SurveyKey};

use crate::context::file_safe;
use crate::{Context, Status, SurveyCommand};

pub fn run(ctx: &Context, sub: &SurveyCommand) -> Result<Status> {
    match sub {
        SurveyCommand::Generate => {
            let mut run = ctx.output("survey generate", &["survey", &format!("form-{}", ctx.seed)])?;
            let pair = ctx.pair(&mut run)?;
            let (form, key) = generate_survey(&pair, ctx.seed)?;
            debug_assert_eq!(file_safe(&form.form_id), form.form_id);
            run.write_json("form.json", &form)?;
            run.write("form.html", form.to_html())?;
            run.write("form.md", form.to_markdown())?;
            run.write_json("key.json", &key)?;
            println!("survey {} written to {}", form.form_id, run.dir.display());
            println!("keep key.json away from participants");
            ctx.finish(run)?;
            Ok(Status::Success)
        }
        SurveyCommand::Score { responses, keys } => {
            let mut run = ctx.output("survey score", &["survey", "score"])?;
            run.input(responses)?;
            let text = std::fs::read_to_string(responses).with_context(|| format!("reading {}", responses.display()))?;
            let parsed = parse_responses_csv(&text).with_context(|| format!("parsing {}", responses.display()))?;
            let keys = keys
                .iter()
                .map(|p| {
                    run.input(p)?;
                    let t = std::fs::read_to_string(p)?;
                    serde_json::from_str::<SurveyKey>(&t).with_context(|| format!("parsing {}", p.display()))
                })
                .collect::<Result<Vec<_>>>()?;
            let outcome = score_survey(&parsed, &keys)?;
            run.write_json("outcome.json", &outcome)?;
            println!(
                "{}/{} retro entries identified ({:.1}%), p = {:.4}; {} participants included, {} excluded",
                outcome.correct,
                outcome.total,
                100.0 * outcome.accuracy(),
                outcome.test.p_value,
                outcome.participants_included,
                outcome.participants_excluded.len()
            );
            ctx.finish(run)?;
            Ok(if outcome.test.reject_at_5pct { Status::Rejected } else { Status::Success })
        }
    }
}
