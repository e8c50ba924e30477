use anyhow::Result;
use retroholdout::dataset::Role;
use retroholdout::suite::run_calibration;

use crate::{Context, RoleArg, Status};

pub fn run(ctx: &Context, which: RoleArg, trials: Option<usize>) -> Result<Status> {
    let cfg = ctx.config()?;
    let role = match which {
        RoleArg::Retro => Role::Retro,
        _ => Role::Target,
    };
    let mut run = ctx.output("calibrate", &["calibrate"])?;
    let ds = ctx.dataset(role, &mut run)?;
    let emb = ctx.embeddings(&ds.entries, &mut run)?;
    let mut cal = cfg.calibrate;
    cal.seed = ctx.derive("calibrate");
    if let Some(t) = trials {
        cal.trials = t;
    }
    let report = run_calibration(&ds, &emb, &cal)?;
    run.write_json("calibration.json", &report)?;
    println!("{} trials on {}", report.trials.len(), report.dataset);
    println!("semantic rejection rate   {:.3}", report.semantic_rate);
    println!("prediction rejection rate {:.3}", report.prediction_rate);
    if let Some(d) = report.difficulty_rate {
        println!("difficulty rejection rate {d:.3}");
    }
    println!("no test rejected in       {:.3}", report.pass_rate);
    ctx.finish(run)?;
    Ok(Status::Success)
}
