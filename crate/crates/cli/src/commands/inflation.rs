use anyhow::{bail, Result};
use retroholdout::dataset::Role;
use retroholdout::inflation::{compute_inflation, render_report, ReportFormat};

use super::eval::{eval_dir, read_summary, summary_name};
use crate::{Context, Status};

fn file_name(f: ReportFormat) -> String {
    match f {
        ReportFormat::SvgScatter => "inflation_scatter.svg".into(),
        ReportFormat::SvgBars => "inflation_bars.svg".into(),
        other => format!("inflation.{}", other.extension()),
    }
}

pub fn run(ctx: &Context, models: &[String], formats: &[String], variant: &str) -> Result<Status> {
    let cfg = ctx.config()?;
    let ids: Vec<String> = if models.is_empty() { cfg.models.iter().map(|m| m.id.clone()).collect() } else { models.to_vec() };
    if ids.is_empty() {
        bail!("no models to report on");
    }
    let formats = formats.iter().map(|f| f.parse::<ReportFormat>()).collect::<Result<Vec<_>, _>>()?;
    let mut run = ctx.output("inflation", &["inflation"])?;
    run.args.insert("models".into(), ids.clone().into());
    run.args.insert("variant".into(), variant.into());
    let mut rows = Vec::with_capacity(ids.len());
    for id in &ids {
        let dir = eval_dir(&ctx.inputs_root, id, variant);
        let (t, r) = (dir.join(summary_name(Role::Target)), dir.join(summary_name(Role::Retro)));
        let missing: Vec<&str> = [(&t, "target"), (&r, "retro")].iter().filter(|(p, _)| !p.exists()).map(|(_, n)| *n).collect();
        if !missing.is_empty() {
            bail!("model {id} is unpaired: no {} summary under {}", missing.join(" or "), dir.display());
        }
        run.input(&t)?;
        run.input(&r)?;
        rows.push(compute_inflation(&read_summary(&t)?, &read_summary(&r)?)?);
    }
    for f in formats {
        run.write(&file_name(f), render_report(&rows, f)?)?;
    }
    for row in &rows {
        let g = &row.gap;
        println!(
            "{}: {:+.1} pp (target {:.1}%, retro {:.1}%, 99% bound {:.1}, Fisher p = {:.4}){}",
            row.model_id,
            g.gap_pp,
            100.0 * g.acc_target.acc,
            100.0 * g.acc_retro.acc,
            g.bound_99,
            g.fisher_p,
            if row.significant { " *" } else { "" }
        );
    }
    ctx.finish(run)?;
    Ok(Status::Success)
}
