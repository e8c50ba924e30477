use anyhow::Result;
use retroholdout::iterate::export_embeddings_csv;
use serde_json::json;

use crate::{Context, Status};

pub fn run(ctx: &Context) -> Result<Status> {
    let mut run = ctx.output("embed", &["embed"])?;
    let pair = ctx.pair(&mut run)?;
    let emb = ctx.embeddings(pair.pooled().map(|(_, e)| e), &mut run)?;
    let first = emb.values().next();
    let summary = json!({
        "model_id": first.map(|v| v.model_id.clone()),
        "dim": first.map(|v| v.dim()),
        "target": pair.target.name,
        "retro": pair.retro.name,
        "n_target": pair.n_target(),
        "n_retro": pair.n_retro(),
    });
    run.write("embeddings.csv", export_embeddings_csv(&pair, &emb)?)?;
    run.write_json("summary.json", &summary)?;
    println!(
        "embedded {} + {} entries ({} dimensions)",
        pair.n_target(),
        pair.n_retro(),
        first.map(|v| v.dim()).unwrap_or(0)
    );
    ctx.finish(run)?;
    Ok(Status::Success)
}
