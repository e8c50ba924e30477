use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{bail, Context as _, Result};
use retroholdout::dataset::{load_dataset, Dataset, DatasetPair, Format, Role};
use serde::Serialize;

use crate::context::file_safe;
use crate::{Context, Status};

#[derive(Debug, Serialize)]
struct IngestSummary {
    name: String,
    entries: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    release_date: Option<chrono::NaiveDate>,
    categories: BTreeSet<String>,
    output: String,
}

pub fn run(ctx: &Context, paths: &[PathBuf], format: Option<&str>) -> Result<Status> {
    let mut run = ctx.output("ingest", &["ingest"])?;
    let datasets: Vec<Dataset> = if paths.is_empty() {
        let pair = ctx.pair(&mut run)?;
        vec![pair.target, pair.retro]
    } else {
        let mut out = Vec::with_capacity(paths.len());
        for p in paths {
            let fmt: Format = match format {
                Some(f) => f.parse()?,
                None => p.extension().and_then(|e| e.to_str()).unwrap_or("jsonl").parse()?,
            };
            run.input(p)?;
            out.push(load_dataset(p, fmt).with_context(|| format!("ingesting {}", p.display()))?);
        }
        out
    };
    if let [a, b] = datasets.as_slice() {
        if paths.is_empty() {
            DatasetPair::new(a.clone(), b.clone())?;
        }
    }

    let mut summaries = Vec::new();
    let mut names = BTreeSet::new();
    for ds in &datasets {
        let file = format!("{}.jsonl", file_safe(&ds.name));
        if !names.insert(file.clone()) {
            bail!("two inputs would both be written to {file}; rename one of them");
        }
        run.write(&file, ds.to_jsonl())?;
        println!("{}: {} entries -> {}", ds.name, ds.len(), run.path(&file).display());
        summaries.push(IngestSummary {
            name: ds.name.clone(),
            entries: ds.len(),
            release_date: ds.release_date,
            categories: ds.entries.iter().filter_map(|e| e.category.clone()).collect(),
            output: file,
        });
    }
    run.write_json("summary.json", &summaries)?;
    if paths.is_empty() {
        run.args.insert("roles".into(), serde_json::json!([Role::Target, Role::Retro]));
    }
    ctx.finish(run)?;
    Ok(Status::Success)
}
