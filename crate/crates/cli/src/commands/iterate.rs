use anyhow::Result;
use retroholdout::dataset::Role;
use retroholdout::iterate::{
    export_embeddings_csv, internal_similarity_histogram, ngram_diff_datasets, pairs_to_markdown, project_2d,
    top_similar_pairs,
};

use crate::{Context, IterateCommand, RoleArg, Status};

fn roles(which: RoleArg) -> &'static [Role] {
    match which {
        RoleArg::Target => &[Role::Target],
        RoleArg::Retro => &[Role::Retro],
        RoleArg::Both => &[Role::Target, Role::Retro],
    }
}

pub fn run(ctx: &Context, tool: &IterateCommand) -> Result<Status> {
    let name = match tool {
        IterateCommand::Ngram { .. } => "ngram",
        IterateCommand::Hist { .. } => "hist",
        IterateCommand::Pairs { .. } => "pairs",
        IterateCommand::Project => "project",
    };
    let mut run = ctx.output("iterate", &["iterate", name])?;
    if let IterateCommand::Ngram { n, top } = tool {
        // a text diff needs no disjoint pair, so the two files may even coincide
        let target = ctx.dataset(Role::Target, &mut run)?;
        let retro = ctx.dataset(Role::Retro, &mut run)?;
        let report = ngram_diff_datasets(&target, &retro, *n, *top)?;
        run.write_json(&format!("ngram_{n}.json"), &report)?;
        let md = report.to_markdown();
        run.write(&format!("ngram_{n}.md"), &md)?;
        print!("{md}");
        ctx.finish(run)?;
        return Ok(Status::Success);
    }

    let pair = ctx.pair(&mut run)?;
    let emb = ctx.embeddings(pair.pooled().map(|(_, e)| e), &mut run)?;
    match tool {
        IterateCommand::Ngram { .. } => unreachable!("handled above"),
        IterateCommand::Hist { bins } => {
            for &role in roles(RoleArg::Both) {
                let ds = pair.dataset(role);
                let h = internal_similarity_histogram(ds, &emb, *bins)?;
                run.write(&format!("hist_{role}.csv"), h.to_csv())?;
                run.write(&format!("hist_{role}.svg"), h.to_svg(&format!("Internal similarity: {}", ds.name)))?;
                println!("{}: mean internal cosine {:.4}", ds.name, h.mean);
            }
        }
        IterateCommand::Pairs { k, dataset } => {
            for &role in roles(*dataset) {
                let pairs = top_similar_pairs(pair.dataset(role), &emb, *k)?;
                run.write_json(&format!("pairs_{role}.json"), &pairs)?;
                let md = pairs_to_markdown(&pairs);
                run.write(&format!("pairs_{role}.md"), &md)?;
                println!("## {}\n{md}", pair.dataset(role).name);
            }
        }
        IterateCommand::Project => {
            let p = project_2d(&pair, &emb, ctx.derive("project"))?;
            run.write("projection.csv", p.to_csv())?;
            run.write("projection.svg", p.to_svg(&format!("{} vs {}", pair.target.name, pair.retro.name)))?;
            run.write("embeddings.csv", export_embeddings_csv(&pair, &emb)?)?;
            println!("wrote {}", run.path("projection.svg").display());
        }
    }
    ctx.finish(run)?;
    Ok(Status::Success)
}
