//! One module per subcommand.

use anyhow::Result;

use crate::{Command, Context, Status};

pub mod calibrate;
pub mod embed;
pub mod eval;
pub mod inflation;
pub mod ingest;
pub mod iterate;
pub mod replay;
pub mod suite;
pub mod survey;

pub fn dispatch(ctx: &Context, command: &Command) -> Result<Status> {
    match command {
        Command::Ingest { paths, format } => ingest::run(ctx, paths, format.as_deref()),
        Command::Embed => embed::run(ctx),
        Command::Eval { model, dataset, variant, repeats } => eval::run(ctx, model, *dataset, variant.as_deref(), *repeats),
        Command::Suite => suite::run(ctx),
        Command::Inflation { models, formats, variant } => inflation::run(ctx, models, formats, variant),
        Command::Iterate(tool) => iterate::run(ctx, tool),
        Command::Survey(sub) => survey::run(ctx, sub),
        Command::Calibrate { dataset, trials } => calibrate::run(ctx, *dataset, *trials),
        Command::Replay { .. } => unreachable!("replay is dispatched before a context is built"),
    }
}
