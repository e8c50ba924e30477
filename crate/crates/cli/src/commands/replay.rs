use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use clap::Parser;
use retroholdout::manifest::{FileDigest, RunManifest};
use serde_json::Value;

use crate::context::MANIFEST;
use crate::{execute, Cli, Command, GlobalArgs, Status};

fn arg_str<'a>(m: &'a RunManifest, key: &str) -> Result<&'a str> {
    m.args.get(key).and_then(Value::as_str).with_context(|| format!("manifest has no {key}"))
}

/// Re-runs the command recorded in a manifest offline, into a fresh output
/// root, and checks every recorded output for byte identity.
pub fn run(global: &GlobalArgs, manifest_path: &Path) -> Result<Status> {
    let text = std::fs::read_to_string(manifest_path).with_context(|| format!("reading {}", manifest_path.display()))?;
    let m = RunManifest::from_json(&text).with_context(|| format!("parsing {}", manifest_path.display()))?;
    let argv: Vec<String> = m
        .args
        .get("argv")
        .and_then(Value::as_array)
        .context("manifest has no recorded argv")?
        .iter()
        .map(|a| a.as_str().map(str::to_string).context("argv holds a non-string"))
        .collect::<Result<_>>()?;
    let old_root = PathBuf::from(arg_str(&m, "out_root")?);
    let rel = arg_str(&m, "output_dir")?;
    let new_root = match &global.out {
        Some(o) => std::path::absolute(o)?,
        None => PathBuf::from(format!("{}-replay", old_root.display())),
    };
    if new_root == old_root {
        bail!("replay needs an output root other than the original {}", old_root.display());
    }
    std::fs::create_dir_all(&new_root)?;

    for input in &m.inputs {
        match FileDigest::of(Path::new(&input.path)) {
            Ok(now) if now.sha256 == input.sha256 => {}
            Ok(_) => log::warn!("input {} changed since the recorded run", input.path),
            Err(_) => log::warn!("input {} is gone", input.path),
        }
    }

    let mut cli = Cli::try_parse_from(std::iter::once("retroholdout".to_string()).chain(argv.iter().cloned()))
        .context("re-parsing the recorded arguments")?;
    if matches!(cli.command, Command::Replay { .. }) {
        bail!("a replay manifest cannot be replayed");
    }
    if !m.config.is_null() {
        let snapshot = new_root.join("replay-config.json");
        std::fs::write(&snapshot, serde_json::to_string_pretty(&m.config)?)?;
        cli.global.config = Some(snapshot);
    }
    cli.global.out = Some(new_root.clone());
    // earlier stages' outputs stay where the recorded run read them
    if cli.global.inputs_root.is_none() {
        let recorded = m.args.get("inputs_root").and_then(Value::as_str).map(PathBuf::from);
        cli.global.inputs_root = Some(recorded.unwrap_or_else(|| old_root.clone()));
    }
    cli.global.seed = Some(m.seed);
    cli.global.offline = true;
    let status = execute(cli, argv)?;

    let old_dir = old_root.join(rel);
    let new_dir = new_root.join(rel);
    let mut differing = Vec::new();
    for out in &m.outputs {
        let old = Path::new(&out.path);
        let name = old.strip_prefix(&old_dir).unwrap_or(old);
        if name == Path::new(MANIFEST) {
            continue;
        }
        let fresh = new_dir.join(name);
        match FileDigest::of(&fresh) {
            Ok(d) if d.sha256 == out.sha256 => println!("identical  {}", name.display()),
            Ok(_) => {
                println!("DIFFERS    {}", name.display());
                differing.push(name.display().to_string());
            }
            Err(_) => {
                println!("MISSING    {}", name.display());
                differing.push(name.display().to_string());
            }
        }
    }
    if !differing.is_empty() {
        bail!("{} of {} outputs were not reproduced: {}", differing.len(), m.outputs.len(), differing.join(", "));
    }
    println!("reproduced {} outputs byte for byte (command exit status {})", m.outputs.len(), status.code());
    Ok(Status::Success)
}
