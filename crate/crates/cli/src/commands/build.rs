use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use geodist_core::hierarchy::build_index;
use geodist_core::io;
use geodist_core::metrics::{normalize, MetricKind};

use super::{load_embeddings, print_json};
use crate::config::{ConfigOverrides, RunConfig};

#[derive(Args)]
pub struct BuildArgs {
    /// Input embedding file.
    #[arg(long)]
    input: PathBuf,
    /// Output index container.
    #[arg(long)]
    out: PathBuf,
    /// Unit-normalize inputs before building (cosine metric only).
    #[arg(long)]
    normalize: bool,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

pub fn run(args: BuildArgs) -> Result<()> {
    let cfg = RunConfig::resolve(&args.overrides)?;
    let (mut points, _meta) = load_embeddings(&args.input)?;
    if args.normalize && cfg.metric_kind() == MetricKind::Cosine {
        points = points
            .iter()
            .map(normalize)
            .collect::<geodist_core::Result<_>>()?;
    }
    let hier = cfg.hierarchy_config();
    let idx = build_index(&points, &hier, cfg.seed).context("building index")?;
    io::write_index_file(&args.out, &idx)
        .with_context(|| format!("writing index to {}", args.out.display()))?;
    print_json(&serde_json::json!({
        "effective_config": cfg,
        "input": args.input.display().to_string(),
        "output": args.out.display().to_string(),
        "report": idx.build_report(),
    }))
}
