use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;

use geodist_core::graph::{build_knn_graph, validate_bounds};

use super::load_embeddings;
use crate::config::{ConfigOverrides, RunConfig};

#[derive(Args)]
pub struct CheckBoundsArgs {
    /// Input embedding file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    k_min: usize,
    #[arg(long)]
    k_max: usize,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

/// Sweep sigma over the range, build k-NN graphs, and print one CSV row per
/// sigma with the empirical component count against the closed-form bound.
pub fn run(args: CheckBoundsArgs) -> Result<()> {
    let cfg = RunConfig::resolve(&args.overrides)?;
    if args.k_min < 1 || args.k_min > args.k_max {
        bail!("need 1 <= k-min <= k-max");
    }
    let (points, _) = load_embeddings(&args.input)?;
    println!(
        "sigma,node_count,min_degree,edge_count,component_count,component_bound,component_ok,edge_upper,edge_upper_concise,edge_ok"
    );
    for sigma in args.k_min..=args.k_max {
        let g = build_knn_graph(&points, sigma, cfg.metric_kind())?;
        let report = validate_bounds(&g);
        println!(
            "{sigma},{},{},{},{},{},{},{},{},{}",
            report.node_count,
            report.min_degree,
            report.edge_count,
            report.component_count,
            report
                .component_bound
                .map_or("na".to_string(), |b| b.to_string()),
            report
                .component_bound_ok
                .map_or("na".to_string(), |b| b.to_string()),
            report.edge_upper.map_or("na".to_string(), |b| b.to_string()),
            report
                .edge_upper_concise
                .map_or("na".to_string(), |b| b.to_string()),
            report.size_bound_ok.map_or("na".to_string(), |b| b.to_string()),
        );
    }
    Ok(())
}
