use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use geodist_core::graph::{self, ApspMatrix};
use geodist_core::io;
use geodist_core::oracle::{self, MAX_ORACLE_POINTS};

use super::{load_embeddings, print_json};
use crate::config::{ConfigOverrides, RunConfig};

#[derive(Args)]
pub struct OracleArgs {
    /// Input embedding file (at most 4096 points).
    #[arg(long)]
    input: PathBuf,
    /// Neighbor count for the full point graph.
    #[arg(long, default_value_t = 8)]
    k: usize,
    /// Use a distance-threshold graph instead of k-NN.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Write the exact distance matrix (row-major f64 LE).
    #[arg(long)]
    dump: Option<PathBuf>,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

pub fn run(args: OracleArgs) -> Result<()> {
    let cfg = RunConfig::resolve(&args.overrides)?;
    let kind = cfg.metric_kind();
    let (points, _) = load_embeddings(&args.input)?;
    let (dist, graph_summary) = match args.epsilon {
        None => {
            let table = oracle::exact_geodesic(&points, args.k, kind)?;
            let components = graph::connected_components(&table.source_graph);
            (table.dist, components)
        }
        Some(eps) => {
            if points.len() > MAX_ORACLE_POINTS {
                return Err(geodist_core::Error::TooLarge {
                    got: points.len(),
                    limit: MAX_ORACLE_POINTS,
                }
                .into());
            }
            let g = graph::build_epsilon_graph(&points, eps, kind)?;
            let dist = graph::floyd_apsp(&g);
            (dist, graph::connected_components(&g))
        }
    };
    if let Some(path) = &args.dump {
        super::query::write_matrix(path, dist.as_slice())?;
    }
    let n = dist.node_count();
    let finite = dist.as_slice().iter().filter(|d| d.is_finite()).count();
    print_json(&serde_json::json!({
        "points": n,
        "k": args.k,
        "epsilon": args.epsilon,
        "metric": cfg.metric,
        "components": graph_summary,
        "finite_pair_fraction": finite as f64 / (n * n) as f64,
        "dump": args.dump.as_ref().map(|p| p.display().to_string()),
    }))
}

#[derive(Args)]
pub struct CompareArgs {
    /// Index container to evaluate.
    #[arg(long)]
    index: PathBuf,
    /// Exact distance matrix dumped by `oracle --dump`.
    #[arg(long)]
    oracle_dump: PathBuf,
}

pub fn run_compare(args: CompareArgs) -> Result<()> {
    let idx = io::read_index_file(&args.index)
        .with_context(|| format!("loading index {}", args.index.display()))?;
    let values = super::query::read_matrix(&args.oracle_dump)?;
    let n = idx.point_count();
    if values.len() != n * n {
        return Err(geodist_core::Error::CorruptFile(format!(
            "matrix has {} entries, index needs {}",
            values.len(),
            n * n
        ))
        .into());
    }
    let exact = ApspMatrix::from_raw(n, values).map_err(anyhow::Error::from)?;
    let report = oracle::approximation_report(&idx, &exact)?;
    print_json(&serde_json::json!({
        "index": args.index.display().to_string(),
        "oracle_dump": args.oracle_dump.display().to_string(),
        "report": report,
        "query_stats": idx.query_stats(),
    }))
}
