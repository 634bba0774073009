use std::time::Instant;

use anyhow::{bail, Result};
use clap::Args;

use geodist_core::graph::{build_knn_graph, floyd_apsp};
use geodist_core::pool::PoolState;
use geodist_core::seed;
use geodist_core::synth::gen_sphere_blobs;

use crate::config::{ConfigOverrides, RunConfig};

#[derive(Args)]
pub struct BenchArgs {
    /// Comma-separated pool sizes, e.g. 128,256,512.
    #[arg(long, default_value = "128,256,512")]
    sizes: String,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    /// Random in-pool query pairs per size.
    #[arg(long, default_value_t = 10_000)]
    query_pairs: usize,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

/// One CSV row per size: k-NN build, Floyd, index build, query throughput,
/// insert throughput, and rebuild latency. Timings go to stdout as CSV; a
/// Floyd scaling summary goes to stderr.
pub fn run(args: BenchArgs) -> Result<()> {
    let cfg = RunConfig::resolve(&args.overrides)?;
    let sizes: Vec<usize> = args
        .sizes
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| anyhow::anyhow!("bad size '{s}'")))
        .collect::<Result<_>>()?;
    if sizes.is_empty() {
        bail!("need at least one size");
    }
    println!("size,knn_ms,floyd_ms,build_ms,query_pairs_per_sec,insert_per_sec,rebuild_ms");
    let mut floyd_points = Vec::new();
    for &size in &sizes {
        let per_blob = size.div_ceil(8).max(1);
        let data = gen_sphere_blobs(8, per_blob, 0.25, args.dim, cfg.seed)?;
        let points = &data.points[..size.min(data.points.len())];

        let sigma = cfg.neighbors.min(size - 1).max(1);
        let t = Instant::now();
        let graph = build_knn_graph(points, sigma, cfg.metric_kind())?;
        let knn_ms = t.elapsed().as_secs_f64() * 1e3;

        let t = Instant::now();
        let apsp = floyd_apsp(&graph);
        let floyd_ms = t.elapsed().as_secs_f64() * 1e3;
        floyd_points.push((size as f64, floyd_ms.max(1e-6)));
        let _ = apsp;

        let mut hier = cfg.hierarchy_config();
        hier.clusters_per_node = hier.clusters_per_node.min(size);
        let t = Instant::now();
        let idx = geodist_core::hierarchy::build_index(points, &hier, cfg.seed)?;
        let build_ms = t.elapsed().as_secs_f64() * 1e3;

        let mut rng = seed::rng(cfg.seed, 0xbe7c);
        let pairs: Vec<(usize, usize)> = (0..args.query_pairs)
            .map(|_| {
                (
                    seed::uniform_index(&mut rng, size),
                    seed::uniform_index(&mut rng, size),
                )
            })
            .collect();
        let t = Instant::now();
        let mut acc = 0.0;
        for &(i, j) in &pairs {
            acc += idx.query_in_pool(i, j)?.angle_sum.min(1e9);
        }
        let query_secs = t.elapsed().as_secs_f64();
        std::hint::black_box(acc);
        let query_rate = args.query_pairs as f64 / query_secs.max(1e-9);

        let mut state = PoolState::new(size, args.dim, cfg.metric_kind(), cfg.t0)?;
        state.bootstrap_insert(points, &hier, cfg.seed)?;
        let t = Instant::now();
        let mut inserted = 0usize;
        for chunk in data.points.chunks(64) {
            state.insert_batch(chunk)?;
            inserted += chunk.len();
        }
        let insert_rate = inserted as f64 / t.elapsed().as_secs_f64().max(1e-9);

        let t = Instant::now();
        state.rebuild_now(&hier, cfg.seed)?;
        let rebuild_ms = t.elapsed().as_secs_f64() * 1e3;

        println!(
            "{size},{knn_ms:.3},{floyd_ms:.3},{build_ms:.3},{query_rate:.0},{insert_rate:.0},{rebuild_ms:.3}"
        );
    }

    if floyd_points.len() >= 2 {
        // Log-log slope of Floyd time vs node count; cubic scaling gives ~3.
        let first = floyd_points.first().unwrap();
        let last = floyd_points.last().unwrap();
        let slope = (last.1 / first.1).ln() / (last.0 / first.0).ln();
        eprintln!("floyd log-log slope across sizes: {slope:.2}");
    }
    Ok(())
}
