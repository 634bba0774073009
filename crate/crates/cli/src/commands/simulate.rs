use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;

use geodist_core::io;
use geodist_core::metrics::FeatureVector;
use geodist_core::pool::PoolState;
use geodist_core::seed;
use geodist_core::similarity::{contrastive_step, mining_quality, SimilarityRoute};

use super::{load_embeddings, print_json};
use crate::config::{ConfigOverrides, RunConfig};

#[derive(Args)]
pub struct SimulateArgs {
    /// Modality A embedding file.
    #[arg(long)]
    data_a: PathBuf,
    /// Modality B embedding file (row r pairs with row r of A).
    #[arg(long)]
    data_b: PathBuf,
    #[arg(long, default_value_t = 200)]
    steps: u64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    /// Distance route for similarities: geodesic or cosine (trivial baseline).
    #[arg(long, default_value = "geodesic")]
    metric: String,
    /// JSONL log destination ("-" for stdout).
    #[arg(long, default_value = "-")]
    log: String,
    /// Write the final pool state (including the index) here.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Include wall-clock timings in log records (off keeps logs
    /// byte-reproducible across runs).
    #[arg(long)]
    timings: bool,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Serialize)]
struct StepRecord {
    step: u64,
    rebuilt: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    rebuild_ms: Option<f64>,
    loss_a2b: f64,
    loss_b2a: f64,
    mean_rank_a2b: f64,
    mean_rank_b2a: f64,
    truncation_rate: f64,
    unreachable_rate: f64,
    margin_p10: f64,
    margin_p50: f64,
    margin_p90: f64,
    pool_filled: usize,
}

#[derive(Serialize)]
struct RunSummary {
    steps: u64,
    batch: usize,
    metric: String,
    mean_loss: f64,
    mean_rank_a2b: f64,
    mean_rank_b2a: f64,
    mean_rank: f64,
    mean_truncation_rate: f64,
    rebuilds: u64,
    effective_config: RunConfig,
}

pub fn run(args: SimulateArgs) -> Result<()> {
    let cfg = RunConfig::resolve(&args.overrides)?;
    let route = SimilarityRoute::parse(&args.metric).map_err(anyhow::Error::from)?;
    let angle = cfg.angle_config();
    angle.validate().map_err(anyhow::Error::from)?;
    let hier = cfg.hierarchy_config();

    let (data_a, _) = load_embeddings(&args.data_a)?;
    let (data_b, _) = load_embeddings(&args.data_b)?;
    if data_a.len() != data_b.len() || data_a.is_empty() {
        bail!(
            "paired datasets must be nonempty and equal length ({} vs {})",
            data_a.len(),
            data_b.len()
        );
    }
    if args.batch == 0 || args.batch > data_a.len() {
        bail!("batch must be in 1..={}", data_a.len());
    }
    let dim = data_a[0].dim();

    let mut state_a = PoolState::new(cfg.capacity, dim, cfg.metric_kind(), cfg.t0)?;
    let mut state_b = PoolState::new(cfg.capacity, dim, cfg.metric_kind(), cfg.t0)?;
    let mut full_rebuilt = [false, false];

    let mut log: Box<dyn Write> = if args.log == "-" {
        Box::new(std::io::stdout())
    } else {
        Box::new(std::io::BufWriter::new(
            std::fs::File::create(&args.log)
                .with_context(|| format!("creating log file {}", args.log))?,
        ))
    };

    let mut sampler = BatchSampler::new(data_a.len(), cfg.seed);
    let mut total_loss = 0.0;
    let mut total_rank_a2b = 0.0;
    let mut total_rank_b2a = 0.0;
    let mut total_trunc = 0.0;
    let mut rebuilds = 0u64;

    for step in 1..=args.steps {
        let mut rebuilt = false;
        let mut rebuild_ms = 0.0;
        for (s, state) in [&mut state_a, &mut state_b].into_iter().enumerate() {
            if state.pool.filled() == 0 {
                continue; // first step bootstraps inside contrastive_step
            }
            let t0 = Instant::now();
            let mut did = state.maybe_rebuild(&hier, cfg.seed)?;
            if !did {
                // Warm-up policy: while the pool is below the cluster count
                // the flat index must track the contents; one extra rebuild
                // when the pool first fills switches to the full hierarchy.
                let warming = state.pool.filled() < hier.clusters_per_node;
                let newly_full = state.pool.is_full() && !full_rebuilt[s];
                if warming || newly_full {
                    state.rebuild_now(&hier, cfg.seed)?;
                    did = true;
                }
            }
            if did {
                rebuilt = true;
                rebuild_ms += t0.elapsed().as_secs_f64() * 1e3;
                if state.pool.is_full() {
                    full_rebuilt[s] = true;
                }
            }
        }
        if rebuilt {
            rebuilds += 1;
        }

        let rows = sampler.next_batch(args.batch);
        let batch_a: Vec<FeatureVector> = rows.iter().map(|&r| data_a[r].clone()).collect();
        let batch_b: Vec<FeatureVector> = rows.iter().map(|&r| data_b[r].clone()).collect();
        // Desk-scale momentum encoder: momentum features equal the batch
        // features of the same rows.
        let outcome = contrastive_step(
            &mut state_a,
            &mut state_b,
            &batch_a,
            &batch_b,
            &batch_a,
            &batch_b,
            &angle,
            route,
            &hier,
            cfg.seed,
        )?;

        let mining = mining_quality(&outcome.sim_a_to_b)?;
        let values = (outcome.sim_a_to_b.values.len() + outcome.sim_b_to_a.values.len()) as f64;
        let truncation_rate =
            (outcome.sim_a_to_b.truncated + outcome.sim_b_to_a.truncated) as f64 / values.max(1.0);
        let unreachable_rate = (outcome.sim_a_to_b.unreachable + outcome.sim_b_to_a.unreachable)
            as f64
            / values.max(1.0);
        let record = StepRecord {
            step,
            rebuilt,
            rebuild_ms: args.timings.then_some(rebuild_ms),
            loss_a2b: outcome.loss_a_to_b.info_nce,
            loss_b2a: outcome.loss_b_to_a.info_nce,
            mean_rank_a2b: outcome.loss_a_to_b.mean_rank(),
            mean_rank_b2a: outcome.loss_b_to_a.mean_rank(),
            truncation_rate,
            unreachable_rate,
            margin_p10: mining.margin_p10,
            margin_p50: mining.margin_p50,
            margin_p90: mining.margin_p90,
            pool_filled: state_b.pool.filled(),
        };
        writeln!(log, "{}", serde_json::to_string(&record)?)?;

        total_loss += (record.loss_a2b + record.loss_b2a) / 2.0;
        total_rank_a2b += record.mean_rank_a2b;
        total_rank_b2a += record.mean_rank_b2a;
        total_trunc += truncation_rate;
    }
    log.flush()?;

    if let Some(path) = &args.checkpoint {
        io::write_checkpoint_file(path, &state_b)
            .with_context(|| format!("writing checkpoint {}", path.display()))?;
    }

    let steps_f = args.steps.max(1) as f64;
    let summary = RunSummary {
        steps: args.steps,
        batch: args.batch,
        metric: args.metric.clone(),
        mean_loss: total_loss / steps_f,
        mean_rank_a2b: total_rank_a2b / steps_f,
        mean_rank_b2a: total_rank_b2a / steps_f,
        mean_rank: (total_rank_a2b + total_rank_b2a) / (2.0 * steps_f),
        mean_truncation_rate: total_trunc / steps_f,
        rebuilds,
        effective_config: cfg,
    };
    if args.log != "-" {
        print_json(&summary)?;
    }
    Ok(())
}

/// Epoch-shuffled row sampler: a fresh seeded permutation per pass, batches
/// taken in order. Deterministic for a given seed.
struct BatchSampler {
    n: usize,
    seed: u64,
    epoch: u64,
    order: Vec<usize>,
    cursor: usize,
}

impl BatchSampler {
    fn new(n: usize, seed: u64) -> Self {
        let mut s = Self {
            n,
            seed,
            epoch: 0,
            order: Vec::new(),
            cursor: 0,
        };
        s.reshuffle();
        s
    }

    fn reshuffle(&mut self) {
        self.epoch += 1;
        let mut rng = seed::rng(self.seed, 0x5a5a_0000 | self.epoch);
        let mut order: Vec<usize> = (0..self.n).collect();
        // Fisher-Yates with the portable uniform index draw.
        for i in (1..order.len()).rev() {
            let j = seed::uniform_index(&mut rng, i + 1);
            order.swap(i, j);
        }
        self.order = order;
        self.cursor = 0;
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut rows = Vec::with_capacity(size);
        while rows.len() < size {
            if self.cursor == self.n {
                self.reshuffle();
            }
            rows.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        rows
    }
}
