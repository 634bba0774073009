//! Angle normalization, similarity matrices, and the contrastive harness.
//!
//! Accumulated geodesic path lengths are truncated at `max_angle`, rescaled
//! to `[0, pi]`, and passed through cosine, mapping zero distance to +1 and
//! truncated or unreachable pairs to -1. Unreachable pairs thus become
//! maximally dissimilar, which filters them out as overly easy negatives.
//!
//! The contrastive step mirrors the momentum-queue recipe: momentum features
//! are inserted into the opposite pool first, similarities are computed
//! against the updated pool, and ground-truth labels are the insertion
//! positions. No model parameters exist here; the harness evaluates mining
//! and loss values only.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hierarchy::{GeodesicResult, HierarchicalIndex, HierarchyConfig};
use crate::metrics::{distance_unchecked, FeatureVector, MetricKind};
use crate::pool::{AuxQueues, FeaturePool, InsertReceipt, PoolState};

/// Truncation point and softmax temperature.
///
/// `max_angle` defaults to `4*pi` (accumulated-angle truncation);
/// `temperature` defaults to 0.07, the customary contrastive value (the
/// method itself does not prescribe one).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngleNormConfig {
    pub max_angle: f64,
    pub temperature: f64,
}

impl Default for AngleNormConfig {
    fn default() -> Self {
        Self {
            max_angle: 4.0 * std::f64::consts::PI,
            temperature: 0.07,
        }
    }
}

impl AngleNormConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_angle > 0.0) || !self.max_angle.is_finite() {
            return Err(Error::invalid("max_angle must be positive and finite"));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::invalid("temperature must be positive"));
        }
        Ok(())
    }
}

/// `cos(pi * f)` for `f` in `[0, 1]`, exact at the quarter points: 1 at 0,
/// 0 at 1/2, -1 at 1. Reduction through sine keeps those values bit-exact
/// and the whole map monotone non-increasing.
fn cos_pi(f: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&f));
    if f <= 0.5 {
        ((0.5 - f) * std::f64::consts::PI).sin()
    } else {
        -(((f - 0.5) * std::f64::consts::PI).sin())
    }
}

/// Map an accumulated path length to `[-1, 1]`:
/// `cos(min(angle_sum, max_angle) * pi / max_angle)`. Unreachable results
/// land on the truncation endpoint, -1.
pub fn angle_normalize(g: &GeodesicResult, cfg: &AngleNormConfig) -> f64 {
    let frac = if g.reachable {
        (g.angle_sum / cfg.max_angle).min(1.0)
    } else {
        1.0
    };
    cos_pi(frac)
}

/// Which distance feeds the similarity values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SimilarityRoute {
    /// Hierarchical geodesic distances through the index.
    Geodesic,
    /// The trivial metric directly (one-hop path), the comparison baseline.
    Trivial,
}

impl SimilarityRoute {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "geodesic" => Ok(SimilarityRoute::Geodesic),
            "cosine" | "trivial" => Ok(SimilarityRoute::Trivial),
            other => Err(Error::invalid(format!("unknown similarity route '{other}'"))),
        }
    }
}

/// Batch-by-pool similarity values in `[-1, 1]`, with optional ground-truth
/// positive columns and truncation accounting.
#[derive(Debug, Clone, Serialize)]
pub struct SimilarityMatrix {
    pub batch_len: usize,
    pub pool_len: usize,
    /// Row-major `batch_len x pool_len`.
    pub values: Vec<f64>,
    pub labels: Option<Vec<u32>>,
    /// Finite path lengths beyond `max_angle`.
    pub truncated: usize,
    /// Unreachable pairs (mapped to -1).
    pub unreachable: usize,
}

impl SimilarityMatrix {
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.pool_len + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.pool_len..(row + 1) * self.pool_len]
    }

    pub fn truncation_rate(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.truncated as f64 / self.values.len() as f64
        }
    }
}

/// Similarities of each batch row against every filled pool slot.
///
/// Geodesic route: each row attaches once to its nearest leaf center and the
/// per-slot distance decomposes through the aux D_o rows. Trivial route:
/// direct pairwise distances through the same angle normalization.
pub fn batch_similarity(
    idx: &HierarchicalIndex,
    pool: &FeaturePool,
    aux: &AuxQueues,
    batch: &[FeatureVector],
    cfg: &AngleNormConfig,
    route: SimilarityRoute,
) -> Result<SimilarityMatrix> {
    cfg.validate()?;
    let m = pool.filled();
    let mut values = Vec::with_capacity(batch.len() * m);
    let mut truncated = 0usize;
    let mut unreachable = 0usize;
    for x in batch {
        if x.dim() != pool.dim() {
            return Err(Error::DimensionMismatch {
                expected: pool.dim(),
                got: x.dim(),
            });
        }
        match route {
            SimilarityRoute::Geodesic => {
                let (c, d_near) = idx.nearest_bottom_center(x)?;
                for slot in 0..m {
                    let total = d_near + aux.d_o_rows[slot][c];
                    let g = GeodesicResult {
                        angle_sum: total,
                        reachable: total.is_finite(),
                    };
                    if !g.reachable {
                        unreachable += 1;
                    } else if g.angle_sum > cfg.max_angle {
                        truncated += 1;
                    }
                    values.push(angle_normalize(&g, cfg));
                }
            }
            SimilarityRoute::Trivial => {
                if pool.metric() == MetricKind::Cosine && !x.is_unit() {
                    return Err(Error::NotUnitNormalized(x.norm()));
                }
                for slot in 0..m {
                    let d = distance_unchecked(x.as_slice(), pool.slot(slot), pool.metric());
                    let g = GeodesicResult {
                        angle_sum: d,
                        reachable: true,
                    };
                    if d > cfg.max_angle {
                        truncated += 1;
                    }
                    values.push(angle_normalize(&g, cfg));
                }
            }
        }
    }
    Ok(SimilarityMatrix {
        batch_len: batch.len(),
        pool_len: m,
        values,
        labels: None,
        truncated,
        unreachable,
    })
}

/// InfoNCE loss over a labeled similarity matrix, plus per-row positive
/// ranks (rank = 1 + number of strictly greater entries).
#[derive(Debug, Clone, Serialize)]
pub struct LossReport {
    pub info_nce: f64,
    pub per_row_rank_of_positive: Vec<usize>,
}

impl LossReport {
    pub fn mean_rank(&self) -> f64 {
        if self.per_row_rank_of_positive.is_empty() {
            0.0
        } else {
            self.per_row_rank_of_positive.iter().sum::<usize>() as f64
                / self.per_row_rank_of_positive.len() as f64
        }
    }
}

/// Mean over rows of `-log softmax(v / tau)[label]`, log-sum-exp stabilized.
pub fn info_nce(matrix: &SimilarityMatrix, cfg: &AngleNormConfig) -> Result<LossReport> {
    let labels = matrix
        .labels
        .as_ref()
        .ok_or_else(|| Error::invalid("similarity matrix carries no labels"))?;
    if labels.len() != matrix.batch_len {
        return Err(Error::invalid("one label per batch row required"));
    }
    let tau = cfg.temperature;
    let mut total = 0.0;
    let mut ranks = Vec::with_capacity(matrix.batch_len);
    for (r, &label) in labels.iter().enumerate() {
        let row = matrix.row(r);
        let label = label as usize;
        if label >= row.len() {
            return Err(Error::IndexOutOfRange {
                index: label,
                len: row.len(),
            });
        }
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = max + row.iter().map(|&v| ((v - max) / tau).exp()).sum::<f64>().ln() * tau;
        total += -(row[label] - lse) / tau;
        ranks.push(1 + row.iter().filter(|&&v| v > row[label]).count());
    }
    Ok(LossReport {
        info_nce: if matrix.batch_len > 0 {
            total / matrix.batch_len as f64
        } else {
            0.0
        },
        per_row_rank_of_positive: ranks,
    })
}

/// Positive-rank distribution and hardest-negative margins.
#[derive(Debug, Clone, Serialize)]
pub struct MiningStats {
    pub ranks: Vec<usize>,
    pub mean_rank: f64,
    pub median_rank: f64,
    /// `v[label] - max over negatives`; +inf when a row has no negatives.
    pub margins: Vec<f64>,
    pub margin_p10: f64,
    pub margin_p50: f64,
    pub margin_p90: f64,
}

pub fn mining_quality(matrix: &SimilarityMatrix) -> Result<MiningStats> {
    let labels = matrix
        .labels
        .as_ref()
        .ok_or_else(|| Error::invalid("similarity matrix carries no labels"))?;
    let mut ranks = Vec::with_capacity(matrix.batch_len);
    let mut margins = Vec::with_capacity(matrix.batch_len);
    for (r, &label) in labels.iter().enumerate() {
        let row = matrix.row(r);
        let label = label as usize;
        let pos = row[label];
        ranks.push(1 + row.iter().filter(|&&v| v > pos).count());
        let hardest = row
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != label)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        // A row with no negatives leaves hardest at -inf and the margin +inf.
        margins.push(pos - hardest);
    }
    let mut sorted_ranks = ranks.clone();
    sorted_ranks.sort_unstable();
    let mut sorted_margins = margins.clone();
    sorted_margins.sort_by(f64::total_cmp);
    let q = |s: &[f64], q: f64| -> f64 {
        if s.is_empty() {
            0.0
        } else {
            s[((s.len() - 1) as f64 * q).round() as usize]
        }
    };
    Ok(MiningStats {
        mean_rank: if ranks.is_empty() {
            0.0
        } else {
            ranks.iter().sum::<usize>() as f64 / ranks.len() as f64
        },
        median_rank: if sorted_ranks.is_empty() {
            0.0
        } else {
            sorted_ranks[(sorted_ranks.len() - 1) / 2] as f64
        },
        ranks,
        margin_p10: q(&sorted_margins, 0.1),
        margin_p50: q(&sorted_margins, 0.5),
        margin_p90: q(&sorted_margins, 0.9),
        margins,
    })
}

/// Everything one contrastive step produces.
#[derive(Debug)]
pub struct StepOutcome {
    pub loss_a_to_b: LossReport,
    pub loss_b_to_a: LossReport,
    pub receipt_a: InsertReceipt,
    pub receipt_b: InsertReceipt,
    pub sim_a_to_b: SimilarityMatrix,
    pub sim_b_to_a: SimilarityMatrix,
}

/// One optimization-step evaluation: insert momentum features into the
/// opposite pools, compute batch-vs-pool similarities, label each row with
/// its partner's insertion position, and evaluate symmetric InfoNCE.
#[allow(clippy::too_many_arguments)]
pub fn contrastive_step(
    state_a: &mut PoolState,
    state_b: &mut PoolState,
    batch_a: &[FeatureVector],
    batch_b: &[FeatureVector],
    momentum_a: &[FeatureVector],
    momentum_b: &[FeatureVector],
    cfg: &AngleNormConfig,
    route: SimilarityRoute,
    hier_config: &HierarchyConfig,
    seed_value: u64,
) -> Result<StepOutcome> {
    cfg.validate()?;
    let b = batch_a.len();
    if batch_b.len() != b || momentum_a.len() != b || momentum_b.len() != b {
        return Err(Error::invalid(
            "batch and momentum feature lists must have equal lengths",
        ));
    }

    let receipt_b = insert_or_bootstrap(state_b, momentum_b, hier_config, seed_value)?;
    let receipt_a = insert_or_bootstrap(state_a, momentum_a, hier_config, seed_value)?;

    let idx_b = state_b.index.as_ref().expect("insert established an index");
    let mut sim_a_to_b =
        batch_similarity(idx_b, &state_b.pool, &state_b.aux, batch_a, cfg, route)?;
    sim_a_to_b.labels = Some(receipt_b.positions.iter().map(|&p| p as u32).collect());

    let idx_a = state_a.index.as_ref().expect("insert established an index");
    let mut sim_b_to_a =
        batch_similarity(idx_a, &state_a.pool, &state_a.aux, batch_b, cfg, route)?;
    sim_b_to_a.labels = Some(receipt_a.positions.iter().map(|&p| p as u32).collect());

    let loss_a_to_b = info_nce(&sim_a_to_b, cfg)?;
    let loss_b_to_a = info_nce(&sim_b_to_a, cfg)?;
    Ok(StepOutcome {
        loss_a_to_b,
        loss_b_to_a,
        receipt_a,
        receipt_b,
        sim_a_to_b,
        sim_b_to_a,
    })
}

fn insert_or_bootstrap(
    state: &mut PoolState,
    momentum: &[FeatureVector],
    hier_config: &HierarchyConfig,
    seed_value: u64,
) -> Result<InsertReceipt> {
    if state.index.is_none() {
        state.bootstrap_insert(momentum, hier_config, seed_value)
    } else {
        state.insert_batch(momentum)
    }
}
