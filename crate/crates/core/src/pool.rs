//! Circular feature pool with incremental index maintenance.
//!
//! The pool is a fixed-capacity FIFO of feature vectors (the momentum
//! queue). Inserted vectors do not become graph nodes: they attach to their
//! nearest leaf center of the current index, and three cursor-aligned aux
//! queues record the attachment (the index queue K), the distance to the
//! attachment center, and the full distance row to all leaf centers. A full
//! index rebuild runs every `rebuild_period` steps and refreshes all aux
//! rows from scratch.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hierarchy::{build_index, HierarchicalIndex, HierarchyConfig};
use crate::metrics::{normalize, FeatureVector, MetricKind};
use crate::seed;

/// Fixed-capacity circular store of feature vectors.
#[derive(Debug, Clone)]
pub struct FeaturePool {
    capacity: usize,
    dim: usize,
    metric: MetricKind,
    storage: Vec<f64>,
    write_cursor: usize,
    filled: usize,
    epoch_counter: u64,
    rebuild_period: u64,
    rebuild_count: u64,
    insert_stamps: Vec<u64>,
    total_inserts: u64,
}

impl FeaturePool {
    pub fn new(capacity: usize, dim: usize, metric: MetricKind, rebuild_period: u64) -> Result<Self> {
        if capacity == 0 || dim == 0 {
            return Err(Error::invalid("capacity and dim must be >= 1"));
        }
        if rebuild_period == 0 {
            return Err(Error::invalid("rebuild_period must be >= 1"));
        }
        Ok(Self {
            capacity,
            dim,
            metric,
            storage: vec![0.0; capacity * dim],
            write_cursor: 0,
            filled: 0,
            epoch_counter: 0,
            rebuild_period,
            rebuild_count: 0,
            insert_stamps: vec![0; capacity],
            total_inserts: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn filled(&self) -> usize {
        self.filled
    }

    pub fn is_full(&self) -> bool {
        self.filled == self.capacity
    }

    pub fn write_cursor(&self) -> usize {
        self.write_cursor
    }

    pub fn epoch(&self) -> u64 {
        self.epoch_counter
    }

    pub fn rebuild_period(&self) -> u64 {
        self.rebuild_period
    }

    pub fn rebuild_count(&self) -> u64 {
        self.rebuild_count
    }

    pub fn total_inserts(&self) -> u64 {
        self.total_inserts
    }

    pub fn slot(&self, i: usize) -> &[f64] {
        &self.storage[i * self.dim..(i + 1) * self.dim]
    }

    pub fn feature(&self, i: usize) -> FeatureVector {
        FeatureVector::new(self.slot(i).to_vec()).expect("pool slots hold validated vectors")
    }

    /// Current contents as a point list, slot order, filled slots only.
    pub fn points(&self) -> Vec<FeatureVector> {
        (0..self.filled).map(|i| self.feature(i)).collect()
    }

    pub(crate) fn stamp(&self, i: usize) -> u64 {
        self.insert_stamps[i]
    }

    /// Reassemble a pool from checkpoint fields.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        capacity: usize,
        dim: usize,
        metric: MetricKind,
        storage: Vec<f64>,
        write_cursor: usize,
        filled: usize,
        epoch_counter: u64,
        rebuild_period: u64,
        rebuild_count: u64,
        insert_stamps: Vec<u64>,
        total_inserts: u64,
    ) -> Result<Self> {
        if storage.len() != capacity * dim || insert_stamps.len() != capacity {
            return Err(Error::CorruptFile("pool arrays do not match capacity".into()));
        }
        if rebuild_period == 0 {
            return Err(Error::CorruptFile("rebuild_period must be >= 1".into()));
        }
        Ok(Self {
            capacity,
            dim,
            metric,
            storage,
            write_cursor,
            filled,
            epoch_counter,
            rebuild_period,
            rebuild_count,
            insert_stamps,
            total_inserts,
        })
    }
}

/// Cursor-aligned per-slot attachment data (K, nearest-center distance, and
/// the slot's D_o row).
#[derive(Debug, Clone, Default)]
pub struct AuxQueues {
    pub bottom_center_index: Vec<u32>,
    pub bottom_center_dist: Vec<f64>,
    pub d_o_rows: Vec<Vec<f64>>,
}

impl AuxQueues {
    pub fn new(capacity: usize) -> Self {
        Self {
            bottom_center_index: vec![u32::MAX; capacity],
            bottom_center_dist: vec![f64::INFINITY; capacity],
            d_o_rows: vec![Vec::new(); capacity],
        }
    }
}

/// Slots written by one insert, in write order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InsertReceipt {
    pub positions: Vec<usize>,
}

/// One snapshot entry: slot id, stored vector, and age (1 = newest insert).
#[derive(Debug, Clone)]
pub struct SnapshotEntry {
    pub slot: usize,
    pub vector: FeatureVector,
    pub age: u64,
}

/// Write a batch at successive cursor positions (wrapping, overwriting the
/// oldest entries) and attach each new vector to the index's nearest leaf
/// center, updating all three aux queues eagerly.
pub fn insert_batch(
    pool: &mut FeaturePool,
    aux: &mut AuxQueues,
    idx: &HierarchicalIndex,
    batch: &[FeatureVector],
) -> Result<InsertReceipt> {
    if batch.len() > pool.capacity {
        return Err(Error::invalid(format!(
            "batch of {} exceeds pool capacity {}",
            batch.len(),
            pool.capacity
        )));
    }
    let prepared = prepare_batch(pool, batch)?;
    let mut positions = Vec::with_capacity(prepared.len());
    for v in &prepared {
        let (center, dist, row) = idx.attach_row(v)?;
        let slot = write_slot(pool, v);
        aux.bottom_center_index[slot] = center as u32;
        aux.bottom_center_dist[slot] = dist;
        aux.d_o_rows[slot] = row;
        positions.push(slot);
    }
    Ok(InsertReceipt { positions })
}

/// Validate dims and, under the cosine metric, unit-normalize at ingestion.
fn prepare_batch(pool: &FeaturePool, batch: &[FeatureVector]) -> Result<Vec<FeatureVector>> {
    batch
        .iter()
        .map(|v| {
            if v.dim() != pool.dim {
                return Err(Error::DimensionMismatch {
                    expected: pool.dim,
                    got: v.dim(),
                });
            }
            match pool.metric {
                MetricKind::Cosine => normalize(v),
                MetricKind::Euclidean => Ok(v.clone()),
            }
        })
        .collect()
}

fn write_slot(pool: &mut FeaturePool, v: &FeatureVector) -> usize {
    let slot = pool.write_cursor;
    pool.storage[slot * pool.dim..(slot + 1) * pool.dim].copy_from_slice(v.as_slice());
    pool.total_inserts += 1;
    pool.insert_stamps[slot] = pool.total_inserts;
    pool.write_cursor = (pool.write_cursor + 1) % pool.capacity;
    pool.filled = (pool.filled + 1).min(pool.capacity);
    slot
}

/// Oldest-first view of the pool contents.
pub fn snapshot(pool: &FeaturePool) -> Vec<SnapshotEntry> {
    let mut entries: Vec<SnapshotEntry> = (0..pool.filled)
        .map(|slot| SnapshotEntry {
            slot,
            vector: pool.feature(slot),
            age: pool.total_inserts - pool.insert_stamps[slot] + 1,
        })
        .collect();
    entries.sort_by_key(|e| std::cmp::Reverse(e.age));
    entries
}

/// A pool, its aux queues, and the index they attach to.
#[derive(Debug)]
pub struct PoolState {
    pub pool: FeaturePool,
    pub aux: AuxQueues,
    pub index: Option<HierarchicalIndex>,
}

impl PoolState {
    pub fn new(capacity: usize, dim: usize, metric: MetricKind, rebuild_period: u64) -> Result<Self> {
        Ok(Self {
            pool: FeaturePool::new(capacity, dim, metric, rebuild_period)?,
            aux: AuxQueues::new(capacity),
            index: None,
        })
    }

    pub fn index(&self) -> Option<&HierarchicalIndex> {
        self.index.as_ref()
    }

    /// Insert against the current index. Fails when no index exists yet;
    /// use [`PoolState::bootstrap_insert`] for the very first batch.
    pub fn insert_batch(&mut self, batch: &[FeatureVector]) -> Result<InsertReceipt> {
        let idx = self
            .index
            .as_ref()
            .ok_or_else(|| Error::Inconsistent("no index built; rebuild first".into()))?;
        insert_batch(&mut self.pool, &mut self.aux, idx, batch)
    }

    /// First-use path: write the batch without attachments, then build the
    /// index over the pool contents, which refreshes every slot's aux row.
    pub fn bootstrap_insert(
        &mut self,
        batch: &[FeatureVector],
        config: &HierarchyConfig,
        seed_value: u64,
    ) -> Result<InsertReceipt> {
        if batch.len() > self.pool.capacity {
            return Err(Error::invalid(format!(
                "batch of {} exceeds pool capacity {}",
                batch.len(),
                self.pool.capacity
            )));
        }
        let prepared = prepare_batch(&self.pool, batch)?;
        let positions = prepared
            .iter()
            .map(|v| write_slot(&mut self.pool, v))
            .collect();
        self.rebuild_now(config, seed_value)?;
        Ok(InsertReceipt { positions })
    }

    /// Unconditional rebuild over the current pool contents (slot order).
    /// While the pool holds fewer points than `clusters_per_node`, a flat
    /// one-layer index over whatever exists is built instead.
    pub fn rebuild_now(&mut self, config: &HierarchyConfig, seed_value: u64) -> Result<()> {
        if self.pool.filled == 0 {
            return Err(Error::EmptyInput("pool"));
        }
        let effective = if self.pool.filled < config.clusters_per_node {
            config.flat_for(self.pool.filled)
        } else {
            config.clone()
        };
        self.pool.rebuild_count += 1;
        let derived = seed::mix(seed_value, self.pool.rebuild_count);
        let idx = build_index(&self.pool.points(), &effective, derived)?;
        for slot in 0..self.pool.filled {
            self.aux.bottom_center_index[slot] = idx.point_leaf()[slot];
            self.aux.bottom_center_dist[slot] = idx.point_bottom_dist()[slot];
            self.aux.d_o_rows[slot] = idx.d_o_row(slot).to_vec();
        }
        self.index = Some(idx);
        Ok(())
    }

    /// Advance the step counter; every `rebuild_period` steps, rebuild the
    /// index over the current contents and refresh all aux queues. Returns
    /// whether a rebuild ran.
    pub fn maybe_rebuild(&mut self, config: &HierarchyConfig, seed_value: u64) -> Result<bool> {
        if self.pool.filled == 0 {
            return Err(Error::EmptyInput("pool"));
        }
        self.pool.epoch_counter += 1;
        if self.pool.epoch_counter % self.pool.rebuild_period == 0 {
            self.rebuild_now(config, seed_value)?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub fn snapshot(&self) -> Vec<SnapshotEntry> {
        snapshot(&self.pool)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::normalize;
    use crate::seed;

    fn unit_points(n: usize, dim: usize, s: u64) -> Vec<FeatureVector> {
        let mut rng = seed::rng(s, 41);
        (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..dim).map(|_| seed::gaussian(&mut rng)).collect();
                normalize(&FeatureVector::new(raw).unwrap()).unwrap()
            })
            .collect()
    }

    fn small_config() -> HierarchyConfig {
        HierarchyConfig {
            layers: 2,
            clusters_per_node: 8,
            neighbors: 3,
            leaf_size_threshold: 4,
            ..HierarchyConfig::default()
        }
    }

    #[test]
    fn empty_pool_insert_of_three_fills_first_slots() {
        let mut state = PoolState::new(16, 6, MetricKind::Cosine, 10).unwrap();
        let batch = unit_points(3, 6, 1);
        let receipt = state.bootstrap_insert(&batch, &small_config(), 7).unwrap();
        assert_eq!(receipt.positions, vec![0, 1, 2]);
        assert_eq!(state.pool.filled(), 3);
    }

    #[test]
    fn full_pool_wraps_cursor_and_keeps_filled_stable() {
        let mut state = PoolState::new(8, 5, MetricKind::Cosine, 100).unwrap();
        let seedful = unit_points(8, 5, 2);
        state.bootstrap_insert(&seedful, &small_config(), 3).unwrap();
        assert!(state.pool.is_full());
        // Move the cursor to 6.
        let more = unit_points(6, 5, 9);
        state.insert_batch(&more).unwrap();
        assert_eq!(state.pool.write_cursor(), 6);
        let batch = unit_points(4, 5, 4);
        let receipt = state.insert_batch(&batch).unwrap();
        assert_eq!(receipt.positions, vec![6, 7, 0, 1]);
        assert_eq!(state.pool.filled(), 8);
    }

    #[test]
    fn inserted_point_self_query_pays_both_center_legs() {
        let mut state = PoolState::new(32, 6, MetricKind::Cosine, 100).unwrap();
        let base = unit_points(20, 6, 5);
        state.bootstrap_insert(&base, &small_config(), 11).unwrap();
        let newcomers = unit_points(3, 6, 77);
        let receipt = state.insert_batch(&newcomers).unwrap();
        let idx = state.index.as_ref().unwrap();
        for (v, &slot) in newcomers.iter().zip(&receipt.positions) {
            let stored = state.pool.feature(slot);
            let d = state.aux.bottom_center_dist[slot];
            // Out-of-graph query of the point against its own slot: both the
            // query leg and the stored row leg pay the hop to the center.
            let (c, d_near) = idx.nearest_bottom_center(&stored).unwrap();
            assert_eq!(c as u32, state.aux.bottom_center_index[slot]);
            assert_eq!(d_near.to_bits(), d.to_bits());
            let total = d_near + state.aux.d_o_rows[slot][c];
            assert_eq!(total.to_bits(), (d + d).to_bits());
            let _ = v;
        }
    }

    #[test]
    fn rebuild_schedule_fires_on_period_multiples() {
        let mut state = PoolState::new(64, 6, MetricKind::Cosine, 100).unwrap();
        state
            .bootstrap_insert(&unit_points(16, 6, 3), &small_config(), 5)
            .unwrap();
        let count_before = state.pool.rebuild_count();
        for t in 1..=199u64 {
            let rebuilt = state.maybe_rebuild(&small_config(), 5).unwrap();
            assert_eq!(rebuilt, t % 100 == 0, "step {t}");
        }
        assert_eq!(state.pool.rebuild_count(), count_before + 1);
    }

    #[test]
    fn rebuild_refreshes_every_slot_consistently() {
        let mut state = PoolState::new(48, 6, MetricKind::Cosine, 4).unwrap();
        state
            .bootstrap_insert(&unit_points(10, 6, 8), &small_config(), 21)
            .unwrap();
        for round in 0..12u64 {
            state.insert_batch(&unit_points(5, 6, 100 + round)).unwrap();
            state.maybe_rebuild(&small_config(), 21).unwrap();
        }
        let idx = state.index.as_ref().unwrap();
        let l = idx.leaf_count();
        for slot in 0..state.pool.filled() {
            let c = state.aux.bottom_center_index[slot] as usize;
            let d = state.aux.bottom_center_dist[slot];
            let row = &state.aux.d_o_rows[slot];
            assert_eq!(row.len(), l);
            assert_eq!(row[c].to_bits(), d.to_bits());
            for j in 0..l {
                assert_eq!(row[j].to_bits(), (d + idx.leaf_cross(c, j)).to_bits());
            }
        }
    }

    #[test]
    fn snapshot_is_fifo_oldest_first() {
        let mut state = PoolState::new(4, 5, MetricKind::Cosine, 100).unwrap();
        let vs = unit_points(5, 5, 6);
        state.bootstrap_insert(&vs[..4], &small_config(), 2).unwrap();
        state.insert_batch(&vs[4..]).unwrap();
        let snap = state.snapshot();
        assert_eq!(snap.len(), 4);
        // a was evicted; order is b, c, d, e.
        let expected_slots = vec![1usize, 2, 3, 0];
        let got: Vec<usize> = snap.iter().map(|e| e.slot).collect();
        assert_eq!(got, expected_slots);
        for w in snap.windows(2) {
            assert!(w[0].age > w[1].age, "ages must strictly decrease");
        }
    }

    #[test]
    fn snapshot_of_empty_pool_is_empty() {
        let state = PoolState::new(4, 3, MetricKind::Euclidean, 10).unwrap();
        assert!(state.snapshot().is_empty());
    }

    #[test]
    fn dim_mismatch_is_rejected() {
        let mut state = PoolState::new(8, 5, MetricKind::Cosine, 10).unwrap();
        state
            .bootstrap_insert(&unit_points(4, 5, 1), &small_config(), 1)
            .unwrap();
        let bad = unit_points(1, 4, 2);
        assert!(state.insert_batch(&bad).is_err());
    }
}
