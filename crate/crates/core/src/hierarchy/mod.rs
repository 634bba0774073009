//! Hierarchical cluster index for geodesic distance queries.
//!
//! The pool is clustered layer by layer: the top layer clusters every point,
//! each deeper layer re-clusters within its parent cluster until clusters are
//! small enough to treat as locally flat. Each cluster's children carry a
//! k-NN graph over their centers with a precomputed shortest-path matrix.
//!
//! A point-to-point query backtracks both points' center chains from the
//! bottom up to the deepest layer where the chains share a graph instance,
//! adds the shortest path between the two centers there, and accumulates the
//! per-layer legs `d(x, C_k(x)) = d(x, C_{k+1}(x)) + d_g(C_{k+1}(x),
//! C_{k+1}(C_k(x))) + d_t(C_k(x), C_{k+1}(C_k(x)))`, bottoming out at the
//! trivial distance from the point to its leaf center.
//!
//! Every point also carries its leaf (bottom) center, the distance to it,
//! and a precomputed row of distances to all leaf centers, which makes
//! out-of-graph queries a nearest-leaf-center scan plus one row lookup.

mod kmeans;

pub use kmeans::{kmeans, KmeansResult};

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    build_knn_graph, floyd_apsp, validate_bounds, ApspMatrix, BoundsReport, KnnGraph,
};
use crate::metrics::{distance_unchecked, validate_point_set, FeatureVector, MetricKind};
use crate::seed;

const NO_CENTER: u32 = u32::MAX;

/// Build parameters. Defaults follow the reference configuration: two
/// layers, 256 clusters per node, 5 clustering iterations, 8 graph
/// neighbors, cosine metric.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub layers: usize,
    pub clusters_per_node: usize,
    pub kmeans_iters: usize,
    pub neighbors: usize,
    pub metric: MetricKind,
    /// Clusters at or below this size are leaves: their points use the
    /// trivial metric to the cluster center directly.
    pub leaf_size_threshold: usize,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        let neighbors = 8;
        Self {
            layers: 2,
            clusters_per_node: 256,
            kmeans_iters: 5,
            neighbors,
            metric: MetricKind::Cosine,
            leaf_size_threshold: default_leaf_threshold(neighbors),
        }
    }
}

/// Below `2k + 1` members a k-NN graph over sub-centers degenerates.
pub fn default_leaf_threshold(neighbors: usize) -> usize {
    2 * neighbors + 1
}

impl HierarchyConfig {
    pub fn validate(&self, point_count: usize) -> Result<()> {
        for (name, v) in [
            ("layers", self.layers),
            ("clusters_per_node", self.clusters_per_node),
            ("kmeans_iters", self.kmeans_iters),
            ("neighbors", self.neighbors),
            ("leaf_size_threshold", self.leaf_size_threshold),
        ] {
            if v < 1 {
                return Err(Error::invalid(format!("{name} must be >= 1")));
            }
        }
        if point_count < self.clusters_per_node {
            return Err(Error::invalid(format!(
                "{point_count} points cannot form {} clusters",
                self.clusters_per_node
            )));
        }
        Ok(())
    }

    /// Flat variant used while a pool is still warming up: one layer, every
    /// point its own center.
    pub fn flat_for(&self, point_count: usize) -> Self {
        Self {
            layers: 1,
            clusters_per_node: point_count,
            ..self.clone()
        }
    }
}

/// One graph over the centers of a single cluster's children (the top layer
/// has exactly one instance spanning all centers).
#[derive(Debug)]
pub struct GraphInstance {
    /// Center id at the previous layer, `u32::MAX` for the root instance.
    pub parent: u32,
    /// First center id of this instance within its layer.
    pub start: u32,
    pub len: u32,
    pub graph: KnnGraph,
    pub apsp: ApspMatrix,
}

/// One layer of centers, ordered top (index 0) to bottom.
#[derive(Debug)]
pub struct Layer {
    pub(crate) centers: Vec<FeatureVector>,
    /// Per pool point: assigned center id at this layer, `u32::MAX` once the
    /// point's branch ended above.
    pub(crate) point_assignment: Vec<u32>,
    /// Per center: parent center id at the previous layer.
    pub(crate) center_parent: Vec<u32>,
    pub(crate) instances: Vec<GraphInstance>,
    pub(crate) instance_of_center: Vec<u32>,
    /// Per center: whether the cluster was re-clustered at the next layer.
    pub(crate) subdivided: Vec<bool>,
    /// Per subdivided center: its nearest child center id at the next layer,
    /// and the trivial-metric hop to it.
    pub(crate) nearest_child: Vec<u32>,
    pub(crate) nearest_child_hop: Vec<f64>,
}

impl Layer {
    pub fn center_count(&self) -> usize {
        self.centers.len()
    }

    pub fn instances(&self) -> &[GraphInstance] {
        &self.instances
    }
}

/// Accumulated path length plus reachability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeodesicResult {
    /// Path length in trivial-metric units (accumulated angles under the
    /// cosine metric); `+inf` when unreachable.
    pub angle_sum: f64,
    pub reachable: bool,
}

impl GeodesicResult {
    pub fn zero() -> Self {
        Self {
            angle_sum: 0.0,
            reachable: true,
        }
    }

    pub fn unreachable() -> Self {
        Self {
            angle_sum: f64::INFINITY,
            reachable: false,
        }
    }

    fn from_sum(angle_sum: f64) -> Self {
        Self {
            angle_sum,
            reachable: angle_sum.is_finite(),
        }
    }
}

/// Query-time event counters; reads are concurrent-safe.
#[derive(Debug, Default)]
pub struct QueryStats {
    queries: AtomicU64,
    parent_fallbacks: AtomicU64,
    unreachable: AtomicU64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct QueryStatsSnapshot {
    pub queries: u64,
    /// Queries whose stop-layer centers were disconnected, answered through
    /// the shared parent center instead.
    pub parent_fallbacks: u64,
    pub unreachable: u64,
}

impl QueryStats {
    pub fn snapshot(&self) -> QueryStatsSnapshot {
        QueryStatsSnapshot {
            queries: self.queries.load(Ordering::Relaxed),
            parent_fallbacks: self.parent_fallbacks.load(Ordering::Relaxed),
            unreachable: self.unreachable.load(Ordering::Relaxed),
        }
    }
}

/// Immutable hierarchical index over a fixed point set.
#[derive(Debug)]
pub struct HierarchicalIndex {
    config: HierarchyConfig,
    dim: usize,
    point_count: usize,
    layers: Vec<Layer>,
    /// Leaf enumeration: (layer, center id), ordered by layer then id.
    leaf_list: Vec<(u32, u32)>,
    /// Per layer, per center: leaf id, or `u32::MAX` for subdivided centers.
    leaf_id_per_layer: Vec<Vec<u32>>,
    leaf_centers: Vec<FeatureVector>,
    leaf_chains: Vec<Vec<(u32, u32)>>,
    /// Per point: leaf center id (the index queue K at build time).
    point_leaf: Vec<u32>,
    /// Per point: trivial distance to its leaf center.
    point_bottom_dist: Vec<f64>,
    /// Leaf-to-leaf hierarchical distances, row-major L x L.
    leaf_cross: Vec<f64>,
    /// Per point row of distances to every leaf center, row-major N x L.
    d_o: Vec<f64>,
    warnings: Vec<String>,
    build_fallback_events: u64,
    stats: QueryStats,
}

/// Fixed-order three-term sum; the two climb legs are ordered by value so
/// results are exactly symmetric in the query arguments.
fn canonical3(base: f64, a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    base + lo + hi
}

/// Cluster the points into a layered index and precompute per-layer center
/// graphs, shortest paths, leaf attachments and the point-to-leaf-center
/// distance matrix.
pub fn build_index(
    points: &[FeatureVector],
    config: &HierarchyConfig,
    seed_value: u64,
) -> Result<HierarchicalIndex> {
    config.validate(points.len())?;
    validate_point_set(points, config.metric)?;
    let n = points.len();
    let dim = points[0].dim();
    let mut warnings = Vec::new();

    // Cluster layer by layer. Layer 0 covers all points; each subsequent
    // layer re-clusters within every parent cluster that is still above the
    // leaf size threshold.
    struct LayerDraft {
        centers: Vec<FeatureVector>,
        point_assignment: Vec<u32>,
        center_parent: Vec<u32>,
        subdivided: Vec<bool>,
    }

    let top = kmeans(points, config.clusters_per_node, config.kmeans_iters, seed::mix(seed_value, 0), config.metric)?;
    let top_len = top.centers.len();
    let mut drafts = vec![LayerDraft {
        centers: top.centers,
        point_assignment: top.assignment,
        center_parent: vec![NO_CENTER; top_len],
        subdivided: vec![false; top_len],
    }];

    for depth in 1..config.layers {
        let prev_centers = drafts[depth - 1].centers.len();
        let mut members: Vec<Vec<u32>> = vec![Vec::new(); prev_centers];
        for (p, &a) in drafts[depth - 1].point_assignment.iter().enumerate() {
            if a != NO_CENTER {
                members[a as usize].push(p as u32);
            }
        }

        let mut centers = Vec::new();
        let mut point_assignment = vec![NO_CENTER; n];
        let mut center_parent = Vec::new();
        let mut subdivided_prev = vec![false; prev_centers];
        for (parent, member_list) in members.iter().enumerate() {
            let pop = member_list.len();
            if pop <= config.leaf_size_threshold || pop < 2 {
                continue;
            }
            let sub_k = config.clusters_per_node.min(pop - 1);
            let sub_points: Vec<FeatureVector> = member_list
                .iter()
                .map(|&p| points[p as usize].clone())
                .collect();
            let stream = ((depth as u64) << 32) | parent as u64;
            let km = kmeans(
                &sub_points,
                sub_k,
                config.kmeans_iters,
                seed::mix(seed_value, stream),
                config.metric,
            )?;
            subdivided_prev[parent] = true;
            let base = centers.len() as u32;
            center_parent.extend(std::iter::repeat_n(parent as u32, km.centers.len()));
            centers.extend(km.centers);
            for (local, &p) in member_list.iter().enumerate() {
                point_assignment[p as usize] = base + km.assignment[local];
            }
        }
        if centers.is_empty() {
            break;
        }
        drafts[depth - 1].subdivided = subdivided_prev;
        let len = centers.len();
        drafts.push(LayerDraft {
            centers,
            point_assignment,
            center_parent,
            subdivided: vec![false; len],
        });
    }

    // Per-layer graph instances: one per parent cluster (one root instance
    // at the top), each with a k-NN graph over its centers and full APSP.
    let mut layers = Vec::with_capacity(drafts.len());
    for (depth, draft) in drafts.iter().enumerate() {
        let mut ranges: Vec<(u32, u32, u32)> = Vec::new(); // (parent, start, len)
        if depth == 0 {
            ranges.push((NO_CENTER, 0, draft.centers.len() as u32));
        } else {
            let mut start = 0usize;
            while start < draft.centers.len() {
                let parent = draft.center_parent[start];
                let mut end = start + 1;
                while end < draft.centers.len() && draft.center_parent[end] == parent {
                    end += 1;
                }
                ranges.push((parent, start as u32, (end - start) as u32));
                start = end;
            }
        }

        let mut clamped = 0usize;
        let instances: Vec<GraphInstance> = ranges
            .into_par_iter()
            .map(|(parent, start, len)| -> Result<GraphInstance> {
                let slice = &draft.centers[start as usize..(start + len) as usize];
                let sigma = config.neighbors.min(len as usize - 1);
                let graph = if sigma == 0 {
                    KnnGraph::from_edges(len as usize, Vec::new(), 0)?
                } else {
                    build_knn_graph(slice, sigma, config.metric)?
                };
                let apsp = floyd_apsp(&graph);
                Ok(GraphInstance {
                    parent,
                    start,
                    len,
                    graph,
                    apsp,
                })
            })
            .collect::<Result<_>>()?;
        for inst in &instances {
            if (inst.len as usize) > 1 && inst.graph.neighbor_count() < config.neighbors {
                clamped += 1;
            }
        }
        if clamped > 0 {
            warnings.push(format!(
                "layer {depth}: clamped neighbor count below {} in {clamped} instance(s)",
                config.neighbors
            ));
        }

        let mut instance_of_center = vec![0u32; draft.centers.len()];
        for (idx, inst) in instances.iter().enumerate() {
            for c in inst.start..inst.start + inst.len {
                instance_of_center[c as usize] = idx as u32;
            }
        }

        layers.push(Layer {
            centers: draft.centers.clone(),
            point_assignment: draft.point_assignment.clone(),
            center_parent: draft.center_parent.clone(),
            instances,
            instance_of_center,
            subdivided: draft.subdivided.clone(),
            nearest_child: vec![NO_CENTER; draft.centers.len()],
            nearest_child_hop: vec![0.0; draft.centers.len()],
        });
    }

    finish_index(config.clone(), dim, n, layers, points, warnings)
}

/// For every subdivided center, find the child center nearest to it; the
/// climb through a layer exits via that child.
fn link_nearest_children(layers: &mut [Layer], metric: MetricKind) {
    for depth in 1..layers.len() {
        let (upper, lower) = layers.split_at_mut(depth);
        let parent_layer = &mut upper[depth - 1];
        let child_layer = &lower[0];
        for inst in &child_layer.instances {
            let parent = inst.parent as usize;
            let pvec = parent_layer.centers[parent].as_slice();
            let mut best = NO_CENTER;
            let mut best_d = f64::INFINITY;
            for c in inst.start..inst.start + inst.len {
                let d = distance_unchecked(pvec, child_layer.centers[c as usize].as_slice(), metric);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            parent_layer.nearest_child[parent] = best;
            parent_layer.nearest_child_hop[parent] = best_d;
        }
    }
}

/// Build tail: assemble the leaf structures, then attach every point and
/// fill its D_o row.
fn finish_index(
    config: HierarchyConfig,
    dim: usize,
    point_count: usize,
    layers: Vec<Layer>,
    points: &[FeatureVector],
    warnings: Vec<String>,
) -> Result<HierarchicalIndex> {
    let mut idx = assemble_structures(config, dim, point_count, layers, warnings);

    let attach: Vec<(u32, f64)> = (0..point_count)
        .into_par_iter()
        .map(|p| {
            let chain = idx.point_chain(p);
            let &(l, c) = chain.last().expect("every point has a top assignment");
            let leaf = idx.leaf_id_per_layer[l as usize][c as usize];
            debug_assert_ne!(leaf, NO_CENTER, "chain must end at a leaf");
            let d = distance_unchecked(
                points[p].as_slice(),
                idx.layers[l as usize].centers[c as usize].as_slice(),
                idx.config.metric,
            );
            (leaf, d)
        })
        .collect();
    idx.point_leaf = attach.iter().map(|&(l, _)| l).collect();
    idx.point_bottom_dist = attach.iter().map(|&(_, d)| d).collect();
    let d_o: Vec<Vec<f64>> = (0..point_count)
        .into_par_iter()
        .map(|p| idx.row_from(idx.point_leaf[p] as usize, idx.point_bottom_dist[p]))
        .collect();
    idx.d_o = d_o.into_iter().flatten().collect();
    Ok(idx)
}

/// Reconstruct an index from deserialized parts. The leaf cross-distance
/// table is recomputed (center coordinates are f32-exact, so it reproduces
/// bit-identically) and the stored attachment arrays are verified against it.
#[allow(clippy::too_many_arguments)]
pub(crate) fn from_parts(
    config: HierarchyConfig,
    dim: usize,
    point_count: usize,
    layers: Vec<Layer>,
    warnings: Vec<String>,
    point_leaf: Vec<u32>,
    point_bottom_dist: Vec<f64>,
    d_o: Vec<f64>,
) -> Result<HierarchicalIndex> {
    let mut idx = assemble_structures(config, dim, point_count, layers, warnings);
    let l = idx.leaf_count();
    if point_leaf.len() != point_count
        || point_bottom_dist.len() != point_count
        || d_o.len() != point_count * l
    {
        return Err(Error::CorruptFile(
            "attachment arrays do not match the declared point and leaf counts".into(),
        ));
    }
    for (p, &leaf) in point_leaf.iter().enumerate() {
        if leaf as usize >= l {
            return Err(Error::CorruptFile(format!(
                "point {p} references leaf {leaf} of {l}"
            )));
        }
        let expected = idx.row_from(leaf as usize, point_bottom_dist[p]);
        if d_o[p * l..(p + 1) * l] != expected[..] {
            return Err(Error::CorruptFile(format!(
                "stored D_o row for point {p} is inconsistent with the leaf table"
            )));
        }
    }
    idx.point_leaf = point_leaf;
    idx.point_bottom_dist = point_bottom_dist;
    idx.d_o = d_o;
    Ok(idx)
}

/// Shared assembly: nearest-child links, leaf enumeration, leaf chains, and
/// the leaf-to-leaf cross-distance table.
fn assemble_structures(
    config: HierarchyConfig,
    dim: usize,
    point_count: usize,
    mut layers: Vec<Layer>,
    warnings: Vec<String>,
) -> HierarchicalIndex {
    link_nearest_children(&mut layers, config.metric);
    let mut leaf_list = Vec::new();
    let mut leaf_id_per_layer: Vec<Vec<u32>> = layers
        .iter()
        .map(|l| vec![NO_CENTER; l.center_count()])
        .collect();
    for (depth, layer) in layers.iter().enumerate() {
        for c in 0..layer.center_count() {
            if !layer.subdivided[c] {
                leaf_id_per_layer[depth][c] = leaf_list.len() as u32;
                leaf_list.push((depth as u32, c as u32));
            }
        }
    }
    let leaf_centers: Vec<FeatureVector> = leaf_list
        .iter()
        .map(|&(l, c)| layers[l as usize].centers[c as usize].clone())
        .collect();
    let leaf_chains: Vec<Vec<(u32, u32)>> = leaf_list
        .iter()
        .map(|&(l, c)| {
            let mut chain = Vec::with_capacity(l as usize + 1);
            let mut cur = c;
            let mut depth = l as i64;
            while depth >= 0 {
                chain.push((depth as u32, cur));
                cur = layers[depth as usize].center_parent[cur as usize];
                depth -= 1;
            }
            chain.reverse();
            chain
        })
        .collect();

    let mut idx = HierarchicalIndex {
        config,
        dim,
        point_count,
        layers,
        leaf_list,
        leaf_id_per_layer,
        leaf_centers,
        leaf_chains,
        point_leaf: Vec::new(),
        point_bottom_dist: Vec::new(),
        leaf_cross: Vec::new(),
        d_o: Vec::new(),
        warnings,
        build_fallback_events: 0,
        stats: QueryStats::default(),
    };

    // Leaf cross-distance table via the same layered backtracking queries
    // use, with zero bottom legs.
    let leaf_count = idx.leaf_list.len();
    let rows: Vec<(Vec<f64>, u64)> = (0..leaf_count)
        .into_par_iter()
        .map(|u| {
            let mut fallbacks = 0u64;
            let row: Vec<f64> = (0..leaf_count)
                .map(|v| {
                    if u == v {
                        0.0
                    } else {
                        let (d, fb) = idx.object_distance(
                            &idx.leaf_chains[u],
                            0.0,
                            &idx.leaf_chains[v],
                            0.0,
                        );
                        if fb {
                            fallbacks += 1;
                        }
                        d
                    }
                })
                .collect();
            (row, fallbacks)
        })
        .collect();
    let mut leaf_cross = Vec::with_capacity(leaf_count * leaf_count);
    let mut build_fallbacks = 0;
    for (row, fb) in rows {
        leaf_cross.extend(row);
        build_fallbacks += fb;
    }
    idx.leaf_cross = leaf_cross;
    idx.build_fallback_events = build_fallbacks;
    idx
}

impl HierarchicalIndex {
    pub fn config(&self) -> &HierarchyConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point_count(&self) -> usize {
        self.point_count
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_list.len()
    }

    pub fn leaf_centers(&self) -> &[FeatureVector] {
        &self.leaf_centers
    }

    pub fn point_leaf(&self) -> &[u32] {
        &self.point_leaf
    }

    pub fn point_bottom_dist(&self) -> &[f64] {
        &self.point_bottom_dist
    }

    /// Distance row of point `i` to every leaf center (the D_o matrix row).
    pub fn d_o_row(&self, i: usize) -> &[f64] {
        let l = self.leaf_count();
        &self.d_o[i * l..(i + 1) * l]
    }

    pub fn leaf_cross(&self, u: usize, v: usize) -> f64 {
        self.leaf_cross[u * self.leaf_count() + v]
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn query_stats(&self) -> QueryStatsSnapshot {
        self.stats.snapshot()
    }

    pub fn build_fallback_events(&self) -> u64 {
        self.build_fallback_events
    }

    /// The top-layer center graph (the root instance).
    pub fn top_instance(&self) -> &GraphInstance {
        &self.layers[0].instances[0]
    }

    fn point_chain(&self, p: usize) -> Vec<(u32, u32)> {
        let mut chain = Vec::with_capacity(self.layers.len());
        for (depth, layer) in self.layers.iter().enumerate() {
            let a = layer.point_assignment[p];
            if a == NO_CENTER {
                break;
            }
            chain.push((depth as u32, a));
        }
        chain
    }

    /// Accumulate the climb from the chain's leaf end up to (and including)
    /// the leg that lands on `chain[to]`.
    fn climb(&self, chain: &[(u32, u32)], bottom: f64, to: usize) -> f64 {
        let mut acc = bottom;
        for pos in ((to + 1)..chain.len()).rev() {
            let (depth, c) = chain[pos];
            let (_, parent) = chain[pos - 1];
            let layer = &self.layers[depth as usize];
            let inst = &layer.instances[layer.instance_of_center[c as usize] as usize];
            let parent_layer = &self.layers[depth as usize - 1];
            let exit = parent_layer.nearest_child[parent as usize];
            debug_assert_ne!(exit, NO_CENTER);
            let dg = inst
                .apsp
                .get((c - inst.start) as usize, (exit - inst.start) as usize);
            acc += dg;
            acc += parent_layer.nearest_child_hop[parent as usize];
        }
        acc
    }

    /// Layered distance between two objects (points or leaf centers) given
    /// their center chains and bottom legs. Returns the accumulated length
    /// (`+inf` when unreachable) and whether the parent-center fallback was
    /// taken because the stop layer's centers were disconnected.
    fn object_distance(
        &self,
        chain_i: &[(u32, u32)],
        bottom_i: f64,
        chain_j: &[(u32, u32)],
        bottom_j: f64,
    ) -> (f64, bool) {
        // Deepest shared prefix; chains through a shared cluster advance
        // together, so the first difference is the stop layer.
        let mut p = 0usize;
        let limit = chain_i.len().min(chain_j.len());
        while p < limit && chain_i[p].1 == chain_j[p].1 {
            p += 1;
        }
        if p == limit {
            debug_assert_eq!(chain_i.len(), chain_j.len(), "equal chains must end together");
            // Same leaf cluster: both legs meet at the shared center.
            return (canonical3(0.0, bottom_i, bottom_j), false);
        }

        let (depth, ci) = chain_i[p];
        let (_, cj) = chain_j[p];
        let layer = &self.layers[depth as usize];
        let inst = &layer.instances[layer.instance_of_center[ci as usize] as usize];
        debug_assert_eq!(
            layer.instance_of_center[ci as usize],
            layer.instance_of_center[cj as usize],
            "divergent centers must share a graph instance"
        );
        let dg = inst
            .apsp
            .get((ci - inst.start) as usize, (cj - inst.start) as usize);
        if dg.is_finite() {
            let a = self.climb(chain_i, bottom_i, p);
            let b = self.climb(chain_j, bottom_j, p);
            return (canonical3(dg, a, b), false);
        }
        if p == 0 {
            // Disconnected at the top layer: genuinely unreachable.
            return (f64::INFINITY, false);
        }
        // Stop layer disconnected: route both legs through the shared parent
        // center one layer up.
        let a = self.climb(chain_i, bottom_i, p - 1);
        let b = self.climb(chain_j, bottom_j, p - 1);
        (canonical3(0.0, a, b), true)
    }

    /// Geodesic distance between two pool points through the hierarchy.
    pub fn query_in_pool(&self, i: usize, j: usize) -> Result<GeodesicResult> {
        for idx in [i, j] {
            if idx >= self.point_count {
                return Err(Error::IndexOutOfRange {
                    index: idx,
                    len: self.point_count,
                });
            }
        }
        self.stats.queries.fetch_add(1, Ordering::Relaxed);
        if i == j {
            return Ok(GeodesicResult::zero());
        }
        let chain_i = self.point_chain(i);
        let chain_j = self.point_chain(j);
        let (sum, fallback) = self.object_distance(
            &chain_i,
            self.point_bottom_dist[i],
            &chain_j,
            self.point_bottom_dist[j],
        );
        if fallback {
            self.stats.parent_fallbacks.fetch_add(1, Ordering::Relaxed);
        }
        if !sum.is_finite() {
            self.stats.unreachable.fetch_add(1, Ordering::Relaxed);
        }
        Ok(GeodesicResult::from_sum(sum))
    }

    /// Nearest leaf center to an arbitrary query vector; ties break toward
    /// the lower leaf id.
    pub fn nearest_bottom_center(&self, x: &FeatureVector) -> Result<(usize, f64)> {
        self.validate_query_vector(x)?;
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (c, center) in self.leaf_centers.iter().enumerate() {
            let d = distance_unchecked(x.as_slice(), center.as_slice(), self.config.metric);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        Ok((best, best_d))
    }

    /// Distance from a vector outside the graph to pool point `i`: the leg
    /// to the nearest leaf center plus that center's precomputed distance to
    /// the point.
    pub fn query_out_of_graph(&self, x: &FeatureVector, i: usize) -> Result<GeodesicResult> {
        if i >= self.point_count {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.point_count,
            });
        }
        let (c, d) = self.nearest_bottom_center(x)?;
        let total = d + self.d_o[i * self.leaf_count() + c];
        Ok(GeodesicResult::from_sum(total))
    }

    /// Attachment data for a new out-of-graph vector: nearest leaf center,
    /// the distance to it, and its full distance row to every leaf center.
    pub fn attach_row(&self, x: &FeatureVector) -> Result<(usize, f64, Vec<f64>)> {
        let (c, d) = self.nearest_bottom_center(x)?;
        Ok((c, d, self.row_from(c, d)))
    }

    /// D_o row decomposition: distance to the own leaf center plus the leaf
    /// cross-distance row. Build-time rows and incremental-insert rows go
    /// through this one expression so the consistency invariant is exact.
    pub(crate) fn row_from(&self, leaf: usize, bottom: f64) -> Vec<f64> {
        let l = self.leaf_count();
        self.leaf_cross[leaf * l..(leaf + 1) * l]
            .iter()
            .map(|&cross| bottom + cross)
            .collect()
    }

    fn validate_query_vector(&self, x: &FeatureVector) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            });
        }
        if self.config.metric == MetricKind::Cosine && !x.is_unit() {
            return Err(Error::NotUnitNormalized(x.norm()));
        }
        Ok(())
    }

    /// Structural statistics for build logs: per-layer sizes plus the
    /// connectivity-bound report of the top-layer center graph.
    pub fn build_report(&self) -> BuildReport {
        BuildReport {
            point_count: self.point_count,
            dim: self.dim,
            layer_count: self.layers.len(),
            leaf_count: self.leaf_count(),
            layer_center_counts: self.layers.iter().map(Layer::center_count).collect(),
            layer_instance_counts: self.layers.iter().map(|l| l.instances.len()).collect(),
            top_bounds: validate_bounds(&self.top_instance().graph),
            build_fallback_events: self.build_fallback_events,
            warnings: self.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildReport {
    pub point_count: usize,
    pub dim: usize,
    pub layer_count: usize,
    pub leaf_count: usize,
    pub layer_center_counts: Vec<usize>,
    pub layer_instance_counts: Vec<usize>,
    pub top_bounds: BoundsReport,
    pub build_fallback_events: u64,
    pub warnings: Vec<String>,
}
