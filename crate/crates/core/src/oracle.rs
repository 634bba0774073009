//! Brute-force exact geodesic reference.
//!
//! Builds the full k-NN graph over every point (no hierarchy) and computes
//! exact shortest paths with two independent algorithms, Floyd-Warshall and
//! per-source Dijkstra, cross-checking one against the other. The resulting
//! table anchors the approximation error measurements for the hierarchical
//! index.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ordered_float::OrderedFloat;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{build_knn_graph, floyd_apsp, ApspMatrix, KnnGraph};
use crate::hierarchy::HierarchicalIndex;
use crate::metrics::{FeatureVector, MetricKind};

/// Hard cap on the exact table size; beyond this the hierarchical index is
/// the intended tool.
pub const MAX_ORACLE_POINTS: usize = 4096;

/// Agreement required between the Floyd and Dijkstra routes.
pub const CROSS_CHECK_TOLERANCE: f64 = 1e-12;

/// Exact shortest-path table over the full point graph.
#[derive(Debug, Clone)]
pub struct ExactGeodesicTable {
    pub dist: ApspMatrix,
    pub source_graph: KnnGraph,
}

/// Single-source shortest paths; the independent check against Floyd.
pub fn dijkstra(g: &KnnGraph, source: usize) -> Vec<f64> {
    let n = g.node_count();
    let mut dist = vec![f64::INFINITY; n];
    dist[source] = 0.0;
    let mut heap: BinaryHeap<Reverse<(OrderedFloat<f64>, u32)>> = BinaryHeap::new();
    heap.push(Reverse((OrderedFloat(0.0), source as u32)));
    while let Some(Reverse((OrderedFloat(d), u))) = heap.pop() {
        let u = u as usize;
        if d > dist[u] {
            continue;
        }
        for &(v, w) in g.neighbors(u) {
            let v = v as usize;
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((OrderedFloat(nd), v as u32)));
            }
        }
    }
    dist
}

/// Exact geodesic table for at most [`MAX_ORACLE_POINTS`] points.
///
/// Both Floyd and repeated Dijkstra are run; any disagreement beyond
/// [`CROSS_CHECK_TOLERANCE`] is an internal error rather than a silently
/// wrong table.
pub fn exact_geodesic(
    points: &[FeatureVector],
    k: usize,
    kind: MetricKind,
) -> Result<ExactGeodesicTable> {
    if points.len() > MAX_ORACLE_POINTS {
        return Err(Error::TooLarge {
            got: points.len(),
            limit: MAX_ORACLE_POINTS,
        });
    }
    let graph = build_knn_graph(points, k, kind)?;
    let dist = floyd_apsp(&graph);
    cross_check(&graph, &dist)?;
    Ok(ExactGeodesicTable {
        dist,
        source_graph: graph,
    })
}

fn cross_check(graph: &KnnGraph, floyd: &ApspMatrix) -> Result<()> {
    let n = graph.node_count();
    let worst = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = dijkstra(graph, i);
            let mut max_diff = 0.0_f64;
            for (j, &dj) in row.iter().enumerate() {
                let f = floyd.get(i, j);
                if f.is_finite() != dj.is_finite() {
                    return f64::INFINITY;
                }
                if f.is_finite() {
                    max_diff = max_diff.max((f - dj).abs());
                }
            }
            max_diff
        })
        .reduce(|| 0.0, f64::max);
    if worst > CROSS_CHECK_TOLERANCE {
        return Err(Error::Inconsistent(format!(
            "Floyd and Dijkstra disagree by {worst:e}"
        )));
    }
    Ok(())
}

/// How far the hierarchical index strays from the exact table.
#[derive(Debug, Clone, Serialize)]
pub struct ApproximationReport {
    pub pair_count: usize,
    /// Pairs finite under both routes.
    pub finite_pairs: usize,
    /// Mean of hierarchical minus exact (hierarchical detours are additive,
    /// so this is expected to be nonnegative).
    pub mean_signed_diff: f64,
    pub mean_abs_diff: f64,
    pub median_rel_error: f64,
    pub p90_rel_error: f64,
    pub max_rel_error: f64,
    /// Pairs where exactly one route calls the pair reachable.
    pub reachability_disagreements: usize,
    pub disagreement_fraction: f64,
    pub unreachable_in_both: usize,
}

/// Compare hierarchical queries against an exact distance matrix over all
/// pairs.
pub fn approximation_report(
    idx: &HierarchicalIndex,
    exact: &ApspMatrix,
) -> Result<ApproximationReport> {
    let n = exact.node_count();
    if idx.point_count() != n {
        return Err(Error::invalid(format!(
            "index covers {} points but the table covers {n}",
            idx.point_count()
        )));
    }
    let mut rel_errors = Vec::new();
    let mut signed_sum = 0.0;
    let mut abs_sum = 0.0;
    let mut finite_pairs = 0usize;
    let mut disagreements = 0usize;
    let mut unreachable_both = 0usize;
    let mut pair_count = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            pair_count += 1;
            let h = idx.query_in_pool(i, j)?;
            let e = exact.get(i, j);
            match (h.reachable, e.is_finite()) {
                (true, true) => {
                    finite_pairs += 1;
                    let diff = h.angle_sum - e;
                    signed_sum += diff;
                    abs_sum += diff.abs();
                    if e > 0.0 {
                        rel_errors.push(diff.abs() / e);
                    }
                }
                (false, false) => unreachable_both += 1,
                _ => disagreements += 1,
            }
        }
    }
    rel_errors.sort_by(f64::total_cmp);
    let quantile = |q: f64| -> f64 {
        if rel_errors.is_empty() {
            0.0
        } else {
            let pos = ((rel_errors.len() - 1) as f64 * q).round() as usize;
            rel_errors[pos]
        }
    };
    Ok(ApproximationReport {
        pair_count,
        finite_pairs,
        mean_signed_diff: if finite_pairs > 0 {
            signed_sum / finite_pairs as f64
        } else {
            0.0
        },
        mean_abs_diff: if finite_pairs > 0 {
            abs_sum / finite_pairs as f64
        } else {
            0.0
        },
        median_rel_error: quantile(0.5),
        p90_rel_error: quantile(0.9),
        max_rel_error: rel_errors.last().copied().unwrap_or(0.0),
        reachability_disagreements: disagreements,
        disagreement_fraction: disagreements as f64 / pair_count.max(1) as f64,
        unreachable_in_both: unreachable_both,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{normalize, trivial_distance};
    use crate::seed;

    fn random_unit_points(n: usize, dim: usize, s: u64) -> Vec<FeatureVector> {
        let mut rng = seed::rng(s, 100);
        (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..dim).map(|_| seed::gaussian(&mut rng)).collect();
                normalize(&FeatureVector::new(raw).unwrap()).unwrap()
            })
            .collect()
    }

    fn circle(n: usize) -> Vec<FeatureVector> {
        (0..n)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / n as f64;
                FeatureVector::new(vec![t.cos(), t.sin()]).unwrap()
            })
            .collect()
    }

    #[test]
    fn ring_antipodal_distance_is_half_circumference() {
        let pts = circle(100);
        let table = exact_geodesic(&pts, 2, MetricKind::Cosine).unwrap();
        // 50 hops of 2*pi/100 each.
        let expected = 50.0 * (std::f64::consts::TAU / 100.0);
        let got = table.dist.get(0, 50);
        assert!((got - expected).abs() < 1e-6, "got {got}, want {expected}");
        assert!((got - std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn two_points_reduce_to_trivial_distance() {
        let pts = vec![
            FeatureVector::new(vec![1.0, 0.0]).unwrap(),
            normalize(&FeatureVector::new(vec![1.0, 1.0]).unwrap()).unwrap(),
        ];
        let table = exact_geodesic(&pts, 1, MetricKind::Cosine).unwrap();
        let dt = trivial_distance(&pts[0], &pts[1], MetricKind::Cosine).unwrap();
        assert_eq!(table.dist.get(0, 1), dt);
    }

    #[test]
    fn cross_check_accepts_random_instances() {
        for s in 0..10 {
            let pts = random_unit_points(48, 6, s);
            exact_geodesic(&pts, 4, MetricKind::Cosine).unwrap();
        }
    }

    #[test]
    fn table_rejects_oversized_input() {
        let pts = random_unit_points(8, 3, 0);
        // Fake the limit by checking the error path directly with a tiny cap
        // is not possible; instead assert the real cap is enforced at the
        // boundary by construction.
        assert!(MAX_ORACLE_POINTS >= pts.len());
        let err = exact_geodesic(&vec![pts[0].clone(); MAX_ORACLE_POINTS + 1], 1, MetricKind::Cosine);
        assert!(matches!(err, Err(Error::TooLarge { .. })));
    }

    #[test]
    fn geodesic_lower_bounded_by_trivial_on_sphere() {
        let pts = random_unit_points(64, 8, 7);
        let table = exact_geodesic(&pts, 6, MetricKind::Cosine).unwrap();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                let g = table.dist.get(i, j);
                if g.is_finite() {
                    let t = trivial_distance(&pts[i], &pts[j], MetricKind::Cosine).unwrap();
                    assert!(g >= t - 1e-9, "pair ({i},{j}): geodesic {g} < trivial {t}");
                }
            }
        }
    }

    #[test]
    fn increasing_k_never_increases_distances() {
        let pts = random_unit_points(72, 5, 3);
        let coarse = exact_geodesic(&pts, 3, MetricKind::Cosine).unwrap();
        let fine = exact_geodesic(&pts, 6, MetricKind::Cosine).unwrap();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                assert!(fine.dist.get(i, j) <= coarse.dist.get(i, j) + 1e-12);
            }
        }
    }
}
