//! Deterministic Lloyd k-means with k-means++-style seeding.
//!
//! Runs exactly the requested number of Lloyd iterations (no early exit) so
//! builds cost the same every time, then re-assigns once against the final
//! centers. All randomness comes from the explicit seed. Centroid
//! coordinates are rounded to f32 precision so serialized centers reload
//! bit-exactly; the `k == n` identity case keeps the input points verbatim.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{distance_unchecked, FeatureVector, MetricKind};
use crate::seed;

pub struct KmeansResult {
    pub centers: Vec<FeatureVector>,
    pub assignment: Vec<u32>,
}

pub fn kmeans(
    points: &[FeatureVector],
    k: usize,
    iters: usize,
    seed_value: u64,
    kind: MetricKind,
) -> Result<KmeansResult> {
    let n = points.len();
    if n == 0 {
        return Err(Error::EmptyInput("kmeans points"));
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "k = {k} must be in 1..={n} for {n} points"
        )));
    }
    let dim = points[0].dim();

    if k == n {
        // Degenerate clustering: every point is its own center, verbatim.
        return Ok(KmeansResult {
            centers: points.to_vec(),
            assignment: (0..n as u32).collect(),
        });
    }

    let mut rng = seed::rng(seed_value, 0);
    let mut centers = seed_plus_plus(points, k, kind, &mut rng);

    for _ in 0..iters {
        let assignment = assign(points, &centers, kind);
        centers = update_centers(points, &assignment, &centers, k, dim, kind);
    }

    for c in &mut centers {
        *c = quantize_f32(c);
    }
    let assignment = assign(points, &centers, kind);
    Ok(KmeansResult {
        centers,
        assignment,
    })
}

/// k-means++ seeding: first center uniform, each next center drawn with
/// probability proportional to squared distance from the chosen set. When
/// all remaining mass is zero (duplicates), fall back to the lowest
/// unchosen index.
fn seed_plus_plus(
    points: &[FeatureVector],
    k: usize,
    kind: MetricKind,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<FeatureVector> {
    let n = points.len();
    let first = seed::uniform_index(rng, n);
    let mut chosen = vec![false; n];
    chosen[first] = true;
    let mut centers = vec![points[first].clone()];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| {
            let d = distance_unchecked(p.as_slice(), points[first].as_slice(), kind);
            d * d
        })
        .collect();

    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = seed::uniform01(rng) * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| {
                d2.iter()
                    .rposition(|&w| w > 0.0)
                    .expect("positive total implies a positive weight")
            })
        } else {
            (0..n).find(|&i| !chosen[i]).expect("k <= n")
        };
        chosen[pick] = true;
        centers.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            let d = distance_unchecked(p.as_slice(), points[pick].as_slice(), kind);
            d2[i] = d2[i].min(d * d);
        }
    }
    centers
}

/// Nearest-center assignment; ties break toward the lower center index.
fn assign(points: &[FeatureVector], centers: &[FeatureVector], kind: MetricKind) -> Vec<u32> {
    points
        .par_iter()
        .map(|p| {
            let mut best = 0u32;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = distance_unchecked(p.as_slice(), center.as_slice(), kind);
                if d < best_d {
                    best_d = d;
                    best = c as u32;
                }
            }
            best
        })
        .collect()
}

fn update_centers(
    points: &[FeatureVector],
    assignment: &[u32],
    previous: &[FeatureVector],
    k: usize,
    dim: usize,
    kind: MetricKind,
) -> Vec<FeatureVector> {
    let mut sums = vec![0.0_f64; k * dim];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignment) {
        let a = a as usize;
        counts[a] += 1;
        for (s, v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(p.as_slice()) {
            *s += v;
        }
    }

    let mut centers = Vec::with_capacity(k);
    let mut empties = Vec::new();
    for c in 0..k {
        if counts[c] == 0 {
            empties.push(c);
            centers.push(previous[c].clone());
            continue;
        }
        let mean: Vec<f64> = sums[c * dim..(c + 1) * dim]
            .iter()
            .map(|s| s / counts[c] as f64)
            .collect();
        match kind {
            MetricKind::Euclidean => {
                centers.push(FeatureVector::new(mean).expect("finite mean"));
            }
            MetricKind::Cosine => {
                let norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    centers.push(
                        FeatureVector::new(mean.iter().map(|v| v / norm).collect())
                            .expect("finite mean"),
                    );
                } else {
                    // Antipodal members cancel; treat like an empty cluster.
                    empties.push(c);
                    centers.push(previous[c].clone());
                }
            }
        }
    }

    // Re-seed each empty cluster from the farthest point of the currently
    // largest cluster; deterministic tie-breaks keep builds reproducible.
    let mut assignment = assignment.to_vec();
    for &c in &empties {
        let largest = counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .expect("k >= 1");
        if counts[largest] <= 1 {
            continue;
        }
        let mut far_point = None;
        let mut far_d = -1.0;
        for (i, &a) in assignment.iter().enumerate() {
            if a as usize == largest {
                let d =
                    distance_unchecked(points[i].as_slice(), centers[largest].as_slice(), kind);
                if d > far_d {
                    far_d = d;
                    far_point = Some(i);
                }
            }
        }
        if let Some(i) = far_point {
            centers[c] = points[i].clone();
            counts[largest] -= 1;
            counts[c] += 1;
            assignment[i] = c as u32;
        }
    }

    centers
}

fn quantize_f32(v: &FeatureVector) -> FeatureVector {
    FeatureVector::new(v.as_slice().iter().map(|&x| x as f32 as f64).collect())
        .expect("quantization preserves finiteness")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::normalize;

    fn fv(values: &[f64]) -> FeatureVector {
        FeatureVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn separated_duplicates_recover_both_centers() {
        let u = fv(&[1.0, 0.0]);
        let v = fv(&[0.0, 1.0]);
        let points = vec![u.clone(), u.clone(), v.clone(), v.clone()];
        let r = kmeans(&points, 2, 5, 1, MetricKind::Cosine).unwrap();
        assert_eq!(r.assignment[0], r.assignment[1]);
        assert_eq!(r.assignment[2], r.assignment[3]);
        assert_ne!(r.assignment[0], r.assignment[2]);
        for (c, members) in [(r.assignment[0], &u), (r.assignment[2], &v)] {
            let center = &r.centers[c as usize];
            let d = distance_unchecked(center.as_slice(), members.as_slice(), MetricKind::Cosine);
            assert!(d < 1e-6, "center off by {d}");
        }
    }

    #[test]
    fn k_equals_n_is_identity() {
        let points: Vec<_> = (0..5).map(|i| fv(&[i as f64, 1.0])).collect();
        let r = kmeans(&points, 5, 5, 9, MetricKind::Euclidean).unwrap();
        assert_eq!(r.assignment, vec![0, 1, 2, 3, 4]);
        assert_eq!(r.centers, points);
    }

    #[test]
    fn gaussian_blobs_recover_labels() {
        let mut rng = crate::seed::rng(17, 2);
        let blob_centers = [[10.0, 0.0, 0.0], [0.0, 10.0, 0.0], [0.0, 0.0, 10.0]];
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (b, c) in blob_centers.iter().enumerate() {
            for _ in 0..100 {
                let p: Vec<f64> = c
                    .iter()
                    .map(|&x| x + 0.2 * crate::seed::gaussian(&mut rng))
                    .collect();
                points.push(fv(&p));
                labels.push(b);
            }
        }
        let r = kmeans(&points, 3, 5, 4, MetricKind::Euclidean).unwrap();
        // Map each kmeans cluster to its majority blob and count agreement.
        let mut majority = [[0usize; 3]; 3];
        for (i, &a) in r.assignment.iter().enumerate() {
            majority[a as usize][labels[i]] += 1;
        }
        let agree: usize = majority
            .iter()
            .map(|row| row.iter().max().unwrap())
            .sum();
        assert!(agree as f64 >= 0.99 * points.len() as f64, "agreement {agree}/300");
    }

    #[test]
    fn deterministic_under_seed() {
        let points: Vec<_> = (0..40)
            .map(|i| {
                normalize(&fv(&[
                    (i as f64 * 0.7).sin(),
                    (i as f64 * 0.3).cos(),
                    0.5,
                ]))
                .unwrap()
            })
            .collect();
        let a = kmeans(&points, 6, 5, 42, MetricKind::Cosine).unwrap();
        let b = kmeans(&points, 6, 5, 42, MetricKind::Cosine).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.centers, b.centers);
        let c = kmeans(&points, 6, 5, 43, MetricKind::Cosine).unwrap();
        let _ = c; // different seed must still be valid; values may differ
    }

    #[test]
    fn rejects_empty_and_oversized_k() {
        assert!(kmeans(&[], 1, 5, 0, MetricKind::Euclidean).is_err());
        let points = vec![fv(&[0.0]), fv(&[1.0])];
        assert!(kmeans(&points, 3, 5, 0, MetricKind::Euclidean).is_err());
        assert!(kmeans(&points, 0, 5, 0, MetricKind::Euclidean).is_err());
    }

    #[test]
    fn centers_are_f32_representable() {
        let points: Vec<_> = (0..30)
            .map(|i| fv(&[(i as f64).sqrt(), (i as f64 * 1.3).ln_1p()]))
            .collect();
        let r = kmeans(&points, 4, 5, 8, MetricKind::Euclidean).unwrap();
        for c in &r.centers {
            for &x in c.as_slice() {
                assert_eq!(x, x as f32 as f64);
            }
        }
    }
}
