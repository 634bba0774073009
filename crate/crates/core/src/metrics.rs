//! Feature vectors and trivial (pairwise) distance metrics.
//!
//! A *trivial* metric depends only on the two endpoints, never on other
//! routing points. Two are provided: cosine distance in angular form
//! (`arccos` of the inner product, so path segments add as angles) and
//! Euclidean distance. The simple-manifold diagnostic checks whether a
//! local region is flat enough that geodesic and trivial metrics agree
//! within a threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when clamping inner products to `[-1, 1]` before `acos`.
const DOT_CLAMP_SLACK: f64 = 1e-6;

/// Tolerance on the L2 norm of vectors that claim to be unit-normalized.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// A fixed-dimension feature vector with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("feature vector"));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(i));
            }
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_NORM_TOLERANCE
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Trivial distance metric selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricKind {
    /// Angular cosine distance `arccos(<a, b>)` on unit vectors, in `[0, pi]`.
    Cosine,
    /// Euclidean (L2) distance.
    Euclidean,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Cosine => "cosine",
            MetricKind::Euclidean => "euclidean",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(MetricKind::Cosine),
            "euclidean" => Ok(MetricKind::Euclidean),
            other => Err(Error::invalid(format!("unknown metric '{other}'"))),
        }
    }
}

/// Threshold for the simple-manifold diagnostic. Defaults to `sqrt(dim)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimpleManifoldThreshold {
    pub delta: f64,
}

impl SimpleManifoldThreshold {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::invalid(format!("delta must be > 0, got {delta}")));
        }
        Ok(Self { delta })
    }

    pub fn default_for_dim(dim: usize) -> Self {
        Self {
            delta: (dim as f64).sqrt(),
        }
    }
}

/// Pairwise trivial distance between validated inputs.
///
/// Cosine requires both vectors unit-normalized; inner products that drift
/// outside `[-1, 1]` by at most `1e-6` are clamped, so no NaN is ever
/// produced.
pub fn trivial_distance(a: &FeatureVector, b: &FeatureVector, kind: MetricKind) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if kind == MetricKind::Cosine {
        for v in [a, b] {
            let n = v.norm();
            if (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::NotUnitNormalized(n));
            }
        }
    }
    Ok(distance_unchecked(a.as_slice(), b.as_slice(), kind))
}

/// Distance on raw slices, skipping validation. Callers must guarantee equal
/// dims, finite entries, and (for cosine) unit norms within tolerance.
pub(crate) fn distance_unchecked(a: &[f64], b: &[f64], kind: MetricKind) -> f64 {
    match kind {
        MetricKind::Cosine => {
            // Identical inputs must report exactly zero: the self inner
            // product of a stored vector can land just off 1 (norms are only
            // unit within tolerance) and acos would turn that into ~1e-4.
            if a == b {
                return 0.0;
            }
            let mut dot = 0.0;
            let mut na2 = 0.0;
            let mut nb2 = 0.0;
            for (x, y) in a.iter().zip(b) {
                dot += x * y;
                na2 += x * x;
                nb2 += y * y;
            }
            // Dividing by the actual norms measures the angle between the
            // stored directions even when norms drift by the allowed 1e-6,
            // which keeps path sums bounded below by direct angles.
            let cos = dot / (na2 * nb2).sqrt();
            debug_assert!(
                cos.abs() <= 1.0 + DOT_CLAMP_SLACK,
                "normalized inner product {cos} outside clamp slack"
            );
            cos.clamp(-1.0, 1.0).acos()
        }
        MetricKind::Euclidean => {
            let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            sq.sqrt()
        }
    }
}

/// Validate a point set: consistent dimensions, and unit norms under the
/// cosine metric.
pub(crate) fn validate_point_set(points: &[FeatureVector], kind: MetricKind) -> Result<()> {
    let dim = points
        .first()
        .map(FeatureVector::dim)
        .ok_or(Error::EmptyInput("points"))?;
    for p in points {
        if p.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.dim(),
            });
        }
        if kind == MetricKind::Cosine && !p.is_unit() {
            return Err(Error::NotUnitNormalized(p.norm()));
        }
    }
    Ok(())
}

/// Unit-normalize a vector, preserving direction.
pub fn normalize(v: &FeatureVector) -> Result<FeatureVector> {
    let n = v.norm();
    if n <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    FeatureVector::new(v.as_slice().iter().map(|x| x / n).collect())
}

/// True iff every pair of points satisfies `|d_g - d_t| < delta`.
///
/// `geo` is a row-major `n x n` matrix of geodesic values covering all pairs;
/// unreachable pairs (`+inf`) never satisfy a finite threshold.
pub fn simple_manifold_check(
    points: &[FeatureVector],
    geo: &[f64],
    kind: MetricKind,
    thr: SimpleManifoldThreshold,
) -> Result<bool> {
    let n = points.len();
    if geo.len() != n * n {
        return Err(Error::invalid(format!(
            "geodesic matrix has {} entries, expected {}",
            geo.len(),
            n * n
        )));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let dt = trivial_distance(&points[i], &points[j], kind)?;
            let dg = geo[i * n + j];
            if !((dg - dt).abs() < thr.delta) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
