//! Geodesic distance computation for large pools of feature vectors.
//!
//! Feature vectors are connected into a k-NN graph whose shortest paths
//! approximate geodesic distances along the data manifold. To keep that
//! tractable for large pools, points are clustered layer by layer and
//! shortest paths are only computed between cluster centers; point-level
//! distances decompose through the cluster hierarchy. A circular feature
//! pool supports incremental updates between periodic index rebuilds, and
//! a similarity harness turns accumulated path lengths into logits for
//! contrastive mining experiments.
//!
//! Modules:
//! - [`metrics`]: feature vectors and pairwise (trivial) distance metrics
//! - [`graph`]: k-NN graphs, Floyd-Warshall APSP, connectivity bounds
//! - [`hierarchy`]: layered cluster index, in-pool and out-of-graph queries
//! - [`pool`]: fixed-capacity circular feature pool with incremental updates
//! - [`similarity`]: angle normalization, similarity matrices, InfoNCE
//! - [`oracle`]: brute-force exact geodesic reference tables
//! - [`synth`]: deterministic synthetic dataset generators
//! - [`io`]: binary file formats (embeddings, index container, checkpoints)

pub mod error;
pub mod graph;
pub mod hierarchy;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod pool;
pub mod seed;
pub mod similarity;
pub mod synth;

pub use error::{Error, Result};
pub use metrics::{FeatureVector, MetricKind};
