//! Run configuration: defaults, config-file overrides, then CLI flags.
//!
//! The effective configuration is echoed into every command's JSON output so
//! runs are self-describing.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use geodist_core::hierarchy::{default_leaf_threshold, HierarchyConfig};
use geodist_core::similarity::AngleNormConfig;
use geodist_core::MetricKind;

/// Every tunable in one place. Defaults are the reference values: pool
/// capacity 65536, 256 clusters, 5 k-means iterations, 8 neighbors, 2
/// layers, rebuild period 100, truncation at 4*pi, cosine metric.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub capacity: usize,
    pub clusters: usize,
    pub kmeans_iters: usize,
    pub neighbors: usize,
    pub layers: usize,
    pub t0: u64,
    pub max_angle: f64,
    pub temperature: f64,
    pub metric: String,
    pub leaf_threshold: usize,
    /// Simple-manifold threshold; `None` means `sqrt(dim)` at use time.
    pub delta: Option<f64>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            capacity: 65536,
            clusters: 256,
            kmeans_iters: 5,
            neighbors: 8,
            layers: 2,
            t0: 100,
            max_angle: 4.0 * std::f64::consts::PI,
            temperature: 0.07,
            metric: "cosine".to_string(),
            leaf_threshold: default_leaf_threshold(8),
            delta: None,
            seed: 0,
        }
    }
}

/// CLI-level overrides; `None` keeps the file/default value.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct ConfigOverrides {
    /// Flat key=value config file, lowest-precedence overrides.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long)]
    pub capacity: Option<usize>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub kmeans_iters: Option<usize>,
    #[arg(long)]
    pub neighbors: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    /// Full index rebuild period in steps.
    #[arg(long)]
    pub t0: Option<u64>,
    #[arg(long)]
    pub max_angle: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Trivial distance metric: cosine or euclidean.
    #[arg(long)]
    pub trivial_metric: Option<String>,
    #[arg(long)]
    pub leaf_threshold: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl RunConfig {
    /// defaults < config file < CLI flags.
    pub fn resolve(overrides: &ConfigOverrides) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &overrides.config {
            cfg.apply_file(path)?;
        }
        macro_rules! take {
            ($field:ident, $src:expr) => {
                if let Some(v) = $src {
                    cfg.$field = v;
                }
            };
        }
        take!(capacity, overrides.capacity);
        take!(clusters, overrides.clusters);
        take!(kmeans_iters, overrides.kmeans_iters);
        take!(layers, overrides.layers);
        take!(t0, overrides.t0);
        take!(max_angle, overrides.max_angle);
        take!(temperature, overrides.temperature);
        take!(seed, overrides.seed);
        if let Some(v) = overrides.neighbors {
            cfg.neighbors = v;
            // The leaf threshold tracks the neighbor count unless pinned.
            if overrides.leaf_threshold.is_none() {
                cfg.leaf_threshold = default_leaf_threshold(v);
            }
        }
        if let Some(v) = overrides.leaf_threshold {
            cfg.leaf_threshold = v;
        }
        if let Some(m) = &overrides.trivial_metric {
            MetricKind::parse(m).map_err(|e| anyhow::anyhow!("{e}"))?;
            cfg.metric = m.clone();
        }
        if let Some(d) = overrides.delta {
            cfg.delta = Some(d);
        }
        Ok(cfg)
    }

    fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("config line {} is not key=value: '{raw}'", lineno + 1);
            };
            let key = key.trim();
            let value = value.trim();
            let parse_err = |what: &str| format!("config line {}: bad {what}", lineno + 1);
            match key {
                "capacity" => self.capacity = value.parse().context(parse_err("capacity"))?,
                "clusters" => self.clusters = value.parse().context(parse_err("clusters"))?,
                "kmeans_iters" => {
                    self.kmeans_iters = value.parse().context(parse_err("kmeans_iters"))?
                }
                "neighbors" => self.neighbors = value.parse().context(parse_err("neighbors"))?,
                "layers" => self.layers = value.parse().context(parse_err("layers"))?,
                "t0" => self.t0 = value.parse().context(parse_err("t0"))?,
                "max_angle" => self.max_angle = value.parse().context(parse_err("max_angle"))?,
                "temperature" => {
                    self.temperature = value.parse().context(parse_err("temperature"))?
                }
                "metric" => {
                    MetricKind::parse(value).map_err(|e| anyhow::anyhow!("{e}"))?;
                    self.metric = value.to_string();
                }
                "leaf_threshold" => {
                    self.leaf_threshold = value.parse().context(parse_err("leaf_threshold"))?
                }
                "delta" => self.delta = Some(value.parse().context(parse_err("delta"))?),
                "seed" => self.seed = value.parse().context(parse_err("seed"))?,
                other => bail!("config line {}: unknown key '{other}'", lineno + 1),
            }
        }
        Ok(())
    }

    pub fn metric_kind(&self) -> MetricKind {
        MetricKind::parse(&self.metric).expect("metric validated at resolve time")
    }

    pub fn hierarchy_config(&self) -> HierarchyConfig {
        HierarchyConfig {
            layers: self.layers,
            clusters_per_node: self.clusters,
            kmeans_iters: self.kmeans_iters,
            neighbors: self.neighbors,
            metric: self.metric_kind(),
            leaf_size_threshold: self.leaf_threshold,
        }
    }

    pub fn angle_config(&self) -> AngleNormConfig {
        AngleNormConfig {
            max_angle: self.max_angle,
            temperature: self.temperature,
        }
    }
}
