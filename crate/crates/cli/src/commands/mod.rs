pub mod bench;
pub mod bounds;
pub mod build;
pub mod gen;
pub mod oracle;
pub mod query;
pub mod simulate;

use anyhow::{Context, Result};
use std::path::Path;

use geodist_core::metrics::FeatureVector;

/// Load an embedding file, failing with context on the path.
pub fn load_embeddings(path: &Path) -> Result<(Vec<FeatureVector>, Option<String>)> {
    geodist_core::io::read_embeddings_file(path)
        .with_context(|| format!("loading embeddings from {}", path.display()))
}

/// Write one serializable value as a single JSON line on stdout.
pub fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}
