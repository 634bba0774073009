use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};

use geodist_core::io;
use geodist_core::synth::{self, Dataset};

use super::print_json;

#[derive(Args)]
pub struct GenArgs {
    #[command(subcommand)]
    kind: GenKind,
}

#[derive(Subcommand)]
enum GenKind {
    /// Swiss roll with intrinsic (arc length, height) coordinates.
    SwissRoll {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        embed_dim: usize,
        /// Unit-normalize points (for cosine-metric runs).
        #[arg(long)]
        normalize: bool,
        #[arg(long)]
        out: PathBuf,
        /// Also write a CSV copy (datasets up to 10k points).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Gaussian blobs on the unit sphere, labels = blob ids.
    SphereBlobs {
        #[arg(long, default_value_t = 3)]
        blobs: usize,
        #[arg(long, default_value_t = 100)]
        per_blob: usize,
        #[arg(long, default_value_t = 0.05)]
        spread: f64,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Paired modalities: A = swiss-roll base, B = smooth warp of A.
    Paired {
        #[arg(long, default_value_t = 2048)]
        n: usize,
        /// Base manifold noise (applied to both modalities).
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Isotropic per-pair noise on modality B.
        #[arg(long, default_value_t = 0.05)]
        pair_noise: f64,
        /// Warp amplitude across the roll sheet.
        #[arg(long, default_value_t = 12.0)]
        warp: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        embed_dim: usize,
        #[arg(long)]
        out_a: PathBuf,
        #[arg(long)]
        out_b: PathBuf,
    },
}

pub fn run(args: GenArgs) -> Result<()> {
    match args.kind {
        GenKind::SwissRoll {
            n,
            noise,
            seed,
            embed_dim,
            normalize,
            out,
            csv,
        } => {
            let mut data = synth::gen_swiss_roll(n, noise, seed, embed_dim)?;
            if normalize {
                data = data.unit_normalized_copy()?;
            }
            write_dataset(&data, &out, csv.as_deref(), "swiss-roll")?;
            print_json(&synth::DatasetSummary::from(&data))
        }
        GenKind::SphereBlobs {
            blobs,
            per_blob,
            spread,
            dim,
            seed,
            out,
            csv,
        } => {
            let data = synth::gen_sphere_blobs(blobs, per_blob, spread, dim, seed)?;
            write_dataset(&data, &out, csv.as_deref(), "sphere-blobs")?;
            print_json(&synth::DatasetSummary::from(&data))
        }
        GenKind::Paired {
            n,
            noise,
            pair_noise,
            warp,
            seed,
            embed_dim,
            out_a,
            out_b,
        } => {
            let base = synth::gen_swiss_roll(n, noise, seed, embed_dim)?;
            let (a, b, _pairs) = synth::gen_paired_modalities(&base, pair_noise, warp, seed)?;
            write_dataset(&a, &out_a, None, "paired-a")?;
            write_dataset(&b, &out_b, None, "paired-b")?;
            print_json(&serde_json::json!({
                "a": synth::DatasetSummary::from(&a),
                "b": synth::DatasetSummary::from(&b),
                "pairing": "row r of A matches row r of B",
            }))
        }
    }
}

fn write_dataset(
    data: &Dataset,
    out: &std::path::Path,
    csv: Option<&std::path::Path>,
    kind: &str,
) -> Result<()> {
    let metadata = serde_json::json!({
        "kind": kind,
        "seed": data.seed,
        "unit_normalized": data.unit_normalized,
    })
    .to_string();
    io::write_embeddings_file(out, &data.points, Some(&metadata))
        .with_context(|| format!("writing {}", out.display()))?;
    if let Some(intrinsic) = &data.intrinsic {
        let sidecar = sidecar_path(out, "intrinsic");
        let rows: Vec<geodist_core::metrics::FeatureVector> = intrinsic
            .iter()
            .map(|row| geodist_core::metrics::FeatureVector::new(row.clone()))
            .collect::<geodist_core::Result<_>>()?;
        io::write_embeddings_file(&sidecar, &rows, None)
            .with_context(|| format!("writing {}", sidecar.display()))?;
    }
    if let Some(csv_path) = csv {
        if data.len() > 10_000 {
            bail!("CSV export is limited to 10k points, dataset has {}", data.len());
        }
        let mut text = String::new();
        for (i, p) in data.points.iter().enumerate() {
            let coords: Vec<String> = p.as_slice().iter().map(|v| v.to_string()).collect();
            if let Some(labels) = &data.labels {
                text.push_str(&format!("{},{}\n", coords.join(","), labels[i]));
            } else {
                text.push_str(&coords.join(","));
                text.push('\n');
            }
        }
        std::fs::write(csv_path, text)?;
    }
    Ok(())
}

/// `roll.gemb` -> `roll.intrinsic.gemb`.
pub fn sidecar_path(path: &std::path::Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let ext = path.extension().map(|e| e.to_string_lossy().to_string());
    let name = match ext {
        Some(ext) => format!("{stem}.{tag}.{ext}"),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}
