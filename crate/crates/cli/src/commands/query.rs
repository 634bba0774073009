use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;

use geodist_core::hierarchy::{GeodesicResult, HierarchicalIndex};
use geodist_core::io;
use geodist_core::similarity::{angle_normalize, AngleNormConfig};

use super::load_embeddings;
use crate::config::{ConfigOverrides, RunConfig};

#[derive(Args)]
pub struct QueryArgs {
    /// Index container to query.
    #[arg(long)]
    index: PathBuf,
    /// Inline pairs "i,j;k,l".
    #[arg(long)]
    pairs: Option<String>,
    /// File with one "i,j" pair per line.
    #[arg(long)]
    pairs_file: Option<PathBuf>,
    /// All in-pool pairs.
    #[arg(long)]
    all: bool,
    /// Embedding file of out-of-graph query vectors; emits one line per
    /// (query row, pool point).
    #[arg(long)]
    out_of_graph: Option<PathBuf>,
    /// Write the queried distances as a row-major f64 little-endian matrix
    /// (requires --all or --out-of-graph).
    #[arg(long)]
    dump: Option<PathBuf>,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

pub fn run(args: QueryArgs) -> Result<()> {
    let cfg = RunConfig::resolve(&args.overrides)?;
    let angle = cfg.angle_config();
    let idx = io::read_index_file(&args.index)
        .with_context(|| format!("loading index {}", args.index.display()))?;
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());

    let modes = usize::from(args.pairs.is_some())
        + usize::from(args.pairs_file.is_some())
        + usize::from(args.all)
        + usize::from(args.out_of_graph.is_some());
    if modes != 1 {
        bail!("choose exactly one of --pairs, --pairs-file, --all, --out-of-graph");
    }

    if args.all {
        let n = idx.point_count();
        let mut matrix = args.dump.as_ref().map(|_| Vec::with_capacity(n * n));
        for i in 0..n {
            for j in 0..n {
                let r = idx.query_in_pool(i, j)?;
                emit(&mut out, i, j, &r, &angle)?;
                if let Some(m) = matrix.as_mut() {
                    m.push(r.angle_sum);
                }
            }
        }
        if let (Some(path), Some(m)) = (&args.dump, matrix) {
            write_matrix(path, &m)?;
        }
    } else if let Some(path) = &args.out_of_graph {
        let (queries, _) = load_embeddings(path)?;
        let n = idx.point_count();
        let mut matrix = args.dump.as_ref().map(|_| Vec::with_capacity(queries.len() * n));
        for (qi, q) in queries.iter().enumerate() {
            for j in 0..n {
                let r = idx.query_out_of_graph(q, j)?;
                emit(&mut out, qi, j, &r, &angle)?;
                if let Some(m) = matrix.as_mut() {
                    m.push(r.angle_sum);
                }
            }
        }
        if let (Some(path), Some(m)) = (&args.dump, matrix) {
            write_matrix(path, &m)?;
        }
    } else {
        if args.dump.is_some() {
            bail!("--dump requires --all or --out-of-graph");
        }
        let pairs = collect_pairs(&args)?;
        for (i, j) in pairs {
            let r = idx.query_in_pool(i, j)?;
            emit(&mut out, i, j, &r, &angle)?;
        }
    }
    out.flush()?;
    let _: &HierarchicalIndex = &idx;
    Ok(())
}

fn collect_pairs(args: &QueryArgs) -> Result<Vec<(usize, usize)>> {
    let text = if let Some(inline) = &args.pairs {
        inline.replace(';', "\n")
    } else {
        let path = args.pairs_file.as_ref().expect("mode checked");
        std::fs::read_to_string(path)
            .with_context(|| format!("reading pairs from {}", path.display()))?
    };
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((i, j)) = line.split_once(',') else {
            bail!("pair line {} is not 'i,j': '{line}'", lineno + 1);
        };
        pairs.push((
            i.trim().parse().with_context(|| format!("bad index '{i}'"))?,
            j.trim().parse().with_context(|| format!("bad index '{j}'"))?,
        ));
    }
    Ok(pairs)
}

fn emit<W: Write>(
    out: &mut W,
    i: usize,
    j: usize,
    r: &GeodesicResult,
    angle: &AngleNormConfig,
) -> Result<()> {
    let similarity = angle_normalize(r, angle);
    writeln!(out, "{i},{j},{},{},{similarity}", r.angle_sum, r.reachable)?;
    Ok(())
}

pub fn write_matrix(path: &std::path::Path, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes).with_context(|| format!("writing matrix {}", path.display()))
}

pub fn read_matrix(path: &std::path::Path) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() % 8 != 0 {
        bail!("matrix file {} is not a multiple of 8 bytes", path.display());
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks of 8")))
        .collect())
}
