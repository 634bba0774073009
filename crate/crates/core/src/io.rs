//! Binary file formats: embedding files, the index container, and pool
//! checkpoints. All integers and floats are little-endian.
//!
//! Embedding file ("GEMB", version 1): header with count and dim, then
//! `count x dim` f32 row-major, then an optional length-prefixed JSON
//! metadata block.
//!
//! Index container ("GEOX", version 1): header, build configuration, then
//! per layer: centers (f32 row-major), point assignments, center parents,
//! subdivision flags, and per graph instance its edge list and APSP matrix
//! (f64); then the per-point leaf ids K, bottom distances, and the D_o
//! matrix (f64 row-major). Derived structures (leaf enumeration, climb
//! links, the leaf cross table) are reconstructed on load; center
//! coordinates are f32-exact at build time, so reconstruction is
//! bit-faithful and round-trips preserve query answers exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{ApspMatrix, KnnGraph};
use crate::hierarchy::{self, GraphInstance, HierarchicalIndex, HierarchyConfig, Layer};
use crate::metrics::{FeatureVector, MetricKind};
use crate::pool::{AuxQueues, FeaturePool, PoolState};

const EMBED_MAGIC: &[u8; 4] = b"GEMB";
const INDEX_MAGIC: &[u8; 4] = b"GEOX";
const POOL_MAGIC: &[u8; 4] = b"GPOL";
const FORMAT_VERSION: u32 = 1;

fn w_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn w_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn w_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn w_f32<W: Write>(w: &mut W, v: f32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn r_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn r_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn r_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn r_f32<R: Read>(r: &mut R) -> Result<f32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(f32::from_le_bytes(b))
}

fn expect_magic<R: Read>(r: &mut R, magic: &[u8; 4], what: &str) -> Result<()> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    if &b != magic {
        return Err(Error::CorruptFile(format!("{what}: bad magic {b:?}")));
    }
    let version = r_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::CorruptFile(format!(
            "{what}: unsupported version {version}"
        )));
    }
    Ok(())
}

fn metric_code(m: MetricKind) -> u32 {
    match m {
        MetricKind::Cosine => 0,
        MetricKind::Euclidean => 1,
    }
}

fn metric_from_code(c: u32) -> Result<MetricKind> {
    match c {
        0 => Ok(MetricKind::Cosine),
        1 => Ok(MetricKind::Euclidean),
        other => Err(Error::CorruptFile(format!("unknown metric code {other}"))),
    }
}

// ---------------------------------------------------------------------------
// Embedding files
// ---------------------------------------------------------------------------

pub fn write_embeddings<W: Write>(
    w: &mut W,
    points: &[FeatureVector],
    metadata: Option<&str>,
) -> Result<()> {
    let count = points.len();
    let dim = points.first().map_or(0, FeatureVector::dim);
    if count > u32::MAX as usize || dim > u32::MAX as usize {
        return Err(Error::invalid("embedding file limited to u32 counts"));
    }
    w.write_all(EMBED_MAGIC)?;
    w_u32(w, FORMAT_VERSION)?;
    w_u32(w, count as u32)?;
    w_u32(w, dim as u32)?;
    for p in points {
        if p.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.dim(),
            });
        }
        for &v in p.as_slice() {
            if v.abs() > f32::MAX as f64 {
                return Err(Error::invalid(format!("value {v} exceeds f32 range")));
            }
            w_f32(w, v as f32)?;
        }
    }
    if let Some(meta) = metadata {
        w_u64(w, meta.len() as u64)?;
        w.write_all(meta.as_bytes())?;
    }
    Ok(())
}

/// Read an embedding file; values come back as f64 copies of the stored f32.
pub fn read_embeddings<R: Read>(r: &mut R) -> Result<(Vec<FeatureVector>, Option<String>)> {
    expect_magic(r, EMBED_MAGIC, "embedding file")?;
    let count = r_u32(r)? as usize;
    let dim = r_u32(r)? as usize;
    if dim == 0 && count > 0 {
        return Err(Error::CorruptFile("zero dim with nonzero count".into()));
    }
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            values.push(r_f32(r)? as f64);
        }
        points.push(FeatureVector::new(values).map_err(|e| {
            Error::CorruptFile(format!("invalid vector in embedding file: {e}"))
        })?);
    }
    let metadata = match r_u64(r) {
        Ok(len) => {
            let mut buf = vec![0u8; len as usize];
            r.read_exact(&mut buf)?;
            Some(String::from_utf8(buf).map_err(|_| {
                Error::CorruptFile("metadata block is not valid UTF-8".into())
            })?)
        }
        Err(Error::Io(e)) if e.kind() == ErrorKind::UnexpectedEof => None,
        Err(e) => return Err(e),
    };
    Ok((points, metadata))
}

pub fn write_embeddings_file(
    path: &Path,
    points: &[FeatureVector],
    metadata: Option<&str>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_embeddings(&mut w, points, metadata)?;
    w.flush()?;
    Ok(())
}

pub fn read_embeddings_file(path: &Path) -> Result<(Vec<FeatureVector>, Option<String>)> {
    let mut r = BufReader::new(File::open(path)?);
    read_embeddings(&mut r)
}

// ---------------------------------------------------------------------------
// Index container
// ---------------------------------------------------------------------------

pub fn write_index<W: Write>(w: &mut W, idx: &HierarchicalIndex) -> Result<()> {
    w.write_all(INDEX_MAGIC)?;
    w_u32(w, FORMAT_VERSION)?;
    let cfg = idx.config();
    w_u32(w, idx.dim() as u32)?;
    w_u32(w, idx.layer_count() as u32)?;
    w_u32(w, idx.point_count() as u32)?;
    w_u32(w, idx.leaf_count() as u32)?;
    w_u32(w, metric_code(cfg.metric))?;
    w_u32(w, cfg.layers as u32)?;
    w_u32(w, cfg.clusters_per_node as u32)?;
    w_u32(w, cfg.kmeans_iters as u32)?;
    w_u32(w, cfg.neighbors as u32)?;
    w_u32(w, cfg.leaf_size_threshold as u32)?;
    w_u32(w, idx.warnings().len() as u32)?;
    for warning in idx.warnings() {
        w_u32(w, warning.len() as u32)?;
        w.write_all(warning.as_bytes())?;
    }
    for layer in idx.layers() {
        w_u32(w, layer.center_count() as u32)?;
        for c in &layer.centers {
            for &v in c.as_slice() {
                w_f32(w, v as f32)?;
            }
        }
        for &a in &layer.point_assignment {
            w_u32(w, a)?;
        }
        for &p in &layer.center_parent {
            w_u32(w, p)?;
        }
        for &s in &layer.subdivided {
            w.write_all(&[u8::from(s)])?;
        }
        w_u32(w, layer.instances().len() as u32)?;
        for inst in layer.instances() {
            w_u32(w, inst.parent)?;
            w_u32(w, inst.start)?;
            w_u32(w, inst.len)?;
            w_u32(w, inst.graph.neighbor_count() as u32)?;
            w_u32(w, inst.graph.edge_count() as u32)?;
            for &(u, v, weight) in inst.graph.edges() {
                w_u32(w, u)?;
                w_u32(w, v)?;
                w_f64(w, weight)?;
            }
            for &d in inst.apsp.as_slice() {
                w_f64(w, d)?;
            }
        }
    }
    for &k in idx.point_leaf() {
        w_u32(w, k)?;
    }
    for &d in idx.point_bottom_dist() {
        w_f64(w, d)?;
    }
    for p in 0..idx.point_count() {
        for &d in idx.d_o_row(p) {
            w_f64(w, d)?;
        }
    }
    Ok(())
}

pub fn read_index<R: Read>(r: &mut R) -> Result<HierarchicalIndex> {
    expect_magic(r, INDEX_MAGIC, "index container")?;
    let dim = r_u32(r)? as usize;
    let layer_count = r_u32(r)? as usize;
    let point_count = r_u32(r)? as usize;
    let leaf_count = r_u32(r)? as usize;
    let metric = metric_from_code(r_u32(r)?)?;
    let config = HierarchyConfig {
        layers: r_u32(r)? as usize,
        clusters_per_node: r_u32(r)? as usize,
        kmeans_iters: r_u32(r)? as usize,
        neighbors: r_u32(r)? as usize,
        metric,
        leaf_size_threshold: r_u32(r)? as usize,
    };
    let warning_count = r_u32(r)? as usize;
    let mut warnings = Vec::with_capacity(warning_count);
    for _ in 0..warning_count {
        let len = r_u32(r)? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        warnings.push(
            String::from_utf8(buf)
                .map_err(|_| Error::CorruptFile("warning text is not UTF-8".into()))?,
        );
    }

    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let center_count = r_u32(r)? as usize;
        let mut centers = Vec::with_capacity(center_count);
        for _ in 0..center_count {
            let mut values = Vec::with_capacity(dim);
            for _ in 0..dim {
                values.push(r_f32(r)? as f64);
            }
            centers.push(FeatureVector::new(values).map_err(|e| {
                Error::CorruptFile(format!("invalid center vector: {e}"))
            })?);
        }
        let mut point_assignment = Vec::with_capacity(point_count);
        for _ in 0..point_count {
            point_assignment.push(r_u32(r)?);
        }
        let mut center_parent = Vec::with_capacity(center_count);
        for _ in 0..center_count {
            center_parent.push(r_u32(r)?);
        }
        let mut subdivided = Vec::with_capacity(center_count);
        for _ in 0..center_count {
            let mut b = [0u8; 1];
            r.read_exact(&mut b)?;
            subdivided.push(b[0] != 0);
        }
        let instance_count = r_u32(r)? as usize;
        let mut instances = Vec::with_capacity(instance_count);
        let mut instance_of_center = vec![0u32; center_count];
        for inst_id in 0..instance_count {
            let parent = r_u32(r)?;
            let start = r_u32(r)?;
            let len = r_u32(r)?;
            let sigma = r_u32(r)? as usize;
            let edge_count = r_u32(r)? as usize;
            let mut edges = Vec::with_capacity(edge_count);
            for _ in 0..edge_count {
                let u = r_u32(r)?;
                let v = r_u32(r)?;
                let weight = r_f64(r)?;
                edges.push((u, v, weight));
            }
            let graph = KnnGraph::from_edges(len as usize, edges, sigma)
                .map_err(|e| Error::CorruptFile(format!("bad instance graph: {e}")))?;
            let mut apsp = Vec::with_capacity(len as usize * len as usize);
            for _ in 0..len as usize * len as usize {
                apsp.push(r_f64(r)?);
            }
            let apsp = ApspMatrix::from_raw(len as usize, apsp)
                .map_err(|e| Error::CorruptFile(format!("bad APSP block: {e}")))?;
            if (start + len) as usize > center_count {
                return Err(Error::CorruptFile("instance range out of bounds".into()));
            }
            for c in start..start + len {
                instance_of_center[c as usize] = inst_id as u32;
            }
            instances.push(GraphInstance {
                parent,
                start,
                len,
                graph,
                apsp,
            });
        }
        let len = centers.len();
        layers.push(Layer {
            centers,
            point_assignment,
            center_parent,
            instances,
            instance_of_center,
            subdivided,
            nearest_child: vec![u32::MAX; len],
            nearest_child_hop: vec![0.0; len],
        });
    }

    let mut point_leaf = Vec::with_capacity(point_count);
    for _ in 0..point_count {
        point_leaf.push(r_u32(r)?);
    }
    let mut point_bottom_dist = Vec::with_capacity(point_count);
    for _ in 0..point_count {
        point_bottom_dist.push(r_f64(r)?);
    }
    let mut d_o = Vec::with_capacity(point_count * leaf_count);
    for _ in 0..point_count * leaf_count {
        d_o.push(r_f64(r)?);
    }

    let idx = hierarchy::from_parts(
        config,
        dim,
        point_count,
        layers,
        warnings,
        point_leaf,
        point_bottom_dist,
        d_o,
    )?;
    if idx.leaf_count() != leaf_count {
        return Err(Error::CorruptFile(format!(
            "leaf count mismatch: header {leaf_count}, reconstructed {}",
            idx.leaf_count()
        )));
    }
    Ok(idx)
}

pub fn write_index_file(path: &Path, idx: &HierarchicalIndex) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_index(&mut w, idx)?;
    w.flush()?;
    Ok(())
}

pub fn read_index_file(path: &Path) -> Result<HierarchicalIndex> {
    let mut r = BufReader::new(File::open(path)?);
    read_index(&mut r)
}

// ---------------------------------------------------------------------------
// Pool checkpoints (pool + aux queues + embedded index)
// ---------------------------------------------------------------------------

pub fn write_checkpoint<W: Write>(w: &mut W, state: &PoolState) -> Result<()> {
    w.write_all(POOL_MAGIC)?;
    w_u32(w, FORMAT_VERSION)?;
    let pool = &state.pool;
    w_u32(w, pool.capacity() as u32)?;
    w_u32(w, pool.dim() as u32)?;
    w_u32(w, metric_code(pool.metric()))?;
    w_u32(w, pool.filled() as u32)?;
    w_u32(w, pool.write_cursor() as u32)?;
    w_u64(w, pool.epoch())?;
    w_u64(w, pool.rebuild_period())?;
    w_u64(w, pool.rebuild_count())?;
    w_u64(w, pool.total_inserts())?;
    for slot in 0..pool.capacity() {
        for &v in pool.slot(slot) {
            w_f64(w, v)?;
        }
    }
    for slot in 0..pool.capacity() {
        w_u64(w, pool.stamp(slot))?;
    }
    for &k in &state.aux.bottom_center_index {
        w_u32(w, k)?;
    }
    for &d in &state.aux.bottom_center_dist {
        w_f64(w, d)?;
    }
    let width = state
        .aux
        .d_o_rows
        .iter()
        .take(pool.filled())
        .map(Vec::len)
        .max()
        .unwrap_or(0);
    w_u32(w, width as u32)?;
    for slot in 0..pool.filled() {
        let row = &state.aux.d_o_rows[slot];
        if row.len() != width {
            return Err(Error::Inconsistent(format!(
                "aux row {slot} has width {} != {width}",
                row.len()
            )));
        }
        for &d in row {
            w_f64(w, d)?;
        }
    }
    match &state.index {
        Some(idx) => {
            w.write_all(&[1])?;
            write_index(w, idx)?;
        }
        None => w.write_all(&[0])?,
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<PoolState> {
    expect_magic(r, POOL_MAGIC, "pool checkpoint")?;
    let capacity = r_u32(r)? as usize;
    let dim = r_u32(r)? as usize;
    let metric = metric_from_code(r_u32(r)?)?;
    let filled = r_u32(r)? as usize;
    let cursor = r_u32(r)? as usize;
    let epoch = r_u64(r)?;
    let rebuild_period = r_u64(r)?;
    let rebuild_count = r_u64(r)?;
    let total_inserts = r_u64(r)?;
    if filled > capacity || cursor >= capacity.max(1) {
        return Err(Error::CorruptFile("cursor or fill out of range".into()));
    }
    let mut storage = Vec::with_capacity(capacity * dim);
    for _ in 0..capacity * dim {
        storage.push(r_f64(r)?);
    }
    let mut stamps = Vec::with_capacity(capacity);
    for _ in 0..capacity {
        stamps.push(r_u64(r)?);
    }
    let mut aux = AuxQueues::new(capacity);
    for k in aux.bottom_center_index.iter_mut() {
        *k = r_u32(r)?;
    }
    for d in aux.bottom_center_dist.iter_mut() {
        *d = r_f64(r)?;
    }
    let width = r_u32(r)? as usize;
    for slot in 0..filled {
        let mut row = Vec::with_capacity(width);
        for _ in 0..width {
            row.push(r_f64(r)?);
        }
        aux.d_o_rows[slot] = row;
    }
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let index = if flag[0] == 1 {
        Some(read_index(r)?)
    } else {
        None
    };
    let pool = FeaturePool::from_parts(
        capacity,
        dim,
        metric,
        storage,
        cursor,
        filled,
        epoch,
        rebuild_period,
        rebuild_count,
        stamps,
        total_inserts,
    )?;
    Ok(PoolState { pool, aux, index })
}

pub fn write_checkpoint_file(path: &Path, state: &PoolState) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, state)?;
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint_file(path: &Path) -> Result<PoolState> {
    let mut r = BufReader::new(File::open(path)?);
    read_checkpoint(&mut r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::build_index;
    use crate::metrics::normalize;
    use crate::seed;

    fn unit_points(n: usize, dim: usize, s: u64) -> Vec<FeatureVector> {
        let mut rng = seed::rng(s, 61);
        (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..dim).map(|_| seed::gaussian(&mut rng)).collect();
                normalize(&FeatureVector::new(raw).unwrap()).unwrap()
            })
            .collect()
    }

    #[test]
    fn embeddings_round_trip_post_quantization() {
        let pts = unit_points(20, 7, 1);
        let mut buf = Vec::new();
        write_embeddings(&mut buf, &pts, Some("{\"kind\":\"test\"}")).unwrap();
        let (back, meta) = read_embeddings(&mut buf.as_slice()).unwrap();
        assert_eq!(meta.as_deref(), Some("{\"kind\":\"test\"}"));
        assert_eq!(back.len(), pts.len());
        for (a, b) in pts.iter().zip(&back) {
            for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
                assert_eq!(x as f32 as f64, y);
            }
        }
        // A second write of the quantized values must be byte-identical.
        let mut buf2 = Vec::new();
        write_embeddings(&mut buf2, &back, Some("{\"kind\":\"test\"}")).unwrap();
        let (back2, _) = read_embeddings(&mut buf2.as_slice()).unwrap();
        assert_eq!(back, back2);
    }

    #[test]
    fn embeddings_without_metadata() {
        let pts = unit_points(3, 4, 2);
        let mut buf = Vec::new();
        write_embeddings(&mut buf, &pts, None).unwrap();
        let (back, meta) = read_embeddings(&mut buf.as_slice()).unwrap();
        assert_eq!(back.len(), 3);
        assert!(meta.is_none());
    }

    #[test]
    fn corrupt_magic_is_rejected() {
        let err = read_embeddings(&mut &b"NOPE\x01\x00\x00\x00"[..]);
        assert!(matches!(err, Err(Error::CorruptFile(_))));
        let err = read_index(&mut &b"XXXX\x01\x00\x00\x00"[..]);
        assert!(matches!(err, Err(Error::CorruptFile(_))));
    }

    #[test]
    fn index_round_trip_preserves_queries_bit_exactly() {
        let pts = unit_points(96, 8, 5);
        let cfg = HierarchyConfig {
            layers: 2,
            clusters_per_node: 12,
            neighbors: 4,
            leaf_size_threshold: 4,
            ..HierarchyConfig::default()
        };
        let idx = build_index(&pts, &cfg, 17).unwrap();
        let mut buf = Vec::new();
        write_index(&mut buf, &idx).unwrap();
        let loaded = read_index(&mut buf.as_slice()).unwrap();

        let mut rng = seed::rng(3, 4);
        for _ in 0..100 {
            let i = seed::uniform_index(&mut rng, 96);
            let j = seed::uniform_index(&mut rng, 96);
            let a = idx.query_in_pool(i, j).unwrap();
            let b = loaded.query_in_pool(i, j).unwrap();
            assert_eq!(a.angle_sum.to_bits(), b.angle_sum.to_bits(), "({i},{j})");
            assert_eq!(a.reachable, b.reachable);
        }

        // Serialization itself is deterministic.
        let mut buf2 = Vec::new();
        write_index(&mut buf2, &loaded).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn flat_index_round_trip() {
        let pts = unit_points(40, 6, 9);
        let cfg = HierarchyConfig {
            layers: 1,
            clusters_per_node: 40,
            neighbors: 4,
            ..HierarchyConfig::default()
        };
        let idx = build_index(&pts, &cfg, 0).unwrap();
        let mut buf = Vec::new();
        write_index(&mut buf, &idx).unwrap();
        let loaded = read_index(&mut buf.as_slice()).unwrap();
        for i in 0..40 {
            for j in 0..40 {
                let a = idx.query_in_pool(i, j).unwrap();
                let b = loaded.query_in_pool(i, j).unwrap();
                assert_eq!(a.angle_sum.to_bits(), b.angle_sum.to_bits());
            }
        }
    }

    #[test]
    fn truncated_index_is_corrupt() {
        let pts = unit_points(30, 5, 11);
        let cfg = HierarchyConfig {
            layers: 1,
            clusters_per_node: 6,
            neighbors: 3,
            ..HierarchyConfig::default()
        };
        let idx = build_index(&pts, &cfg, 1).unwrap();
        let mut buf = Vec::new();
        write_index(&mut buf, &idx).unwrap();
        buf.truncate(buf.len() / 2);
        assert!(read_index(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        use crate::pool::PoolState;
        let cfg = HierarchyConfig {
            layers: 1,
            clusters_per_node: 8,
            neighbors: 3,
            ..HierarchyConfig::default()
        };
        let mut state = PoolState::new(16, 6, MetricKind::Cosine, 10).unwrap();
        state
            .bootstrap_insert(&unit_points(12, 6, 3), &cfg, 7)
            .unwrap();
        state.insert_batch(&unit_points(3, 6, 8)).unwrap();

        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &state).unwrap();
        let loaded = read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(loaded.pool.filled(), state.pool.filled());
        assert_eq!(loaded.pool.write_cursor(), state.pool.write_cursor());
        assert_eq!(loaded.pool.total_inserts(), state.pool.total_inserts());
        assert_eq!(loaded.aux.bottom_center_index, state.aux.bottom_center_index);
        assert_eq!(loaded.aux.bottom_center_dist, state.aux.bottom_center_dist);
        assert_eq!(loaded.aux.d_o_rows, state.aux.d_o_rows);
        for slot in 0..state.pool.filled() {
            assert_eq!(loaded.pool.slot(slot), state.pool.slot(slot));
        }
        assert!(loaded.index.is_some());

        let mut buf2 = Vec::new();
        write_checkpoint(&mut buf2, &loaded).unwrap();
        assert_eq!(buf, buf2);
    }
}
