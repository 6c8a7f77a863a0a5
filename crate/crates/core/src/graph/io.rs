//! Graph files.
//!
//! `VXGR` binary layout, little-endian:
//!
//! ```text
//! magic "VXGR" | version u32 | N u32 | R u32 | entry u32
//! N rows × R u32, each row padded with 0xFFFFFFFF
//! ```
//!
//! The text form has one line per node, `id: n1 n2 ...`, in any order.
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::codec::{put_u32, to_u32, ByteReader};
use crate::error::{Error, Result};

use super::ProximityGraph;

pub const MAGIC: &[u8; 4] = b"VXGR";
pub const FORMAT_VERSION: u32 = 1;
pub const PADDING: u32 = u32::MAX;

pub fn write_graph(graph: &ProximityGraph) -> Result<Vec<u8>> {
    let n = graph.len();
    let r = graph.max_degree();
    let mut out = Vec::with_capacity(20 + n * r * 4);
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_u32(&mut out, to_u32(n, "N")?);
    put_u32(&mut out, to_u32(r, "R")?);
    put_u32(&mut out, graph.entry());
    for row in graph.rows() {
        for slot in 0..r {
            put_u32(&mut out, row.get(slot).copied().unwrap_or(PADDING));
        }
    }
    Ok(out)
}

pub fn parse_graph(bytes: &[u8]) -> Result<ProximityGraph> {
    let mut r = ByteReader::new(bytes, "VXGR");
    r.magic(MAGIC)?;
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(r.error(format!("unsupported version {version}")));
    }
    let n = r.usize("N")?;
    let degree = r.usize("R")?;
    let entry = r.u32("entry")?;
    let cells = n
        .checked_mul(degree)
        .ok_or_else(|| r.error("adjacency size overflows"))?;
    let flat = r.u32s(cells, "adjacency")?;
    r.finish()?;
    let mut rows = Vec::with_capacity(n);
    for (u, chunk) in flat.chunks_exact(degree.max(1)).take(n).enumerate() {
        let len = chunk.iter().position(|&v| v == PADDING).unwrap_or(degree);
        if chunk[len..].iter().any(|&v| v != PADDING) {
            return Err(Error::malformed(
                "VXGR",
                format!("row {u} has ids after padding"),
            ));
        }
        rows.push(chunk[..len].to_vec());
    }
    if degree == 0 {
        rows.resize(n, Vec::new());
    }
    ProximityGraph::new(rows, entry, degree).map_err(|e| Error::malformed("VXGR", e.to_string()))
}

pub fn save_graph(graph: &ProximityGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_graph(graph)?).map_err(|e| Error::io(path, e))
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<ProximityGraph> {
    let path = path.as_ref();
    parse_graph(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Parses `id: n1 n2 ...` lines into rows indexed by id. Every id in
/// `0..N` must have exactly one line; neighbor lists may be empty.
pub fn parse_adjacency_text(text: &str) -> Result<Vec<Vec<u32>>> {
    let bad = |line: usize, detail: String| Error::malformed("adjacency", format!("line {line}: {detail}"));
    let mut entries: Vec<(u32, Vec<u32>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, rest) = line
            .split_once(':')
            .ok_or_else(|| bad(line_no, "missing ':'".into()))?;
        let id: u32 = id
            .trim()
            .parse()
            .map_err(|e| bad(line_no, format!("bad node id: {e}")))?;
        let neighbors = rest
            .split_whitespace()
            .map(|tok| tok.parse::<u32>().map_err(|e| bad(line_no, format!("bad neighbor {tok:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        entries.push((id, neighbors));
    }
    let n = entries.len();
    let mut rows: Vec<Option<Vec<u32>>> = vec![None; n];
    for (id, neighbors) in entries {
        let slot = rows
            .get_mut(id as usize)
            .ok_or_else(|| Error::malformed("adjacency", format!("node id {id} outside 0..{n}")))?;
        if slot.is_some() {
            return Err(Error::malformed("adjacency", format!("node {id} listed twice")));
        }
        if let Some(&v) = neighbors.iter().find(|&&v| v as usize >= n) {
            return Err(Error::malformed(
                "adjacency",
                format!("node {id} links to missing node {v}"),
            ));
        }
        *slot = Some(neighbors);
    }
    if n == 0 {
        return Err(Error::malformed("adjacency", "no nodes"));
    }
    Ok(rows.into_iter().map(|r| r.expect("every id 0..n filled")).collect())
}

pub fn write_adjacency_text(graph: &ProximityGraph) -> String {
    let mut out = String::new();
    for (u, row) in graph.rows().iter().enumerate() {
        let _ = write!(out, "{u}:");
        for v in row {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::graph::knn_graph_build;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn binary_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = Dataset::new(4, (0..120 * 4).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let (g, _) = knn_graph_build(&data, 5).unwrap();
        let bytes = write_graph(&g).unwrap();
        assert_eq!(bytes.len(), 20 + 120 * g.max_degree() * 4);
        let back = parse_graph(&bytes).unwrap();
        assert_eq!(back, g);
        assert_eq!(write_graph(&back).unwrap(), bytes);
    }

    #[test]
    fn padded_rows() {
        let g = ProximityGraph::new(vec![vec![1, 2], vec![0], vec![]], 0, 3).unwrap();
        let bytes = write_graph(&g).unwrap();
        let back = parse_graph(&bytes).unwrap();
        assert_eq!(back.neighbors(1), &[0]);
        assert!(back.neighbors(2).is_empty());
        // an id after padding is rejected
        let mut bad = bytes.clone();
        let row1_slot2 = 20 + (3 + 2) * 4;
        bad[row1_slot2..row1_slot2 + 4].copy_from_slice(&0u32.to_le_bytes());
        assert!(parse_graph(&bad).is_err());
    }

    #[test]
    fn rejects_bad_headers() {
        let g = ProximityGraph::new(vec![vec![1], vec![0]], 0, 1).unwrap();
        let bytes = write_graph(&g).unwrap();
        assert!(parse_graph(&bytes[..bytes.len() - 2]).is_err());
        let mut entry = bytes.clone();
        entry[16] = 7;
        assert!(parse_graph(&entry).is_err());
        let mut huge = bytes.clone();
        huge[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        huge[12..16].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(parse_graph(&huge).is_err());
    }

    #[test]
    fn text_form() {
        let rows = parse_adjacency_text("# comment\n1: 0 2\n0: 1\n\n2:\n").unwrap();
        assert_eq!(rows, vec![vec![1], vec![0, 2], vec![]]);
        assert!(parse_adjacency_text("0: 1\n").is_err());
        assert!(parse_adjacency_text("0 1\n").is_err());
        assert!(parse_adjacency_text("0: 0\n0: 0\n").is_err());
        assert!(parse_adjacency_text("0: x\n").is_err());
        assert!(parse_adjacency_text("").is_err());
        let g = ProximityGraph::new(rows.clone(), 1, 2).unwrap();
        assert_eq!(parse_adjacency_text(&write_adjacency_text(&g)).unwrap(), rows);
    }
}
