//! `VXIV` index files.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic "VXIV" | version u32 | mode u32 | dim u32 | m u32 | nlist u32
//! coarse centroids      nlist × dim f32
//! codebook              m × 256 × (dim / m) f32      (PQ modes only)
//! has_opq u32 (0 | 1), then dim × dim f32 when set
//! nlist × { len u32 | ids len × u32 | payload }
//! ```
//!
//! The payload is `len × m` code bytes in PQ modes and `len × dim` `f32`
//! values in flat mode. `m` is written as 0 for flat indexes.

use std::fs;
use std::path::Path;

use crate::clustering::Centroids;
use crate::codec::{put_f32s, put_u32, put_u32s, to_u32, ByteReader};
use crate::error::{Error, Result};
use crate::pq::{OpqMatrix, PqCodebook, CENTROIDS_PER_SUBSPACE};

use super::{InvertedList, IvfIndex, IvfMode};

pub const MAGIC: &[u8; 4] = b"VXIV";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_index(index: &IvfIndex) -> Result<Vec<u8>> {
    let dim = index.dim();
    let m = index.codebook().map_or(0, PqCodebook::m);
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_u32(&mut out, index.mode().tag());
    put_u32(&mut out, to_u32(dim, "dim")?);
    put_u32(&mut out, to_u32(m, "m")?);
    put_u32(&mut out, to_u32(index.nlist(), "nlist")?);
    put_f32s(&mut out, index.coarse().as_slice());
    if let Some(cb) = index.codebook() {
        put_f32s(&mut out, cb.as_slice());
    }
    match index.opq() {
        Some(opq) => {
            put_u32(&mut out, 1);
            put_f32s(&mut out, opq.as_slice());
        }
        None => put_u32(&mut out, 0),
    }
    for list in index.lists() {
        put_u32(&mut out, to_u32(list.len(), "list length")?);
        put_u32s(&mut out, &list.ids);
        if index.mode().uses_pq() {
            out.extend_from_slice(&list.codes);
        } else {
            put_f32s(&mut out, &list.vectors);
        }
    }
    Ok(out)
}

pub fn parse_index(bytes: &[u8]) -> Result<IvfIndex> {
    let mut r = ByteReader::new(bytes, "VXIV");
    r.magic(MAGIC)?;
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(r.error(format!("unsupported version {version}")));
    }
    let tag = r.u32("mode")?;
    let mode = IvfMode::from_tag(tag).ok_or_else(|| r.error(format!("unknown mode tag {tag}")))?;
    let dim = r.usize("dim")?;
    let m = r.usize("m")?;
    let nlist = r.usize("nlist")?;
    if dim == 0 || nlist == 0 {
        return Err(r.error("dim and nlist must be positive"));
    }
    if mode.uses_pq() && (m == 0 || dim % m != 0) {
        return Err(r.error(format!("m = {m} does not divide dim = {dim}")));
    }
    if !mode.uses_pq() && m != 0 {
        return Err(r.error("flat index must record m = 0"));
    }
    let wrap = |e: Error| Error::malformed("VXIV", e.to_string());

    let coarse_len = nlist
        .checked_mul(dim)
        .ok_or_else(|| r.error("coarse size overflows"))?;
    let coarse = Centroids::new(dim, r.f32s(coarse_len, "coarse centroids")?).map_err(wrap)?;
    let codebook = if mode.uses_pq() {
        let floats = r.f32s(CENTROIDS_PER_SUBSPACE * dim, "codebook")?;
        Some(PqCodebook::from_parts(dim, m, floats).map_err(wrap)?)
    } else {
        None
    };
    let opq = match r.u32("opq flag")? {
        0 => None,
        1 => {
            let len = dim
                .checked_mul(dim)
                .ok_or_else(|| r.error("rotation size overflows"))?;
            Some(OpqMatrix::new(dim, r.f32s(len, "rotation")?).map_err(wrap)?)
        }
        other => return Err(r.error(format!("bad opq flag {other}"))),
    };

    let mut lists = Vec::with_capacity(nlist.min(bytes.len() / 4));
    for _ in 0..nlist {
        let len = r.usize("list length")?;
        let ids = r.u32s(len, "list ids")?;
        let list = if mode.uses_pq() {
            let codes = r.bytes(
                len.checked_mul(m).ok_or_else(|| r.error("code size overflows"))?,
                "codes",
            )?;
            InvertedList { ids, codes, vectors: Vec::new() }
        } else {
            let vectors = r.f32s(
                len.checked_mul(dim).ok_or_else(|| r.error("vector size overflows"))?,
                "vectors",
            )?;
            InvertedList { ids, codes: Vec::new(), vectors }
        };
        lists.push(list);
    }
    r.finish()?;
    IvfIndex::from_parts(mode, coarse, codebook, opq, lists).map_err(wrap)
}

pub fn save_index(index: &IvfIndex, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_index(index)?).map_err(|e| Error::io(path, e))
}

pub fn load_index(path: impl AsRef<Path>) -> Result<IvfIndex> {
    let path = path.as_ref();
    parse_index(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
