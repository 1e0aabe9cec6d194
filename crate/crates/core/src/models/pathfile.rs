//! Binary dump of sample paths.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size | field                          |
//! |--------|------|--------------------------------|
//! | 0      | 8    | magic `CLTPATH1`               |
//! | 8      | 32   | SHA-256 of the spec JSON       |
//! | 40     | 8    | master seed (u64)              |
//! | 48     | 8    | n (u64)                        |
//! | 56     | 8    | replicate count R (u64)        |
//! | 64     | 8·n·R| ξ values, f64, one row per replicate |
//!
//! Row r holds ξ_1..ξ_n of replicate r in order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::SeedLineage;

use super::{Model, ModelSpec};

pub const PATH_MAGIC: &[u8; 8] = b"CLTPATH1";
pub const PATH_HEADER_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathHeader {
    pub spec_hash: [u8; 32],
    pub master_seed: u64,
    pub n: u64,
    pub replicates: u64,
}

impl PathHeader {
    pub fn to_bytes(&self) -> [u8; PATH_HEADER_LEN] {
        let mut out = [0u8; PATH_HEADER_LEN];
        out[..8].copy_from_slice(PATH_MAGIC);
        out[8..40].copy_from_slice(&self.spec_hash);
        out[40..48].copy_from_slice(&self.master_seed.to_le_bytes());
        out[48..56].copy_from_slice(&self.n.to_le_bytes());
        out[56..64].copy_from_slice(&self.replicates.to_le_bytes());
        out
    }

    pub fn from_bytes(b: &[u8; PATH_HEADER_LEN]) -> Option<Self> {
        if &b[..8] != PATH_MAGIC {
            return None;
        }
        let u = |i: usize| u64::from_le_bytes(b[i..i + 8].try_into().unwrap());
        Some(Self {
            spec_hash: b[8..40].try_into().unwrap(),
            master_seed: u(40),
            n: u(48),
            replicates: u(56),
        })
    }
}

/// Write `replicates` paths of `model` to any sink. Paths are generated one at a time.
pub fn write_paths_to<W: Write>(model: &Model, master_seed: u64, replicates: usize, mut w: W) -> std::io::Result<()> {
    let n = model.n();
    let header = PathHeader {
        spec_hash: model.spec().hash(),
        master_seed,
        n: n as u64,
        replicates: replicates as u64,
    };
    w.write_all(&header.to_bytes())?;
    for r in 0..replicates as u64 {
        let path = model.sample_path(SeedLineage::for_replicate(master_seed, n, r));
        for x in &path.increments {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn write_paths(model: &Model, master_seed: u64, replicates: usize, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_paths_to(model, master_seed, replicates, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Read a path file back. When `spec` is given, its hash must match the header.
pub fn read_paths(path: &Path, spec: Option<&ModelSpec>) -> Result<(PathHeader, Vec<Vec<f64>>)> {
    let parse = |detail: String| Error::Parse {
        path: path.to_path_buf(),
        detail,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut head = [0u8; PATH_HEADER_LEN];
    r.read_exact(&mut head).map_err(|_| parse("truncated header".into()))?;
    let header = PathHeader::from_bytes(&head).ok_or_else(|| parse("bad magic".into()))?;
    if let Some(s) = spec {
        if s.hash() != header.spec_hash {
            return Err(parse("spec hash does not match header".into()));
        }
    }
    let n = header.n as usize;
    let mut rows = Vec::with_capacity(header.replicates as usize);
    let mut buf = vec![0u8; 8 * n];
    for i in 0..header.replicates {
        r.read_exact(&mut buf)
            .map_err(|_| parse(format!("truncated at replicate {i}")))?;
        rows.push(
            buf.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        );
    }
    if r.read(&mut [0u8; 1]).map_err(|e| Error::io(path, e))? != 0 {
        return Err(parse("trailing bytes after last replicate".into()));
    }
    Ok((header, rows))
}
