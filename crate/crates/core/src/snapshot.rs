//! NLSF1 binary field snapshots.
//!
//! Layout (little endian): 8-byte magic `NLSF1\0\0\0`, u32 version, u32 reserved (zero),
//! then u32 dims, u32 points, f64 extent, then `points^dims` pairs of f64 (re, im) in
//! row-major axis order (last axis contiguous).

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{NlsError, Result};
use crate::grid::{ComplexField, Grid};

pub const MAGIC: [u8; 8] = *b"NLSF1\0\0\0";
pub const VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(u: &ComplexField, mut out: W) -> Result<()> {
    let g = u.grid();
    let mut buf = Vec::with_capacity(32 + 16 * u.len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    buf.extend_from_slice(&(g.dims() as u32).to_le_bytes());
    buf.extend_from_slice(&(g.points() as u32).to_le_bytes());
    buf.extend_from_slice(&g.extent().to_le_bytes());
    for v in u.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<ComplexField> {
    let mut head = [0u8; 32];
    input.read_exact(&mut head).map_err(|e| NlsError::Snapshot(format!("truncated header: {e}")))?;
    if head[..8] != MAGIC {
        return Err(NlsError::Snapshot("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().unwrap());
    let version = word(8);
    if version != VERSION {
        return Err(NlsError::Snapshot(format!("unsupported version {version}")));
    }
    let dims = word(16) as usize;
    let points = word(20) as usize;
    let extent = f64::from_le_bytes(head[24..32].try_into().unwrap());
    let grid = Grid::new(dims, extent, points).map_err(|e| NlsError::Snapshot(e.to_string()))?;
    let mut body = vec![0u8; 16 * grid.len()];
    input.read_exact(&mut body).map_err(|e| NlsError::Snapshot(format!("truncated body: {e}")))?;
    let values = body
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(NlsError::Snapshot("trailing bytes after field data".into()));
    }
    ComplexField::new(grid, values)
}

pub fn save_snapshot(u: &ComplexField, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_snapshot(u, std::io::BufWriter::new(file))
}

pub fn load_snapshot(path: &Path) -> Result<ComplexField> {
    let file = std::fs::File::open(path)?;
    read_snapshot(std::io::BufReader::new(file))
}
