//! `FLD1` binary field files and CSV export.
//!
//! Layout (all little-endian):
//!
//! ```text
//! "FLD1\0\0\0\0"             8-byte magic
//! u32                        N
//! u32 × N                    points per axis
//! f64 × N                    axis lengths
//! f64 × Π points             values, row-major (last axis fastest)
//! ```

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::manifold::{Field, ManifoldGrid};

pub const MAGIC: &[u8; 8] = b"FLD1\0\0\0\0";

/// Grid shape stored in a field file.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldHeader {
    pub points: Vec<usize>,
    pub lengths: Vec<f64>,
}

impl FieldHeader {
    pub fn of(grid: &ManifoldGrid) -> Self {
        Self {
            points: grid.points().to_vec(),
            lengths: grid.lengths().to_vec(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.points.iter().product()
    }
}

pub fn encode_fld1(field: &Field) -> Vec<u8> {
    let grid = field.grid();
    let mut out = Vec::with_capacity(8 + 4 + 12 * grid.dim() + 8 * field.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    for &n in grid.points() {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for &l in grid.lengths() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    for &v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_fld1(bytes: &[u8]) -> Result<(FieldHeader, Vec<f64>)> {
    let mut cursor = bytes;
    let mut magic = [0u8; 8];
    cursor
        .read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated magic".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, expected FLD1".into()));
    }
    let dim = read_u32(&mut cursor)? as usize;
    if dim == 0 || dim > 16 {
        return Err(Error::Format(format!("implausible dimension {dim}")));
    }
    let points = (0..dim)
        .map(|_| read_u32(&mut cursor).map(|n| n as usize))
        .collect::<Result<Vec<_>>>()?;
    let lengths = (0..dim).map(|_| read_f64(&mut cursor)).collect::<Result<Vec<_>>>()?;
    let header = FieldHeader { points, lengths };
    let count = header.node_count();
    if cursor.len() != 8 * count {
        return Err(Error::Format(format!(
            "expected {} value bytes, found {}",
            8 * count,
            cursor.len()
        )));
    }
    let values = cursor
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((header, values))
}

fn read_u32(cursor: &mut &[u8]) -> Result<u32> {
    let mut buf = [0u8; 4];
    cursor
        .read_exact(&mut buf)
        .map_err(|_| Error::Format("truncated header".into()))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64(cursor: &mut &[u8]) -> Result<f64> {
    let mut buf = [0u8; 8];
    cursor
        .read_exact(&mut buf)
        .map_err(|_| Error::Format("truncated header".into()))?;
    Ok(f64::from_le_bytes(buf))
}

pub fn write_fld1(path: impl AsRef<Path>, field: &Field) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&encode_fld1(field))?;
    Ok(())
}

pub fn read_fld1(path: impl AsRef<Path>) -> Result<(FieldHeader, Vec<f64>)> {
    let bytes = std::fs::read(path)?;
    decode_fld1(&bytes)
}

/// Read a field file and attach it to `grid`, which must have the same shape.
pub fn read_field(path: impl AsRef<Path>, grid: &Arc<ManifoldGrid>) -> Result<Field> {
    let (header, values) = read_fld1(path)?;
    if header != FieldHeader::of(grid) {
        return Err(Error::Format(format!(
            "field shape {:?}/{:?} does not match grid {:?}/{:?}",
            header.points,
            header.lengths,
            grid.points(),
            grid.lengths()
        )));
    }
    Field::new(grid, values)
}

fn csv_header(header: &FieldHeader) -> String {
    let dims: Vec<String> = header.points.iter().map(|n| n.to_string()).collect();
    let lengths: Vec<String> = header.lengths.iter().map(|l| l.to_string()).collect();
    format!("# FLD dims={} lengths={}", dims.join("x"), lengths.join(","))
}

/// CSV export: header row, then one value per line in storage order.
pub fn to_csv(header: &FieldHeader, values: &[f64]) -> String {
    let mut out = csv_header(header);
    out.push('\n');
    for v in values {
        out.push_str(&v.to_string());
        out.push('\n');
    }
    out
}
