//! Grid field serialization.
//!
//! Binary layout, all words 8 bytes little-endian:
//! `dim: u64, m: u64, (lo_i: f64, hi_i: f64) for each axis, values: f64 × m^dim`
//! in row-major node order. Masked nodes are written as NaN and read back as masked.

use super::{Cuboid, GridScalarField, UniformGrid};
use crate::error::{Error, Result};
use std::io::{Read, Write};

pub fn write_binary<W: Write>(field: &GridScalarField, mut out: W) -> Result<()> {
    let g = &field.grid;
    out.write_all(&(g.dim() as u64).to_le_bytes())?;
    out.write_all(&(g.m as u64).to_le_bytes())?;
    for i in 0..g.dim() {
        out.write_all(&g.bbox.lo[i].to_le_bytes())?;
        out.write_all(&g.bbox.hi[i].to_le_bytes())?;
    }
    for (i, v) in field.values.iter().enumerate() {
        let v = if field.is_masked(i) { f64::NAN } else { *v };
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_word<R: Read>(input: &mut R) -> Result<[u8; 8]> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_binary<R: Read>(mut input: R) -> Result<GridScalarField> {
    let dim = u64::from_le_bytes(read_word(&mut input)?) as usize;
    let m = u64::from_le_bytes(read_word(&mut input)?) as usize;
    if dim == 0 || dim > 4 {
        return Err(Error::Parse(format!("unsupported grid dimension {dim}")));
    }
    let mut lo = Vec::with_capacity(dim);
    let mut hi = Vec::with_capacity(dim);
    for _ in 0..dim {
        lo.push(f64::from_le_bytes(read_word(&mut input)?));
        hi.push(f64::from_le_bytes(read_word(&mut input)?));
    }
    let grid = UniformGrid::new(Cuboid::new(lo, hi)?, m)?;
    let count = grid.node_count();
    let mut values = Vec::with_capacity(count);
    let mut mask = Vec::with_capacity(count);
    for _ in 0..count {
        let v = f64::from_le_bytes(read_word(&mut input)?);
        mask.push(v.is_nan());
        values.push(if v.is_nan() { 0.0 } else { v });
    }
    let field = GridScalarField::new(grid, values)?;
    if mask.iter().any(|&b| b) {
        field.with_mask(mask)
    } else {
        Ok(field)
    }
}

/// CSV with one row per node: coordinates `x1..xn` then `value` (empty when masked).
pub fn write_csv<W: Write>(field: &GridScalarField, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = field.grid.dim();
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    header.push("value".into());
    w.write_record(&header)?;
    for (i, x) in field.grid.nodes().enumerate() {
        let mut row: Vec<String> = x.iter().map(|v| format!("{v:e}")).collect();
        row.push(if field.is_masked(i) {
            String::new()
        } else {
            format!("{:e}", field.values[i])
        });
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
