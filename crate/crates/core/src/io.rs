//! Field snapshots (`RDVI1` binary) and CSV export.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! b"RDVI1" | dim: u32 | n_interior[0..dim]: u32 | values: f64 × Π n
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::mesh::{Field, Grid, Mask};

pub const MAGIC: &[u8; 5] = b"RDVI1";

pub fn write_snapshot<W: Write>(field: &Field, mut w: W) -> Result<()> {
    let grid = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    for &n in grid.n_interior() {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Raw contents of a snapshot: per-axis node counts and values.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub n_interior: Vec<usize>,
    pub values: Vec<f64>,
}

impl Snapshot {
    /// Attaches the snapshot to `grid`, checking the node counts agree.
    pub fn into_field(self, grid: Grid) -> Result<Field> {
        if self.n_interior != grid.n_interior() {
            return Err(Error::Format(format!(
                "snapshot shape {:?} does not match grid {:?}",
                self.n_interior,
                grid.n_interior()
            )));
        }
        Field::from_values(grid, self.values)
    }
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<Snapshot> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("missing RDVI1 magic".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let dim = u32::from_le_bytes(word) as usize;
    if !(1..=2).contains(&dim) {
        return Err(Error::Format(format!("unsupported dimension {dim}")));
    }
    let mut n_interior = Vec::with_capacity(dim);
    for _ in 0..dim {
        r.read_exact(&mut word)?;
        n_interior.push(u32::from_le_bytes(word) as usize);
    }
    let len: usize = n_interior.iter().product();
    let mut values = Vec::with_capacity(len);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes after snapshot values".into()));
    }
    Ok(Snapshot { n_interior, values })
}

/// One line per node: `x[,y],value`.
pub fn write_field_csv<W: Write>(field: &Field, mut w: W) -> Result<()> {
    let grid = field.grid();
    for (x, v) in grid.nodes().zip(field.values()) {
        match grid.dim() {
            1 => writeln!(w, "{},{}", x[0], v)?,
            _ => writeln!(w, "{},{},{}", x[0], x[1], v)?,
        }
    }
    Ok(())
}

/// One line per node: `x[,y],flag` with flag 0 or 1.
pub fn write_mask_csv<W: Write>(mask: &Mask, mut w: W) -> Result<()> {
    let grid = mask.grid();
    for (x, &f) in grid.nodes().zip(mask.flags()) {
        match grid.dim() {
            1 => writeln!(w, "{},{}", x[0], f as u8)?,
            _ => writeln!(w, "{},{},{}", x[0], x[1], f as u8)?,
        }
    }
    Ok(())
}
