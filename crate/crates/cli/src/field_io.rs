//! Binary container for sampled fields.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 5     | magic `BZMF1`                             |
//! | 1     | endianness tag, always `L`                |
//! | 4     | `u32` spatial dimension                   |
//! | 4     | `u32` points per axis                     |
//! | 8     | `f64` period                              |
//! | 4     | `u32` component count                     |
//! | rest  | per component: `N^d` row-major `f64`      |
//!
//! Samples are written exactly as stored, so a write/read cycle reproduces
//! the field's physical values bitwise.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use bzm_core::{Field, Grid};

use crate::{CliError, Result};

const MAGIC: &[u8; 5] = b"BZMF1";
const LITTLE_ENDIAN_TAG: u8 = b'L';

/// Write `field` to `path`.
pub fn write_field(path: &Path, field: &Field) -> Result<()> {
    let grid = field.grid();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&[LITTLE_ENDIAN_TAG])?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    w.write_all(&(grid.points_per_axis() as u32).to_le_bytes())?;
    w.write_all(&grid.period().to_le_bytes())?;
    w.write_all(&(field.components() as u32).to_le_bytes())?;
    for c in 0..field.components() {
        for v in field.values(c) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a field from `path`, reconstructing its grid from the header.
pub fn read_field(path: &Path) -> Result<Field> {
    let mut r = BufReader::new(File::open(path)?);
    let name = path.display();

    let mut magic = [0u8; 5];
    read_exact(&mut r, &mut magic, "magic", &name)?;
    if &magic != MAGIC {
        return Err(CliError::Format(format!(
            "{name}: bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(MAGIC),
        )));
    }
    let mut tag = [0u8; 1];
    read_exact(&mut r, &mut tag, "endianness tag", &name)?;
    if tag[0] != LITTLE_ENDIAN_TAG {
        return Err(CliError::Format(format!(
            "{name}: unsupported endianness tag {:?}, expected {:?}",
            tag[0] as char,
            LITTLE_ENDIAN_TAG as char,
        )));
    }

    let dim = read_u32(&mut r, "dimension", &name)? as usize;
    let n = read_u32(&mut r, "points per axis", &name)? as usize;
    let period = read_f64(&mut r, "period", &name)?;
    let components = read_u32(&mut r, "component count", &name)? as usize;
    if components == 0 || components > 16 {
        return Err(CliError::Format(format!(
            "{name}: implausible component count {components}"
        )));
    }

    let grid = Grid::new(dim, n, period)?;
    let mut comps = Vec::with_capacity(components);
    for _ in 0..components {
        let mut samples = vec![0.0f64; grid.len()];
        for v in samples.iter_mut() {
            *v = read_f64(&mut r, "sample data", &name)?;
        }
        comps.push(samples);
    }
    Ok(Field::from_samples(&grid, comps))
}

/// Read a field and require its grid to match `grid` exactly.
pub fn read_field_on(path: &Path, grid: &Arc<Grid>) -> Result<Field> {
    let field = read_field(path)?;
    if !field.grid().same(grid) {
        return Err(CliError::Format(format!(
            "{}: grid mismatch: file has d={} N={} period={}, run expects d={} N={} period={}",
            path.display(),
            field.grid().dim(),
            field.grid().points_per_axis(),
            field.grid().period(),
            grid.dim(),
            grid.points_per_axis(),
            grid.period(),
        )));
    }
    Ok(field)
}

fn read_exact(
    r: &mut impl Read,
    buf: &mut [u8],
    what: &str,
    name: &std::path::Display<'_>,
) -> Result<()> {
    r.read_exact(buf).map_err(|_| {
        CliError::Format(format!("{name}: truncated while reading {what}"))
    })
}

fn read_u32(r: &mut impl Read, what: &str, name: &std::path::Display<'_>) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, what, name)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64(r: &mut impl Read, what: &str, name: &std::path::Display<'_>) -> Result<f64> {
    let mut buf = [0u8; 8];
    read_exact(r, &mut buf, what, name)?;
    Ok(f64::from_le_bytes(buf))
}
