//! Little-endian binary formats.
//!
//! Dictionary: `"LBCD"`, u32 version (1), u32 side, u32 filter count, then
//! the atoms as f64 in column-major order.
//!
//! Needle dump: `"LBNF"`, u32 height, width, side and filter count, then for
//! every needle position in row-major order a u32 entry count followed by
//! that many (u16 filter index, f64 value) pairs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dict::LocalDictionary;
use crate::error::{CscError, Result};
use crate::needles::{Needle, NeedleField};

const DICT_MAGIC: &[u8; 4] = b"LBCD";
const DICT_VERSION: u32 = 1;
const NEEDLE_MAGIC: &[u8; 4] = b"LBNF";

fn format_err(what: &'static str, reason: impl Into<String>) -> CscError {
    CscError::Format {
        what,
        reason: reason.into(),
    }
}

fn to_u32(v: usize, what: &'static str) -> Result<u32> {
    u32::try_from(v).map_err(|_| format_err(what, format!("{v} does not fit in 32 bits")))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u16(r: &mut impl Read) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn expect_magic(r: &mut impl Read, magic: &[u8; 4], what: &'static str) -> Result<()> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    if &b != magic {
        return Err(format_err(what, format!("bad magic {b:?}")));
    }
    Ok(())
}

fn expect_end(r: &mut impl Read, what: &'static str) -> Result<()> {
    let mut b = [0u8; 1];
    match r.read(&mut b)? {
        0 => Ok(()),
        _ => Err(format_err(what, "trailing bytes")),
    }
}

pub fn write_dict(w: &mut impl Write, dict: &LocalDictionary) -> Result<()> {
    w.write_all(DICT_MAGIC)?;
    w.write_all(&DICT_VERSION.to_le_bytes())?;
    w.write_all(&to_u32(dict.side(), "dictionary")?.to_le_bytes())?;
    w.write_all(&to_u32(dict.num_filters(), "dictionary")?.to_le_bytes())?;
    for v in dict.column_major() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_dict(r: &mut impl Read) -> Result<LocalDictionary> {
    const WHAT: &str = "dictionary";
    expect_magic(r, DICT_MAGIC, WHAT)?;
    let version = read_u32(r)?;
    if version != DICT_VERSION {
        return Err(format_err(WHAT, format!("unsupported version {version}")));
    }
    let side = read_u32(r)? as usize;
    let m = read_u32(r)? as usize;
    let len = side
        .checked_mul(side)
        .and_then(|n| n.checked_mul(m))
        .filter(|&l| l > 0 && l <= 1 << 28)
        .ok_or_else(|| format_err(WHAT, format!("implausible size {side}x{side}x{m}")))?;
    let atoms = (0..len).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
    expect_end(r, WHAT)?;
    LocalDictionary::from_column_major(side, m, atoms)
}

pub fn write_dict_file(path: &Path, dict: &LocalDictionary) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dict(&mut w, dict)?;
    w.flush()?;
    Ok(())
}

pub fn read_dict_file(path: &Path) -> Result<LocalDictionary> {
    read_dict(&mut BufReader::new(File::open(path)?))
}

/// Exact size in bytes of the dump of `field`.
pub fn needle_dump_len(field: &NeedleField) -> usize {
    20 + 4 * field.grid().len() + 10 * field.nnz()
}

pub fn write_needles(w: &mut impl Write, field: &NeedleField) -> Result<()> {
    const WHAT: &str = "needle dump";
    if field.num_filters() > 1 << 16 {
        return Err(format_err(WHAT, "filter indices exceed 16 bits"));
    }
    w.write_all(NEEDLE_MAGIC)?;
    for v in [
        field.height(),
        field.width(),
        field.side(),
        field.num_filters(),
    ] {
        w.write_all(&to_u32(v, WHAT)?.to_le_bytes())?;
    }
    for (_, needle) in field.iter() {
        w.write_all(&to_u32(needle.nnz(), WHAT)?.to_le_bytes())?;
        for &(j, a) in needle.entries() {
            w.write_all(&(j as u16).to_le_bytes())?;
            w.write_all(&a.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_needles(r: &mut impl Read) -> Result<NeedleField> {
    const WHAT: &str = "needle dump";
    expect_magic(r, NEEDLE_MAGIC, WHAT)?;
    let h = read_u32(r)? as usize;
    let w = read_u32(r)? as usize;
    let side = read_u32(r)? as usize;
    let m = read_u32(r)? as usize;
    let mut field = NeedleField::zeros(h, w, side, m)?;
    let grid = field.grid();
    for i in 0..grid.len() {
        let count = read_u32(r)? as usize;
        if count > m {
            return Err(format_err(
                WHAT,
                format!("needle {i} has {count} entries for {m} filters"),
            ));
        }
        let mut pairs = Vec::with_capacity(count);
        for _ in 0..count {
            let j = read_u16(r)? as usize;
            let a = read_f64(r)?;
            if j >= m || a == 0.0 || !a.is_finite() {
                return Err(format_err(
                    WHAT,
                    format!("bad entry ({j}, {a}) in needle {i}"),
                ));
            }
            if pairs.last().is_some_and(|&(p, _)| p >= j as u32) {
                return Err(format_err(WHAT, format!("unsorted entries in needle {i}")));
            }
            pairs.push((j as u32, a));
        }
        field.set(grid.position(i), Needle::from_pairs(pairs));
    }
    expect_end(r, WHAT)?;
    Ok(field)
}

pub fn write_needles_file(path: &Path, field: &NeedleField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_needles(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn read_needles_file(path: &Path) -> Result<NeedleField> {
    read_needles(&mut BufReader::new(File::open(path)?))
}
