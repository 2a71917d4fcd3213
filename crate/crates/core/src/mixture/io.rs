//! Dataset containers.
//!
//! Binary layout: a 16-byte little-endian header (`b"GMIX"`, `u32` rows,
//! `u32` cols, `u32` dtype) followed by the row-major payload. The only dtype
//! is [`DTYPE_F64`]. Anything without the magic is read as headerless CSV.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GMIX";

/// dtype code for `f64` entries (their width in bytes).
pub const DTYPE_F64: u32 = 8;

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Reads a matrix, detecting the container from the first four bytes.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.starts_with(MAGIC) {
        parse_gmix(path, &bytes)
    } else {
        parse_csv(path, &bytes)
    }
}

fn parse_gmix(path: &Path, bytes: &[u8]) -> Result<Array2<f64>> {
    if bytes.len() < 16 {
        return Err(format_err(path, "truncated header"));
    }
    let mut cur = &bytes[4..];
    let rows = cur.read_u32::<LittleEndian>()? as usize;
    let cols = cur.read_u32::<LittleEndian>()? as usize;
    let dtype = cur.read_u32::<LittleEndian>()?;
    if dtype != DTYPE_F64 {
        return Err(format_err(
            path,
            format!("unsupported dtype code {dtype}, expected {DTYPE_F64} (f64)"),
        ));
    }
    let expected = rows
        .checked_mul(cols)
        .and_then(|e| e.checked_mul(8))
        .ok_or_else(|| format_err(path, "header dimensions overflow"))?;
    if cur.len() != expected {
        return Err(format_err(
            path,
            format!("payload has {} bytes, header implies {expected}", cur.len()),
        ));
    }
    let mut data = vec![0.0; rows * cols];
    cur.read_f64_into::<LittleEndian>(&mut data)?;
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(format_err(
            path,
            format!("non-finite entry at row {}, column {}", i / cols, i % cols),
        ));
    }
    Array2::from_shape_vec((rows, cols), data).map_err(|e| format_err(path, e.to_string()))
}

fn parse_csv(path: &Path, bytes: &[u8]) -> Result<Array2<f64>> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in BufReader::new(bytes).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut count = 0;
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                format_err(
                    path,
                    format!(
                        "line {}: cannot parse `{}` as a number",
                        lineno + 1,
                        field.trim()
                    ),
                )
            })?;
            if !v.is_finite() {
                return Err(format_err(
                    path,
                    format!("line {}: non-finite value", lineno + 1),
                ));
            }
            data.push(v);
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(c) if c != count => {
                return Err(format_err(
                    path,
                    format!("line {} has {count} fields, expected {c}", lineno + 1),
                ));
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| format_err(path, "no data rows"))?;
    Array2::from_shape_vec((rows, cols), data).map_err(|e| format_err(path, e.to_string()))
}

pub fn write_gmix(path: &Path, m: ArrayView2<f64>) -> Result<()> {
    let (rows, cols) = m.dim();
    let to_u32 = |v: usize| u32::try_from(v).map_err(|_| format_err(path, "dimension exceeds u32"));
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_u32::<LittleEndian>(to_u32(rows)?)?;
    out.write_u32::<LittleEndian>(to_u32(cols)?)?;
    out.write_u32::<LittleEndian>(DTYPE_F64)?;
    for v in m.iter() {
        out.write_f64::<LittleEndian>(*v)?;
    }
    out.flush()?;
    Ok(())
}

/// Headerless CSV with shortest round-trip formatting.
pub fn write_csv(path: &Path, m: ArrayView2<f64>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}
