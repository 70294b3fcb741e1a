//! Binary field format and CSV export.
//!
//! Layout, all little-endian: `b"MBEF"`, `u32` version, `u32` d, `u32` N, `f64` L,
//! `f64` time, then `N^d` `f64` samples in row-major order. The header is 32 bytes.

use std::io::{Read, Write};

use anyhow::{bail, ensure, Context, Result};
use mbe_core::{Field, GridSpec};

pub const MAGIC: [u8; 4] = *b"MBEF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

pub fn write_field(mut w: impl Write, f: &Field, t: f64) -> Result<()> {
    let g = f.grid();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * g.len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(g.n() as u32).to_le_bytes());
    buf.extend_from_slice(&g.length().to_le_bytes());
    buf.extend_from_slice(&t.to_le_bytes());
    for x in f.samples() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Returns the field and its time stamp.
pub fn read_field(mut r: impl Read) -> Result<(Field, f64)> {
    let mut head = [0u8; HEADER_LEN];
    r.read_exact(&mut head).context("truncated MBEF header")?;
    if head[..4] != MAGIC {
        bail!("not an MBEF file");
    }
    let u32_at = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().unwrap());
    let f64_at = |i: usize| f64::from_le_bytes(head[i..i + 8].try_into().unwrap());
    let version = u32_at(4);
    ensure!(version == VERSION, "unsupported MBEF version {version}");
    let grid = GridSpec::new(u32_at(8) as usize, u32_at(12) as usize, f64_at(16))?;
    let t = f64_at(24);
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    ensure!(body.len() == 8 * grid.len(), "MBEF body has {} bytes, expected {}", body.len(), 8 * grid.len());
    let samples = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((Field::new(grid, samples)?, t))
}

/// One row per sample: integer index per axis, then the value.
pub fn write_csv(w: impl Write, f: &Field) -> Result<()> {
    let g = f.grid();
    let mut out = csv::Writer::from_writer(w);
    if g.dim() == 1 {
        out.write_record(["i", "value"])?;
    } else {
        out.write_record(["i", "j", "value"])?;
    }
    for (flat, v) in f.samples().iter().enumerate() {
        let [i, j] = g.axes(flat);
        if g.dim() == 1 {
            out.write_record([i.to_string(), v.to_string()])?;
        } else {
            out.write_record([i.to_string(), j.to_string(), v.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}
