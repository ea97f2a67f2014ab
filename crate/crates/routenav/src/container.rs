//! Shared helpers for the little-endian binary container family.
//!
//! All on-disk artifacts (descriptor tables, projections, checkpoints) start
//! with a 4-byte ASCII magic and a u32 version, followed by format-specific
//! header fields and raw tensor payloads.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub fn write_magic<W: Write>(w: &mut W, magic: &[u8; 4], version: u32) -> std::io::Result<()> {
    w.write_all(magic)?;
    w.write_all(&version.to_le_bytes())
}

/// Read and validate the magic/version header.
pub fn read_magic<R: Read>(r: &mut R, expect: &[u8; 4], expect_version: u32) -> Result<()> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::format("magic", "bad magic: file too short"))?;
    if &magic != expect {
        return Err(Error::format(
            "magic",
            format!(
                "bad magic: expected {:?}, found {:?}",
                String::from_utf8_lossy(expect),
                String::from_utf8_lossy(&magic)
            ),
        ));
    }
    let version = read_u32(r, "version")?;
    if version != expect_version {
        return Err(Error::format(
            "version",
            format!("unsupported version {version}, expected {expect_version}"),
        ));
    }
    Ok(())
}

pub fn write_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub fn read_u32<R: Read>(r: &mut R, field: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::format(field, "truncated while reading u32 field"))?;
    Ok(u32::from_le_bytes(buf))
}

pub fn write_f32_slice<W: Write>(w: &mut W, data: &[f32]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(data.len() * 4);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

/// Read exactly `count` f32 values; on shortfall the error names `field`.
pub fn read_f32_vec<R: Read>(r: &mut R, count: usize, field: &str) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes).map_err(|_| {
        Error::format(field, format!("truncated payload: expected {count} f32 values"))
    })?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn write_f64_slice<W: Write>(w: &mut W, data: &[f64]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(data.len() * 8);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_f64_vec<R: Read>(r: &mut R, count: usize, field: &str) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes).map_err(|_| {
        Error::format(field, format!("truncated payload: expected {count} f64 values"))
    })?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
        .collect())
}

/// Error unless the reader is fully consumed; catches payload/header mismatch.
pub fn expect_eof<R: Read>(r: &mut R, field: &str) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => Ok(()),
        Ok(_) => Err(Error::format(field, "trailing bytes after declared payload")),
        Err(e) => Err(Error::format(field, format!("read failure: {e}"))),
    }
}
