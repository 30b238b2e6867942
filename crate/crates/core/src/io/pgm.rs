use std::path::Path;

use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};
use crate::sim::Frame;

/// Depth images store millimeters.
pub const DEPTH_UNITS_PER_METER: f64 = 1000.0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub data: Vec<u16>,
}

fn encode(width: usize, height: usize, maxval: u16, data: &[u16]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n{maxval}\n").into_bytes();
    if maxval > 255 {
        for v in data {
            out.extend_from_slice(&v.to_be_bytes());
        }
    } else {
        out.extend(data.iter().map(|&v| v as u8));
    }
    out
}

/// 16-bit big-endian depth in millimeters, saturating at 65535; 0 stays invalid.
pub fn write_depth_pgm(frame: &Frame, path: &Path) -> Result<()> {
    let data: Vec<u16> = frame
        .depth
        .iter()
        .map(|&d| (d * DEPTH_UNITS_PER_METER).round().clamp(0.0, u16::MAX as f64) as u16)
        .collect();
    write_bytes(path, &encode(frame.width, frame.height, u16::MAX, &data))
}

/// 8-bit label image; ids above 255 are rejected.
pub fn write_label_pgm(width: usize, height: usize, ids: &[u32], path: &Path) -> Result<()> {
    if ids.len() != width * height {
        return Err(Error::InvalidParams(format!(
            "label image has {} pixels, expected {width}x{height}",
            ids.len()
        )));
    }
    let data = ids
        .iter()
        .map(|&id| {
            u8::try_from(id)
                .map(u16::from)
                .map_err(|_| Error::InvalidParams(format!("label {id} does not fit an 8-bit image")))
        })
        .collect::<Result<Vec<u16>>>()?;
    write_bytes(path, &encode(width, height, 255, &data))
}

fn header_tokens(bytes: &[u8], path: &Path) -> Result<([usize; 3], usize)> {
    let mut values = [0usize; 3];
    let mut pos = 2;
    for slot in values.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        *slot = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(path, "malformed PGM header"))?;
    }
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(Error::parse(path, "malformed PGM header"));
    }
    Ok((values, pos + 1))
}

/// Binary (`P5`) PGM with 8- or 16-bit samples.
pub fn read_pgm(path: &Path) -> Result<PgmImage> {
    let bytes = read_bytes(path)?;
    if !bytes.starts_with(b"P5") {
        return Err(Error::parse(path, "not a binary PGM (missing P5 magic)"));
    }
    let ([width, height, maxval], offset) = header_tokens(&bytes, path)?;
    if maxval == 0 || maxval > u16::MAX as usize {
        return Err(Error::parse(path, format!("unsupported maxval {maxval}")));
    }
    let n = width * height;
    let body = &bytes[offset..];
    let data: Vec<u16> = if maxval > 255 {
        if body.len() < 2 * n {
            return Err(Error::parse(path, "truncated PGM data"));
        }
        body.chunks_exact(2).take(n).map(|b| u16::from_be_bytes([b[0], b[1]])).collect()
    } else {
        if body.len() < n {
            return Err(Error::parse(path, "truncated PGM data"));
        }
        body[..n].iter().map(|&b| b as u16).collect()
    };
    Ok(PgmImage {
        width,
        height,
        maxval: maxval as u16,
        data,
    })
}
