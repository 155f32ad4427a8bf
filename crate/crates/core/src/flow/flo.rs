//! Middlebury `.flo`: `f32` magic 202021.25, `i32` width and height, then
//! row-major interleaved `f32` `(u, v)`. Everything little-endian.

use std::fs;
use std::path::Path;

use super::FlowField;
use crate::error::{Error, Result};

pub const FLO_MAGIC: f32 = 202021.25;

pub fn encode_flo(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * flow.data().len());
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for &v in flow.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_flo(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < 12 {
        return Err(Error::format(bytes.len(), "truncated .flo header"));
    }
    let word = |i: usize| -> [u8; 4] { bytes[4 * i..4 * i + 4].try_into().unwrap() };
    let magic = f32::from_le_bytes(word(0));
    if magic != FLO_MAGIC {
        return Err(Error::format(0, format!("bad .flo magic {magic}")));
    }
    let w = i32::from_le_bytes(word(1));
    let h = i32::from_le_bytes(word(2));
    if w <= 0 || h <= 0 {
        return Err(Error::format(4, format!("invalid .flo dimensions {w}x{h}")));
    }
    let count = 2 * w as usize * h as usize;
    if bytes.len() < 12 + 4 * count {
        return Err(Error::format(
            bytes.len(),
            format!("truncated .flo payload: {} of {} bytes", bytes.len(), 12 + 4 * count),
        ));
    }
    let mut data = Vec::with_capacity(count);
    for (i, chunk) in bytes[12..12 + 4 * count].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::format(12 + 4 * i, "non-finite flow component"));
        }
        data.push(v as f64);
    }
    FlowField::from_vec(w as usize, h as usize, data)
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    decode_flo(&fs::read(path)?)
}

pub fn write_flo(path: impl AsRef<Path>, flow: &FlowField) -> Result<()> {
    Ok(fs::write(path, encode_flo(flow))?)
}
