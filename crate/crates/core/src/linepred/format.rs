//! `LPF1` line-field files: the magic `LPF1`, little-endian `u32` width,
//! height and sample count, then `f32` arrays delta1, delta2, weights1, weights2.

use std::fs;
use std::path::Path;

use super::{LineField, Lines};
use crate::error::{Error, Result};

pub const LPF_MAGIC: &[u8; 4] = b"LPF1";

pub fn encode_lpf(lf: &LineField) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * 2 * lf.width() * lf.height() * (2 + lf.n_samples()));
    out.extend_from_slice(LPF_MAGIC);
    for v in [lf.width(), lf.height(), lf.n_samples()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    let arrays = [
        &lf.lines(0).delta,
        &lf.lines(1).delta,
        &lf.lines(0).weights,
        &lf.lines(1).weights,
    ];
    for arr in arrays {
        for &v in arr.iter() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_lpf(bytes: &[u8]) -> Result<LineField> {
    if bytes.len() < 16 {
        return Err(Error::format(bytes.len(), "truncated LPF1 header"));
    }
    if &bytes[..4] != LPF_MAGIC {
        return Err(Error::format(0, "missing LPF1 magic"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (w, h, n) = (word(0), word(1), word(2));
    if w == 0 || h == 0 {
        return Err(Error::format(4, format!("zero field dimension {w}x{h}")));
    }
    if n < 2 {
        return Err(Error::format(12, format!("sample count {n} below 2")));
    }
    let pixels = w
        .checked_mul(h)
        .ok_or_else(|| Error::format(4, "field dimensions overflow"))?;
    let lens = [2 * pixels, 2 * pixels, n * pixels, n * pixels];
    let needed = 16 + 4 * lens.iter().sum::<usize>();
    if bytes.len() < needed {
        return Err(Error::format(
            bytes.len(),
            format!("truncated LPF1 payload: {} of {needed} bytes", bytes.len()),
        ));
    }
    let mut offset = 16;
    let mut arrays = Vec::with_capacity(4);
    for len in lens {
        let mut arr = Vec::with_capacity(len);
        for chunk in bytes[offset..offset + 4 * len].chunks_exact(4) {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::format(offset + 4 * arr.len(), "non-finite LPF1 value"));
            }
            arr.push(v as f64);
        }
        offset += 4 * len;
        arrays.push(arr);
    }
    let w2 = arrays.pop().unwrap();
    let w1 = arrays.pop().unwrap();
    let d2 = arrays.pop().unwrap();
    let d1 = arrays.pop().unwrap();
    LineField::from_lines(
        w,
        h,
        n,
        [
            Lines {
                delta: d1,
                weights: w1,
            },
            Lines {
                delta: d2,
                weights: w2,
            },
        ],
    )
}

pub fn read_lpf(path: impl AsRef<Path>) -> Result<LineField> {
    decode_lpf(&fs::read(path)?)
}

pub fn write_lpf(path: impl AsRef<Path>, lf: &LineField) -> Result<()> {
    Ok(fs::write(path, encode_lpf(lf))?)
}
