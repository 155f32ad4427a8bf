//! Binary PNM (P5/P6, maxval 255) and PFM (Pf/PF) codecs.

use std::fs;
use std::path::Path;

use super::Image;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pnm,
    Pfm,
}

impl ImageFormat {
    /// Pick a format from a file extension (`pgm`, `ppm`, `pnm`, `pfm`).
    pub fn from_path(path: &Path) -> Option<ImageFormat> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "pgm" | "ppm" | "pnm" => Some(ImageFormat::Pnm),
            "pfm" => Some(ImageFormat::Pfm),
            _ => None,
        }
    }
}

/// Minimal cursor over a netpbm-style ASCII header.
struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Header { bytes, pos: 0 }
    }

    fn magic(&mut self) -> Result<[u8; 2]> {
        if self.bytes.len() < 2 {
            return Err(Error::format(0, "file too short for magic number"));
        }
        self.pos = 2;
        Ok([self.bytes[0], self.bytes[1]])
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self, what: &str) -> Result<&'a str> {
        let at = self.pos;
        if at < self.bytes.len() && !self.bytes[at].is_ascii_whitespace() && self.bytes[at] != b'#' {
            return Err(Error::format(at, format!("expected whitespace before {what}")));
        }
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(start, format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::format(start, format!("{what} is not ASCII")))
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let start_hint = self.pos;
        let tok = self.token(what)?;
        tok.parse()
            .map_err(|_| Error::format(start_hint, format!("invalid {what} {tok:?}")))
    }

    /// Consume the single whitespace byte separating the header from the payload.
    fn end(&mut self) -> Result<usize> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => Ok(self.pos + 1),
            _ => Err(Error::format(self.pos, "expected single whitespace before payload")),
        }
    }
}

fn positive_dims(header: &mut Header<'_>) -> Result<(usize, usize)> {
    let at = header.pos;
    let w: usize = header.number("width")?;
    let h: usize = header.number("height")?;
    if w == 0 || h == 0 {
        return Err(Error::format(at, format!("zero image dimension {w}x{h}")));
    }
    Ok((w, h))
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    let mut header = Header::new(bytes);
    let channels = match &header.magic()? {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(Error::format(
                0,
                format!("unsupported PNM magic {:?}", String::from_utf8_lossy(other)),
            ))
        }
    };
    let (w, h) = positive_dims(&mut header)?;
    let maxval_at = header.pos;
    let maxval: u32 = header.number("maxval")?;
    if maxval != 255 {
        return Err(Error::format(maxval_at, format!("only maxval 255 is supported, got {maxval}")));
    }
    let start = header.end()?;
    let count = w * h * channels;
    let payload = &bytes[start.min(bytes.len())..];
    if payload.len() < count {
        return Err(Error::format(
            bytes.len(),
            format!("truncated payload: {} of {count} bytes", payload.len()),
        ));
    }
    let data = payload[..count].iter().map(|&b| b as f64 / 255.0).collect();
    Ok(Image::from_raw(w, h, channels, data))
}

/// Encode as P5/P6. Samples are clamped to `[0, 1]` and rounded to 8 bits.
pub fn encode_pnm(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| quantize_u8(v)));
    out
}

#[inline]
pub(crate) fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn decode_pfm(bytes: &[u8]) -> Result<Image> {
    let mut header = Header::new(bytes);
    let channels = match &header.magic()? {
        b"Pf" => 1,
        b"PF" => 3,
        other => {
            return Err(Error::format(
                0,
                format!("unsupported PFM magic {:?}", String::from_utf8_lossy(other)),
            ))
        }
    };
    let (w, h) = positive_dims(&mut header)?;
    let scale_at = header.pos;
    let scale: f32 = header.number("scale")?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format(scale_at, format!("invalid PFM scale {scale}")));
    }
    let little_endian = scale < 0.0;
    let start = header.end()?;
    let row_len = w * channels;
    let count = row_len * h;
    let payload = &bytes[start.min(bytes.len())..];
    if payload.len() < count * 4 {
        return Err(Error::format(
            bytes.len(),
            format!("truncated payload: {} of {} bytes", payload.len(), count * 4),
        ));
    }
    let mut data = vec![0.0; count];
    for (file_row, chunk) in payload[..count * 4].chunks_exact(row_len * 4).enumerate() {
        let y = h - 1 - file_row;
        for (i, b) in chunk.chunks_exact(4).enumerate() {
            let raw = [b[0], b[1], b[2], b[3]];
            let v = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            if !v.is_finite() {
                let offset = start + (file_row * row_len + i) * 4;
                return Err(Error::format(offset, "non-finite PFM sample"));
            }
            data[y * row_len + i] = v as f64;
        }
    }
    Ok(Image::from_raw(w, h, channels, data))
}

/// Encode as little-endian PFM. Samples are narrowed to `f32`.
pub fn encode_pfm(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 1 { "Pf" } else { "PF" };
    let mut out = format!("{magic}\n{} {}\n-1.0\n", img.width(), img.height()).into_bytes();
    let row_len = img.width() * img.channels();
    out.reserve(img.data().len() * 4);
    for row in img.data().chunks_exact(row_len).rev() {
        for &v in row {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn read_pnm(path: impl AsRef<Path>) -> Result<Image> {
    decode_pnm(&fs::read(path)?)
}

pub fn write_pnm(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    Ok(fs::write(path, encode_pnm(img))?)
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<Image> {
    decode_pfm(&fs::read(path)?)
}

pub fn write_pfm(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    Ok(fs::write(path, encode_pfm(img))?)
}

/// Read a PNM or PFM file, detected from its magic number.
pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let bytes = fs::read(path)?;
    match bytes.get(..2) {
        Some(b"P5") | Some(b"P6") => decode_pnm(&bytes),
        Some(b"Pf") | Some(b"PF") => decode_pfm(&bytes),
        _ => Err(Error::format(0, "not a PNM or PFM file")),
    }
}

/// Write using the format implied by the extension; unknown extensions write PFM.
pub fn write_image(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    match ImageFormat::from_path(path).unwrap_or(ImageFormat::Pfm) {
        ImageFormat::Pnm => write_pnm(path, img),
        ImageFormat::Pfm => write_pfm(path, img),
    }
}
