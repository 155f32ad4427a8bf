//! Image container, clamp-to-edge bilinear lookup, Sobel statistics and
//! block downsampling.

mod io;

pub use io::{
    decode_pfm, decode_pnm, encode_pfm, encode_pnm, read_image, read_pfm, read_pnm, write_image,
    write_pfm, write_pnm, ImageFormat,
};

use crate::error::{Error, Result};

/// Rec. 601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Row-major `height × width × channels` raster with samples nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        check_dims(width, height, channels)?;
        if !value.is_finite() {
            return Err(Error::arg("fill value must be finite"));
        }
        Ok(Image {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        })
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height, channels)?;
        if data.len() != width * height * channels {
            return Err(Error::arg(format!(
                "image data has {} samples, expected {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::arg(format!("non-finite sample at index {i}")));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_fn<F>(width: usize, height: usize, channels: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize) -> f64,
    {
        check_dims(width, height, channels)?;
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::from_vec(width, height, channels, data)
    }

    /// Build from raw samples that the caller guarantees are finite.
    pub(crate) fn from_raw(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Image {
            width,
            height,
            channels,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.index(x, y, c)]
    }

    /// # Panics
    /// Panics if `value` is not finite or the coordinate is out of range.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f64) {
        assert!(value.is_finite(), "image samples must be finite");
        let i = self.index(x, y, c);
        self.data[i] = value;
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = self.index(x, y, 0);
        &self.data[i..i + self.channels]
    }

    /// Sample at an integer coordinate, clamping it to the nearest edge pixel.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize, c: usize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.get(xc, yc, c)
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn ensure_same_shape(&self, other: &Image, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::arg(format!(
                "{what}: shape mismatch {}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    /// Apply `f` to every sample. Non-finite results are rejected.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Image> {
        Image::from_vec(
            self.width,
            self.height,
            self.channels,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Single-channel Rec. 601 luma. Gray images are returned unchanged.
    pub fn luma(&self) -> Image {
        match self.channels {
            1 => self.clone(),
            _ => {
                let data = self
                    .data
                    .chunks_exact(self.channels)
                    .map(|px| {
                        LUMA_WEIGHTS[0] * px[0] + LUMA_WEIGHTS[1] * px[1] + LUMA_WEIGHTS[2] * px[2]
                    })
                    .collect();
                Image::from_raw(self.width, self.height, 1, data)
            }
        }
    }

    pub fn transpose(&self) -> Image {
        let mut data = Vec::with_capacity(self.data.len());
        for x in 0..self.width {
            for y in 0..self.height {
                data.extend_from_slice(self.pixel(x, y));
            }
        }
        Image::from_raw(self.height, self.width, self.channels, data)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

fn check_dims(width: usize, height: usize, channels: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::arg(format!("image dimensions must be positive, got {width}x{height}")));
    }
    if channels != 1 && channels != 3 {
        return Err(Error::arg(format!("images have 1 or 3 channels, got {channels}")));
    }
    Ok(())
}

/// The four bilinear taps at a continuous position after clamping it into
/// `[0, width-1] × [0, height-1]`. Taps are `(x, y, weight)`; the weights sum to one.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Taps {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub fx: f64,
    pub fy: f64,
}

#[inline]
fn axis_cell(p: f64, len: usize) -> (usize, usize, f64) {
    if len == 1 {
        return (0, 0, 0.0);
    }
    let max = (len - 1) as f64;
    let pc = p.clamp(0.0, max);
    let i0 = (pc.floor() as usize).min(len - 2);
    (i0, i0 + 1, pc - i0 as f64)
}

impl Taps {
    #[inline]
    pub fn at(width: usize, height: usize, x: f64, y: f64) -> Taps {
        let (x0, x1, fx) = axis_cell(x, width);
        let (y0, y1, fy) = axis_cell(y, height);
        Taps {
            x0,
            y0,
            x1,
            y1,
            fx,
            fy,
        }
    }

    #[inline]
    pub fn weights(&self) -> [(usize, usize, f64); 4] {
        let (fx, fy) = (self.fx, self.fy);
        [
            (self.x0, self.y0, (1.0 - fx) * (1.0 - fy)),
            (self.x1, self.y0, fx * (1.0 - fy)),
            (self.x0, self.y1, (1.0 - fx) * fy),
            (self.x1, self.y1, fx * fy),
        ]
    }

    #[inline]
    pub fn sample(&self, img: &Image, c: usize) -> f64 {
        let (fx, fy) = (self.fx, self.fy);
        let top = (1.0 - fx) * img.get(self.x0, self.y0, c) + fx * img.get(self.x1, self.y0, c);
        let bottom = (1.0 - fx) * img.get(self.x0, self.y1, c) + fx * img.get(self.x1, self.y1, c);
        (1.0 - fy) * top + fy * bottom
    }
}

/// Left one-sided cell for differentiation along one axis, or `None` where
/// the clamped lookup is locally constant. On a lattice point `k` the cell
/// `[k-1, k]` is used.
#[inline]
fn axis_derivative_cell(p: f64, len: usize) -> Option<usize> {
    if len == 1 || p <= 0.0 || p > (len - 1) as f64 {
        return None;
    }
    Some(p.ceil() as usize - 1)
}

/// Spatial derivatives `(d/dx, d/dy)` of the bilinear lookup at `(x, y)`,
/// following the left-subcell convention on lattice lines.
#[inline]
pub(crate) fn bilinear_gradient(img: &Image, taps: &Taps, x: f64, y: f64, c: usize) -> (f64, f64) {
    let ddx = match axis_derivative_cell(x, img.width) {
        None => 0.0,
        Some(xl) => {
            let top = img.get(xl + 1, taps.y0, c) - img.get(xl, taps.y0, c);
            let bottom = img.get(xl + 1, taps.y1, c) - img.get(xl, taps.y1, c);
            (1.0 - taps.fy) * top + taps.fy * bottom
        }
    };
    let ddy = match axis_derivative_cell(y, img.height) {
        None => 0.0,
        Some(yl) => {
            let left = img.get(taps.x0, yl + 1, c) - img.get(taps.x0, yl, c);
            let right = img.get(taps.x1, yl + 1, c) - img.get(taps.x1, yl, c);
            (1.0 - taps.fx) * left + taps.fx * right
        }
    };
    (ddx, ddy)
}

/// Bilinear interpolation of channel `c` at a continuous position.
/// Positions outside the image are clamped to the border first.
pub fn bilinear_sample(img: &Image, x: f64, y: f64, c: usize) -> Result<f64> {
    if c >= img.channels {
        return Err(Error::arg(format!(
            "channel {c} out of range for {}-channel image",
            img.channels
        )));
    }
    if !x.is_finite() || !y.is_finite() {
        return Err(Error::arg("sample coordinates must be finite"));
    }
    Ok(Taps::at(img.width, img.height, x, y).sample(img, c))
}

/// Mean Sobel gradient magnitude of the luma channel on a `[0, 255]` scale,
/// with clamped borders.
pub fn sobel_mean_gradient(img: &Image) -> Result<f64> {
    if img.width < 3 || img.height < 3 {
        return Err(Error::arg(format!(
            "sobel needs at least 3x3 pixels, got {}x{}",
            img.width, img.height
        )));
    }
    let luma = img.luma();
    let at = |x: isize, y: isize| 255.0 * luma.get_clamped(x, y, 0);
    let mut total = 0.0;
    for y in 0..img.height as isize {
        for x in 0..img.width as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            total += gx.hypot(gy);
        }
    }
    Ok(total / (img.width * img.height) as f64)
}

/// Area-average downsampling by an integer factor.
pub fn downsample(img: &Image, factor: usize) -> Result<Image> {
    if factor < 2 {
        return Err(Error::arg(format!("downsample factor must be >= 2, got {factor}")));
    }
    if !img.width.is_multiple_of(factor) || !img.height.is_multiple_of(factor) {
        return Err(Error::arg(format!(
            "{}x{} is not divisible by {factor}",
            img.width, img.height
        )));
    }
    let (w, h, ch) = (img.width / factor, img.height / factor, img.channels);
    let norm = (factor * factor) as f64;
    let mut data = vec![0.0; w * h * ch];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for dy in 0..factor {
                    for dx in 0..factor {
                        acc += img.get(x * factor + dx, y * factor + dy, c);
                    }
                }
                data[(y * w + x) * ch + c] = acc / norm;
            }
        }
    }
    Ok(Image::from_raw(w, h, ch, data))
}
