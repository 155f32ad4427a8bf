//! Dense flow fields: container, backward warping, statistics, a pyramidal
//! Lucas–Kanade estimator and Middlebury `.flo` files.

mod flo;
mod lk;

pub use flo::{decode_flo, encode_flo, read_flo, write_flo, FLO_MAGIC};
pub use lk::{estimate_flow, estimate_flow_with, FlowParams};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::imgcore::{Image, Taps};

/// Per-pixel displacement `(u, v)`: pixel `(x, y)` of the source frame
/// corresponds to `(x + u, y + v)` in the target frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::constant(width, height, (0.0, 0.0))
    }

    pub fn constant(width: usize, height: usize, uv: (f64, f64)) -> Result<Self> {
        Self::from_vec(width, height, [uv.0, uv.1].repeat(width * height))
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::arg("flow dimensions must be positive"));
        }
        if data.len() != width * height * 2 {
            return Err(Error::arg(format!(
                "flow data has {} values, expected {}",
                data.len(),
                width * height * 2
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("flow vectors must be finite"));
        }
        Ok(FlowField {
            width,
            height,
            data,
        })
    }

    pub fn from_fn<F>(width: usize, height: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> (f64, f64),
    {
        let mut data = Vec::with_capacity(width * height * 2);
        for y in 0..height {
            for x in 0..width {
                let (u, v) = f(x, y);
                data.push(u);
                data.push(v);
            }
        }
        Self::from_vec(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Interleaved `(u, v)` values, row-major.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f64, f64) {
        let i = 2 * (y * self.width + x);
        (self.data[i], self.data[i + 1])
    }

    /// # Panics
    /// Panics on non-finite components.
    pub fn set(&mut self, x: usize, y: usize, uv: (f64, f64)) {
        assert!(uv.0.is_finite() && uv.1.is_finite());
        let i = 2 * (y * self.width + x);
        self.data[i] = uv.0;
        self.data[i + 1] = uv.1;
    }

    pub fn negated(&self) -> FlowField {
        FlowField {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| -v).collect(),
        }
    }

    pub fn vectors(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.data.chunks_exact(2).map(|p| (p[0], p[1]))
    }

    pub(crate) fn same_dims(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }

    pub(crate) fn ensure_dims(&self, width: usize, height: usize, what: &str) -> Result<()> {
        if self.same_dims(width, height) {
            Ok(())
        } else {
            Err(Error::arg(format!(
                "{what}: flow is {}x{}, expected {width}x{height}",
                self.width, self.height
            )))
        }
    }

    /// Bilinear lookup of the flow at a continuous position (clamped).
    pub(crate) fn sample(&self, x: f64, y: f64) -> (f64, f64) {
        let taps = Taps::at(self.width, self.height, x, y);
        taps.weights().iter().fold((0.0, 0.0), |(u, v), &(tx, ty, w)| {
            let (tu, tv) = self.get(tx, ty);
            (u + w * tu, v + w * tv)
        })
    }
}

/// `max(|u|, |v|)`.
#[inline]
pub fn inf_norm((u, v): (f64, f64)) -> f64 {
    u.abs().max(v.abs())
}

/// Backward warp: `out(x, y) = img(x + u, y + v)`, bilinear and edge-clamped.
pub fn warp(img: &Image, flow: &FlowField) -> Result<Image> {
    warp_with(Execution::default(), img, flow)
}

pub fn warp_with(exec: Execution, img: &Image, flow: &FlowField) -> Result<Image> {
    flow.ensure_dims(img.width(), img.height(), "warp")?;
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut out = vec![0.0; w * h * ch];
    exec.fill_rows(&mut out, w * ch, |y, row| {
        for x in 0..w {
            let (u, v) = flow.get(x, y);
            let taps = Taps::at(w, h, x as f64 + u, y as f64 + v);
            for c in 0..ch {
                row[x * ch + c] = taps.sample(img, c);
            }
        }
    });
    Ok(Image::from_raw(w, h, ch, out))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowStats {
    /// Largest per-pixel ∞-norm.
    pub max_inf_norm: f64,
    /// Fraction of pixels whose ∞-norm is at least the threshold.
    pub fraction_at_least: f64,
    /// Mean Euclidean distance to the reference field, when one was given.
    pub mean_endpoint_error: Option<f64>,
}

pub fn flow_stats(
    flow: &FlowField,
    magnitude_threshold: f64,
    reference: Option<&FlowField>,
) -> Result<FlowStats> {
    let mut max_inf_norm = 0.0f64;
    let mut count = 0usize;
    for uv in flow.vectors() {
        let m = inf_norm(uv);
        max_inf_norm = max_inf_norm.max(m);
        if m >= magnitude_threshold {
            count += 1;
        }
    }
    let mean_endpoint_error = match reference {
        None => None,
        Some(r) => Some(mean_endpoint_error(flow, r)?),
    };
    Ok(FlowStats {
        max_inf_norm,
        fraction_at_least: count as f64 / (flow.width * flow.height) as f64,
        mean_endpoint_error,
    })
}

/// Mean Euclidean norm of `a - b`.
pub fn mean_endpoint_error(a: &FlowField, b: &FlowField) -> Result<f64> {
    b.ensure_dims(a.width, a.height, "endpoint error")?;
    let total: f64 = a
        .vectors()
        .zip(b.vectors())
        .map(|((au, av), (bu, bv))| (au - bu).hypot(av - bv))
        .sum();
    Ok(total / (a.width * a.height) as f64)
}
