//! Line-prediction blur operator.
//!
//! Every output pixel is a weighted sum of `N` evenly spaced bilinear samples
//! along one line segment per input frame. The segment for frame `i` starts at
//! the pixel itself and ends at the pixel displaced by that frame's delta.

mod format;
mod raster;

pub use format::{decode_lpf, encode_lpf, read_lpf, write_lpf, LPF_MAGIC};
pub use raster::{rasterize_kernel, Kernel};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::imgcore::{bilinear_gradient, Image, Taps};

/// Per-frame line parameters: `delta` holds `(dx, dy)` pairs (`H×W×2`),
/// `weights` holds `N` sample weights per pixel (`H×W×N`).
#[derive(Debug, Clone, PartialEq)]
pub struct Lines {
    pub delta: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineField {
    width: usize,
    height: usize,
    n_samples: usize,
    lines: [Lines; 2],
}

impl LineField {
    /// Zero deltas and zero weights.
    pub fn zeros(width: usize, height: usize, n_samples: usize) -> Result<Self> {
        Self::constant(width, height, n_samples, [(0.0, 0.0); 2], 0.0)
    }

    /// Zero deltas with every weight set to `1 / (2N)`.
    pub fn uniform(width: usize, height: usize, n_samples: usize) -> Result<Self> {
        Self::constant(
            width,
            height,
            n_samples,
            [(0.0, 0.0); 2],
            uniform_weight(n_samples),
        )
    }

    /// The same pair of deltas at every pixel, every weight equal to `weight`.
    pub fn constant(
        width: usize,
        height: usize,
        n_samples: usize,
        deltas: [(f64, f64); 2],
        weight: f64,
    ) -> Result<Self> {
        let pixels = width * height;
        let make = |(dx, dy): (f64, f64)| Lines {
            delta: [dx, dy].repeat(pixels),
            weights: vec![weight; pixels * n_samples],
        };
        Self::from_lines(width, height, n_samples, [make(deltas[0]), make(deltas[1])])
    }

    pub fn from_lines(
        width: usize,
        height: usize,
        n_samples: usize,
        lines: [Lines; 2],
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::arg("line field dimensions must be positive"));
        }
        if n_samples < 2 {
            return Err(Error::arg(format!("line fields need at least 2 samples, got {n_samples}")));
        }
        let pixels = width * height;
        for (i, l) in lines.iter().enumerate() {
            if l.delta.len() != pixels * 2 || l.weights.len() != pixels * n_samples {
                return Err(Error::arg(format!("frame {} line arrays have the wrong length", i + 1)));
            }
            if l.delta.iter().chain(&l.weights).any(|v| !v.is_finite()) {
                return Err(Error::arg(format!("frame {} line arrays contain non-finite values", i + 1)));
            }
        }
        Ok(LineField {
            width,
            height,
            n_samples,
            lines,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Lines for frame `i` (0 or 1).
    pub fn lines(&self, i: usize) -> &Lines {
        &self.lines[i]
    }

    #[cfg(test)]
    pub(crate) fn lines_mut(&mut self, i: usize) -> &mut Lines {
        &mut self.lines[i]
    }

    pub fn into_lines(self) -> [Lines; 2] {
        self.lines
    }

    #[inline]
    pub fn delta(&self, i: usize, x: usize, y: usize) -> (f64, f64) {
        let p = 2 * (y * self.width + x);
        let d = &self.lines[i].delta;
        (d[p], d[p + 1])
    }

    #[inline]
    pub fn weights(&self, i: usize, x: usize, y: usize) -> &[f64] {
        let p = (y * self.width + x) * self.n_samples;
        &self.lines[i].weights[p..p + self.n_samples]
    }

    /// # Panics
    /// Panics on non-finite values.
    pub fn set_delta(&mut self, i: usize, x: usize, y: usize, delta: (f64, f64)) {
        assert!(delta.0.is_finite() && delta.1.is_finite());
        let p = 2 * (y * self.width + x);
        self.lines[i].delta[p] = delta.0;
        self.lines[i].delta[p + 1] = delta.1;
    }

    /// # Panics
    /// Panics on non-finite values or a weight slice of the wrong length.
    pub fn set_weights(&mut self, i: usize, x: usize, y: usize, weights: &[f64]) {
        assert_eq!(weights.len(), self.n_samples);
        assert!(weights.iter().all(|w| w.is_finite()));
        let p = (y * self.width + x) * self.n_samples;
        self.lines[i].weights[p..p + self.n_samples].copy_from_slice(weights);
    }

    /// Exchange the roles of the two frames.
    pub fn swapped(&self) -> LineField {
        let mut out = self.clone();
        out.lines.swap(0, 1);
        out
    }

    /// Fractional position `n / (N-1)` of sample `n` along its line.
    #[inline]
    pub fn sample_fraction(&self, n: usize) -> f64 {
        n as f64 / (self.n_samples - 1) as f64
    }

    fn ensure_matches(&self, i1: &Image, i2: &Image) -> Result<()> {
        i1.ensure_same_shape(i2, "render inputs")?;
        if i1.width() != self.width || i1.height() != self.height {
            return Err(Error::arg(format!(
                "line field is {}x{} but images are {}x{}",
                self.width,
                self.height,
                i1.width(),
                i1.height()
            )));
        }
        Ok(())
    }
}

/// The uniform per-sample weight `1 / (2N)`.
pub fn uniform_weight(n_samples: usize) -> f64 {
    1.0 / (2 * n_samples) as f64
}

/// Render the blurred image with the default execution mode.
pub fn render(i1: &Image, i2: &Image, lf: &LineField) -> Result<Image> {
    render_with(Execution::default(), i1, i2, lf)
}

pub fn render_with(exec: Execution, i1: &Image, i2: &Image, lf: &LineField) -> Result<Image> {
    lf.ensure_matches(i1, i2)?;
    let (w, h, ch) = (lf.width, lf.height, i1.channels());
    let images = [i1, i2];
    let mut out = vec![0.0; w * h * ch];
    exec.fill_rows(&mut out, w * ch, |y, row| {
        for x in 0..w {
            let px = &mut row[x * ch..(x + 1) * ch];
            for (i, img) in images.iter().enumerate() {
                let (dx, dy) = lf.delta(i, x, y);
                for (n, &wt) in lf.weights(i, x, y).iter().enumerate() {
                    let t = lf.sample_fraction(n);
                    let taps = Taps::at(w, h, x as f64 + t * dx, y as f64 + t * dy);
                    for (c, v) in px.iter_mut().enumerate() {
                        *v += wt * taps.sample(img, c);
                    }
                }
            }
        }
    });
    Ok(Image::from_raw(w, h, ch, out))
}

/// Gradients of `<upstream, render(i1, i2, lf)>` with respect to every line parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct LineFieldGrad {
    /// `H×W×2` per frame.
    pub delta: [Vec<f64>; 2],
    /// `H×W×N` per frame.
    pub weights: [Vec<f64>; 2],
}

pub fn render_vjp(i1: &Image, i2: &Image, lf: &LineField, upstream: &Image) -> Result<LineFieldGrad> {
    render_vjp_with(Execution::default(), i1, i2, lf, upstream)
}

pub fn render_vjp_with(
    exec: Execution,
    i1: &Image,
    i2: &Image,
    lf: &LineField,
    upstream: &Image,
) -> Result<LineFieldGrad> {
    lf.ensure_matches(i1, i2)?;
    upstream.ensure_same_shape(i1, "render cotangent")?;
    let (w, h, ns) = (lf.width, lf.height, lf.n_samples);
    let images = [i1, i2];
    // Row layout: [dDelta1 (2w) | dDelta2 (2w) | dW1 (Nw) | dW2 (Nw)].
    let row_len = 4 * w + 2 * ns * w;
    let mut buf = vec![0.0; row_len * h];
    exec.fill_rows(&mut buf, row_len, |y, row| {
        let (deltas, weights) = row.split_at_mut(4 * w);
        for x in 0..w {
            let up = upstream.pixel(x, y);
            for (i, img) in images.iter().enumerate() {
                let (dx, dy) = lf.delta(i, x, y);
                let mut gdx = 0.0;
                let mut gdy = 0.0;
                let gw = &mut weights[(i * w + x) * ns..(i * w + x + 1) * ns];
                for (n, &wt) in lf.weights(i, x, y).iter().enumerate() {
                    let t = lf.sample_fraction(n);
                    let (sx, sy) = (x as f64 + t * dx, y as f64 + t * dy);
                    let taps = Taps::at(w, h, sx, sy);
                    let mut value = 0.0;
                    let mut slope_x = 0.0;
                    let mut slope_y = 0.0;
                    for (c, &u) in up.iter().enumerate() {
                        value += u * taps.sample(img, c);
                        let (gx, gy) = bilinear_gradient(img, &taps, sx, sy, c);
                        slope_x += u * gx;
                        slope_y += u * gy;
                    }
                    gw[n] = value;
                    gdx += wt * t * slope_x;
                    gdy += wt * t * slope_y;
                }
                deltas[2 * (i * w + x)] = gdx;
                deltas[2 * (i * w + x) + 1] = gdy;
            }
        }
    });

    let mut grad = LineFieldGrad {
        delta: [Vec::with_capacity(2 * w * h), Vec::with_capacity(2 * w * h)],
        weights: [Vec::with_capacity(ns * w * h), Vec::with_capacity(ns * w * h)],
    };
    for row in buf.chunks_exact(row_len) {
        let (deltas, weights) = row.split_at(4 * w);
        for i in 0..2 {
            grad.delta[i].extend_from_slice(&deltas[2 * i * w..2 * (i + 1) * w]);
            grad.weights[i].extend_from_slice(&weights[i * ns * w..(i + 1) * ns * w]);
        }
    }
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingReport {
    /// Largest `max(|dx|, |dy|)` over both frames' deltas, in pixels.
    pub max_displacement: f64,
    pub min_required_samples: usize,
    pub undersampled: bool,
}

/// Minimum sample count for a given displacement: half the displacement plus the endpoint.
pub fn required_samples(max_displacement: f64) -> usize {
    (max_displacement / 2.0).ceil() as usize + 1
}

pub fn check_sampling(lf: &LineField) -> SamplingReport {
    let max_displacement = lf
        .lines
        .iter()
        .flat_map(|l| l.delta.iter())
        .fold(0.0f64, |m, d| m.max(d.abs()));
    let min_required_samples = required_samples(max_displacement);
    SamplingReport {
        max_displacement,
        min_required_samples,
        undersampled: lf.n_samples < min_required_samples,
    }
}
