//! Coarse-to-fine Lucas–Kanade on luma.
//!
//! Each pixel solves its own windowed least-squares problem at every pyramid
//! level, starting from the upsampled estimate of the level below. Pixels
//! whose structure tensor is near-singular keep that starting estimate.

use super::FlowField;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::imgcore::{Image, Taps};

/// Determinant-to-squared-trace ratio below which a window is treated as degenerate.
const DEGENERACY_RATIO: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowParams {
    pub levels: usize,
    /// Window half-size; the window is `(2r+1)²`.
    pub radius: usize,
    pub iterations: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            levels: 3,
            radius: 2,
            iterations: 10,
        }
    }
}

impl FlowParams {
    /// Smallest image side the pyramid accepts.
    pub fn min_side(&self) -> usize {
        (1usize << (self.levels - 1)) * (2 * self.radius + 1)
    }
}

/// 2×2 box reduction, dropping a trailing odd row or column.
fn half(img: &Image) -> Image {
    let (w, h) = (img.width() / 2, img.height() / 2);
    let data = (0..h)
        .flat_map(|y| {
            (0..w).map(move |x| {
                0.25 * (img.get(2 * x, 2 * y, 0)
                    + img.get(2 * x + 1, 2 * y, 0)
                    + img.get(2 * x, 2 * y + 1, 0)
                    + img.get(2 * x + 1, 2 * y + 1, 0))
            })
        })
        .collect();
    Image::from_raw(w, h, 1, data)
}

fn upsample_flow(coarse: &FlowField, width: usize, height: usize) -> FlowField {
    let mut data = Vec::with_capacity(width * height * 2);
    for y in 0..height {
        for x in 0..width {
            let (u, v) = coarse.sample((x as f64 + 0.5) / 2.0 - 0.5, (y as f64 + 0.5) / 2.0 - 0.5);
            data.push(2.0 * u);
            data.push(2.0 * v);
        }
    }
    FlowField {
        width,
        height,
        data,
    }
}

/// Central-difference gradients with clamped borders.
fn gradients(img: &Image) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mut gx = Vec::with_capacity((w * h) as usize);
    let mut gy = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            gx.push(0.5 * (img.get_clamped(x + 1, y, 0) - img.get_clamped(x - 1, y, 0)));
            gy.push(0.5 * (img.get_clamped(x, y + 1, 0) - img.get_clamped(x, y - 1, 0)));
        }
    }
    (gx, gy)
}

fn refine_level(
    exec: Execution,
    a: &Image,
    b: &Image,
    init: &FlowField,
    params: &FlowParams,
) -> FlowField {
    let (w, h) = (a.width(), a.height());
    let (gx, gy) = gradients(a);
    let r = params.radius as isize;
    let mut data = vec![0.0; w * h * 2];
    exec.fill_rows(&mut data, 2 * w, |y, row| {
        let y = y as isize;
        for x in 0..w as isize {
            let (mut u, mut v) = init.get(x as usize, y as usize);
            let window = || {
                (-r..=r).flat_map(move |dy| (-r..=r).map(move |dx| (x + dx, y + dy))).filter(
                    |&(qx, qy)| qx >= 0 && qy >= 0 && qx < w as isize && qy < h as isize,
                )
            };
            let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
            for (qx, qy) in window() {
                let i = qy as usize * w + qx as usize;
                sxx += gx[i] * gx[i];
                sxy += gx[i] * gy[i];
                syy += gy[i] * gy[i];
            }
            let trace = sxx + syy;
            let det = sxx * syy - sxy * sxy;
            if trace > 0.0 && det / (trace * trace) >= DEGENERACY_RATIO {
                for _ in 0..params.iterations {
                    let (mut bx, mut by) = (0.0, 0.0);
                    for (qx, qy) in window() {
                        let i = qy as usize * w + qx as usize;
                        let warped =
                            Taps::at(w, h, qx as f64 + u, qy as f64 + v).sample(b, 0);
                        let it = warped - a.get(qx as usize, qy as usize, 0);
                        bx += gx[i] * it;
                        by += gy[i] * it;
                    }
                    let du = -(syy * bx - sxy * by) / det;
                    let dv = -(sxx * by - sxy * bx) / det;
                    u += du;
                    v += dv;
                    if du.abs().max(dv.abs()) < 1e-6 {
                        break;
                    }
                }
            }
            row[2 * x as usize] = u;
            row[2 * x as usize + 1] = v;
        }
    });
    FlowField {
        width: w,
        height: h,
        data,
    }
}

/// Estimate the flow from `a` to `b` with the default execution mode.
pub fn estimate_flow(a: &Image, b: &Image, params: &FlowParams) -> Result<FlowField> {
    estimate_flow_with(Execution::default(), a, b, params)
}

pub fn estimate_flow_with(
    exec: Execution,
    a: &Image,
    b: &Image,
    params: &FlowParams,
) -> Result<FlowField> {
    a.ensure_same_shape(b, "estimate_flow")?;
    if params.levels == 0 {
        return Err(Error::arg("flow pyramid needs at least one level"));
    }
    let min_side = params.min_side();
    if a.width().min(a.height()) < min_side {
        return Err(Error::arg(format!(
            "{}x{} image too small for {} levels with radius {} (need {min_side})",
            a.width(),
            a.height(),
            params.levels,
            params.radius
        )));
    }
    let mut pyr_a = vec![a.luma()];
    let mut pyr_b = vec![b.luma()];
    for _ in 1..params.levels {
        let next_a = half(pyr_a.last().unwrap());
        let next_b = half(pyr_b.last().unwrap());
        pyr_a.push(next_a);
        pyr_b.push(next_b);
    }
    let coarsest = pyr_a.last().unwrap();
    let mut flow = FlowField {
        width: coarsest.width(),
        height: coarsest.height(),
        data: vec![0.0; coarsest.width() * coarsest.height() * 2],
    };
    for level in (0..params.levels).rev() {
        let (la, lb) = (&pyr_a[level], &pyr_b[level]);
        if !flow.same_dims(la.width(), la.height()) {
            flow = upsample_flow(&flow, la.width(), la.height());
        }
        flow = refine_level(exec, la, lb, &flow, params);
    }
    Ok(flow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Smooth multi-frequency texture.
    fn texture(w: usize, h: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves: Vec<(f64, f64, f64)> = (0..6)
            .map(|_| (rng.gen_range(0.1..0.6), rng.gen_range(0.1..0.6), rng.gen_range(0.0..std::f64::consts::TAU)))
            .collect();
        Image::from_fn(w, h, 1, |x, y, _| {
            let s: f64 = waves
                .iter()
                .map(|&(fx, fy, p)| (fx * x as f64 + p).sin() * (fy * y as f64 + 0.5 * p).cos())
                .sum();
            0.5 + s / 12.0
        })
        .unwrap()
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let a = texture(40, 32, 1);
        let f = estimate_flow(&a, &a, &FlowParams::default()).unwrap();
        assert!(f.data().iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn flat_frames_give_zero_flow() {
        let a = Image::filled(32, 32, 3, 0.4).unwrap();
        let b = Image::filled(32, 32, 3, 0.6).unwrap();
        let f = estimate_flow(&a, &b, &FlowParams::default()).unwrap();
        assert!(f.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn recovers_integer_shift() {
        let a = texture(64, 64, 7);
        let b = Image::from_fn(64, 64, 1, |x, y, _| a.get_clamped(x as isize - 3, y as isize, 0)).unwrap();
        let f = estimate_flow(&a, &b, &FlowParams::default()).unwrap();
        let (mut us, mut vs) = (Vec::new(), Vec::new());
        for y in 8..56 {
            for x in 8..56 {
                let (u, v) = f.get(x, y);
                us.push(u);
                vs.push(v);
            }
        }
        let (mu, mv) = (median(us), median(vs));
        assert!((mu - 3.0).abs() < 0.25 && mv.abs() < 0.25, "median flow ({mu}, {mv})");
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let a = texture(48, 40, 2);
        let b = Image::from_fn(48, 40, 1, |x, y, _| a.get_clamped(x as isize - 1, y as isize + 2, 0)).unwrap();
        let p = FlowParams::default();
        assert_eq!(
            estimate_flow_with(Execution::Sequential, &a, &b, &p).unwrap(),
            estimate_flow_with(Execution::Parallel, &a, &b, &p).unwrap()
        );
    }

    #[test]
    fn rejects_small_or_mismatched() {
        let a = Image::new(16, 16, 1).unwrap();
        assert!(estimate_flow(&a, &a, &FlowParams::default()).is_err());
        let b = Image::new(24, 24, 1).unwrap();
        let c = Image::new(24, 20, 1).unwrap();
        assert!(estimate_flow(&b, &c, &FlowParams::default()).is_err());
    }
}
