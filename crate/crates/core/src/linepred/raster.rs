use std::collections::BTreeMap;

use super::LineField;
use crate::error::{Error, Result};
use crate::imgcore::{Image, Taps};

/// Dense per-pixel convolution kernel: integer offset `(dx, dy)` to weight.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Kernel {
    pub taps: BTreeMap<(isize, isize), f64>,
}

impl Kernel {
    pub fn mass(&self) -> f64 {
        self.taps.values().sum()
    }

    /// Inner product with the edge-clamped image around `(x, y)`.
    pub fn apply(&self, img: &Image, x: usize, y: usize, c: usize) -> f64 {
        self.taps
            .iter()
            .map(|(&(ox, oy), &w)| w * img.get_clamped(x as isize + ox, y as isize + oy, c))
            .sum()
    }
}

/// Expand the two lines at `(x, y)` into one dense kernel per input frame.
///
/// Each sample deposits its weight on the (non-zero) bilinear taps of its
/// clamped position, so applying the kernels reproduces `render` at this pixel.
pub fn rasterize_kernel(lf: &LineField, x: usize, y: usize) -> Result<[Kernel; 2]> {
    if x >= lf.width() || y >= lf.height() {
        return Err(Error::arg(format!(
            "pixel ({x}, {y}) outside {}x{} field",
            lf.width(),
            lf.height()
        )));
    }
    let mut kernels = [Kernel::default(), Kernel::default()];
    for (i, kernel) in kernels.iter_mut().enumerate() {
        let (dx, dy) = lf.delta(i, x, y);
        for (n, &wt) in lf.weights(i, x, y).iter().enumerate() {
            let t = lf.sample_fraction(n);
            let taps = Taps::at(lf.width(), lf.height(), x as f64 + t * dx, y as f64 + t * dy);
            for (tx, ty, coef) in taps.weights() {
                if coef == 0.0 {
                    continue;
                }
                let offset = (tx as isize - x as isize, ty as isize - y as isize);
                *kernel.taps.entry(offset).or_insert(0.0) += wt * coef;
            }
        }
    }
    Ok(kernels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linepred::{render, uniform_weight, Lines};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_delta_is_single_tap() {
        let lf = LineField::uniform(5, 4, 6).unwrap();
        for (x, y) in [(0, 0), (4, 3), (2, 1)] {
            for k in rasterize_kernel(&lf, x, y).unwrap() {
                assert_eq!(k.taps.len(), 1);
                let mass = k.taps[&(0, 0)];
                assert!((mass - 6.0 * uniform_weight(6)).abs() < 1e-15);
                assert!((mass - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn integer_endpoint_taps() {
        let (a, b) = (0.3, 0.6);
        let lines = |d: [f64; 2]| Lines {
            delta: d.repeat(9),
            weights: [a, b].repeat(9),
        };
        let lf = LineField::from_lines(3, 3, 2, [lines([1.0, 0.0]), lines([0.0, 0.0])]).unwrap();
        let [k1, _] = rasterize_kernel(&lf, 1, 1).unwrap();
        assert_eq!(k1.taps.len(), 2);
        assert_eq!(k1.taps[&(0, 0)], a);
        assert_eq!(k1.taps[&(1, 0)], b);
    }

    #[test]
    fn out_of_range_pixel() {
        let lf = LineField::uniform(3, 3, 2).unwrap();
        assert!(matches!(rasterize_kernel(&lf, 3, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn mass_equals_weight_sum_and_kernel_reproduces_render() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (w, h, n) = (10, 8, 9);
        let mut make = || Lines {
            delta: (0..w * h * 2).map(|_| rng.gen_range(-12.0..12.0)).collect(),
            weights: (0..w * h * n).map(|_| rng.gen::<f64>()).collect(),
        };
        let lf = LineField::from_lines(w, h, n, [make(), make()]).unwrap();
        let i1 = Image::from_fn(w, h, 3, |_, _, _| rng.gen()).unwrap();
        let i2 = Image::from_fn(w, h, 3, |_, _, _| rng.gen()).unwrap();
        let out = render(&i1, &i2, &lf).unwrap();
        for y in 0..h {
            for x in 0..w {
                let kernels = rasterize_kernel(&lf, x, y).unwrap();
                for (i, k) in kernels.iter().enumerate() {
                    let direct: f64 = lf.weights(i, x, y).iter().sum();
                    assert!((k.mass() - direct).abs() < 1e-12);
                }
                for c in 0..3 {
                    let v = kernels[0].apply(&i1, x, y, c) + kernels[1].apply(&i2, x, y, c);
                    assert!((v - out.get(x, y, c)).abs() < 1e-9);
                }
            }
        }
    }
}
