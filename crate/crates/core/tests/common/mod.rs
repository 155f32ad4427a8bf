//! Fixtures and oracles shared by the integration suites.
#![allow(dead_code)]

use blurforge::dataset::{SceneRenderer, SceneSpec, SpriteShape, SpriteSpec, TextureSpec, TripletFlows};
use blurforge::flow::FlowField;
use blurforge::linepred::{render_vjp_with, render_with, LineField, Lines};
use blurforge::{Execution, Image};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, c: usize) -> Image {
    Image::from_fn(w, h, c, |_, _, _| rng.gen()).unwrap()
}

pub fn random_field(rng: &mut ChaCha8Rng, w: usize, h: usize, n: usize, reach: f64) -> LineField {
    let mut lines = || Lines {
        delta: (0..2 * w * h).map(|_| rng.gen_range(-reach..reach)).collect(),
        weights: (0..n * w * h).map(|_| rng.gen()).collect(),
    };
    let a = lines();
    let b = lines();
    LineField::from_lines(w, h, n, [a, b]).unwrap()
}

/// Worst finite-difference mismatch of `render_vjp` on one random setup.
#[derive(Debug, Default, Clone, Copy)]
pub struct GradCheck {
    pub worst: f64,
    pub checked: usize,
    pub skipped: usize,
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn objective(i1: &Image, i2: &Image, lf: &LineField, up: &Image) -> f64 {
    let out = render_with(Execution::Sequential, i1, i2, lf).unwrap();
    out.data().iter().zip(up.data()).map(|(a, b)| a * b).sum()
}

/// Central differences with step `h` on every delta and weight entry,
/// skipping delta components whose moving samples sit within `1e-3` of a
/// lattice line.
pub fn grad_check(seed: u64, n: usize, h: f64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, ht, ch) = (8, 8, rng.gen_range(1..=3usize) * 2 - 1);
    let ch = if ch == 5 { 3 } else { ch };
    let i1 = random_image(&mut rng, w, ht, ch);
    let i2 = random_image(&mut rng, w, ht, ch);
    let up = Image::from_fn(w, ht, ch, |_, _, _| rng.gen_range(-1.0..1.0)).unwrap();
    let lf = random_field(&mut rng, w, ht, n, 6.0);
    let g = render_vjp_with(Execution::Sequential, &i1, &i2, &lf, &up).unwrap();
    let mut report = GradCheck::default();

    for i in 0..2 {
        let lines = lf.lines(i);
        for (k, &analytic) in g.delta[i].iter().enumerate() {
            let p = k / 2;
            let (x, y) = (p % w, p / w);
            let base = if k % 2 == 0 { x as f64 } else { y as f64 };
            let d = lines.delta[k];
            let near_lattice = (1..n).any(|s| {
                let pos = base + lf.sample_fraction(s) * d;
                (pos - pos.round()).abs() < 1e-3
            });
            if near_lattice {
                report.skipped += 1;
                continue;
            }
            let numeric = central(&i1, &i2, &lf, &up, h, |f, v| {
                let mut ls = f.clone().into_lines();
                ls[i].delta[k] += v;
                LineField::from_lines(w, ht, n, ls).unwrap()
            });
            report.worst = report.worst.max(rel_err(analytic, numeric));
            report.checked += 1;
        }
        for (k, &analytic) in g.weights[i].iter().enumerate() {
            let numeric = central(&i1, &i2, &lf, &up, h, |f, v| {
                let mut ls = f.clone().into_lines();
                ls[i].weights[k] += v;
                LineField::from_lines(w, ht, n, ls).unwrap()
            });
            report.worst = report.worst.max(rel_err(analytic, numeric));
            report.checked += 1;
        }
    }
    report
}

fn central(
    i1: &Image,
    i2: &Image,
    lf: &LineField,
    up: &Image,
    h: f64,
    perturb: impl Fn(&LineField, f64) -> LineField,
) -> f64 {
    let plus = objective(i1, i2, &perturb(lf, h), up);
    let minus = objective(i1, i2, &perturb(lf, -h), up);
    (plus - minus) / (2.0 * h)
}

/// Canvas for the filter fixtures.
pub const FIXTURE_W: usize = 80;
pub const FIXTURE_H: usize = 64;

#[derive(Debug, Clone, Copy)]
pub struct TripletFixture {
    pub contrast: f64,
    pub sprite: usize,
    pub step_12: (f64, f64),
    pub step_23: (f64, f64),
    pub brighten_f2: f64,
}

impl Default for TripletFixture {
    fn default() -> Self {
        TripletFixture {
            contrast: 1.0,
            sprite: 26,
            step_12: (10.0, 0.0),
            step_23: (10.0, 0.0),
            brighten_f2: 0.0,
        }
    }
}

impl TripletFixture {
    /// Frames plus the exact flows of the moving sprite.
    pub fn build(&self) -> ([Image; 3], TripletFlows) {
        let tex = |seed| TextureSpec {
            contrast: self.contrast,
            ..TextureSpec::new(seed)
        };
        let spec = SceneSpec {
            width: FIXTURE_W,
            height: FIXTURE_H,
            channels: 3,
            background: tex(31),
            sprite: SpriteSpec {
                shape: SpriteShape::Square,
                size: self.sprite,
                texture: tex(32),
            },
            start: (2.0, 12.0),
            velocity: self.step_12,
            frame_count: 2,
        };
        let r = SceneRenderer::new(&spec).unwrap();
        let p1 = (2.0, 12.0);
        let p2 = (p1.0 + self.step_12.0, p1.1 + self.step_12.1);
        let p3 = (p2.0 + self.step_23.0, p2.1 + self.step_23.1);
        let (f1, c1) = r.frame_at(p1).unwrap();
        let (f2, c2) = r.frame_at(p2).unwrap();
        let (f3, _) = r.frame_at(p3).unwrap();
        let f2 = f2.map(|v| v + self.brighten_f2).unwrap();
        let back = (-self.step_12.0, -self.step_12.1);
        let flows = TripletFlows {
            forward_12: r.support_flow(&c1, self.step_12),
            forward_23: r.support_flow(&c2, self.step_23),
            backward_21: r.support_flow(&c2, back),
        };
        ([f1, f2, f3], flows)
    }
}

pub fn zero_flow(w: usize, h: usize) -> FlowField {
    FlowField::zeros(w, h).unwrap()
}
