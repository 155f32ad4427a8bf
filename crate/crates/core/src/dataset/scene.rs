//! Synthetic scenes: a textured sprite translating over a textured
//! background, with exact per-step flows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::FrameSequence;
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::imgcore::Image;

/// Largest total displacement a scene may span along either axis.
pub const MAX_TOTAL_DISPLACEMENT: f64 = 32.0;

/// Value-noise texture: random lattice values every `cell` pixels,
/// bilinearly interpolated, then scaled by `contrast` around 0.5.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextureSpec {
    pub seed: u64,
    pub cell: f64,
    pub contrast: f64,
}

impl TextureSpec {
    pub fn new(seed: u64) -> Self {
        TextureSpec {
            seed,
            cell: 3.0,
            contrast: 1.0,
        }
    }

    pub fn render(&self, width: usize, height: usize, channels: usize) -> Result<Image> {
        if !(self.cell > 0.0) {
            return Err(Error::arg("texture cell size must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let gw = (width as f64 / self.cell).ceil() as usize + 2;
        let gh = (height as f64 / self.cell).ceil() as usize + 2;
        let lattice: Vec<f64> = (0..gw * gh * channels).map(|_| rng.gen::<f64>()).collect();
        let lat = |gx: usize, gy: usize, c: usize| lattice[(gy * gw + gx) * channels + c];
        Image::from_fn(width, height, channels, |x, y, c| {
            let fx = x as f64 / self.cell;
            let fy = y as f64 / self.cell;
            let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
            let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
            let top = (1.0 - tx) * lat(x0, y0, c) + tx * lat(x0 + 1, y0, c);
            let bottom = (1.0 - tx) * lat(x0, y0 + 1, c) + tx * lat(x0 + 1, y0 + 1, c);
            let v = (1.0 - ty) * top + ty * bottom;
            (0.5 + self.contrast * (v - 0.5)).clamp(0.0, 1.0)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpriteShape {
    Square,
    Disc,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpriteSpec {
    pub shape: SpriteShape,
    /// Side length (square) or diameter (disc) in pixels.
    pub size: usize,
    pub texture: TextureSpec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub background: TextureSpec,
    pub sprite: SpriteSpec,
    /// Top-left corner of the sprite in the first frame.
    pub start: (f64, f64),
    /// Sprite displacement between consecutive frames.
    pub velocity: (f64, f64),
    pub frame_count: usize,
}

impl SceneSpec {
    pub fn total_displacement(&self) -> (f64, f64) {
        let steps = self.frame_count.saturating_sub(1) as f64;
        (self.velocity.0 * steps, self.velocity.1 * steps)
    }

    fn validate(&self) -> Result<()> {
        if self.frame_count < 2 {
            return Err(Error::arg("a scene needs at least 2 frames"));
        }
        let (tx, ty) = self.total_displacement();
        if tx.abs() > MAX_TOTAL_DISPLACEMENT || ty.abs() > MAX_TOTAL_DISPLACEMENT {
            return Err(Error::arg(format!(
                "total displacement ({tx}, {ty}) exceeds {MAX_TOTAL_DISPLACEMENT} px"
            )));
        }
        if !(self.velocity.0.is_finite() && self.velocity.1.is_finite()) {
            return Err(Error::arg("velocity must be finite"));
        }
        Ok(())
    }
}

/// Background plus sprite texels; composites the sprite at arbitrary positions.
#[derive(Debug, Clone)]
pub struct SceneRenderer {
    background: Image,
    sprite: Image,
    mask: Vec<bool>,
}

impl SceneRenderer {
    pub fn new(spec: &SceneSpec) -> Result<Self> {
        let background = spec
            .background
            .render(spec.width, spec.height, spec.channels)?;
        let size = spec.sprite.size;
        if size == 0 {
            return Err(Error::arg("sprite size must be positive"));
        }
        let sprite = spec.sprite.texture.render(size, size, spec.channels)?;
        let r = size as f64 / 2.0;
        let mask = (0..size * size)
            .map(|i| match spec.sprite.shape {
                SpriteShape::Square => true,
                SpriteShape::Disc => {
                    let (x, y) = ((i % size) as f64 + 0.5 - r, (i / size) as f64 + 0.5 - r);
                    x * x + y * y <= r * r
                }
            })
            .collect();
        Ok(SceneRenderer {
            background,
            sprite,
            mask,
        })
    }

    pub fn background(&self) -> &Image {
        &self.background
    }

    fn check_inside(&self, pos: (f64, f64)) -> Result<()> {
        let size = self.sprite.width() as f64;
        let (w, h) = (self.background.width() as f64, self.background.height() as f64);
        let inside = pos.0 >= 0.0
            && pos.1 >= 0.0
            && (pos.0 + size - 1.0).ceil() <= w - 1.0
            && (pos.1 + size - 1.0).ceil() <= h - 1.0;
        if inside {
            Ok(())
        } else {
            Err(Error::arg(format!("sprite at ({}, {}) leaves the canvas", pos.0, pos.1)))
        }
    }

    /// Composite the sprite with its top-left texel at `pos`. Returns the frame
    /// and the per-pixel sprite coverage in `[0, 1]`.
    pub fn frame_at(&self, pos: (f64, f64)) -> Result<(Image, Vec<f64>)> {
        self.check_inside(pos)?;
        let (w, h, ch) = (
            self.background.width(),
            self.background.height(),
            self.background.channels(),
        );
        let size = self.sprite.width();
        let mut premult = vec![0.0; w * h * ch];
        let mut coverage = vec![0.0; w * h];
        for sy in 0..size {
            for sx in 0..size {
                if !self.mask[sy * size + sx] {
                    continue;
                }
                let (px, py) = (pos.0 + sx as f64, pos.1 + sy as f64);
                let (x0, y0) = (px.floor() as usize, py.floor() as usize);
                let (fx, fy) = (px - x0 as f64, py - y0 as f64);
                let taps = [
                    (x0, y0, (1.0 - fx) * (1.0 - fy)),
                    (x0 + 1, y0, fx * (1.0 - fy)),
                    (x0, y0 + 1, (1.0 - fx) * fy),
                    (x0 + 1, y0 + 1, fx * fy),
                ];
                for (tx, ty, wt) in taps {
                    if wt == 0.0 {
                        continue;
                    }
                    let p = ty * w + tx;
                    coverage[p] += wt;
                    for c in 0..ch {
                        premult[p * ch + c] += wt * self.sprite.get(sx, sy, c);
                    }
                }
            }
        }
        let bg = self.background.data();
        let mut data = vec![0.0; w * h * ch];
        for p in 0..w * h {
            let cov = coverage[p];
            let (norm, alpha) = if cov > 1.0 { (1.0 / cov, 1.0) } else { (1.0, cov) };
            for c in 0..ch {
                let i = p * ch + c;
                data[i] = (1.0 - alpha) * bg[i] + norm * premult[i];
            }
            coverage[p] = alpha;
        }
        Ok((Image::from_raw(w, h, ch, data), coverage))
    }

    /// Flow equal to `uv` wherever the sprite covers at least half a pixel, zero elsewhere.
    pub fn support_flow(&self, coverage: &[f64], uv: (f64, f64)) -> FlowField {
        let (w, h) = (self.background.width(), self.background.height());
        FlowField::from_fn(w, h, |x, y| {
            if coverage[y * w + x] >= 0.5 {
                uv
            } else {
                (0.0, 0.0)
            }
        })
        .expect("finite flow")
    }
}

/// Generated frames with the exact motion between consecutive frames.
#[derive(Debug, Clone)]
pub struct Scene {
    pub sequence: FrameSequence,
    /// `forward_flows[k]` maps frame `k` to frame `k + 1`.
    pub forward_flows: Vec<FlowField>,
    /// `backward_flows[k]` maps frame `k + 1` back to frame `k`.
    pub backward_flows: Vec<FlowField>,
}

/// Render a scene. Each of the `frame_count - 1` steps is subdivided into
/// `substeps` intermediate frames, so the result holds
/// `(frame_count - 1) * substeps + 1` frames spanning the same motion.
pub fn gen_scene(spec: &SceneSpec, substeps: usize) -> Result<Scene> {
    spec.validate()?;
    if substeps == 0 {
        return Err(Error::arg("substeps must be at least 1"));
    }
    let renderer = SceneRenderer::new(spec)?;
    let total = (spec.frame_count - 1) * substeps;
    let step = (
        spec.velocity.0 / substeps as f64,
        spec.velocity.1 / substeps as f64,
    );
    let position = |k: usize| {
        let t = k as f64 / substeps as f64;
        (spec.start.0 + t * spec.velocity.0, spec.start.1 + t * spec.velocity.1)
    };
    renderer.check_inside(position(0))?;
    renderer.check_inside(position(total))?;

    let mut frames = Vec::with_capacity(total + 1);
    let mut coverages = Vec::with_capacity(total + 1);
    for k in 0..=total {
        let (frame, cov) = renderer.frame_at(position(k))?;
        frames.push(frame);
        coverages.push(cov);
    }
    let forward_flows = (0..total)
        .map(|k| renderer.support_flow(&coverages[k], step))
        .collect();
    let backward_flows = (0..total)
        .map(|k| renderer.support_flow(&coverages[k + 1], (-step.0, -step.1)))
        .collect();
    Ok(Scene {
        sequence: FrameSequence::new(frames)?,
        forward_flows,
        backward_flows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::average_frames;

    pub(crate) fn spec(velocity: (f64, f64), frame_count: usize) -> SceneSpec {
        SceneSpec {
            width: 48,
            height: 40,
            channels: 3,
            background: TextureSpec::new(1),
            sprite: SpriteSpec {
                shape: SpriteShape::Square,
                size: 10,
                texture: TextureSpec::new(2),
            },
            start: (6.0, 8.0),
            velocity,
            frame_count,
        }
    }

    #[test]
    fn static_scene() {
        let scene = gen_scene(&spec((0.0, 0.0), 4), 1).unwrap();
        let frames = scene.sequence.frames();
        assert!(frames.iter().all(|f| f == &frames[0]));
        assert!(scene
            .forward_flows
            .iter()
            .all(|f| f.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn integer_motion_is_exact() {
        let s = spec((1.0, 0.0), 3);
        let scene = gen_scene(&s, 1).unwrap();
        let renderer = SceneRenderer::new(&s).unwrap();
        let sprite = s.sprite.texture.render(10, 10, 3).unwrap();
        for (k, frame) in scene.sequence.frames().iter().enumerate() {
            for sy in 0..10 {
                for sx in 0..10 {
                    for c in 0..3 {
                        assert_eq!(frame.get(6 + k + sx, 8 + sy, c), sprite.get(sx, sy, c));
                    }
                }
            }
            // Outside the sprite the background is untouched.
            assert_eq!(frame.get(0, 0, 0), renderer.background().get(0, 0, 0));
            assert_eq!(frame.get(5 + k, 8, 1), renderer.background().get(5 + k, 8, 1));
        }
        let f = &scene.forward_flows[1];
        assert_eq!(f.get(7, 8), (1.0, 0.0));
        assert_eq!(f.get(6, 8), (0.0, 0.0));
        assert_eq!(scene.backward_flows[1].get(8 + 9, 8), (-1.0, 0.0));
    }

    #[test]
    fn subpixel_streak_stays_in_range() {
        let s = spec((0.5, 0.25), 33);
        let scene = gen_scene(&s, 1).unwrap();
        assert_eq!(scene.sequence.len(), 33);
        assert_eq!(s.total_displacement(), (16.0, 8.0));
        let blur = average_frames(&scene.sequence).unwrap();
        assert!(blur.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        // The streak differs from the background along the whole path.
        let renderer = SceneRenderer::new(&s).unwrap();
        let bg = renderer.background();
        let changed = (6..22).filter(|&x| (blur.get(x, 13, 0) - bg.get(x, 13, 0)).abs() > 1e-9).count();
        assert_eq!(changed, 16);
    }

    #[test]
    fn substeps_subdivide_motion() {
        let s = spec((8.0, 0.0), 3);
        let scene = gen_scene(&s, 16).unwrap();
        assert_eq!(scene.sequence.len(), 33);
        assert!(scene.forward_flows.iter().all(|f| f.get(10, 12) == (0.5, 0.0) || f.get(10, 12) == (0.0, 0.0)));
        let dense = gen_scene(&spec((0.5, 0.0), 33), 1).unwrap();
        assert_eq!(dense.sequence.frames(), scene.sequence.frames());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(gen_scene(&spec((17.0, 0.0), 3), 1).is_err());
        assert!(gen_scene(&spec((0.0, 0.0), 1), 1).is_err());
        assert!(gen_scene(&spec((0.0, 0.0), 2), 0).is_err());
        let mut s = spec((8.0, 0.0), 5);
        s.start = (20.0, 8.0);
        assert!(matches!(gen_scene(&s, 1), Err(Error::Argument(_))));
        s.start = (-0.5, 8.0);
        assert!(gen_scene(&s, 1).is_err());
    }

    #[test]
    fn deterministic() {
        let s = spec((0.7, -0.3), 5);
        let a = gen_scene(&s, 2).unwrap();
        let b = gen_scene(&s, 2).unwrap();
        assert_eq!(a.sequence.frames(), b.sequence.frames());
    }
}
