//! Per-image analysis-by-synthesis: recover a line field that renders a
//! given target from an image pair, by Adam on a smoothed L1 loss.

use crate::baselines::{line_field_from_flows, FlowMode};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::flow::FlowField;
use crate::imgcore::Image;
use crate::linepred::{render_vjp_with, render_with, uniform_weight, LineField, Lines};
use crate::metrics::psnr;

/// Line endpoint displacement cap, per component.
pub const MAX_DISPLACEMENT: f64 = 32.0;

#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// Zero deltas, uniform weights.
    Zeros,
    /// Deltas from a flow pair as in the flow baseline, uniform weights.
    FromFlows {
        forward: FlowField,
        backward: FlowField,
        mode: FlowMode,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// Weights are `softplus(logits)` and optimised.
    Learned,
    /// Weights stay at `1 / (2N)`; only deltas move.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Off,
    /// Weights at each pixel are divided by their sum over both frames and all samples.
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub iterations: usize,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub charbonnier_eps: f64,
    pub n_samples: usize,
    pub init: InitMode,
    pub weights: WeightMode,
    pub normalization: Normalization,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            iterations: 500,
            step_size: 0.05,
            beta1: 0.9,
            beta2: 0.998,
            epsilon: 1e-8,
            charbonnier_eps: 1e-3,
            n_samples: 17,
            init: InitMode::Zeros,
            weights: WeightMode::Learned,
            normalization: Normalization::Off,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::arg("fit needs at least one iteration"));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::arg("step size must be positive"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::arg(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if !(self.epsilon > 0.0) || !(self.charbonnier_eps > 0.0) {
            return Err(Error::arg("epsilons must be positive"));
        }
        if self.n_samples < 2 {
            return Err(Error::arg("line fields need at least 2 samples"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Best iterate seen.
    pub field: LineField,
    /// Loss before each update; entry `k` is the loss after `k` steps.
    pub loss_trace: Vec<f64>,
    pub psnr_trace: Vec<f64>,
    pub best_iteration: usize,
    pub final_loss: f64,
    pub final_psnr: f64,
}

impl FitResult {
    /// `iter,loss,psnr` rows with a header.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,loss,psnr\n");
        for (k, (l, p)) in self.loss_trace.iter().zip(&self.psnr_trace).enumerate() {
            out.push_str(&format!("{k},{l:.12e},{p:.6}\n"));
        }
        out
    }
}

/// Mean of `sqrt((a - b)² + eps²) - eps`.
pub fn charbonnier(a: &Image, b: &Image, eps: f64) -> Result<f64> {
    a.ensure_same_shape(b, "charbonnier")?;
    if !(eps > 0.0) {
        return Err(Error::arg("charbonnier eps must be positive"));
    }
    let total: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| ((x - y).powi(2) + eps * eps).sqrt() - eps)
        .sum();
    Ok(total / a.data().len() as f64)
}

fn charbonnier_grad(out: &Image, target: &Image, eps: f64) -> Image {
    let n = out.data().len() as f64;
    let data = out
        .data()
        .iter()
        .zip(target.data())
        .map(|(o, t)| {
            let d = o - t;
            d / (d * d + eps * eps).sqrt() / n
        })
        .collect();
    Image::from_raw(out.width(), out.height(), out.channels(), data)
}

#[inline]
fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Inverse of softplus for `y > 0`.
pub fn softplus_inv(y: f64) -> f64 {
    y + (-(-y).exp_m1()).ln()
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(len: usize) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], t: usize, cfg: &FitConfig) {
        let bc1 = 1.0 - cfg.beta1.powi(t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *p -= cfg.step_size * (*m / bc1) / ((*v / bc2).sqrt() + cfg.epsilon);
        }
    }
}

/// Optimiser state: raw deltas and weight logits for both frames.
struct Params {
    width: usize,
    height: usize,
    n: usize,
    deltas: [Vec<f64>; 2],
    logits: [Vec<f64>; 2],
}

impl Params {
    fn materialize(&self, cfg: &FitConfig) -> Result<LineField> {
        let weights = |i: usize| -> Vec<f64> {
            match cfg.weights {
                WeightMode::Uniform => vec![uniform_weight(self.n); self.logits[i].len()],
                WeightMode::Learned => self.logits[i].iter().map(|&z| softplus(z)).collect(),
            }
        };
        let mut w = [weights(0), weights(1)];
        if cfg.normalization == Normalization::Global {
            let n = self.n;
            for p in 0..self.width * self.height {
                let s: f64 = w[0][p * n..(p + 1) * n].iter().chain(&w[1][p * n..(p + 1) * n]).sum();
                if s > 0.0 {
                    for wi in w.iter_mut() {
                        wi[p * n..(p + 1) * n].iter_mut().for_each(|v| *v /= s);
                    }
                }
            }
        }
        let [w1, w2] = w;
        LineField::from_lines(
            self.width,
            self.height,
            self.n,
            [
                Lines {
                    delta: self.deltas[0].clone(),
                    weights: w1,
                },
                Lines {
                    delta: self.deltas[1].clone(),
                    weights: w2,
                },
            ],
        )
        .map_err(|e| Error::Numerical {
            iteration: 0,
            message: e.to_string(),
        })
    }

    /// Chain weight gradients back to the logits.
    fn logit_grad(&self, cfg: &FitConfig, field: &LineField, dw: &[Vec<f64>; 2]) -> [Vec<f64>; 2] {
        let n = self.n;
        let mut g = dw.clone();
        if cfg.normalization == Normalization::Global {
            for p in 0..self.width * self.height {
                let range = p * n..(p + 1) * n;
                let raw = |i: usize| self.logits[i][range.clone()].iter().map(|&z| softplus(z));
                let s: f64 = raw(0).chain(raw(1)).sum();
                if s <= 0.0 {
                    continue;
                }
                let dot: f64 = (0..2)
                    .map(|i| {
                        dw[i][range.clone()]
                            .iter()
                            .zip(&field.lines(i).weights[range.clone()])
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                    })
                    .sum();
                for gi in g.iter_mut() {
                    gi[range.clone()].iter_mut().for_each(|v| *v = (*v - dot) / s);
                }
            }
        }
        for (gi, zi) in g.iter_mut().zip(&self.logits) {
            gi.iter_mut().zip(zi).for_each(|(v, &z)| *v *= sigmoid(z));
        }
        g
    }
}

pub fn fit_line_field(i1: &Image, i2: &Image, target: &Image, cfg: &FitConfig) -> Result<FitResult> {
    fit_line_field_with(Execution::default(), i1, i2, target, cfg)
}

pub fn fit_line_field_with(
    exec: Execution,
    i1: &Image,
    i2: &Image,
    target: &Image,
    cfg: &FitConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    i1.ensure_same_shape(i2, "fit inputs")?;
    i1.ensure_same_shape(target, "fit target")?;
    let (w, h, n) = (i1.width(), i1.height(), cfg.n_samples);

    let init = match &cfg.init {
        InitMode::Zeros => LineField::uniform(w, h, n)?,
        InitMode::FromFlows {
            forward,
            backward,
            mode,
        } => {
            forward.ensure_dims(w, h, "fit init flow")?;
            line_field_from_flows(forward, backward, *mode, n)?
        }
    };
    let logit0 = softplus_inv(uniform_weight(n));
    let clamp = |v: f64| v.clamp(-MAX_DISPLACEMENT, MAX_DISPLACEMENT);
    let [l1, l2] = init.into_lines();
    let mut params = Params {
        width: w,
        height: h,
        n,
        deltas: [
            l1.delta.into_iter().map(clamp).collect(),
            l2.delta.into_iter().map(clamp).collect(),
        ],
        logits: [vec![logit0; w * h * n], vec![logit0; w * h * n]],
    };

    let mut adam_delta = [Adam::new(2 * w * h), Adam::new(2 * w * h)];
    let mut adam_logit = [Adam::new(n * w * h), Adam::new(n * w * h)];
    let mut loss_trace = Vec::with_capacity(cfg.iterations + 1);
    let mut psnr_trace = Vec::with_capacity(cfg.iterations + 1);
    let mut best: Option<(usize, f64, f64, LineField)> = None;

    for k in 0..=cfg.iterations {
        let field = params.materialize(cfg).map_err(|e| with_iteration(e, k))?;
        let out = render_with(exec, i1, i2, &field)?;
        let loss = charbonnier(&out, target, cfg.charbonnier_eps)?;
        if !loss.is_finite() {
            return Err(Error::Numerical {
                iteration: k,
                message: format!("loss is {loss}"),
            });
        }
        let quality = psnr(&out, target, 1.0)?;
        loss_trace.push(loss);
        psnr_trace.push(quality);
        if best.as_ref().is_none_or(|b| loss < b.1) {
            best = Some((k, loss, quality, field.clone()));
        }
        if k == cfg.iterations {
            break;
        }

        let upstream = charbonnier_grad(&out, target, cfg.charbonnier_eps);
        let grad = render_vjp_with(exec, i1, i2, &field, &upstream)?;
        if grad
            .delta
            .iter()
            .chain(&grad.weights)
            .any(|g| g.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Numerical {
                iteration: k,
                message: "non-finite gradient".into(),
            });
        }
        for i in 0..2 {
            adam_delta[i].step(&mut params.deltas[i], &grad.delta[i], k + 1, cfg);
            params.deltas[i].iter_mut().for_each(|v| *v = clamp(*v));
        }
        if cfg.weights == WeightMode::Learned {
            let g = params.logit_grad(cfg, &field, &grad.weights);
            for i in 0..2 {
                adam_logit[i].step(&mut params.logits[i], &g[i], k + 1, cfg);
            }
        }
    }

    let (best_iteration, final_loss, final_psnr, field) = best.expect("at least one iterate");
    Ok(FitResult {
        field,
        loss_trace,
        psnr_trace,
        best_iteration,
        final_loss,
        final_psnr,
    })
}

fn with_iteration(e: Error, iteration: usize) -> Error {
    match e {
        Error::Numerical { message, .. } => Error::Numerical { iteration, message },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::naive_average;
    use crate::dataset::TextureSpec;

    #[test]
    fn charbonnier_examples() {
        let a = Image::filled(3, 3, 1, 0.4).unwrap();
        assert_eq!(charbonnier(&a, &a, 1e-3).unwrap(), 0.0);
        let z = Image::new(1, 1, 1).unwrap();
        let o = Image::filled(1, 1, 1, 1.0).unwrap();
        assert!((charbonnier(&z, &o, 1.0).unwrap() - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        let b = Image::filled(3, 3, 1, 0.7).unwrap();
        assert!((charbonnier(&a, &b, 1e-9).unwrap() - 0.3).abs() < 1e-8);
        assert!(charbonnier(&a, &z, 1.0).is_err());
        assert!(charbonnier(&a, &b, 0.0).is_err());
    }

    #[test]
    fn softplus_inverse() {
        for y in [1e-3, 1.0 / 34.0, 0.5, 3.0] {
            assert!((softplus(softplus_inv(y)) - y).abs() < 1e-14);
        }
    }

    #[test]
    fn config_validation() {
        let a = Image::filled(4, 4, 1, 0.2).unwrap();
        let bad = [
            FitConfig { iterations: 0, ..FitConfig::default() },
            FitConfig { step_size: 0.0, ..FitConfig::default() },
            FitConfig { beta1: 1.0, ..FitConfig::default() },
            FitConfig { n_samples: 1, ..FitConfig::default() },
        ];
        for cfg in bad {
            assert!(matches!(fit_line_field(&a, &a, &a, &cfg), Err(Error::Argument(_))));
        }
    }

    #[test]
    fn naive_target_is_reached_from_zeros() {
        let i1 = TextureSpec::new(1).render(16, 16, 3).unwrap();
        let i2 = TextureSpec::new(2).render(16, 16, 3).unwrap();
        let target = naive_average(&i1, &i2).unwrap();
        let cfg = FitConfig { iterations: 20, ..FitConfig::default() };
        let r = fit_line_field(&i1, &i2, &target, &cfg).unwrap();
        assert!(r.final_loss <= r.loss_trace[0]);
        assert!(r.final_loss < 1e-4);
        assert_eq!(r.loss_trace.len(), 21);
    }

    #[test]
    fn single_step_moves_against_the_gradient() {
        let i1 = TextureSpec::new(3).render(12, 12, 1).unwrap();
        let i2 = TextureSpec::new(4).render(12, 12, 1).unwrap();
        let target = TextureSpec::new(5).render(12, 12, 1).unwrap();
        let cfg = FitConfig { iterations: 1, ..FitConfig::default() };
        let init = LineField::uniform(12, 12, cfg.n_samples).unwrap();
        let out = render_with(Execution::Sequential, &i1, &i2, &init).unwrap();
        let up = charbonnier_grad(&out, &target, cfg.charbonnier_eps);
        let g = render_vjp_with(Execution::Sequential, &i1, &i2, &init, &up).unwrap();
        let r = fit_line_field(&i1, &i2, &target, &cfg).unwrap();
        assert_eq!(r.best_iteration, 1, "one step should lower the loss here");
        for i in 0..2 {
            for (p, (&d, &gd)) in r.field.lines(i).delta.iter().zip(&g.delta[i]).enumerate() {
                assert!(d * gd <= 0.0, "delta {p} moved with the gradient");
                assert!(d.abs() <= cfg.step_size * (1.0 + 1e-9));
            }
            let w0 = uniform_weight(cfg.n_samples);
            for (&wt, &gw) in r.field.lines(i).weights.iter().zip(&g.weights[i]) {
                assert!((wt - w0) * gw <= 0.0);
            }
        }
    }

    #[test]
    fn reported_loss_matches_recomputation() {
        let i1 = TextureSpec::new(6).render(16, 12, 3).unwrap();
        let i2 = TextureSpec::new(7).render(16, 12, 3).unwrap();
        let target = TextureSpec::new(8).render(16, 12, 3).unwrap();
        for normalization in [Normalization::Off, Normalization::Global] {
            let cfg = FitConfig { iterations: 15, normalization, ..FitConfig::default() };
            let r = fit_line_field(&i1, &i2, &target, &cfg).unwrap();
            let again = charbonnier(
                &render_with(Execution::Sequential, &i1, &i2, &r.field).unwrap(),
                &target,
                cfg.charbonnier_eps,
            )
            .unwrap();
            assert!((again - r.final_loss).abs() < 1e-10);
            assert!(r.final_loss <= r.loss_trace[0]);
            assert!(r.field.lines(0).weights.iter().all(|&w| w >= 0.0));
            let csv = r.trace_csv();
            assert!(csv.starts_with("iter,loss,psnr\n0,"));
            assert_eq!(csv.lines().count(), 17);
        }
    }

    #[test]
    fn uniform_mode_keeps_weights() {
        let i1 = TextureSpec::new(9).render(12, 12, 1).unwrap();
        let i2 = TextureSpec::new(10).render(12, 12, 1).unwrap();
        let target = TextureSpec::new(11).render(12, 12, 1).unwrap();
        let cfg = FitConfig { iterations: 5, weights: WeightMode::Uniform, n_samples: 5, ..FitConfig::default() };
        let r = fit_line_field(&i1, &i2, &target, &cfg).unwrap();
        assert!(r.field.lines(1).weights.iter().all(|&w| w == 0.1));
    }

    #[test]
    fn deltas_are_clamped() {
        let i1 = TextureSpec::new(12).render(12, 12, 1).unwrap();
        let fwd = FlowField::constant(12, 12, (50.0, -40.0)).unwrap();
        let cfg = FitConfig {
            iterations: 1,
            init: InitMode::FromFlows { forward: fwd.clone(), backward: fwd, mode: FlowMode::Forward },
            ..FitConfig::default()
        };
        let r = fit_line_field(&i1, &i1, &i1, &cfg).unwrap();
        assert!(r.field.lines(0).delta.iter().all(|d| d.abs() <= MAX_DISPLACEMENT));
    }
}
