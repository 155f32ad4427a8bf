use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use blurforge::baselines::{blur_from_flow, FlowMode};
use blurforge::dataset::{
    average_frames, filter_triplet_with, gen_scene, list_image_files, read_sequence_dir,
    write_sequence_dir, FilterParams, SceneRenderer, SceneSpec, SpriteShape, SpriteSpec,
    TextureSpec, TripletFlows,
};
use blurforge::fit::{fit_line_field, FitConfig, InitMode, Normalization, WeightMode};
use blurforge::flow::{estimate_flow, read_flo, write_flo, FlowField, FlowParams};
use blurforge::imgcore::{read_image, write_image, ImageFormat};
use blurforge::linepred::{check_sampling, read_lpf, render, write_lpf};
use blurforge::metrics::{psnr, ssim, SsimConfig};
use blurforge::{Error, Execution, Image};

use crate::args::*;

#[derive(Debug)]
pub enum Failure {
    Argument(String),
    Format(String),
    Numerical(String),
    /// A nested run already reported its error.
    Exit(u8),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Argument(_) => 1,
            Failure::Format(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Exit(c) => *c,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Argument(m) | Failure::Format(m) | Failure::Numerical(m) => f.write_str(m),
            Failure::Exit(c) => write!(f, "replayed command exited with status {c}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Format { .. } => Failure::Format(msg),
            Error::Numerical { .. } => Failure::Numerical(msg),
            Error::Argument(_) | Error::Io(_) => Failure::Argument(msg),
        }
    }
}

type Outcome = Result<Record, Failure>;

/// Attach the offending path to I/O and format errors.
trait At<T> {
    fn at(self, path: impl AsRef<Path>) -> Result<T, Failure>;
}

impl<T> At<T> for blurforge::Result<T> {
    fn at(self, path: impl AsRef<Path>) -> Result<T, Failure> {
        self.map_err(|e| {
            let shown = path.as_ref().display();
            match Failure::from(e) {
                Failure::Argument(m) => Failure::Argument(format!("{shown}: {m}")),
                Failure::Format(m) => Failure::Format(format!("{shown}: {m}")),
                other => other,
            }
        })
    }
}

/// Files a run touched, for the manifest.
#[derive(Debug, Default)]
pub struct Record {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub primary: Option<PathBuf>,
    pub primary_is_dir: bool,
}

impl Record {
    fn file(inputs: Vec<PathBuf>, outputs: Vec<PathBuf>) -> Self {
        let primary = outputs.first().cloned();
        Record {
            inputs,
            outputs,
            primary,
            primary_is_dir: false,
        }
    }
}

pub fn run(cmd: &Command) -> Outcome {
    match cmd {
        Command::BlurFlow(a) => blur_flow(a),
        Command::Render(a) => render_cmd(a),
        Command::Fit(a) => fit(a),
        Command::Filter(a) => filter(a),
        Command::Average(a) => average(a),
        Command::GenScene(a) => gen_scene_cmd(a),
        Command::Eval(a) => eval(a),
        Command::CheckSampling(a) => sampling(a),
        Command::Replay(_) => unreachable!("replay is dispatched before run"),
    }
}

fn flow_params(a: &FlowEstimateArgs) -> FlowParams {
    FlowParams {
        levels: a.levels,
        radius: a.radius,
        iterations: a.lk_iterations,
    }
}

fn mode(m: ModeArg) -> FlowMode {
    match m {
        ModeArg::Forward => FlowMode::Forward,
        ModeArg::Negback => FlowMode::NegativeBackward,
    }
}

/// Forward and backward flows for a pair, read or estimated.
fn load_flows(
    src: &FlowSource,
    i1: &Image,
    i2: &Image,
    inputs: &mut Vec<PathBuf>,
) -> Result<(FlowField, FlowField), Failure> {
    if src.estimate {
        let p = flow_params(&src.lk);
        return Ok((estimate_flow(i1, i2, &p)?, estimate_flow(i2, i1, &p)?));
    }
    match (&src.forward, &src.backward) {
        (Some(f), Some(b)) => {
            inputs.extend([f.clone(), b.clone()]);
            Ok((read_flo(f).at(f)?, read_flo(b).at(b)?))
        }
        _ => Err(Failure::Argument(
            "give both --flow-fwd and --flow-bwd, or --estimate".into(),
        )),
    }
}

fn blur_flow(a: &BlurFlowArgs) -> Outcome {
    let i1 = read_image(&a.frame1).at(&a.frame1)?;
    let i2 = read_image(&a.frame2).at(&a.frame2)?;
    let mut inputs = vec![a.frame1.clone(), a.frame2.clone()];
    let (fwd, bwd) = load_flows(&a.flows, &i1, &i2, &mut inputs)?;
    let out = blur_from_flow(&i1, &i2, &fwd, &bwd, mode(a.mode), a.samples)?;
    write_image(&a.output, &out).at(&a.output)?;
    Ok(Record::file(inputs, vec![a.output.clone()]))
}

fn render_cmd(a: &RenderArgs) -> Outcome {
    let i1 = read_image(&a.frame1).at(&a.frame1)?;
    let i2 = read_image(&a.frame2).at(&a.frame2)?;
    let lf = read_lpf(&a.field).at(&a.field)?;
    write_image(&a.output, &render(&i1, &i2, &lf)?).at(&a.output)?;
    Ok(Record::file(
        vec![a.frame1.clone(), a.frame2.clone(), a.field.clone()],
        vec![a.output.clone()],
    ))
}

fn fit(a: &FitArgs) -> Outcome {
    let i1 = read_image(&a.frame1).at(&a.frame1)?;
    let i2 = read_image(&a.frame2).at(&a.frame2)?;
    let target = read_image(&a.target).at(&a.target)?;
    let mut inputs = vec![a.frame1.clone(), a.frame2.clone(), a.target.clone()];
    let init = match a.init {
        InitArg::Zeros => InitMode::Zeros,
        InitArg::Flows => {
            let (forward, backward) = load_flows(&a.flows, &i1, &i2, &mut inputs)?;
            InitMode::FromFlows {
                forward,
                backward,
                mode: mode(a.mode),
            }
        }
    };
    let cfg = FitConfig {
        iterations: a.iterations,
        step_size: a.step,
        beta1: a.beta1,
        beta2: a.beta2,
        epsilon: a.adam_eps,
        charbonnier_eps: a.charbonnier_eps,
        n_samples: a.samples,
        init,
        weights: match a.weights {
            WeightsArg::Learned => WeightMode::Learned,
            WeightsArg::Uniform => WeightMode::Uniform,
        },
        normalization: match a.normalization {
            NormArg::Off => Normalization::Off,
            NormArg::Global => Normalization::Global,
        },
    };
    let result = fit_line_field(&i1, &i2, &target, &cfg)?;
    write_lpf(&a.output, &result.field).at(&a.output)?;
    let mut outputs = vec![a.output.clone()];
    if let Some(t) = &a.trace {
        write_text(t, &result.trace_csv())?;
        outputs.push(t.clone());
    }
    if let Some(r) = &a.render {
        write_image(r, &render(&i1, &i2, &result.field)?).at(r)?;
        outputs.push(r.clone());
    }
    let mags: Vec<f64> = result
        .field
        .lines(0)
        .delta
        .chunks(2)
        .map(|d| d[0].hypot(d[1]))
        .collect();
    println!(
        "final_loss={:.9e} final_psnr={} best_iteration={} mean_delta1={:.4}",
        result.final_loss,
        fmt_db(result.final_psnr),
        result.best_iteration,
        mags.iter().sum::<f64>() / mags.len() as f64
    );
    Ok(Record::file(inputs, outputs))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .map_err(|e| Failure::Argument(format!("cannot write {}: {e}", path.display())))
}

/// Emit `text` to `output` or stdout.
fn emit(output: &Option<PathBuf>, text: &str) -> Result<Vec<PathBuf>, Failure> {
    match output {
        Some(p) => {
            write_text(p, text)?;
            Ok(vec![p.clone()])
        }
        None => {
            print!("{text}");
            Ok(vec![])
        }
    }
}

const TRIPLET_FLOWS: [&str; 3] = ["forward_12.flo", "forward_23.flo", "backward_21.flo"];

fn triplet_dirs(root: &Path) -> Result<Vec<PathBuf>, Failure> {
    let entries = fs::read_dir(root)
        .map_err(|e| Failure::Argument(format!("cannot read {}: {e}", root.display())))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        dirs.push(root.to_path_buf());
    }
    Ok(dirs)
}

fn filter_one(dir: &Path, params: &FilterParams) -> Result<(String, Vec<PathBuf>), Failure> {
    let frames = list_image_files(dir).at(dir)?;
    if frames.len() != 3 {
        return Err(Failure::Argument(format!(
            "{} holds {} frames, a triplet needs 3",
            dir.display(),
            frames.len()
        )));
    }
    let imgs = frames
        .iter()
        .map(|f| read_image(f).at(f))
        .collect::<Result<Vec<_>, _>>()?;
    let mut inputs = frames.clone();
    let flow_paths: Vec<PathBuf> = TRIPLET_FLOWS.iter().map(|n| dir.join(n)).collect();
    let present = flow_paths.iter().filter(|p| p.is_file()).count();
    let flows = match present {
        0 => None,
        3 => {
            inputs.extend(flow_paths.iter().cloned());
            Some(TripletFlows {
                forward_12: read_flo(&flow_paths[0]).at(&flow_paths[0])?,
                forward_23: read_flo(&flow_paths[1]).at(&flow_paths[1])?,
                backward_21: read_flo(&flow_paths[2]).at(&flow_paths[2])?,
            })
        }
        _ => {
            return Err(Failure::Argument(format!(
                "{} has some but not all of {}",
                dir.display(),
                TRIPLET_FLOWS.join(", ")
            )))
        }
    };
    let report = filter_triplet_with(
        Execution::Sequential,
        &imgs[0],
        &imgs[1],
        &imgs[2],
        params,
        flows.as_ref(),
    )?;
    let id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "triplet".into());
    Ok((report.record(&id), inputs))
}

fn filter(a: &FilterArgs) -> Outcome {
    let params = FilterParams {
        min_gradient: a.min_gradient,
        min_moving_fraction: a.min_moving_fraction,
        motion_magnitude: a.motion_magnitude,
        max_motion: a.max_motion,
        max_l1: a.max_l1,
        max_disagreement: a.max_disagreement,
        flow: flow_params(&a.lk),
    };
    let dirs = triplet_dirs(&a.input)?;
    let results = Execution::default().map_indices(dirs.len(), |k| filter_one(&dirs[k], &params));
    let mut text = String::new();
    let mut inputs = vec![];
    for r in results {
        let (line, files) = r?;
        text.push_str(&line);
        text.push('\n');
        inputs.extend(files);
    }
    let outputs = emit(&a.output, &text)?;
    Ok(Record::file(inputs, outputs))
}

fn average(a: &AverageArgs) -> Outcome {
    let seq = read_sequence_dir(&a.input).at(&a.input)?;
    write_image(&a.output, &average_frames(&seq)?).at(&a.output)?;
    Ok(Record::file(list_image_files(&a.input).at(&a.input)?, vec![a.output.clone()]))
}

fn gen_scene_cmd(a: &GenSceneArgs) -> Outcome {
    let texture = |seed| TextureSpec {
        seed,
        cell: a.cell,
        contrast: a.contrast,
    };
    let spec = SceneSpec {
        width: a.width,
        height: a.height,
        channels: a.channels,
        background: texture(a.seed),
        sprite: SpriteSpec {
            shape: match a.shape {
                ShapeArg::Square => SpriteShape::Square,
                ShapeArg::Disc => SpriteShape::Disc,
            },
            size: a.size,
            texture: texture(a.sprite_seed),
        },
        start: a.start,
        velocity: a.velocity,
        frame_count: a.frames,
    };
    let scene = gen_scene(&spec, a.substeps)?;
    fs::create_dir_all(&a.output)
        .map_err(|e| Failure::Argument(format!("cannot create {}: {e}", a.output.display())))?;
    let format = match a.format {
        FormatArg::Pfm => ImageFormat::Pfm,
        FormatArg::Pnm => ImageFormat::Pnm,
    };
    let mut outputs = write_sequence_dir(&a.output, &scene.sequence, format).at(&a.output)?;

    let flow_dir = a.output.join("flows");
    fs::create_dir_all(&flow_dir)
        .map_err(|e| Failure::Argument(format!("cannot create {}: {e}", flow_dir.display())))?;
    for (k, (f, b)) in scene.forward_flows.iter().zip(&scene.backward_flows).enumerate() {
        for (name, flow) in [(format!("forward_{k:06}.flo"), f), (format!("backward_{k:06}.flo"), b)] {
            let p = flow_dir.join(name);
            write_flo(&p, flow).at(&p)?;
            outputs.push(p);
        }
    }
    // Exact flows between the first and last frame.
    let renderer = SceneRenderer::new(&spec)?;
    let (dx, dy) = spec.total_displacement();
    let (_, c_first) = renderer.frame_at(spec.start)?;
    let (_, c_last) = renderer.frame_at((spec.start.0 + dx, spec.start.1 + dy))?;
    for (name, flow) in [
        ("flow_fwd.flo", renderer.support_flow(&c_first, (dx, dy))),
        ("flow_bwd.flo", renderer.support_flow(&c_last, (-dx, -dy))),
    ] {
        let p = a.output.join(name);
        write_flo(&p, &flow).at(&p)?;
        outputs.push(p);
    }
    println!("frames={} size={}x{}", scene.sequence.len(), a.width, a.height);
    Ok(Record {
        inputs: vec![],
        outputs,
        primary: Some(a.output.clone()),
        primary_is_dir: true,
    })
}

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.6}")
    }
}

fn eval(a: &EvalArgs) -> Outcome {
    let reference = read_image(&a.reference).at(&a.reference)?;
    let mut items: Vec<(String, PathBuf)> = a
        .candidates
        .iter()
        .map(|c| match c.split_once('=') {
            Some((name, path)) => (name.to_string(), PathBuf::from(path)),
            None => {
                let p = PathBuf::from(c);
                let name = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| c.clone());
                (name, p)
            }
        })
        .collect();
    items.sort();
    let cfg = SsimConfig::default();
    let rows = Execution::default().map_indices(items.len(), |k| -> Result<String, Failure> {
        let (name, path) = &items[k];
        let img = read_image(path).at(path)?;
        let p = psnr(&img, &reference, 1.0)?;
        let s = ssim(&img, &reference, &cfg)?;
        Ok(format!("{name},{},{s:.6}\n", fmt_db(p)))
    });
    let mut text = String::from("name,psnr,ssim\n");
    for r in rows {
        text.push_str(&r?);
    }
    let outputs = emit(&a.output, &text)?;
    let mut inputs = vec![a.reference.clone()];
    inputs.extend(items.into_iter().map(|(_, p)| p));
    Ok(Record::file(inputs, outputs))
}

fn sampling(a: &CheckSamplingArgs) -> Outcome {
    let lf = read_lpf(&a.field).at(&a.field)?;
    let r = check_sampling(&lf);
    println!(
        "max_displacement={:.6} min_required_samples={} n_samples={} undersampled={}",
        r.max_displacement,
        r.min_required_samples,
        lf.n_samples(),
        r.undersampled as u8
    );
    Ok(Record::file(vec![a.field.clone()], vec![]))
}
