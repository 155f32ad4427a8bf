use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "blurforge", version, about = "Motion blur synthesis from image pairs")]
pub struct Cli {
    /// Where to write the run manifest (defaults next to the primary output).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Blur an image pair along uniform-weight flow lines.
    BlurFlow(BlurFlowArgs),
    /// Render an image pair through a saved line field.
    Render(RenderArgs),
    /// Fit a line field that reproduces a target blur.
    Fit(FitArgs),
    /// Run the five curation criteria on triplet directories.
    Filter(FilterArgs),
    /// Average every frame in a directory.
    Average(AverageArgs),
    /// Generate a synthetic moving-sprite sequence with exact flows.
    GenScene(GenSceneArgs),
    /// PSNR and SSIM of candidates against a reference.
    Eval(EvalArgs),
    /// Check a line field against the sample-count rule.
    CheckSampling(CheckSamplingArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Forward,
    Negback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatArg {
    Pfm,
    Pnm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeArg {
    Square,
    Disc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitArg {
    Zeros,
    Flows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightsArg {
    Learned,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormArg {
    Off,
    Global,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FlowEstimateArgs {
    /// Pyramid levels for flow estimation.
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    /// Lucas-Kanade window radius.
    #[arg(long, default_value_t = 2)]
    pub radius: usize,
    /// Refinement iterations per level.
    #[arg(long = "lk-iterations", default_value_t = 10)]
    pub lk_iterations: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FlowSource {
    /// Forward flow (frame 1 to frame 2), Middlebury .flo.
    #[arg(long = "flow-fwd")]
    pub forward: Option<PathBuf>,
    /// Backward flow (frame 2 to frame 1), Middlebury .flo.
    #[arg(long = "flow-bwd")]
    pub backward: Option<PathBuf>,
    /// Estimate both flows instead of reading them.
    #[arg(long, conflicts_with_all = ["forward", "backward"])]
    pub estimate: bool,
    #[command(flatten)]
    pub lk: FlowEstimateArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct BlurFlowArgs {
    pub frame1: PathBuf,
    pub frame2: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub flows: FlowSource,
    #[arg(long, value_enum, default_value_t = ModeArg::Negback)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 17)]
    pub samples: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct RenderArgs {
    pub frame1: PathBuf,
    pub frame2: PathBuf,
    /// Line field in LPF1 format.
    pub field: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    pub frame1: PathBuf,
    pub frame2: PathBuf,
    pub target: PathBuf,
    /// Fitted line field (LPF1).
    #[arg(short, long)]
    pub output: PathBuf,
    /// Loss trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Also write the rendered fit.
    #[arg(long)]
    pub render: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.998)]
    pub beta2: f64,
    #[arg(long = "adam-eps", default_value_t = 1e-8)]
    pub adam_eps: f64,
    #[arg(long = "charbonnier-eps", default_value_t = 1e-3)]
    pub charbonnier_eps: f64,
    #[arg(long, default_value_t = 17)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Zeros)]
    pub init: InitArg,
    /// Flows for `--init flows`.
    #[command(flatten)]
    pub flows: FlowSource,
    #[arg(long, value_enum, default_value_t = ModeArg::Forward)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = WeightsArg::Learned)]
    pub weights: WeightsArg,
    #[arg(long, value_enum, default_value_t = NormArg::Off)]
    pub normalization: NormArg,
}

#[derive(Debug, Args, Serialize)]
pub struct FilterArgs {
    /// Directory of triplet subdirectories, or a single triplet directory.
    pub input: PathBuf,
    /// Record file (stdout when omitted).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long = "min-gradient", default_value_t = 13.0)]
    pub min_gradient: f64,
    #[arg(long = "min-moving-fraction", default_value_t = 0.10)]
    pub min_moving_fraction: f64,
    #[arg(long = "motion-magnitude", default_value_t = 8.0)]
    pub motion_magnitude: f64,
    #[arg(long = "max-motion", default_value_t = 16.0)]
    pub max_motion: f64,
    #[arg(long = "max-l1", default_value_t = 13.0)]
    pub max_l1: f64,
    #[arg(long = "max-disagreement", default_value_t = 0.8)]
    pub max_disagreement: f64,
    #[command(flatten)]
    pub lk: FlowEstimateArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct AverageArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected X,Y but got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

#[derive(Debug, Args, Serialize)]
pub struct GenSceneArgs {
    /// Output directory for frames and flows.
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 3)]
    pub channels: usize,
    /// Background texture seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long = "sprite-seed", default_value_t = 2)]
    pub sprite_seed: u64,
    #[arg(long, value_enum, default_value_t = ShapeArg::Square)]
    pub shape: ShapeArg,
    #[arg(long, default_value_t = 20)]
    pub size: usize,
    /// Sprite top-left position as X,Y.
    #[arg(long, value_parser = parse_pair, default_value = "22,22")]
    pub start: (f64, f64),
    /// Sprite motion per frame step as U,V.
    #[arg(long, value_parser = parse_pair, default_value = "16,0", allow_hyphen_values = true)]
    pub velocity: (f64, f64),
    #[arg(long, default_value_t = 2)]
    pub frames: usize,
    #[arg(long, default_value_t = 32)]
    pub substeps: usize,
    #[arg(long, default_value_t = 3.0)]
    pub cell: f64,
    #[arg(long, default_value_t = 1.0)]
    pub contrast: f64,
    #[arg(long, value_enum, default_value_t = FormatArg::Pfm)]
    pub format: FormatArg,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub reference: PathBuf,
    /// Candidates as NAME=PATH (a bare path uses its file stem as the name).
    #[arg(required = true)]
    pub candidates: Vec<String>,
    /// CSV file (stdout when omitted).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CheckSamplingArgs {
    pub field: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReplayArgs {
    pub manifest_path: PathBuf,
}
