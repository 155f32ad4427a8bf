//! Ground-truth blur by frame averaging, undersampling detection, the
//! five-criterion triplet filter and synthetic scene generation.

mod filter;
mod io;
mod scene;

pub use filter::{
    filter_triplet, filter_triplet_with, parse_record, Criterion, FilterParams, FilterReport,
    ParsedRecord, TripletFlows,
};
pub use io::{list_image_files, read_sequence_dir, write_sequence_dir};
pub use scene::{
    gen_scene, Scene, SceneRenderer, SceneSpec, SpriteShape, SpriteSpec, TextureSpec,
    MAX_TOTAL_DISPLACEMENT,
};

use crate::error::{Error, Result};
use crate::flow::{estimate_flow, flow_stats, FlowField, FlowParams};
use crate::imgcore::Image;

/// Ordered frames sharing one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Image>,
}

impl FrameSequence {
    pub fn new(frames: Vec<Image>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::arg("frame sequence is empty"))?;
        for (k, f) in frames.iter().enumerate().skip(1) {
            f.ensure_same_shape(first, &format!("frame {k}"))?;
        }
        Ok(FrameSequence { frames })
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn first(&self) -> &Image {
        &self.frames[0]
    }

    pub fn last(&self) -> &Image {
        &self.frames[self.frames.len() - 1]
    }

    pub fn into_frames(self) -> Vec<Image> {
        self.frames
    }
}

/// Per-sample mean over all frames.
pub fn average_frames(seq: &FrameSequence) -> Result<Image> {
    let first = seq.first();
    let mut acc = vec![0.0; first.data().len()];
    for f in seq.frames() {
        for (a, v) in acc.iter_mut().zip(f.data()) {
            *a += v;
        }
    }
    let n = seq.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Image::from_vec(first.width(), first.height(), first.channels(), acc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UndersamplingReport {
    /// Largest per-step flow ∞-norm, in pixels.
    pub max_step: f64,
    pub undersampled: bool,
}

/// Largest per-step motion allowed before a dense sequence counts as undersampled.
pub const MAX_STEP_PIXELS: f64 = 1.0;

/// Flag sequences whose consecutive frames move by more than one pixel.
/// Flows are estimated between neighbours when `per_frame_flows` is `None`.
pub fn undersampling_check(
    seq: &FrameSequence,
    per_frame_flows: Option<&[FlowField]>,
    params: &FlowParams,
) -> Result<UndersamplingReport> {
    let steps = seq.len() - 1;
    let estimated;
    let flows = match per_frame_flows {
        Some(f) => {
            if f.len() != steps {
                return Err(Error::arg(format!(
                    "expected {steps} flows for {} frames, got {}",
                    seq.len(),
                    f.len()
                )));
            }
            f
        }
        None => {
            estimated = seq
                .frames()
                .windows(2)
                .map(|p| estimate_flow(&p[0], &p[1], params))
                .collect::<Result<Vec<_>>>()?;
            &estimated[..]
        }
    };
    let mut max_step = 0.0f64;
    for f in flows {
        max_step = max_step.max(flow_stats(f, f64::INFINITY, None)?.max_inf_norm);
    }
    Ok(UndersamplingReport {
        max_step,
        undersampled: max_step > MAX_STEP_PIXELS,
    })
}
