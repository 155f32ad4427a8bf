//! Non-learned comparison methods: the two-frame mean and uniform-weight
//! blur along optical-flow lines.

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::imgcore::Image;
use crate::linepred::{render, uniform_weight, LineField, Lines};

/// Default sample count per line.
pub const DEFAULT_SAMPLES: usize = 17;

/// Which flow field drives the blur lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowMode {
    /// Lines follow the forward flow (1→2).
    Forward,
    /// Lines follow the negated backward flow (2→1).
    NegativeBackward,
}

impl std::str::FromStr for FlowMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(FlowMode::Forward),
            "negback" | "negative_backward" | "negative-backward" => Ok(FlowMode::NegativeBackward),
            other => Err(Error::arg(format!("unknown flow mode {other:?}"))),
        }
    }
}

pub fn naive_average(i1: &Image, i2: &Image) -> Result<Image> {
    i1.ensure_same_shape(i2, "naive_average")?;
    let data = i1
        .data()
        .iter()
        .zip(i2.data())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    Ok(Image::from_raw(i1.width(), i1.height(), i1.channels(), data))
}

/// Uniform-weight line field built from a flow pair.
///
/// The renderer gathers, so a frame-1 line must point back along the motion
/// and a frame-2 line forward along it. `Forward` takes frame 1's line from
/// `-flow_fwd` and frame 2's from `-flow_bwd`; `NegativeBackward` reads the
/// motion of frame 1 as `-flow_bwd` (and of frame 2 as `-flow_fwd`), giving
/// `flow_bwd` and `flow_fwd` as the lines.
pub fn line_field_from_flows(
    flow_fwd: &FlowField,
    flow_bwd: &FlowField,
    mode: FlowMode,
    n_samples: usize,
) -> Result<LineField> {
    let (w, h) = (flow_fwd.width(), flow_fwd.height());
    flow_bwd.ensure_dims(w, h, "backward flow")?;
    let (d1, d2) = match mode {
        FlowMode::Forward => (flow_fwd.negated(), flow_bwd.negated()),
        FlowMode::NegativeBackward => (flow_bwd.clone(), flow_fwd.clone()),
    };
    let weight = uniform_weight(n_samples);
    let lines = |d: FlowField| Lines {
        delta: d.data().to_vec(),
        weights: vec![weight; w * h * n_samples],
    };
    LineField::from_lines(w, h, n_samples, [lines(d1), lines(d2)])
}

pub fn blur_from_flow(
    i1: &Image,
    i2: &Image,
    flow_fwd: &FlowField,
    flow_bwd: &FlowField,
    mode: FlowMode,
    n_samples: usize,
) -> Result<Image> {
    if n_samples < 2 {
        return Err(Error::arg("blur_from_flow needs at least 2 samples"));
    }
    i1.ensure_same_shape(i2, "blur_from_flow")?;
    flow_fwd.ensure_dims(i1.width(), i1.height(), "forward flow")?;
    flow_bwd.ensure_dims(i1.width(), i1.height(), "backward flow")?;
    // Degenerate lines sample only the source pixel; skip the summation.
    if flow_fwd.data().iter().chain(flow_bwd.data()).all(|&v| v == 0.0) {
        return naive_average(i1, i2);
    }
    let lf = line_field_from_flows(flow_fwd, flow_bwd, mode, n_samples)?;
    render(i1, i2, &lf)
}
