//! Triplet curation: high-frequency content, sufficient but limited motion,
//! no abrupt changes and approximately linear motion.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::flow::{estimate_flow, flow_stats, warp, FlowField, FlowParams};
use crate::imgcore::{sobel_mean_gradient, Image};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    /// Minimum mean Sobel magnitude on the `[0, 255]` scale.
    pub min_gradient: f64,
    /// Minimum fraction of pixels with flow ∞-norm at least `motion_magnitude`.
    pub min_moving_fraction: f64,
    pub motion_magnitude: f64,
    /// Largest flow ∞-norm allowed anywhere.
    pub max_motion: f64,
    /// Largest mean absolute warp residual on the `[0, 255]` scale.
    pub max_l1: f64,
    /// Largest mean disagreement between forward flow and negated backward flow.
    pub max_disagreement: f64,
    pub flow: FlowParams,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            min_gradient: 13.0,
            min_moving_fraction: 0.10,
            motion_magnitude: 8.0,
            max_motion: 16.0,
            max_l1: 13.0,
            max_disagreement: 0.8,
            flow: FlowParams::default(),
        }
    }
}

/// Flows for a triplet `(f1, f2, f3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletFlows {
    /// f1 → f2.
    pub forward_12: FlowField,
    /// f2 → f3.
    pub forward_23: FlowField,
    /// f2 → f1.
    pub backward_21: FlowField,
}

impl TripletFlows {
    pub fn estimate(f1: &Image, f2: &Image, f3: &Image, params: &FlowParams) -> Result<Self> {
        Ok(TripletFlows {
            forward_12: estimate_flow(f1, f2, params)?,
            forward_23: estimate_flow(f2, f3, params)?,
            backward_21: estimate_flow(f2, f1, params)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Criterion {
    /// 1 to 5.
    pub id: u8,
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterReport {
    pub criteria: [Criterion; 5],
    pub overall_accept: bool,
}

impl FilterReport {
    fn new(criteria: [Criterion; 5]) -> Self {
        let overall_accept = criteria.iter().all(|c| c.passed);
        FilterReport {
            criteria,
            overall_accept,
        }
    }

    pub fn failed(&self) -> Vec<u8> {
        self.criteria.iter().filter(|c| !c.passed).map(|c| c.id).collect()
    }

    /// One line: `id c1=<v> c2=<v> c3=<v> c4=<v> c5=<v> accept=<0|1>`.
    pub fn record(&self, triplet_id: &str) -> String {
        let mut line = triplet_id.to_string();
        for c in &self.criteria {
            line.push_str(&format!(" c{}={:.6}", c.id, c.statistic));
        }
        line.push_str(&format!(" accept={}", u8::from(self.overall_accept)));
        line
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRecord {
    pub triplet_id: String,
    pub statistics: [f64; 5],
    pub accept: bool,
}

pub fn parse_record(line: &str) -> Result<ParsedRecord> {
    let bad = |msg: &str| Error::format(0, format!("{msg} in filter record {line:?}"));
    let mut parts = line.split_whitespace();
    let triplet_id = parts.next().ok_or_else(|| bad("missing triplet id"))?.to_string();
    let mut statistics = [0.0; 5];
    for (k, stat) in statistics.iter_mut().enumerate() {
        let field = parts.next().ok_or_else(|| bad("missing statistic"))?;
        let value = field
            .strip_prefix(&format!("c{}=", k + 1))
            .ok_or_else(|| bad("unexpected field"))?;
        *stat = value.parse().map_err(|_| bad("invalid statistic"))?;
    }
    let accept = match parts.next() {
        Some("accept=1") => true,
        Some("accept=0") => false,
        _ => return Err(bad("missing accept flag")),
    };
    if parts.next().is_some() {
        return Err(bad("trailing fields"));
    }
    Ok(ParsedRecord {
        triplet_id,
        statistics,
        accept,
    })
}

fn mean_abs_255(a: &Image, b: &Image) -> f64 {
    let total: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum();
    255.0 * total / a.data().len() as f64
}

/// Evaluate all five criteria. Flows are estimated when `flows` is `None`.
pub fn filter_triplet(
    f1: &Image,
    f2: &Image,
    f3: &Image,
    params: &FilterParams,
    flows: Option<&TripletFlows>,
) -> Result<FilterReport> {
    filter_triplet_with(Execution::default(), f1, f2, f3, params, flows)
}

pub fn filter_triplet_with(
    exec: Execution,
    f1: &Image,
    f2: &Image,
    f3: &Image,
    params: &FilterParams,
    flows: Option<&TripletFlows>,
) -> Result<FilterReport> {
    f1.ensure_same_shape(f2, "triplet frame 2")?;
    f1.ensure_same_shape(f3, "triplet frame 3")?;
    let estimated;
    let flows = match flows {
        Some(f) => {
            for flow in [&f.forward_12, &f.forward_23, &f.backward_21] {
                flow.ensure_dims(f1.width(), f1.height(), "triplet flow")?;
            }
            f
        }
        None => {
            estimated = TripletFlows::estimate(f1, f2, f3, &params.flow)?;
            &estimated
        }
    };

    let frames = [f1, f2, f3];
    let gradients = exec
        .map_indices(3, |k| sobel_mean_gradient(frames[k]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let c1 = gradients.into_iter().fold(f64::INFINITY, f64::min);

    let s12 = flow_stats(&flows.forward_12, params.motion_magnitude, None)?;
    let s23 = flow_stats(&flows.forward_23, params.motion_magnitude, None)?;
    let c2 = s12.fraction_at_least.min(s23.fraction_at_least);
    let c3 = s12.max_inf_norm.max(s23.max_inf_norm);

    let l1_12 = mean_abs_255(&warp(f2, &flows.forward_12)?, f1);
    let l1_23 = mean_abs_255(&warp(f3, &flows.forward_23)?, f2);
    let c4 = l1_12.max(l1_23);

    let disagreement: f64 = flows
        .forward_23
        .vectors()
        .zip(flows.backward_21.vectors())
        .map(|((fu, fv), (bu, bv))| (fu + bu).hypot(fv + bv))
        .sum();
    let c5 = disagreement / (f1.width() * f1.height()) as f64;

    Ok(FilterReport::new([
        Criterion {
            id: 1,
            statistic: c1,
            threshold: params.min_gradient,
            passed: c1 >= params.min_gradient,
        },
        Criterion {
            id: 2,
            statistic: c2,
            threshold: params.min_moving_fraction,
            passed: c2 >= params.min_moving_fraction,
        },
        Criterion {
            id: 3,
            statistic: c3,
            threshold: params.max_motion,
            passed: c3 <= params.max_motion,
        },
        Criterion {
            id: 4,
            statistic: c4,
            threshold: params.max_l1,
            passed: c4 <= params.max_l1,
        },
        Criterion {
            id: 5,
            statistic: c5,
            threshold: params.max_disagreement,
            passed: c5 <= params.max_disagreement,
        },
    ]))
}
