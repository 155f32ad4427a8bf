//! Motion blur synthesis from image pairs with a differentiable
//! line-prediction renderer.
//!
//! The crate covers the renderer and its gradients ([`linepred`]), flow-based
//! and naive blur baselines ([`baselines`]), optical flow ([`flow`]), dataset
//! curation and ground-truth synthesis ([`dataset`]), per-image fitting of
//! line fields ([`fit`]) and quality metrics ([`metrics`]).

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod fit;
pub mod flow;
pub mod imgcore;
pub mod linepred;
pub mod metrics;

pub use error::{Error, Result};
pub use exec::Execution;
pub use imgcore::Image;
pub use linepred::LineField;
