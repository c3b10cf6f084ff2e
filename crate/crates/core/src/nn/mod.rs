//! Minimal CNN engine: forward and analytic backward passes, softmax
//! cross-entropy, SGD.

mod batch;
mod loss;
mod network;
mod params;
mod real;
mod sgd;
mod spec;

pub use batch::Batch;
pub use loss::{softmax, Logits};
pub use network::{BatchScore, LayerParams, Network};
pub use params::ParamVector;
pub use real::Real;
pub use sgd::{lr_at_round, sgd_step, sgd_step_in_place};
pub use spec::{InputShape, Layer, ModelSpec};
