//! End-to-end optical music recognition: a pre-activation bottleneck
//! residual encoder with dilated convolutions, a bidirectional GRU, and a
//! CTC output layer, together with the data pipeline, degradation
//! augmentation, training loop and evaluation metrics around it.
//!
//! Every layer implements its own analytic backward pass; there is no
//! autodiff graph.

pub mod augment;
pub mod ctc;
pub mod data;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod params;
pub mod rnn;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use metrics::Encoding;
pub use params::{NamedTensors, ParamKind, Parameters};
pub use tensor::{Real, Tensor};
