//! Convolutional encoder layers with hand-written backward passes.

pub mod activation;
pub mod block;
pub mod conv;
pub mod encoder;
pub mod linear;
pub mod norm;
pub mod pool;

pub use activation::{log_softmax, log_softmax_backward, relu, relu_backward};
pub use block::BottleneckBlock;
pub use conv::{Conv2d, ConvSpec};
pub use encoder::{Encoder, EncoderConfig};
pub use linear::Linear;
pub use norm::BatchNorm2d;
pub use pool::{maxpool2d, maxpool2d_backward};

/// Normalization behaviour: batch statistics (train) or running statistics (eval).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}
