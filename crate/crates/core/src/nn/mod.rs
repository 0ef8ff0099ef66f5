//! Minimal tensor and layer engine with exact backpropagation.

pub mod adam;
pub mod conv;
pub mod dense;
pub mod layer;
pub mod loss;
pub mod network;
pub mod pool;
pub mod tensor;

pub use adam::{adam_step, Adam, AdamState};
pub use conv::{Conv2d, Padding};
pub use dense::{softmax_rows, Dense, Flatten, Relu, Rescale, Softmax};
pub use layer::{BatchNorm, Dropout, Layer, Mode, Param};
pub use loss::{cross_entropy, softmax_cross_entropy_backward};
pub use network::{Network, Slot};
pub use pool::{GlobalAvgPool, MaxPool};
pub use tensor::{Real, Tensor};
