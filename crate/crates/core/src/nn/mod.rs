//! Convolutional network engine with hand-written backpropagation.

pub mod activation;
pub mod batchnorm;
pub mod conv;
pub mod network;
pub mod params;
pub mod tensor;

pub use activation::{relu, relu_backward};
pub use batchnorm::{batch_norm_backward, batch_norm_infer, batch_norm_train, BatchNormSpec, BnCache, BnGrads, BnMode};
pub use conv::{conv2d, conv2d_backward, ConvGrads, ConvSpec, Precision};
pub use network::{mse_loss, network_forward, BlockCache, Engine, ForwardCache, NetworkGrads, UnitGrads};
pub use params::{init_gaussian, Architecture, ConvBnUnit, NetworkParams, ParamKind, Variant, DEFAULT_INIT_SIGMA};
pub use tensor::Tensor;
