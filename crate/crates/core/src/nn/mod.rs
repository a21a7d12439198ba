//! Minimal neural-network kit: tensors, layers with manual backprop,
//! reconstruction loss, and optimizers. Everything is f64 and sequential
//! so runs are reproducible bit for bit from a seed.

pub mod layer;
pub mod loss;
pub mod optim;
pub mod tensor;

pub use layer::{
    ActivationFn, Aux, Conv1d, Dense, Layer, LayerSpec, Mode, Network, Padding, ParamGrads, Trace,
    TraceStep,
};
pub use loss::{mse, mse_grad};
pub use optim::{Adam, Optimizer, Sgd};
pub use tensor::Tensor;
