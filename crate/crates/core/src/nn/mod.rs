//! Differentiable primitives shared by all three networks.

pub mod container;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tensor;

pub use graph::{Gradients, Graph, Var};
pub use layers::{affine, lstm_step, max_pool, relu, Linear, LstmCell, ReluMlp};
pub use optim::Adam;
pub use params::{Bound, ParamId, ParamStore};
pub use tensor::{sample_standard_normal, Tensor};
