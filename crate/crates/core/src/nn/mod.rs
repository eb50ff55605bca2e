//! Minimal reverse-mode kernels: dense layers, ReLU, softmax cross entropy,
//! column concat/split, gradient reversal and Adam.

pub mod adam;
pub mod gradcheck;
pub mod grl;
pub mod layers;
pub mod loss;
pub mod matrix;

pub use adam::Adam;
pub use grl::GrlGate;
pub use layers::{relu_backward, relu_forward, AffineGrads, AffineLayer, Mlp, MlpCache, Param, Parameters};
pub use loss::{argmax, row_xent, softmax_xent};
pub use matrix::{concat_cols, dot, split_cols, Matrix};
