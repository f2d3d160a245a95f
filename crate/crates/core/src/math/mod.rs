//! Numerical primitives shared by the rest of the crate.

mod activation;
pub mod eigen;
mod matrix;
mod rng;

pub use activation::{cross_entropy, relu, relu_vec, softmax, LOG_FLOOR};
pub(crate) use activation::{cross_entropy_label, softmax_in_place};
pub use eigen::{symmetric_eig, symmetric_generalized_eig, EigenDecomposition};
pub use matrix::{argmax, dot, norm, Matrix};
pub use rng::RngStream;
