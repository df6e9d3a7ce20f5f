//! Tensor container and the numeric kernels shared by every other module.
//!
//! Everything here works in `f64`; narrower floats are widened at I/O time.

mod linalg;
mod ops;
mod pca;
mod rng;
mod scalar;
mod tensor;

pub use linalg::{
    cholesky_solve, weighted_least_squares, weighted_least_squares_through_origin, WlsFit,
};
pub use ops::{global_average_pool, pixel_shuffle, pixel_unshuffle};
pub use pca::{pca_fit_project, PcaModel};
pub use rng::SplitMix64;
pub use scalar::{logit, pairwise_sum, sigmoid, softmax};
pub use tensor::Tensor;
