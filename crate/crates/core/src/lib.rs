//! Numerical core of xaikit.
//!
//! The crate is organised by concern:
//!
//! * [`numerics`]: the [`Tensor`] container and shared kernels (sigmoid,
//!   softmax, pooling, pixel shuffle, weighted least squares, PCA, seeded RNG).
//! * [`edm`]: class scores, class activation maps, heatmap normalisation and
//!   lesion bounding boxes.
//! * [`mil`]: section partitioning, k-max section probabilities, noisy-OR
//!   patient aggregation, the noise-transition head and analytic loss gradients.
//! * [`perturb`]: superpixels, masking, LIME, Kernel SHAP and exact Shapley values.
//! * [`segloss`]: supervised cross-entropy plus KL / Pearson chi-square
//!   uniform-divergence losses with analytic gradients.
//! * [`latent`]: 2-D PCA projection, the Dice landscape regressor and exact t-SNE.
//! * [`metrics`]: ROC/AUC, precision-recall, confusion ratios and Dice.

pub mod edm;
pub mod error;
pub mod latent;
pub mod metrics;
pub mod mil;
pub mod numerics;
pub mod perturb;
pub mod segloss;

pub use error::{Result, XaiError};
pub use numerics::{PcaModel, SplitMix64, Tensor};
