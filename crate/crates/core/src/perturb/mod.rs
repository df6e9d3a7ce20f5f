//! Perturbation explainers over superpixels: LIME surrogates, Kernel SHAP
//! and an exact Shapley oracle.
//!
//! The explainers are written against [`CoalitionValue`], a function from
//! keep/drop masks to scalar outputs. [`ImageGame`] adapts an image, its
//! superpixels and a black-box [`Predictor`] to that interface, batching
//! predictor calls.

mod game;
mod lime;
mod mask;
mod shap;
mod superpixel;

use serde::Serialize;

pub use game::{CoalitionValue, FnPredictor, FnValue, ImageGame, Predictor, DEFAULT_BATCH_LIMIT};
pub use lime::{lime_explain, lime_explain_game, proximity_weight, LimeConfig};
pub use mask::{apply_mask, sample_masks, BaselineMode, Mask};
pub use shap::{
    exact_shapley, kernel_shap_explain, kernel_shap_game, shapley_kernel_weight, ShapConfig,
    EXACT_SHAPLEY_LIMIT,
};
pub use superpixel::{grid_superpixels, SuperpixelMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lime,
    KernelShap,
    ExactShapley,
}

/// Per-superpixel attribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    pub method: Method,
    pub class_index: usize,
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Output with every superpixel replaced by the baseline.
    pub base_value: f64,
    /// Output on the unmodified input.
    pub full_value: f64,
    /// Number of coalitions evaluated, including the empty and full ones.
    pub evaluations: usize,
}
