//! Latent-space explanation: a 2-D PCA view of encoder embeddings, a small
//! regressor that turns scattered Dice scores into a landscape over that
//! view, and an exact t-SNE embedding.

mod landscape;
mod tsne;

pub use landscape::{
    evaluate_grid, fit_landscape, grid_coordinate, GridBounds, LandscapeFit, LandscapeModel, LANDSCAPE_HIDDEN,
};
pub use tsne::{tsne_embed, TsneConfig, TsneResult, TSNE_MAX_POINTS};

use crate::error::{invalid, shape_err, Result};
use crate::numerics::{pca_fit_project, PcaModel, Tensor};

/// `N x D` embeddings with optional row identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    x: Tensor,
    ids: Option<Vec<String>>,
}

impl EmbeddingSet {
    pub fn new(x: Tensor) -> Result<Self> {
        x.expect_rank(2, "embedding matrix")?;
        if x.rows() < 2 {
            return Err(invalid("need at least 2 embeddings"));
        }
        Ok(Self { x, ids: None })
    }

    pub fn with_ids(x: Tensor, ids: Vec<String>) -> Result<Self> {
        let mut set = Self::new(x)?;
        if ids.len() != set.x.rows() {
            return Err(shape_err(format!("{} ids for {} rows", ids.len(), set.x.rows())));
        }
        set.ids = Some(ids);
        Ok(set)
    }

    pub fn matrix(&self) -> &Tensor {
        &self.x
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }
}

/// PCA onto the top two components.
pub fn project_2d(x: &EmbeddingSet) -> Result<(PcaModel, Tensor)> {
    if x.dim() < 2 {
        return Err(invalid(format!("projection to 2-D needs D >= 2, got {}", x.dim())));
    }
    pca_fit_project(x.matrix(), 2)
}
