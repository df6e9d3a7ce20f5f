use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use xaikit_core::perturb::{BaselineMode, DEFAULT_BATCH_LIMIT};
use xaikit_core::segloss::Divergence;

use crate::predictor::StubMode;

#[derive(Debug, Parser)]
#[command(name = "xaikit", version, about = "Explainability toolkit for image classifiers and segmenters")]
pub struct Cli {
    /// Worker threads for parallel inner loops.
    #[arg(long, global = true, env = "XAIKIT_THREADS", default_value_t = 1)]
    pub threads: usize,
    /// Record wall time in the report (makes reports non-reproducible).
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Class activation map, heatmap image and lesion boxes.
    Cam(CamArgs),
    /// Section and patient probabilities from slice scores, with losses.
    Mil(MilArgs),
    /// LIME superpixel attributions from a subprocess predictor.
    Lime(LimeArgs),
    /// Kernel SHAP (or exact Shapley) superpixel attributions.
    Shap(ShapArgs),
    /// Exact t-SNE embedding of an N x D matrix.
    Tsne(TsneArgs),
    /// PCA projection plus a fitted Dice landscape over it.
    Landscape(LandscapeArgs),
    /// ROC/AUC, precision-recall, confusion metrics and Dice.
    Metrics(MetricsArgs),
    /// Segmentation losses and the chi-square gradient check.
    SeglossCheck(SeglossArgs),
    #[command(hide = true)]
    PredictorStub(StubArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CamArgs {
    /// H x W x K feature stack.
    #[arg(long)]
    pub features: PathBuf,
    /// K x C classifier weights.
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub class: usize,
    /// Normalised heatmap (P5).
    #[arg(long)]
    pub out: PathBuf,
    /// Colour heatmap (P6).
    #[arg(long)]
    pub color: Option<PathBuf>,
    /// Lesion boxes as JSON.
    #[arg(long)]
    pub boxes: Option<PathBuf>,
    #[arg(long, default_value_t = 0.6)]
    pub threshold: f64,
    /// Nearest-neighbour upsampling factor applied before thresholding.
    #[arg(long, default_value_t = 1)]
    pub upsample: usize,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MilArgs {
    /// n x 2 pre-sigmoid slice scores.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub label: usize,
    #[arg(long, default_value_t = 16)]
    pub section_len: usize,
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub clamp_eps: f64,
    /// n x d slice embeddings; enables the noisy-label loss.
    #[arg(long, requires = "head")]
    pub embeddings: Option<PathBuf>,
    /// 2 x 2 x 2 x (d + 1) noise head, bias last.
    #[arg(long, requires = "embeddings")]
    pub head: Option<PathBuf>,
    /// Gradient of the total loss with respect to the scores (n x 2).
    #[arg(long, requires = "head")]
    pub grad: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    RegionMean,
    Zero,
}

impl From<Baseline> for BaselineMode {
    fn from(b: Baseline) -> Self {
        match b {
            Baseline::RegionMean => BaselineMode::RegionMean,
            Baseline::Zero => BaselineMode::Zero,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExplainArgs {
    /// H x W x C image.
    #[arg(long)]
    pub image: PathBuf,
    /// Shell command of the predictor child.
    #[arg(long)]
    pub predictor: String,
    #[arg(long, default_value_t = 0)]
    pub class: usize,
    /// Grid superpixel count, ignored with --segments.
    #[arg(long, default_value_t = 16)]
    pub superpixels: usize,
    /// H x W map of superpixel labels.
    #[arg(long)]
    pub segments: Option<PathBuf>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, env = "XAIKIT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Baseline::RegionMean)]
    pub baseline: Baseline,
    #[arg(long, default_value_t = DEFAULT_BATCH_LIMIT)]
    pub batch_limit: usize,
    #[arg(long, default_value_t = 120)]
    pub timeout_secs: u64,
    /// Attributions as an M-vector.
    #[arg(long)]
    pub weights_out: Option<PathBuf>,
    /// Per-pixel attribution heatmap (P5), min-max scaled.
    #[arg(long)]
    pub heatmap: Option<PathBuf>,
    #[arg(long)]
    pub color: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LimeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: ExplainArgs,
    #[arg(long, default_value_t = 0.25)]
    pub kernel_width: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ShapArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: ExplainArgs,
    /// Enumerate all coalitions for exact Shapley values.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TsneArgs {
    /// N x D input matrix.
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value_t = 30.0)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 100.0)]
    pub learning_rate: f64,
    #[arg(long, env = "XAIKIT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// N x 2 coordinates.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LandscapeArgs {
    /// N x D encoder embeddings.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// CSV with one Dice score per embedding row.
    #[arg(long)]
    pub dice: PathBuf,
    #[arg(long, default_value = "dice")]
    pub dice_column: String,
    #[arg(long, default_value_t = 64)]
    pub resolution: usize,
    /// Grid padding as a fraction of the projected extent.
    #[arg(long, default_value_t = 0.05)]
    pub margin: f64,
    #[arg(long, env = "XAIKIT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// R x R landscape grid.
    #[arg(long)]
    pub out: PathBuf,
    /// N x 2 projected coordinates.
    #[arg(long)]
    pub projection: Option<PathBuf>,
    /// Landscape as a colour image (P6), values clamped to [0, 1].
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MetricsArgs {
    /// CSV with score and label columns.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "score")]
    pub score_column: String,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// ROC curve table.
    #[arg(long)]
    pub roc: Option<PathBuf>,
    /// Precision-recall curve table.
    #[arg(long)]
    pub pr: Option<PathBuf>,
    /// Predicted mask (entries > 0.5 count as foreground).
    #[arg(long, requires = "true_mask")]
    pub pred_mask: Option<PathBuf>,
    #[arg(long, requires = "pred_mask")]
    pub true_mask: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivergenceArg {
    Chi2,
    Kl,
}

impl From<DivergenceArg> for Divergence {
    fn from(d: DivergenceArg) -> Self {
        match d {
            DivergenceArg::Chi2 => Divergence::PearsonChi2,
            DivergenceArg::Kl => Divergence::Kl,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SeglossArgs {
    #[arg(long, value_enum, default_value_t = DivergenceArg::Chi2)]
    pub divergence: DivergenceArg,
    #[arg(long, default_value_t = 1e-2)]
    pub beta: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub clamp_eps: f64,
    /// H x W x C predictions on labelled slices.
    #[arg(long, requires_all = ["source_labels", "target_probs"])]
    pub source_probs: Option<PathBuf>,
    /// H x W class-index map.
    #[arg(long, requires = "source_probs")]
    pub source_labels: Option<PathBuf>,
    /// H x W x C predictions on unlabelled slices.
    #[arg(long, requires = "source_probs")]
    pub target_probs: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StubArgs {
    #[arg(long, value_enum, default_value_t = StubMode::Constant)]
    pub mode: StubMode,
    #[arg(long, default_value_t = 0)]
    pub after: usize,
}
