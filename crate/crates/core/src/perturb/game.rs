use crate::error::{shape_err, PredictorError, Result, XaiError};
use crate::numerics::Tensor;
use crate::perturb::mask::{baseline_values, check_image, write_masked};
use crate::perturb::{BaselineMode, Mask, SuperpixelMap};

/// Masks submitted to a predictor per call unless it asks for fewer.
pub const DEFAULT_BATCH_LIMIT: usize = 32;

/// A scalar-valued function of superpixel coalitions.
pub trait CoalitionValue {
    /// One value per mask, in order.
    fn values(&mut self, masks: &[Mask]) -> Result<Vec<f64>>;
}

/// Adapts a per-mask closure.
pub struct FnValue<F>(pub F);

impl<F: FnMut(&Mask) -> f64> CoalitionValue for FnValue<F> {
    fn values(&mut self, masks: &[Mask]) -> Result<Vec<f64>> {
        Ok(masks.iter().map(&mut self.0).collect())
    }
}

/// Black-box model: a `B x H x W x C` batch in, `B x classes` scores out.
///
/// Calls are issued serially from one thread.
pub trait Predictor {
    fn predict(&mut self, batch: &Tensor) -> std::result::Result<Tensor, PredictorError>;

    /// Largest batch the predictor accepts in one call.
    fn batch_limit(&self) -> usize {
        DEFAULT_BATCH_LIMIT
    }
}

/// Closure-backed predictor with an explicit batch limit.
pub struct FnPredictor<F> {
    f: F,
    batch_limit: usize,
}

impl<F> FnPredictor<F>
where
    F: FnMut(&Tensor) -> std::result::Result<Tensor, PredictorError>,
{
    pub fn new(f: F) -> Self {
        Self::with_batch_limit(f, DEFAULT_BATCH_LIMIT)
    }

    pub fn with_batch_limit(f: F, batch_limit: usize) -> Self {
        Self {
            f,
            batch_limit: batch_limit.max(1),
        }
    }
}

impl<F> Predictor for FnPredictor<F>
where
    F: FnMut(&Tensor) -> std::result::Result<Tensor, PredictorError>,
{
    fn predict(&mut self, batch: &Tensor) -> std::result::Result<Tensor, PredictorError> {
        (self.f)(batch)
    }

    fn batch_limit(&self) -> usize {
        self.batch_limit
    }
}

/// Scores masked copies of an image with a predictor and reads one class.
pub struct ImageGame<'a, P: ?Sized> {
    predictor: &'a mut P,
    image: &'a Tensor,
    spmap: &'a SuperpixelMap,
    class_index: usize,
    baseline: Vec<f64>,
    batches: usize,
    samples: usize,
}

impl<'a, P: Predictor + ?Sized> ImageGame<'a, P> {
    pub fn new(
        predictor: &'a mut P,
        image: &'a Tensor,
        spmap: &'a SuperpixelMap,
        class_index: usize,
        baseline: BaselineMode,
    ) -> Result<Self> {
        check_image(image, spmap)?;
        Ok(Self {
            baseline: baseline_values(image, spmap, baseline),
            predictor,
            image,
            spmap,
            class_index,
            batches: 0,
            samples: 0,
        })
    }

    /// Predictor invocations so far.
    pub fn batches(&self) -> usize {
        self.batches
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    fn run_batch(&mut self, masks: &[Mask]) -> Result<Vec<f64>> {
        let (h, w, c) = (self.image.shape()[0], self.image.shape()[1], self.image.shape()[2]);
        let mut data = Vec::with_capacity(masks.len() * self.image.len());
        for mask in masks {
            if mask.len() != self.spmap.count() {
                return Err(shape_err(format!(
                    "mask of length {} for {} superpixels",
                    mask.len(),
                    self.spmap.count()
                )));
            }
            write_masked(self.image, self.spmap, mask, &self.baseline, &mut data);
        }
        let batch = Tensor::new(vec![masks.len(), h, w, c], data)?;
        let (batch_index, first_sample) = (self.batches, self.samples);
        self.batches += 1;
        self.samples += masks.len();
        let wrap = |source: PredictorError| XaiError::Predictor {
            batch: batch_index,
            first_sample,
            source,
        };
        let out = self.predictor.predict(&batch).map_err(wrap)?;
        if out.rank() != 2 || out.rows() != masks.len() || out.cols() <= self.class_index {
            return Err(wrap(
                format!(
                    "shape mismatch from predictor: expected {} rows with more than {} columns, got {:?}",
                    masks.len(),
                    self.class_index,
                    out.shape()
                )
                .into(),
            ));
        }
        Ok((0..masks.len()).map(|r| out.row(r)[self.class_index]).collect())
    }
}

impl<P: Predictor + ?Sized> CoalitionValue for ImageGame<'_, P> {
    fn values(&mut self, masks: &[Mask]) -> Result<Vec<f64>> {
        let limit = self.predictor.batch_limit().max(1);
        let mut out = Vec::with_capacity(masks.len());
        for chunk in masks.chunks(limit) {
            out.extend(self.run_batch(chunk)?);
        }
        Ok(out)
    }
}
