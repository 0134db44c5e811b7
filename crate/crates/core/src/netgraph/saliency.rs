use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Non-negative single-channel map, image sized, whose local maxima are keypoints.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    values: Tensor,
    source_layer: String,
}

impl SaliencyMap {
    /// Wraps a `1 × h × w` tensor of non-negative values.
    pub fn new(values: Tensor, source_layer: impl Into<String>) -> Result<Self> {
        let (c, _, _) = values.chw()?;
        if c != 1 {
            return Err(Error::Shape(format!(
                "saliency maps have one channel, got {c}"
            )));
        }
        if let Some(v) = values.data().iter().find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::Shape(format!(
                "saliency values must be non-negative and finite-ordered, found {v}"
            )));
        }
        Ok(Self {
            values,
            source_layer: source_layer.into(),
        })
    }

    /// Absolute value of an image-space gradient, averaged across its channels.
    pub fn from_gradient(grad: &Tensor, source_layer: &str) -> Result<Self> {
        let (c, h, w) = grad.chw()?;
        let inv = 1.0 / c as f64;
        let values = Tensor::from_fn3(1, h, w, |_, y, x| {
            (0..c).map(|ci| grad.at3(ci, y, x).abs()).sum::<f64>() * inv
        })?;
        Self::new(values, source_layer)
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn source_layer(&self) -> &str {
        &self.source_layer
    }

    pub fn width(&self) -> usize {
        self.values.dims()[2]
    }

    pub fn height(&self) -> usize {
        self.values.dims()[1]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values.at3(0, y, x)
    }
}
