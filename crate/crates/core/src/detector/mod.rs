//! Saliency map to keypoints: blur, Kapur threshold, denoise, non-maximum suppression.

mod baseline;
mod io;
mod kapur;
mod nms;

use serde::{Deserialize, Serialize};

pub use baseline::{grayscale, laplacian_saliency, sobel_saliency};
pub use io::{format_keypoints, parse_keypoints, read_keypoints, write_keypoints, KeypointFile};
pub use kapur::{histogram, kapur_threshold, LEVELS};
pub use nms::{nms, NmsMetric};

use crate::error::{Error, Result};
use crate::kernels::{gaussian_blur, GaussianSpec};
use crate::netgraph::SaliencyMap;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    /// Column.
    pub x: usize,
    /// Row.
    pub y: usize,
    pub score: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Blur applied before computing the threshold level.
    pub thr_blur: GaussianSpec,
    /// Blur applied to the map that is thresholded and searched for maxima.
    pub noise_blur: GaussianSpec,
    pub w_nms: usize,
    pub b_nms: usize,
    pub max_keypoints: usize,
    #[serde(default)]
    pub nms_metric: NmsMetric,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            thr_blur: GaussianSpec::new(5, 4.0).unwrap(),
            noise_blur: GaussianSpec::new(5, 5.0).unwrap(),
            w_nms: 10,
            b_nms: 10,
            max_keypoints: 500,
            nms_metric: NmsMetric::Chebyshev,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.w_nms < 1 {
            return Err(Error::Config("w_nms must be at least 1".into()));
        }
        if self.max_keypoints < 1 {
            return Err(Error::Config("max_keypoints must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    /// Sorted by decreasing score.
    pub keypoints: Vec<Keypoint>,
    /// Kapur level applied to the denoised map, when one could be computed.
    pub level: Option<usize>,
    /// Set when the thresholding histogram had fewer than two occupied bins.
    pub degenerate_histogram: bool,
}

/// Min-max normalization to `[0, 255]`. `None` for a constant map.
pub fn normalize_to_gray(map: &SaliencyMap) -> Option<Tensor> {
    let data = map.values().data();
    let (lo, hi) = data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return None;
    }
    let range = hi - lo;
    Some(map.values().map(|v| (v - lo) / range * 255.0))
}

/// Runs the full detection pipeline on a saliency map.
pub fn detect(map: &SaliencyMap, cfg: &DetectorConfig) -> Result<Detection> {
    cfg.validate()?;
    let (w, h) = (map.width(), map.height());
    let min_side = 2 * cfg.b_nms + 1;
    if w < min_side || h < min_side {
        return Err(Error::Shape(format!(
            "map {w} × {h} is smaller than the {min_side}-pixel minimum implied by b_nms = {}",
            cfg.b_nms
        )));
    }
    let empty = |degenerate| Detection {
        keypoints: Vec::new(),
        level: None,
        degenerate_histogram: degenerate,
    };
    let Some(gray) = normalize_to_gray(map) else {
        // Constant maps carry no keypoints; the all-zero map is the common case.
        return Ok(empty(map.values().data().iter().any(|&v| v != 0.0)));
    };

    let thr_map = gaussian_blur(&gray, &cfg.thr_blur)?;
    let level = match kapur_threshold(&histogram(thr_map.data())) {
        Ok(level) => level,
        Err(Error::DegenerateHistogram) => {
            log::warn!("degenerate saliency histogram, no keypoints");
            return Ok(empty(true));
        }
        Err(e) => return Err(e),
    };

    let mut denoised = gaussian_blur(&gray, &cfg.noise_blur)?;
    let cut = level as f64;
    denoised
        .data_mut()
        .iter_mut()
        .filter(|v| **v < cut)
        .for_each(|v| *v = 0.0);

    let keypoints = nms(
        denoised.data(),
        w,
        h,
        cfg.w_nms,
        cfg.b_nms,
        cfg.max_keypoints,
        cfg.nms_metric,
    );
    Ok(Detection {
        keypoints,
        level: Some(level),
        degenerate_histogram: false,
    })
}
