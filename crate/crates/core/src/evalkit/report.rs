use serde::{Deserialize, Serialize};

use super::{evaluate_pair, Homography, ImageSize};
use crate::descriptor::DescriptorSet;
use crate::detector::Keypoint;
use crate::error::Result;

/// Scores of one image pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub image1: String,
    pub image2: String,
    pub keypoints1: usize,
    pub keypoints2: usize,
    pub repeatability: f64,
    pub matching_score: Option<f64>,
}

/// Per-pair scores and their means over a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pairs: Vec<PairReport>,
    pub repeatability_mean: Option<f64>,
    pub matching_score_mean: Option<f64>,
}

impl PairReport {
    /// Scores one pair for a dataset report. A side with no keypoints scores 0
    /// (logged) instead of failing the whole run; other errors propagate.
    #[allow(clippy::too_many_arguments)]
    pub fn score(
        image1: &str,
        image2: &str,
        kps1: &[Keypoint],
        desc1: Option<&DescriptorSet>,
        kps2: &[Keypoint],
        desc2: Option<&DescriptorSet>,
        h: &Homography,
        frame2: ImageSize,
        eps: f64,
    ) -> Result<Self> {
        let (repeatability, matching_score) = if kps1.is_empty() || kps2.is_empty() {
            log::warn!(
                "{image1} / {image2}: {} and {} keypoints, pair scored 0",
                kps1.len(),
                kps2.len()
            );
            (0.0, (desc1.is_some() && desc2.is_some()).then_some(0.0))
        } else {
            let s = evaluate_pair(kps1, desc1, kps2, desc2, h, frame2, eps)?;
            (s.repeatability, s.matching_score)
        };
        Ok(Self {
            image1: image1.into(),
            image2: image2.into(),
            keypoints1: kps1.len(),
            keypoints2: kps2.len(),
            repeatability,
            matching_score,
        })
    }
}

impl EvalReport {
    pub fn from_pairs(pairs: Vec<PairReport>) -> Self {
        let mean = |vals: Vec<f64>| {
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let repeatability_mean = mean(pairs.iter().map(|p| p.repeatability).collect());
        let ms: Vec<f64> = pairs.iter().filter_map(|p| p.matching_score).collect();
        let matching_score_mean = if ms.len() == pairs.len() {
            mean(ms)
        } else {
            None
        };
        Self {
            pairs,
            repeatability_mean,
            matching_score_mean,
        }
    }
}
