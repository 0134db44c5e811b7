use super::homography::Homography;
use super::matching::{euclidean, greedy_match_by, MatchSet};
use crate::descriptor::DescriptorSet;
use crate::detector::Keypoint;
use crate::error::{Error, Result};

/// Default correspondence tolerance in pixels.
pub const DEFAULT_EPS: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ImageSize {
    pub width: usize,
    pub height: usize,
}

/// Keypoints of image 1 warped into image 2, dropping those that leave its frame.
#[derive(Clone, Debug)]
pub struct VisibleWarp {
    /// Index into the original keypoint list.
    pub index: Vec<usize>,
    pub points: Vec<(f64, f64)>,
}

pub fn warp_visible(kps: &[Keypoint], h: &Homography, frame: ImageSize) -> VisibleWarp {
    let (max_x, max_y) = ((frame.width - 1) as f64, (frame.height - 1) as f64);
    let mut index = Vec::new();
    let mut points = Vec::new();
    for (i, k) in kps.iter().enumerate() {
        if let Some((x, y)) = h.apply(k.x as f64, k.y as f64) {
            if (0.0..=max_x).contains(&x) && (0.0..=max_y).contains(&y) {
                index.push(i);
                points.push((x, y));
            }
        }
    }
    VisibleWarp { index, points }
}

fn check_nonempty(kps1: &[Keypoint], kps2: &[Keypoint]) -> Result<()> {
    if kps1.is_empty() || kps2.is_empty() {
        return Err(Error::UndefinedMetric(format!(
            "keypoint lists must be non-empty (got {} and {})",
            kps1.len(),
            kps2.len()
        )));
    }
    Ok(())
}

fn to_original(m: MatchSet, visible: &VisibleWarp) -> MatchSet {
    MatchSet {
        pairs: m
            .pairs
            .into_iter()
            .map(|mut p| {
                p.a = visible.index[p.a];
                p
            })
            .collect(),
    }
}

/// Greedy image-space matching of warped `kps1` against `kps2`, all pairs
/// (no distance cut). Indices refer to the original lists.
pub fn image_space_matches(visible: &VisibleWarp, kps2: &[Keypoint]) -> MatchSet {
    let m = greedy_match_by(visible.points.len(), kps2.len(), |i, j| {
        let (x, y) = visible.points[i];
        let k = &kps2[j];
        euclidean(&[x, y], &[k.x as f64, k.y as f64])
    });
    to_original(m, visible)
}

fn percent(count: usize, kps1: &[Keypoint], kps2: &[Keypoint]) -> f64 {
    100.0 * count as f64 / kps1.len().min(kps2.len()) as f64
}

/// Percentage of keypoints matched one-to-one within `eps` pixels under `h`.
///
/// The denominator is the smaller of the two original list sizes, whether or
/// not some warped keypoints left image 2.
pub fn repeatability(
    kps1: &[Keypoint],
    kps2: &[Keypoint],
    h: &Homography,
    frame2: ImageSize,
    eps: f64,
) -> Result<f64> {
    check_nonempty(kps1, kps2)?;
    let visible = warp_visible(kps1, h, frame2);
    let m = image_space_matches(&visible, kps2).below(eps);
    Ok(percent(m.len(), kps1, kps2))
}

/// Percentage of keypoints whose image-space match (within `eps`) is also their
/// greedy descriptor-space match, with no descriptor distance cut.
#[allow(clippy::too_many_arguments)]
pub fn matching_score(
    kps1: &[Keypoint],
    desc1: &DescriptorSet,
    kps2: &[Keypoint],
    desc2: &DescriptorSet,
    h: &Homography,
    frame2: ImageSize,
    eps: f64,
) -> Result<f64> {
    Ok(
        evaluate_pair(kps1, Some(desc1), kps2, Some(desc2), h, frame2, eps)?
            .matching_score
            .expect("descriptors supplied"),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairScores {
    pub repeatability: f64,
    pub matching_score: Option<f64>,
}

/// Repeatability, plus matching score when both descriptor sets are given.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_pair(
    kps1: &[Keypoint],
    desc1: Option<&DescriptorSet>,
    kps2: &[Keypoint],
    desc2: Option<&DescriptorSet>,
    h: &Homography,
    frame2: ImageSize,
    eps: f64,
) -> Result<PairScores> {
    check_nonempty(kps1, kps2)?;
    let visible = warp_visible(kps1, h, frame2);
    let m = image_space_matches(&visible, kps2).below(eps);
    let repeatability = percent(m.len(), kps1, kps2);

    let matching_score = match (desc1, desc2) {
        (Some(d1), Some(d2)) => {
            for (d, k, which) in [(d1, kps1, 1), (d2, kps2, 2)] {
                if d.len() != k.len() {
                    return Err(Error::UndefinedMetric(format!(
                        "image {which}: {} descriptors for {} keypoints",
                        d.len(),
                        k.len()
                    )));
                }
            }
            if d1.dim != d2.dim {
                return Err(Error::UndefinedMetric(format!(
                    "descriptor dimensions differ: {} vs {}",
                    d1.dim, d2.dim
                )));
            }
            let md = greedy_match_by(visible.index.len(), kps2.len(), |i, j| {
                euclidean(&d1.vectors[visible.index[i]], &d2.vectors[j])
            });
            let md = to_original(md, &visible);
            let mut in_md = std::collections::HashSet::with_capacity(md.len());
            in_md.extend(md.pairs.iter().map(|p| (p.a, p.b)));
            let common = m
                .pairs
                .iter()
                .filter(|p| in_md.contains(&(p.a, p.b)))
                .count();
            Some(percent(common, kps1, kps2))
        }
        (None, None) => None,
        _ => {
            return Err(Error::UndefinedMetric(
                "matching score needs descriptors for both images".into(),
            ))
        }
    };
    Ok(PairScores {
        repeatability,
        matching_score,
    })
}
