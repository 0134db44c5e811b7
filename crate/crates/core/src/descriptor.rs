//! Descriptors sampled from a feature map by bilinear interpolation at keypoints.

use std::fmt::Write as _;
use std::path::Path;

use crate::detector::Keypoint;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorSet {
    pub dim: usize,
    /// One vector per keypoint, in keypoint order.
    pub vectors: Vec<Vec<f64>>,
    pub normalized: bool,
}

impl DescriptorSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    // Exact at t = 0 so integer samples reproduce the texel bit for bit.
    if t == 0.0 {
        a
    } else {
        a * (1.0 - t) + b * t
    }
}

/// Image coordinate to feature coordinate along one axis.
fn to_feature(coord: usize, image_extent: usize, feature_extent: usize) -> f64 {
    let u = coord as f64 * (feature_extent as f64 / image_extent as f64);
    u.clamp(0.0, (feature_extent - 1) as f64)
}

/// Bilinear sample of every channel of `feature` (c × h × w) at `(u, v)`.
pub fn sample_bilinear(feature: &Tensor, u: f64, v: f64) -> Result<Vec<f64>> {
    let (c, h, w) = feature.chw()?;
    let u = u.clamp(0.0, (w - 1) as f64);
    let v = v.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (u.floor() as usize, v.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (u - x0 as f64, v - y0 as f64);
    Ok((0..c)
        .map(|ci| {
            let p = feature.plane(ci);
            let top = lerp(p[y0 * w + x0], p[y0 * w + x1], fx);
            let bottom = lerp(p[y1 * w + x0], p[y1 * w + x1], fx);
            lerp(top, bottom, fy)
        })
        .collect())
}

/// Interpolates `feature` at each keypoint of an `image_h × image_w` image.
///
/// Image coordinates are scaled proportionally (`u = x · w / W`) and clamped
/// to the feature grid. With `normalize`, each non-zero vector is scaled to
/// unit L2 norm.
pub fn describe(
    feature: &Tensor,
    keypoints: &[Keypoint],
    image_dims: (usize, usize),
    normalize: bool,
) -> Result<DescriptorSet> {
    let (c, h, w) = feature.chw()?;
    let (image_h, image_w) = image_dims;
    if image_h == 0 || image_w == 0 {
        return Err(Error::Shape("image extents must be positive".into()));
    }
    let mut vectors = Vec::with_capacity(keypoints.len());
    for kp in keypoints {
        if kp.x >= image_w || kp.y >= image_h {
            return Err(Error::Shape(format!(
                "keypoint ({}, {}) outside {image_w} × {image_h} image",
                kp.x, kp.y
            )));
        }
        let u = to_feature(kp.x, image_w, w);
        let v = to_feature(kp.y, image_h, h);
        let mut d = sample_bilinear(feature, u, v)?;
        if normalize {
            l2_normalize(&mut d);
        }
        vectors.push(d);
    }
    Ok(DescriptorSet {
        dim: c,
        vectors,
        normalized: normalize,
    })
}

pub fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Euclidean distance between two descriptors of equal length.
pub fn descriptor_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "descriptor lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

const HEADER: &str = "# elf-desc v1";

/// `# elf-desc v1 N dim`, then one line of `dim` floats per keypoint.
pub fn format_descriptors(set: &DescriptorSet) -> String {
    let mut out = format!("{HEADER} {} {}\n", set.len(), set.dim);
    for v in &set.vectors {
        let line: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn parse_descriptors(text: &str) -> Result<DescriptorSet> {
    let bad = |line: usize, msg: String| Error::Parse { line, msg };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| bad(1, "empty descriptor file".into()))?;
    let rest = header
        .strip_prefix(HEADER)
        .ok_or_else(|| bad(1, format!("expected `{HEADER} N dim` header")))?;
    let nums: Vec<usize> = rest
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad(1, format!("bad count `{t}`"))))
        .collect::<Result<_>>()?;
    let [n, dim] = nums[..] else {
        return Err(bad(1, "header needs descriptor count and dimension".into()));
    };
    let mut vectors = Vec::with_capacity(n);
    for (i, line) in lines {
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| bad(i + 1, format!("bad value `{t}`")))
            })
            .collect::<Result<_>>()?;
        if v.len() != dim {
            return Err(bad(
                i + 1,
                format!("expected {dim} values, got {}", v.len()),
            ));
        }
        vectors.push(v);
    }
    if vectors.len() != n {
        return Err(bad(
            text.lines().count(),
            format!(
                "header announces {n} descriptors, file has {}",
                vectors.len()
            ),
        ));
    }
    let normalized = !vectors.is_empty()
        && vectors.iter().all(|v| {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            norm == 0.0 || (norm - 1.0).abs() < 1e-9
        });
    Ok(DescriptorSet {
        dim,
        vectors,
        normalized,
    })
}

pub fn write_descriptors(path: impl AsRef<Path>, set: &DescriptorSet) -> Result<()> {
    std::fs::write(path, format_descriptors(set))?;
    Ok(())
}

pub fn read_descriptors(path: impl AsRef<Path>) -> Result<DescriptorSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    parse_descriptors(&text).map_err(|e| Error::File {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}
