//! Image-level entry points tying saliency, detection and description together.

use crate::config::{PipelineConfig, SaliencySource};
use crate::descriptor::{describe, DescriptorSet};
use crate::detector::{detect, laplacian_saliency, sobel_saliency, Detection, Keypoint};
use crate::error::{Error, Result};
use crate::netgraph::{Network, SaliencyMap};
use crate::tensor::Tensor;

/// Saliency of `image` as selected by `cfg`. `network` is only needed for
/// [`SaliencySource::Network`].
pub fn saliency_for(
    image: &Tensor,
    network: Option<&Network>,
    cfg: &PipelineConfig,
) -> Result<SaliencyMap> {
    match cfg.saliency {
        SaliencySource::Sobel => sobel_saliency(image),
        SaliencySource::Laplacian => laplacian_saliency(image),
        SaliencySource::Network => {
            let net = network.ok_or_else(|| {
                Error::Config("network saliency needs an architecture and weights".into())
            })?;
            let layer = cfg
                .detect_layer
                .as_deref()
                .ok_or_else(|| Error::Config("detect_layer is not set".into()))?;
            net.saliency(image, layer, cfg.relu_mode)
        }
    }
}

pub fn detect_image(
    image: &Tensor,
    network: Option<&Network>,
    cfg: &PipelineConfig,
) -> Result<(SaliencyMap, Detection)> {
    let map = saliency_for(image, network, cfg)?;
    let detection = detect(&map, &cfg.detector)?;
    if detection.degenerate_histogram {
        log::warn!("saliency histogram is degenerate; no keypoints kept");
    }
    Ok((map, detection))
}

/// Samples `cfg.describe_layer` of `network` at `keypoints`.
pub fn describe_image(
    image: &Tensor,
    keypoints: &[Keypoint],
    network: &Network,
    cfg: &PipelineConfig,
) -> Result<DescriptorSet> {
    let (_, h, w) = image.chw()?;
    let (feature, _) = network.forward_to(image, &cfg.describe_layer)?;
    describe(&feature, keypoints, (h, w), cfg.normalize_descriptors)
}
