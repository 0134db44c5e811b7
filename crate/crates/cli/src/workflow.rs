//! Manifest-level work: per-image features, pair evaluation, layer sweeps.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use elf_core::config::PipelineConfig;
use elf_core::dataset::Manifest;
use elf_core::descriptor::{describe, read_descriptors, write_descriptors, DescriptorSet};
use elf_core::detector::{read_keypoints, write_keypoints, Keypoint};
use elf_core::evalkit::{EvalReport, Homography, ImageSize, PairReport};
use elf_core::imageio::load_image;
use elf_core::netgraph::{parse_arch, preset_arch, NetGraph, Network};
use elf_core::pipeline::{describe_image, detect_image};
use rayon::prelude::*;

/// A bundled architecture name or a path to an architecture file.
pub fn load_graph(spec: &str) -> Result<NetGraph> {
    if let Some(text) = preset_arch(spec) {
        return Ok(parse_arch(text)?);
    }
    let text =
        std::fs::read_to_string(spec).with_context(|| format!("reading architecture {spec}"))?;
    parse_arch(&text).with_context(|| format!("parsing architecture {spec}"))
}

#[derive(Clone, Debug)]
pub struct ImageFeatures {
    pub width: usize,
    pub height: usize,
    pub keypoints: Vec<Keypoint>,
    pub descriptors: Option<DescriptorSet>,
}

/// Features of every image a manifest mentions, keyed by path.
pub struct Features(BTreeMap<PathBuf, ImageFeatures>);

fn unique_images(manifest: &Manifest) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = manifest
        .pairs
        .iter()
        .flat_map(|p| [p.image1.clone(), p.image2.clone()])
        .collect();
    v.sort();
    v.dedup();
    v
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

impl Features {
    /// Runs detection, and description when a network is available, on each
    /// image in parallel.
    pub fn compute(
        manifest: &Manifest,
        network: Option<&Network>,
        cfg: &PipelineConfig,
    ) -> Result<Self> {
        if network.is_none() {
            log::warn!("no weights given: matching score is not computed");
        }
        let channels = network.map_or(3, |n| n.graph().input_channels());
        let items: Vec<(PathBuf, ImageFeatures)> = unique_images(manifest)
            .into_par_iter()
            .map(|path| {
                let img = load_image(&path, channels)?;
                let (_, height, width) = img.chw()?;
                let (_, det) = detect_image(&img, network, cfg)
                    .with_context(|| format!("detecting in {}", path.display()))?;
                let descriptors = network
                    .map(|n| describe_image(&img, &det.keypoints, n, cfg))
                    .transpose()?;
                Ok((
                    path,
                    ImageFeatures {
                        width,
                        height,
                        keypoints: det.keypoints,
                        descriptors,
                    },
                ))
            })
            .collect::<Result<_>>()?;
        Ok(Self(items.into_iter().collect()))
    }

    /// Reads `<stem>.kp` (required) and `<stem>.desc` (optional) per image.
    pub fn read_dir(manifest: &Manifest, dir: &Path) -> Result<Self> {
        let mut map = BTreeMap::new();
        for path in unique_images(manifest) {
            let s = stem(&path);
            let kp = read_keypoints(dir.join(format!("{s}.kp")))?;
            let desc_path = dir.join(format!("{s}.desc"));
            let descriptors = if desc_path.exists() {
                Some(read_descriptors(&desc_path)?)
            } else {
                None
            };
            map.insert(
                path,
                ImageFeatures {
                    width: kp.width,
                    height: kp.height,
                    keypoints: kp.keypoints,
                    descriptors,
                },
            );
        }
        Ok(Self(map))
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (path, f) in &self.0 {
            let s = stem(path);
            write_keypoints(dir.join(format!("{s}.kp")), f.width, f.height, &f.keypoints)?;
            if let Some(d) = &f.descriptors {
                write_descriptors(dir.join(format!("{s}.desc")), d)?;
            }
        }
        Ok(())
    }

    fn get(&self, path: &Path) -> Result<&ImageFeatures> {
        self.0
            .get(path)
            .with_context(|| format!("no features for {}", path.display()))
    }
}

pub fn evaluate(manifest: &Manifest, features: &Features, eps: f64) -> Result<EvalReport> {
    let mut pairs = Vec::with_capacity(manifest.pairs.len());
    for p in &manifest.pairs {
        let (f1, f2) = (features.get(&p.image1)?, features.get(&p.image2)?);
        let h = Homography::read(&p.homography)?;
        let frame2 = ImageSize {
            width: f2.width,
            height: f2.height,
        };
        pairs.push(
            PairReport::score(
                &p.image1.display().to_string(),
                &p.image2.display().to_string(),
                &f1.keypoints,
                f1.descriptors.as_ref(),
                &f2.keypoints,
                f2.descriptors.as_ref(),
                &h,
                frame2,
                eps,
            )
            .with_context(|| format!("scoring {} / {}", p.image1.display(), p.image2.display()))?,
        );
    }
    Ok(EvalReport::from_pairs(pairs))
}

pub fn report_csv(report: &EvalReport) -> String {
    let mut out =
        String::from("image1,image2,keypoints1,keypoints2,repeatability,matching_score\n");
    for p in &report.pairs {
        let ms = p.matching_score.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.image1, p.image2, p.keypoints1, p.keypoints2, p.repeatability, ms
        );
    }
    out
}

/// Detects once, then re-describes with each layer in `layers`.
/// CSV columns: `layer,repeatability_mean,matching_score_mean`.
pub fn sweep(
    manifest: &Manifest,
    network: &Network,
    cfg: &PipelineConfig,
    layers: &[String],
    eps: f64,
) -> Result<String> {
    for l in layers {
        network.graph().layer_index(l)?;
    }
    let Some(first) = layers.first() else {
        anyhow::bail!("no layers to sweep");
    };
    let cfg = &PipelineConfig {
        describe_layer: first.clone(),
        ..cfg.clone()
    };
    let mut base = Features::compute(manifest, Some(network), cfg)?;
    let mut out = String::from("layer,repeatability_mean,matching_score_mean\n");
    for layer in layers {
        let channels = network.graph().input_channels();
        let updated: Vec<(PathBuf, DescriptorSet)> = base
            .0
            .par_iter()
            .map(|(path, f)| {
                let img = load_image(path, channels)?;
                let (feature, _) = network.forward_to(&img, layer)?;
                let d = describe(
                    &feature,
                    &f.keypoints,
                    (f.height, f.width),
                    cfg.normalize_descriptors,
                )?;
                Ok((path.clone(), d))
            })
            .collect::<Result<_>>()?;
        for (path, d) in updated {
            if let Some(f) = base.0.get_mut(&path) {
                f.descriptors = Some(d);
            }
        }
        let report = evaluate(manifest, &base, eps)?;
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{layer},{},{}",
            fmt(report.repeatability_mean),
            fmt(report.matching_score_mean)
        );
    }
    Ok(out)
}
