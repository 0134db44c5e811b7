//! Pipeline configuration files and the bundled meta-parameter presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::kernels::ReluMode;

/// Environment variable naming a directory of `<name>.json` presets that take
/// precedence over the bundled ones.
pub const PRESET_DIR_ENV: &str = "ELF_PRESET_DIR";

pub const PRESETS: &[&str] = &[
    "vgg",
    "alexnet",
    "vgg_robust",
    "vgg_components",
    "sobel",
    "laplacian",
];

fn bundled(name: &str) -> Option<&'static str> {
    Some(match name {
        "vgg" => include_str!("../presets/vgg.json"),
        "alexnet" => include_str!("../presets/alexnet.json"),
        "vgg_robust" => include_str!("../presets/vgg_robust.json"),
        "vgg_components" => include_str!("../presets/vgg_components.json"),
        "sobel" => include_str!("../presets/sobel.json"),
        "laplacian" => include_str!("../presets/laplacian.json"),
        _ => return None,
    })
}

/// Where detection saliency comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SaliencySource {
    /// Feature-map gradient of `detect_layer`.
    #[default]
    Network,
    Sobel,
    Laplacian,
}

impl std::str::FromStr for SaliencySource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "network" => Ok(Self::Network),
            "sobel" => Ok(Self::Sobel),
            "laplacian" => Ok(Self::Laplacian),
            other => Err(format!(
                "unknown saliency source `{other}` (expected network, sobel or laplacian)"
            )),
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Bundled architecture the layer names refer to, if any.
    #[serde(default)]
    pub arch: Option<String>,
    #[serde(default)]
    pub detect_layer: Option<String>,
    pub describe_layer: String,
    #[serde(default)]
    pub saliency: SaliencySource,
    #[serde(default)]
    pub relu_mode: ReluMode,
    #[serde(default = "yes")]
    pub normalize_descriptors: bool,
    #[serde(default)]
    pub detector: DetectorConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        if self.saliency == SaliencySource::Network && self.detect_layer.is_none() {
            return Err(Error::Config(
                "detect_layer is required when saliency comes from the network".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Loads a preset by name, first from `$ELF_PRESET_DIR/<name>.json` when
    /// that file exists, then from the bundled set.
    pub fn preset(name: &str) -> Result<Self> {
        if let Some(dir) = std::env::var_os(PRESET_DIR_ENV) {
            let path = PathBuf::from(dir).join(format!("{name}.json"));
            if path.is_file() {
                return Self::from_file(&path);
            }
        }
        let text = bundled(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown preset `{name}` (bundled: {})",
                PRESETS.join(", ")
            ))
        })?;
        Self::from_json(text)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::File {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        Self::from_json(&text).map_err(|e| Error::File {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }

    /// A path to an existing file, otherwise a preset name.
    pub fn load(spec: &str) -> Result<Self> {
        let path = Path::new(spec);
        if path.is_file() {
            Self::from_file(path)
        } else {
            Self::preset(spec)
        }
    }
}
