//! Sequential CNN description, weight archives, and the feature-gradient saliency.

mod arch;
mod archive;
mod network;
mod saliency;

pub use arch::{parse_arch, LayerKind, LayerSpec, NetGraph};
pub use archive::{bias_key, weight_key, DType, WeightArchive, MAGIC, VERSION};
pub use network::{Network, Tape};
pub use saliency::SaliencyMap;

/// Architecture files bundled with the crate, by name.
pub fn preset_arch(name: &str) -> Option<&'static str> {
    match name {
        "vgg16" => Some(include_str!("../../presets/vgg16.arch")),
        "alexnet" => Some(include_str!("../../presets/alexnet.arch")),
        "tiny" => Some(include_str!("../../presets/tiny.arch")),
        _ => None,
    }
}

pub const PRESET_ARCHS: &[&str] = &["vgg16", "alexnet", "tiny"];
