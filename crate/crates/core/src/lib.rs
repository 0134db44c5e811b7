//! Keypoint detection and description from the gradients of pre-trained CNN
//! feature maps, plus the tooling to benchmark detectors under homographies.
//!
//! A detector run goes image → [`netgraph::Network::saliency`] →
//! [`detector::detect`] → [`descriptor::describe`]; [`evalkit`] scores the
//! result against ground-truth homographies.

pub mod config;
pub mod dataset;
pub mod descriptor;
pub mod detector;
pub mod error;
pub mod evalkit;
pub mod gradcheck;
pub mod imageio;
pub mod kernels;
pub mod netgraph;
pub mod pipeline;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
