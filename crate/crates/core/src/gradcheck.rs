//! Finite-difference verification of every layer VJP and of the saliency backward pass.
//!
//! Errors are reported as `max_j |a_j - n_j| / max(max_j |a_j|, max_j |n_j|)`
//! over the checked input coordinates `j`, with `a` the analytic and `n` the
//! central-difference gradient.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{
    conv2d_forward, conv2d_vjp_input, conv_out_extent, maxpool_forward, maxpool_vjp, relu_forward,
    relu_vjp, ReluMode,
};
use crate::netgraph::{LayerKind, LayerSpec, NetGraph, Network, WeightArchive};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct GradcheckOptions {
    pub seed: u64,
    /// Spatial size `(height, width)` of the probe image.
    pub image_size: (usize, usize),
    pub step: f64,
    pub kernel_tolerance: f64,
    pub saliency_tolerance: f64,
    /// Input coordinates checked per test; all of them when the input is smaller.
    pub max_coordinates: usize,
    /// Layer whose feature map seeds the saliency check; the last layer when `None`.
    pub saliency_layer: Option<String>,
    /// Test hook: the VJP of this layer is scaled by `1 + 1e-3` before comparison.
    pub fault_layer: Option<String>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            image_size: (16, 16),
            step: 1e-6,
            kernel_tolerance: 1e-6,
            saliency_tolerance: 1e-5,
            max_coordinates: 1024,
            saliency_layer: None,
            fault_layer: None,
        }
    }
}

const FAULT_FACTOR: f64 = 1.0 + 1e-3;

#[derive(Clone, Debug, Serialize)]
pub struct LayerCheck {
    pub layer: String,
    pub kind: &'static str,
    pub input_dims: Vec<usize>,
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SaliencyCheck {
    pub layer: String,
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckReport {
    pub layers: Vec<LayerCheck>,
    pub saliency: SaliencyCheck,
    pub passed: bool,
}

impl GradcheckReport {
    /// One line per check.
    pub fn to_text(&self) -> String {
        let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
        let mut out = String::new();
        for l in &self.layers {
            out.push_str(&format!(
                "{:<12} {:<8} max_rel_err={:.3e} ({} coords) {}\n",
                l.layer,
                l.kind,
                l.max_rel_error,
                l.coordinates,
                verdict(l.passed)
            ));
        }
        out.push_str(&format!(
            "{:<12} {:<8} max_rel_err={:.3e} ({} coords) {}\n",
            self.saliency.layer,
            "saliency",
            self.saliency.max_rel_error,
            self.saliency.coordinates,
            verdict(self.saliency.passed)
        ));
        out.push_str(&format!("overall {}\n", verdict(self.passed)));
        out
    }
}

/// `max |a - n| / max(‖a‖∞, ‖n‖∞)`; zero when both vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max);
    let scale = analytic
        .iter()
        .chain(numeric)
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn sample_coordinates(n: usize, max: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    if n > max {
        idx.shuffle(rng);
        idx.truncate(max);
        idx.sort_unstable();
    }
    idx
}

/// Central difference of `f` along each coordinate in `coords`.
fn central_differences(
    x: &Tensor,
    coords: &[usize],
    step: f64,
    f: impl Fn(&Tensor) -> Result<f64> + Sync,
) -> Result<Vec<f64>> {
    coords
        .par_iter()
        .map(|&j| {
            let mut xp = x.clone();
            xp.data_mut()[j] += step;
            let mut xm = x.clone();
            xm.data_mut()[j] -= step;
            Ok((f(&xp)? - f(&xm)?) / (2.0 * step))
        })
        .collect()
}

fn uniform(dims: Vec<usize>, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Result<Tensor> {
    let n = dims.iter().product();
    Tensor::new(dims, (0..n).map(|_| rng.gen_range(lo..hi)).collect())
}

/// Inputs whose layer function is smooth within `step` of every coordinate:
/// bounded away from zero for rectifiers, well-separated values for pools.
fn probe_input(kind: &LayerKind, dims: Vec<usize>, rng: &mut ChaCha8Rng) -> Result<Tensor> {
    match kind {
        LayerKind::Relu => {
            let mut t = uniform(dims, 0.01, 1.0, rng)?;
            t.data_mut().iter_mut().for_each(|v| {
                if rng.gen_bool(0.5) {
                    *v = -*v
                }
            });
            Ok(t)
        }
        LayerKind::MaxPool { .. } => {
            let n: usize = dims.iter().product();
            let mut ranks: Vec<usize> = (0..n).collect();
            ranks.shuffle(rng);
            Tensor::new(
                dims,
                ranks.into_iter().map(|r| r as f64 * 0.01 - 1.0).collect(),
            )
        }
        LayerKind::Conv { .. } => uniform(dims, -1.0, 1.0, rng),
    }
}

fn kind_name(kind: &LayerKind) -> &'static str {
    match kind {
        LayerKind::Conv { .. } => "conv",
        LayerKind::Relu => "relu",
        LayerKind::MaxPool { .. } => "maxpool",
    }
}

/// Checks one layer's VJP at a random input of shape `input_dims`.
pub fn check_layer(
    network: &Network,
    index: usize,
    input_dims: &[usize],
    opts: &GradcheckOptions,
    rng: &mut ChaCha8Rng,
) -> Result<LayerCheck> {
    let spec = &network.graph().layers()[index];
    let x = probe_input(&spec.kind, input_dims.to_vec(), rng)?;
    let params = match spec.kind {
        LayerKind::Conv { .. } => network.archive().conv(&spec.name),
        _ => None,
    };
    let forward = |x: &Tensor| -> Result<Tensor> {
        match spec.kind {
            LayerKind::Conv { stride, pad, .. } => {
                let (w, b) = params.expect("validated network has weights for every conv");
                conv2d_forward(x, w, b, stride, pad)
            }
            LayerKind::Relu => Ok(relu_forward(x)),
            LayerKind::MaxPool { k, stride } => Ok(maxpool_forward(x, k, stride)?.0),
        }
    };
    let y = forward(&x)?;
    let g = uniform(y.dims().to_vec(), -1.0, 1.0, rng)?;
    let mut analytic = match spec.kind {
        LayerKind::Conv { stride, pad, .. } => {
            let (w, _) = params.expect("validated network has weights for every conv");
            conv2d_vjp_input(&g, w, stride, pad, input_dims)?
        }
        LayerKind::Relu => relu_vjp(&g, &x, ReluMode::Mask)?,
        LayerKind::MaxPool { k, stride } => {
            let (_, idx) = maxpool_forward(&x, k, stride)?;
            maxpool_vjp(&g, &idx, input_dims)?
        }
    };
    if opts.fault_layer.as_deref() == Some(spec.name.as_str()) {
        analytic = analytic.scale(FAULT_FACTOR);
    }
    let coords = sample_coordinates(x.len(), opts.max_coordinates, rng);
    let numeric = central_differences(&x, &coords, opts.step, |x| forward(x)?.dot(&g))?;
    let picked: Vec<f64> = coords.iter().map(|&j| analytic.data()[j]).collect();
    let err = relative_error(&picked, &numeric);
    Ok(LayerCheck {
        layer: spec.name.clone(),
        kind: kind_name(&spec.kind),
        input_dims: input_dims.to_vec(),
        coordinates: coords.len(),
        max_rel_error: err,
        passed: err < opts.kernel_tolerance,
    })
}

/// Compares the mask-mode backward pass seeded with `F` against `Jᵀ F`, where
/// each needed column of `J` comes from central differences of the forward pass.
pub fn check_saliency(
    network: &Network,
    image: &Tensor,
    layer: &str,
    opts: &GradcheckOptions,
    rng: &mut ChaCha8Rng,
) -> Result<SaliencyCheck> {
    let (feature, tape) = network.forward_to(image, layer)?;
    let fault = opts.fault_layer.as_deref();
    let analytic =
        network.backward_inspect(&tape, feature.clone(), ReluMode::Mask, |name, g| {
            if Some(name) == fault {
                *g = g.scale(FAULT_FACTOR);
            }
        })?;
    let coords = sample_coordinates(image.len(), opts.max_coordinates, rng);
    let numeric: Vec<f64> = coords
        .par_iter()
        .map(|&j| {
            let mut plus = image.clone();
            plus.data_mut()[j] += opts.step;
            let mut minus = image.clone();
            minus.data_mut()[j] -= opts.step;
            let fp = network.forward_to(&plus, layer)?.0;
            let fm = network.forward_to(&minus, layer)?.0;
            let column: Vec<f64> = fp
                .data()
                .iter()
                .zip(fm.data())
                .map(|(a, b)| (a - b) / (2.0 * opts.step))
                .collect();
            Ok(column.iter().zip(feature.data()).map(|(c, f)| c * f).sum())
        })
        .collect::<Result<_>>()?;
    let picked: Vec<f64> = coords.iter().map(|&j| analytic.data()[j]).collect();
    let err = relative_error(&picked, &numeric);
    Ok(SaliencyCheck {
        layer: layer.to_string(),
        coordinates: coords.len(),
        max_rel_error: err,
        passed: err < opts.saliency_tolerance,
    })
}

/// Runs every per-layer check and the saliency check on `graph` with random weights.
pub fn gradcheck(graph: &NetGraph, opts: &GradcheckOptions) -> Result<GradcheckReport> {
    let archive = WeightArchive::random(graph, opts.seed);
    let network = Network::new(graph.clone(), archive)?;
    gradcheck_network(&network, opts)
}

pub fn gradcheck_network(network: &Network, opts: &GradcheckOptions) -> Result<GradcheckReport> {
    let graph = network.graph();
    let Some(last) = graph.layers().last() else {
        return Err(Error::Config("graph has no layers to check".into()));
    };
    let layer = opts
        .saliency_layer
        .clone()
        .unwrap_or_else(|| last.name.clone());
    let last_index = graph.layer_index(&layer)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
    let (h, w) = opts.image_size;
    let mut dims = vec![graph.input_channels(), h, w];
    let mut layers = Vec::with_capacity(last_index + 1);
    for (i, spec) in graph.layers()[..=last_index].iter().enumerate() {
        layers.push(check_layer(network, i, &dims, opts, &mut rng)?);
        let (c, h, w) = graph.output_dims(&spec.name, opts.image_size.0, opts.image_size.1)?;
        dims = vec![c, h, w];
    }
    let image = uniform(vec![graph.input_channels(), h, w], 0.0, 255.0, &mut rng)?;
    let saliency = check_saliency(network, &image, &layer, opts, &mut rng)?;
    let passed = saliency.passed && layers.iter().all(|l| l.passed);
    Ok(GradcheckReport {
        layers,
        saliency,
        passed,
    })
}

/// A random sequential graph of `1..=max_layers` layers that stays valid for an
/// `h × w` input.
pub fn random_graph(
    seed: u64,
    max_layers: usize,
    input_channels: usize,
    size: (usize, usize),
) -> Result<NetGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_layers.max(1));
    let (mut c, mut h, mut w) = (input_channels, size.0, size.1);
    let mut layers = Vec::with_capacity(n);
    while layers.len() < n {
        let kind = match rng.gen_range(0..3) {
            0 => LayerKind::Conv {
                out_channels: rng.gen_range(1..=4),
                kh: rng.gen_range(1..=3),
                kw: rng.gen_range(1..=3),
                stride: rng.gen_range(1..=2),
                pad: rng.gen_range(0..=1),
            },
            1 => LayerKind::Relu,
            _ => LayerKind::MaxPool {
                k: 2,
                stride: rng.gen_range(1..=2),
            },
        };
        let next = match kind {
            LayerKind::Conv {
                out_channels,
                kh,
                kw,
                stride,
                pad,
            } => conv_out_extent(h, kh, stride, pad)
                .and_then(|nh| Ok((out_channels, nh, conv_out_extent(w, kw, stride, pad)?))),
            LayerKind::MaxPool { k, stride } if k <= h && k <= w => {
                conv_out_extent(h, k, stride, 0)
                    .and_then(|nh| Ok((c, nh, conv_out_extent(w, k, stride, 0)?)))
            }
            LayerKind::MaxPool { .. } => continue,
            LayerKind::Relu => Ok((c, h, w)),
        };
        let Ok((nc, nh, nw)) = next else { continue };
        if nh < 2 || nw < 2 {
            continue;
        }
        (c, h, w) = (nc, nh, nw);
        layers.push(LayerSpec {
            name: format!("l{}", layers.len() + 1),
            kind,
        });
    }
    NetGraph::new(input_channels, vec![0.0], vec![1.0], layers)
}
