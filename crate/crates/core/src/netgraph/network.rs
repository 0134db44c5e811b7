use super::arch::{LayerKind, NetGraph};
use super::archive::WeightArchive;
use super::saliency::SaliencyMap;
use crate::error::{Error, Result};
use crate::kernels::{
    conv2d_forward, conv2d_vjp_input, maxpool_forward, maxpool_vjp, relu_forward, relu_vjp,
    PoolIndices, ReluMode,
};
use crate::tensor::Tensor;

/// A graph bound to weights that fit it. Immutable and shareable across threads.
#[derive(Clone, Debug)]
pub struct Network {
    graph: NetGraph,
    archive: WeightArchive,
}

/// Values saved by the forward pass for the backward pass.
#[derive(Clone, Debug)]
pub struct Tape {
    image_dims: Vec<usize>,
    steps: Vec<TapeStep>,
}

#[derive(Clone, Debug)]
enum TapeStep {
    Conv {
        layer: usize,
        input_dims: Vec<usize>,
    },
    Relu {
        input: Tensor,
    },
    Pool {
        indices: PoolIndices,
        input_dims: Vec<usize>,
    },
}

impl Tape {
    /// Number of layers the forward pass went through.
    pub fn depth(&self) -> usize {
        self.steps.len()
    }
}

impl Network {
    pub fn new(graph: NetGraph, archive: WeightArchive) -> Result<Self> {
        archive.validate(&graph)?;
        Ok(Self { graph, archive })
    }

    pub fn graph(&self) -> &NetGraph {
        &self.graph
    }

    pub fn archive(&self) -> &WeightArchive {
        &self.archive
    }

    /// Applies the per-channel `(x - mean) * scale` mapping.
    pub fn preprocess(&self, image: &Tensor) -> Result<Tensor> {
        let (c, h, w) = image.chw()?;
        if c != self.graph.input_channels() {
            return Err(Error::Shape(format!(
                "image has {c} channels, network expects {}",
                self.graph.input_channels()
            )));
        }
        let (mean, scale) = (self.graph.mean(), self.graph.scale());
        Tensor::from_fn3(c, h, w, |ci, y, x| {
            (image.at3(ci, y, x) - mean[ci]) * scale[ci]
        })
    }

    /// Runs the network on `image` up to and including layer `layer`.
    pub fn forward_to(&self, image: &Tensor, layer: &str) -> Result<(Tensor, Tape)> {
        let last = self.graph.layer_index(layer)?;
        let mut x = self.preprocess(image)?;
        let mut steps = Vec::with_capacity(last + 1);
        for (i, spec) in self.graph.layers()[..=last].iter().enumerate() {
            match spec.kind {
                LayerKind::Conv { stride, pad, .. } => {
                    let (w, b) = self.conv_params(i)?;
                    let y = conv2d_forward(&x, w, b, stride, pad)?;
                    steps.push(TapeStep::Conv {
                        layer: i,
                        input_dims: x.dims().to_vec(),
                    });
                    x = y;
                }
                LayerKind::Relu => {
                    let y = relu_forward(&x);
                    steps.push(TapeStep::Relu { input: x });
                    x = y;
                }
                LayerKind::MaxPool { k, stride } => {
                    let (y, indices) = maxpool_forward(&x, k, stride)?;
                    steps.push(TapeStep::Pool {
                        indices,
                        input_dims: x.dims().to_vec(),
                    });
                    x = y;
                }
            }
        }
        Ok((
            x,
            Tape {
                image_dims: image.dims().to_vec(),
                steps,
            },
        ))
    }

    /// Pulls `cotangent` (shaped like the taped feature map) back to the raw image.
    pub fn backward(&self, tape: &Tape, cotangent: Tensor, mode: ReluMode) -> Result<Tensor> {
        self.backward_inspect(tape, cotangent, mode, |_, _| {})
    }

    /// [`Network::backward`], calling `hook(layer, grad)` with the gradient
    /// flowing into each layer's input right after that layer's VJP.
    pub fn backward_inspect(
        &self,
        tape: &Tape,
        cotangent: Tensor,
        mode: ReluMode,
        mut hook: impl FnMut(&str, &mut Tensor),
    ) -> Result<Tensor> {
        let mut g = cotangent;
        for (i, step) in tape.steps.iter().enumerate().rev() {
            g = match step {
                TapeStep::Conv { layer, input_dims } => {
                    let LayerKind::Conv { stride, pad, .. } = self.graph.layers()[*layer].kind
                    else {
                        unreachable!("tape records conv steps for conv layers only");
                    };
                    let (w, _) = self.conv_params(*layer)?;
                    conv2d_vjp_input(&g, w, stride, pad, input_dims)?
                }
                TapeStep::Relu { input } => relu_vjp(&g, input, mode)?,
                TapeStep::Pool {
                    indices,
                    input_dims,
                } => maxpool_vjp(&g, indices, input_dims)?,
            };
            hook(&self.graph.layers()[i].name, &mut g);
        }
        if g.dims() != tape.image_dims.as_slice() {
            return Err(Error::Shape(format!(
                "backward pass produced {:?}, image is {:?}",
                g.dims(),
                tape.image_dims
            )));
        }
        let (_, h, w) = g.chw()?;
        let scale = self.graph.scale();
        for (ci, plane) in g.data_mut().chunks_mut(h * w).enumerate() {
            plane.iter_mut().for_each(|v| *v *= scale[ci]);
        }
        Ok(g)
    }

    /// Gradient of `½‖F(image)‖²` with respect to the image, i.e. `J_Fᵀ · F`.
    pub fn feature_gradient(&self, image: &Tensor, layer: &str, mode: ReluMode) -> Result<Tensor> {
        let (feature, tape) = self.forward_to(image, layer)?;
        self.backward(&tape, feature, mode)
    }

    /// Feature-specific saliency of `layer`: `|J_Fᵀ · F|` averaged across image channels.
    pub fn saliency(&self, image: &Tensor, layer: &str, mode: ReluMode) -> Result<SaliencyMap> {
        let grad = self.feature_gradient(image, layer, mode)?;
        SaliencyMap::from_gradient(&grad, layer)
    }

    fn conv_params(&self, index: usize) -> Result<(&Tensor, &[f64])> {
        let name = &self.graph.layers()[index].name;
        self.archive
            .conv(name)
            .ok_or_else(|| Error::WeightMismatch(format!("missing weights for `{name}`")))
    }
}
