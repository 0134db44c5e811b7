//! Line-based description of a sequential CNN.
//!
//! ```text
//! # comment
//! input 3
//! mean 123.675 116.28 103.53
//! scale 0.0171 0.0175 0.0174
//! conv1_1 conv 64 3 3 1 1      # name conv out_channels kh kw stride pad
//! relu1_1 relu
//! pool1 maxpool 2 2            # name maxpool k stride
//! ```
//!
//! `mean` and `scale` are optional (default 0 and 1) and take either one value
//! or one value per input channel. Pixels are mapped to `(x - mean) * scale`
//! before the first layer.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::kernels::conv_out_extent;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv {
        out_channels: usize,
        kh: usize,
        kw: usize,
        stride: usize,
        pad: usize,
    },
    Relu,
    MaxPool {
        k: usize,
        stride: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
}

/// A validated sequential network description.
#[derive(Clone, Debug, PartialEq)]
pub struct NetGraph {
    input_channels: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
    layers: Vec<LayerSpec>,
    /// Channel count entering each layer.
    in_channels: Vec<usize>,
}

const RESERVED: &[&str] = &["input", "mean", "scale"];
const UNSUPPORTED: &[&str] = &[
    "concat",
    "add",
    "residual",
    "split",
    "branch",
    "sepconv",
    "separable",
    "depthwise",
    "dwconv",
];

impl NetGraph {
    /// Builds and validates a graph. `mean` and `scale` must have either one
    /// entry or `input_channels` entries; they are broadcast to per-channel form.
    pub fn new(
        input_channels: usize,
        mean: Vec<f64>,
        scale: Vec<f64>,
        layers: Vec<LayerSpec>,
    ) -> Result<Self> {
        let bad = |msg: String| Error::Parse { line: 0, msg };
        if input_channels == 0 {
            return Err(bad("input channel count must be positive".into()));
        }
        let mean = broadcast(mean, input_channels, "mean").map_err(bad)?;
        let scale = broadcast(scale, input_channels, "scale").map_err(bad)?;
        let mut seen = HashSet::new();
        let mut in_channels = Vec::with_capacity(layers.len());
        let mut channels = input_channels;
        for layer in &layers {
            if !seen.insert(layer.name.as_str()) {
                return Err(bad(format!("duplicate layer name `{}`", layer.name)));
            }
            in_channels.push(channels);
            match layer.kind {
                LayerKind::Conv {
                    out_channels,
                    kh,
                    kw,
                    stride,
                    ..
                } => {
                    if out_channels == 0 || kh == 0 || kw == 0 || stride == 0 {
                        return Err(bad(format!(
                            "conv `{}` needs positive channels, extents and stride",
                            layer.name
                        )));
                    }
                    channels = out_channels;
                }
                LayerKind::MaxPool { k, stride } => {
                    if k == 0 || stride == 0 {
                        return Err(bad(format!(
                            "maxpool `{}` needs positive window and stride",
                            layer.name
                        )));
                    }
                }
                LayerKind::Relu => {}
            }
        }
        Ok(Self {
            input_channels,
            mean,
            scale,
            layers,
            in_channels,
        })
    }

    pub fn input_channels(&self) -> usize {
        self.input_channels
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Number of channels entering layer `index`.
    pub fn layer_input_channels(&self, index: usize) -> usize {
        self.in_channels[index]
    }

    /// Number of channels leaving layer `index`.
    pub fn layer_output_channels(&self, index: usize) -> usize {
        match self.layers[index].kind {
            LayerKind::Conv { out_channels, .. } => out_channels,
            _ => self.in_channels[index],
        }
    }

    pub fn layer_index(&self, name: &str) -> Result<usize> {
        self.layers
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| Error::UnknownLayer(name.to_string()))
    }

    /// Output `(c, h, w)` of layer `name` for an `h × w` input image.
    pub fn output_dims(&self, name: &str, h: usize, w: usize) -> Result<(usize, usize, usize)> {
        let last = self.layer_index(name)?;
        let (mut c, mut h, mut w) = (self.input_channels, h, w);
        for layer in &self.layers[..=last] {
            match layer.kind {
                LayerKind::Conv {
                    out_channels,
                    kh,
                    kw,
                    stride,
                    pad,
                } => {
                    c = out_channels;
                    h = conv_out_extent(h, kh, stride, pad)?;
                    w = conv_out_extent(w, kw, stride, pad)?;
                }
                LayerKind::MaxPool { k, stride } => {
                    h = conv_out_extent(h, k, stride, 0)?;
                    w = conv_out_extent(w, k, stride, 0)?;
                }
                LayerKind::Relu => {}
            }
        }
        Ok((c, h, w))
    }

    /// Serializes back to the text format accepted by [`parse_arch`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "input {}", self.input_channels);
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(out, "mean {}", join(&self.mean));
        let _ = writeln!(out, "scale {}", join(&self.scale));
        for layer in &self.layers {
            let _ = match layer.kind {
                LayerKind::Conv {
                    out_channels,
                    kh,
                    kw,
                    stride,
                    pad,
                } => writeln!(
                    out,
                    "{} conv {out_channels} {kh} {kw} {stride} {pad}",
                    layer.name
                ),
                LayerKind::Relu => writeln!(out, "{} relu", layer.name),
                LayerKind::MaxPool { k, stride } => {
                    writeln!(out, "{} maxpool {k} {stride}", layer.name)
                }
            };
        }
        out
    }
}

fn broadcast(v: Vec<f64>, n: usize, what: &str) -> std::result::Result<Vec<f64>, String> {
    match v.len() {
        1 => Ok(vec![v[0]; n]),
        len if len == n => Ok(v),
        len => Err(format!(
            "{what} has {len} values but the input has {n} channels"
        )),
    }
}

/// Parses the architecture text format described in the module docs.
pub fn parse_arch(text: &str) -> Result<NetGraph> {
    let mut input_channels = None;
    let mut mean: Option<(usize, Vec<f64>)> = None;
    let mut scale: Option<(usize, Vec<f64>)> = None;
    let mut layers = Vec::new();
    let mut names: HashSet<String> = HashSet::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens[0] {
            "input" => {
                if !layers.is_empty() {
                    return Err(err("`input` must precede the first layer".into()));
                }
                if tokens.len() != 2 {
                    return Err(err("expected `input <channels>`".into()));
                }
                let c = parse_usize(tokens[1]).map_err(err)?;
                if c == 0 {
                    return Err(err("input channel count must be positive".into()));
                }
                input_channels = Some(c);
            }
            key @ ("mean" | "scale") => {
                if tokens.len() < 2 {
                    return Err(err(format!("`{key}` needs at least one value")));
                }
                let values = tokens[1..]
                    .iter()
                    .map(|t| {
                        t.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| format!("invalid number `{t}`"))
                    })
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(err)?;
                if key == "mean" {
                    mean = Some((line_no, values));
                } else {
                    scale = Some((line_no, values));
                }
            }
            name => {
                if tokens.len() < 2 {
                    return Err(err(format!("layer `{name}` has no kind")));
                }
                if input_channels.is_none() {
                    return Err(err("`input <channels>` must precede the first layer".into()));
                }
                if !names.insert(name.to_string()) {
                    return Err(err(format!("duplicate layer name `{name}`")));
                }
                let kind = parse_kind(tokens[1], &tokens[2..]).map_err(err)?;
                layers.push(LayerSpec {
                    name: name.to_string(),
                    kind,
                });
            }
        }
    }

    let input_channels = input_channels.ok_or(Error::Parse {
        line: text.lines().count().max(1),
        msg: "missing `input <channels>` line".into(),
    })?;
    let (mean_line, mean) = mean.unwrap_or((0, vec![0.0]));
    let (scale_line, scale) = scale.unwrap_or((0, vec![1.0]));
    if scale.contains(&0.0) {
        return Err(Error::Parse {
            line: scale_line,
            msg: "scale must be non-zero".into(),
        });
    }
    let mean = broadcast(mean, input_channels, "mean").map_err(|msg| Error::Parse {
        line: mean_line,
        msg: format!("channel mismatch: {msg}"),
    })?;
    let scale = broadcast(scale, input_channels, "scale").map_err(|msg| Error::Parse {
        line: scale_line,
        msg: format!("channel mismatch: {msg}"),
    })?;
    NetGraph::new(input_channels, mean, scale, layers)
}

fn parse_usize(t: &str) -> std::result::Result<usize, String> {
    t.parse::<usize>()
        .map_err(|_| format!("expected a non-negative integer, got `{t}`"))
}

fn parse_kind(kind: &str, params: &[&str]) -> std::result::Result<LayerKind, String> {
    let nums = |n: usize| -> std::result::Result<Vec<usize>, String> {
        if params.len() != n {
            return Err(format!(
                "`{kind}` takes {n} parameters, got {}",
                params.len()
            ));
        }
        params.iter().map(|p| parse_usize(p)).collect()
    };
    match kind {
        "conv" => {
            let p = nums(5)?;
            if p[0] == 0 || p[1] == 0 || p[2] == 0 {
                return Err("conv channels and kernel extents must be positive".into());
            }
            if p[3] == 0 {
                return Err("conv stride must be at least 1".into());
            }
            Ok(LayerKind::Conv {
                out_channels: p[0],
                kh: p[1],
                kw: p[2],
                stride: p[3],
                pad: p[4],
            })
        }
        "relu" => {
            nums(0)?;
            Ok(LayerKind::Relu)
        }
        "maxpool" => {
            let p = nums(2)?;
            if p[0] == 0 || p[1] == 0 {
                return Err("maxpool window and stride must be at least 1".into());
            }
            Ok(LayerKind::MaxPool {
                k: p[0],
                stride: p[1],
            })
        }
        k if RESERVED.contains(&k) => Err(format!("`{k}` is a header keyword, not a layer kind")),
        k if UNSUPPORTED.contains(&k) => Err(format!(
            "`{k}` layers are not supported: only sequential conv/relu/maxpool chains are"
        )),
        k => Err(format!("unknown layer kind `{k}`")),
    }
}
