//! ELFW weight archives.
//!
//! Little-endian layout:
//!
//! ```text
//! "ELFW"  version:u32 = 1  count:u32
//! per tensor:
//!   name_len:u16  name:utf8  dtype:u8 (0 = f32, 1 = f64)  ndim:u8  dims:u32 × ndim
//!   payload, row-major
//! ```
//!
//! A conv layer `name` is stored as two tensors, `name.weight` (out × in × kh × kw)
//! and `name.bias` (out).

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::{LayerKind, NetGraph};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"ELFW";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    fn code(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::F64 => 1,
        }
    }

    fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightArchive {
    entries: BTreeMap<String, Tensor>,
}

pub fn weight_key(layer: &str) -> String {
    format!("{layer}.weight")
}

pub fn bias_key(layer: &str) -> String {
    format!("{layer}.bias")
}

impl WeightArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Option<Tensor> {
        self.entries.insert(name.into(), tensor)
    }

    /// Adds the weight and bias tensors of a conv layer.
    pub fn insert_conv(&mut self, layer: &str, weight: Tensor, bias: Vec<f64>) -> Result<()> {
        let n = bias.len();
        self.entries.insert(weight_key(layer), weight);
        self.entries
            .insert(bias_key(layer), Tensor::new(vec![n], bias)?);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Weight tensor and bias of conv layer `layer`, if both are present.
    pub fn conv(&self, layer: &str) -> Option<(&Tensor, &[f64])> {
        let w = self.entries.get(&weight_key(layer))?;
        let b = self.entries.get(&bias_key(layer))?;
        Some((w, b.data()))
    }

    /// Checks that every conv layer of `graph` has entries with matching dims.
    pub fn validate(&self, graph: &NetGraph) -> Result<()> {
        for (i, layer) in graph.layers().iter().enumerate() {
            let LayerKind::Conv {
                out_channels,
                kh,
                kw,
                ..
            } = layer.kind
            else {
                continue;
            };
            let expected = [out_channels, graph.layer_input_channels(i), kh, kw];
            let (w, b) = self.conv(&layer.name).ok_or_else(|| {
                Error::WeightMismatch(format!(
                    "no `{}` / `{}` entries for conv layer `{}`",
                    weight_key(&layer.name),
                    bias_key(&layer.name),
                    layer.name
                ))
            })?;
            if w.dims() != expected {
                return Err(Error::WeightMismatch(format!(
                    "layer `{}` expects weight dims {:?}, archive has {:?}",
                    layer.name,
                    expected,
                    w.dims()
                )));
            }
            if b.len() != out_channels {
                return Err(Error::WeightMismatch(format!(
                    "layer `{}` expects {} biases, archive has {}",
                    layer.name,
                    out_channels,
                    b.len()
                )));
            }
        }
        Ok(())
    }

    /// Uniform He-style initialization of every conv layer, reproducible from `seed`.
    pub fn random(graph: &NetGraph, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut archive = Self::new();
        for (i, layer) in graph.layers().iter().enumerate() {
            if let LayerKind::Conv {
                out_channels,
                kh,
                kw,
                ..
            } = layer.kind
            {
                let in_c = graph.layer_input_channels(i);
                let fan_in = (in_c * kh * kw) as f64;
                let bound = (6.0 / fan_in).sqrt();
                let n = out_channels * in_c * kh * kw;
                let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
                let b: Vec<f64> = (0..out_channels)
                    .map(|_| rng.gen_range(-0.1..0.1))
                    .collect();
                let w = Tensor::new(vec![out_channels, in_c, kh, kw], w)
                    .expect("graph extents are positive");
                archive
                    .insert_conv(&layer.name, w, b)
                    .expect("bias length is positive");
            }
        }
        archive
    }

    pub fn to_bytes(&self, dtype: DType) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(
            &u32::try_from(self.entries.len())
                .map_err(too_big)?
                .to_le_bytes(),
        );
        for (name, t) in &self.entries {
            let name_len = u16::try_from(name.len()).map_err(too_big)?;
            out.extend_from_slice(&name_len.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(dtype.code());
            out.push(u8::try_from(t.dims().len()).map_err(too_big)?);
            for &d in t.dims() {
                out.extend_from_slice(&u32::try_from(d).map_err(too_big)?.to_le_bytes());
            }
            match dtype {
                DType::F32 => t
                    .data()
                    .iter()
                    .for_each(|&v| out.extend_from_slice(&(v as f32).to_le_bytes())),
                DType::F64 => t
                    .data()
                    .iter()
                    .for_each(|&v| out.extend_from_slice(&v.to_le_bytes())),
            }
        }
        Ok(out)
    }

    /// Parses a whole archive; any defect rejects the file with no partial result.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic, expected \"ELFW\"".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let count = r.u32()?;
        let mut entries = BTreeMap::new();
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Format("tensor name is not valid UTF-8".into()))?
                .to_string();
            let dtype = match r.u8()? {
                0 => DType::F32,
                1 => DType::F64,
                d => return Err(Error::Format(format!("tensor `{name}`: unknown dtype {d}"))),
            };
            let ndim = r.u8()? as usize;
            if ndim == 0 {
                return Err(Error::Format(format!("tensor `{name}` has no dimensions")));
            }
            let mut dims = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                dims.push(r.u32()? as usize);
            }
            if dims.contains(&0) {
                return Err(Error::Format(format!(
                    "tensor `{name}` has a zero extent in {dims:?}"
                )));
            }
            let count = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::Format(format!("tensor `{name}` dims overflow")))?;
            let payload = count
                .checked_mul(dtype.width())
                .ok_or_else(|| Error::Format(format!("tensor `{name}` dims overflow")))?;
            let raw = r.take(payload)?;
            let data: Vec<f64> = match dtype {
                DType::F32 => raw
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                    .collect(),
                DType::F64 => raw
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            };
            let tensor = Tensor::new(dims, data).map_err(|e| Error::Format(e.to_string()))?;
            if entries.insert(name.clone(), tensor).is_some() {
                return Err(Error::Format(format!("duplicate tensor name `{name}`")));
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after the last tensor",
                bytes.len() - r.pos
            )));
        }
        Ok(Self { entries })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::File {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: impl AsRef<Path>, dtype: DType) -> Result<()> {
        std::fs::write(path, self.to_bytes(dtype)?)?;
        Ok(())
    }
}

fn too_big<E>(_: E) -> Error {
    Error::Format("value does not fit the archive's integer field".into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Format(format!(
                    "truncated archive: needed {n} bytes at offset {}, {} left",
                    self.pos,
                    self.bytes.len() - self.pos
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
