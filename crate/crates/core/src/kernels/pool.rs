use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Flat input index of the element chosen by each max-pool output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolIndices(pub Vec<usize>);

/// Unpadded max pooling with a square `k × k` window.
///
/// Ties resolve to the lowest flat index in the window.
pub fn maxpool_forward(input: &Tensor, k: usize, stride: usize) -> Result<(Tensor, PoolIndices)> {
    let (c, h, w) = input.chw()?;
    if k == 0 || stride == 0 {
        return Err(Error::Shape(
            "pool window and stride must be at least 1".into(),
        ));
    }
    if k > h || k > w {
        return Err(Error::Shape(format!(
            "pool window {k} exceeds input {h} × {w}"
        )));
    }
    let oh = (h - k) / stride + 1;
    let ow = (w - k) / stride + 1;
    let x = input.data();
    let mut values = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ci in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = (ci * h + oy * stride) * w + ox * stride;
                for dy in 0..k {
                    let row = (ci * h + oy * stride + dy) * w + ox * stride;
                    for idx in row..row + k {
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                }
                values.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![c, oh, ow], values)?, PoolIndices(argmax)))
}

/// Scatters each cotangent element onto the input position its window selected.
pub fn maxpool_vjp(
    cotangent: &Tensor,
    indices: &PoolIndices,
    input_dims: &[usize],
) -> Result<Tensor> {
    if cotangent.len() != indices.0.len() {
        return Err(Error::Shape(format!(
            "cotangent has {} elements, pool recorded {} indices",
            cotangent.len(),
            indices.0.len()
        )));
    }
    let mut grad = Tensor::zeros(input_dims.to_vec())?;
    let n = grad.len();
    let g = grad.data_mut();
    for (&idx, &v) in indices.0.iter().zip(cotangent.data()) {
        if idx >= n {
            return Err(Error::Shape(format!(
                "internal error: pool index {idx} outside input of {n} elements"
            )));
        }
        g[idx] += v;
    }
    Ok(grad)
}
