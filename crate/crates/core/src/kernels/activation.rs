use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tensor::Tensor;

/// How the backward pass treats a rectifier.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReluMode {
    /// True derivative: the cotangent is zeroed where the forward input was not positive.
    Mask,
    /// The cotangent passes through unchanged, whatever the sign of the activation.
    #[default]
    Identity,
}

impl std::str::FromStr for ReluMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mask" => Ok(Self::Mask),
            "identity" => Ok(Self::Identity),
            other => Err(format!(
                "unknown relu mode `{other}` (expected mask or identity)"
            )),
        }
    }
}

pub fn relu_forward(input: &Tensor) -> Tensor {
    input.map(|v| if v > 0.0 { v } else { 0.0 })
}

pub fn relu_vjp(cotangent: &Tensor, forward_input: &Tensor, mode: ReluMode) -> Result<Tensor> {
    cotangent.ensure_same_dims(forward_input)?;
    Ok(match mode {
        ReluMode::Identity => cotangent.clone(),
        ReluMode::Mask => {
            let data = cotangent
                .data()
                .iter()
                .zip(forward_input.data())
                .map(|(&g, &x)| if x > 0.0 { g } else { 0.0 })
                .collect();
            Tensor::new(cotangent.dims().to_vec(), data)?
        }
    })
}
