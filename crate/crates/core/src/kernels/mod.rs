//! Forward kernels and their input vector-Jacobian products.

mod activation;
mod blur;
mod conv;
mod pool;

pub use activation::{relu_forward, relu_vjp, ReluMode};
pub use blur::{gaussian_blur, reflect_index, GaussianSpec};
pub use conv::{conv2d_forward, conv2d_vjp_input, conv_out_extent};
pub use pool::{maxpool_forward, maxpool_vjp, PoolIndices};
