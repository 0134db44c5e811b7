//! Image-gradient saliencies used as baselines for the feature gradient.

use crate::error::Result;
use crate::kernels::reflect_index;
use crate::netgraph::SaliencyMap;
use crate::tensor::Tensor;

const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
const LAPLACIAN: [[f64; 3]; 3] = [[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]];

/// Channel mean as a `1 × h × w` tensor.
pub fn grayscale(image: &Tensor) -> Result<Tensor> {
    let (c, h, w) = image.chw()?;
    let inv = 1.0 / c as f64;
    Tensor::from_fn3(1, h, w, |_, y, x| {
        (0..c).map(|ci| image.at3(ci, y, x)).sum::<f64>() * inv
    })
}

fn correlate3(gray: &Tensor, k: &[[f64; 3]; 3]) -> Vec<f64> {
    let (h, w) = (gray.dims()[1], gray.dims()[2]);
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (dy, row) in k.iter().enumerate() {
                let yy = reflect_index(y as isize + dy as isize - 1, h);
                for (dx, &kv) in row.iter().enumerate() {
                    let xx = reflect_index(x as isize + dx as isize - 1, w);
                    acc += kv * gray.at3(0, yy, xx);
                }
            }
            out.push(acc);
        }
    }
    out
}

/// Sobel gradient magnitude of the grayscale image.
pub fn sobel_saliency(image: &Tensor) -> Result<SaliencyMap> {
    let gray = grayscale(image)?;
    let gx = correlate3(&gray, &SOBEL_X);
    let gy = correlate3(&gray, &SOBEL_Y);
    let mag = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
    SaliencyMap::new(Tensor::new(gray.dims().to_vec(), mag)?, "sobel")
}

/// Absolute 4-neighbour Laplacian of the grayscale image.
pub fn laplacian_saliency(image: &Tensor) -> Result<SaliencyMap> {
    let gray = grayscale(image)?;
    let lap = correlate3(&gray, &LAPLACIAN)
        .into_iter()
        .map(f64::abs)
        .collect();
    SaliencyMap::new(Tensor::new(gray.dims().to_vec(), lap)?, "laplacian")
}
