use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Gaussian kernel given as (odd kernel width, standard deviation), both in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(usize, f64)", into = "(usize, f64)")]
pub struct GaussianSpec {
    size: usize,
    sigma: f64,
}

impl GaussianSpec {
    pub fn new(size: usize, sigma: f64) -> Result<Self> {
        if size == 0 || size.is_multiple_of(2) {
            return Err(Error::InvalidGaussian(format!(
                "kernel size must be odd and positive, got {size}"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidGaussian(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self { size, sigma })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Normalized 1-d taps, `k(i) ∝ exp(-(i - c)² / 2σ²)` with `c = (size - 1) / 2`.
    pub fn kernel(&self) -> Vec<f64> {
        let c = (self.size / 2) as f64;
        let denom = 2.0 * self.sigma * self.sigma;
        let mut k: Vec<f64> = (0..self.size)
            .map(|i| {
                let d = i as f64 - c;
                (-d * d / denom).exp()
            })
            .collect();
        // Sum symmetric pairs so both halves see identical rounding.
        let r = self.size / 2;
        let mut total = k[r];
        for i in 0..r {
            total += k[i] + k[self.size - 1 - i];
        }
        for v in &mut k {
            *v /= total;
        }
        k
    }
}

impl TryFrom<(usize, f64)> for GaussianSpec {
    type Error = Error;

    fn try_from((size, sigma): (usize, f64)) -> Result<Self> {
        Self::new(size, sigma)
    }
}

impl From<GaussianSpec> for (usize, f64) {
    fn from(g: GaussianSpec) -> Self {
        (g.size, g.sigma)
    }
}

/// Mirror an out-of-range index back into `0..n` without repeating the edge sample
/// (`-1 → 1`, `n → n - 2`).
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let period = 2 * (n - 1);
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - m;
    }
    m as usize
}

/// Separable Gaussian blur of every channel, reflect borders.
pub fn gaussian_blur(map: &Tensor, spec: &GaussianSpec) -> Result<Tensor> {
    let (c, h, w) = map.chw()?;
    if spec.size == 1 {
        return Ok(map.clone());
    }
    let k = spec.kernel();
    let r = (spec.size / 2) as isize;
    let mut tmp = vec![0.0; h * w];
    let mut out = Vec::with_capacity(c * h * w);
    for ci in 0..c {
        let src = map.plane(ci);
        for y in 0..h {
            let row = &src[y * w..(y + 1) * w];
            for x in 0..w {
                let mut acc = 0.0;
                for (j, &kv) in k.iter().enumerate() {
                    acc += kv * row[reflect_index(x as isize + j as isize - r, w)];
                }
                tmp[y * w + x] = acc;
            }
        }
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, &kv) in k.iter().enumerate() {
                    acc += kv * tmp[reflect_index(y as isize + j as isize - r, h) * w + x];
                }
                out.push(acc);
            }
        }
    }
    Tensor::new(vec![c, h, w], out)
}
