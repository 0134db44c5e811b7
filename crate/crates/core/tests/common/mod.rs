//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use elf_core::detector::Keypoint;
use elf_core::netgraph::{parse_arch, LayerKind, NetGraph, Network, WeightArchive};
use elf_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(dims: Vec<usize>, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n = dims.iter().product();
    Tensor::new(dims, (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// `max |a - b| / max(‖a‖∞, ‖b‖∞)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let scale = a.iter().chain(b).map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Direct nested-loop cross-correlation with zero padding.
pub fn naive_conv(x: &Tensor, w: &Tensor, b: &[f64], stride: usize, pad: usize) -> Tensor {
    let (c, h, wd) = (x.dims()[0], x.dims()[1], x.dims()[2]);
    let (oc, kh, kw) = (w.dims()[0], w.dims()[2], w.dims()[3]);
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (wd + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0; oc * oh * ow];
    for o in 0..oc {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = b[o];
                for ci in 0..c {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                continue;
                            }
                            let wv = w.data()[((o * c + ci) * kh + ky) * kw + kx];
                            acc += wv * x.data()[(ci * h + iy as usize) * wd + ix as usize];
                        }
                    }
                }
                out[(o * oh + oy) * ow + ox] = acc;
            }
        }
    }
    Tensor::new(vec![oc, oh, ow], out).unwrap()
}

/// Window scan returning maxima and the flat input index of the first maximum.
pub fn naive_maxpool(x: &Tensor, k: usize, stride: usize) -> (Tensor, Vec<usize>) {
    let (c, h, w) = (x.dims()[0], x.dims()[1], x.dims()[2]);
    let (oh, ow) = ((h - k) / stride + 1, (w - k) / stride + 1);
    let mut vals = Vec::new();
    let mut idx = Vec::new();
    for ci in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = (f64::NEG_INFINITY, usize::MAX);
                for dy in 0..k {
                    for dx in 0..k {
                        let i = (ci * h + oy * stride + dy) * w + ox * stride + dx;
                        let v = x.data()[i];
                        if v > best.0 || (v == best.0 && i < best.1) {
                            best = (v, i);
                        }
                    }
                }
                vals.push(best.0);
                idx.push(best.1);
            }
        }
    }
    (Tensor::new(vec![c, oh, ow], vals).unwrap(), idx)
}

/// Central differences of a scalar function along every coordinate.
pub fn fd_gradient(x: &Tensor, step: f64, f: impl Fn(&Tensor) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let mut p = x.clone();
            p.data_mut()[j] += step;
            let mut m = x.clone();
            m.data_mut()[j] -= step;
            (f(&p) - f(&m)) / (2.0 * step)
        })
        .collect()
}

pub fn inner(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Maximum-entropy level by evaluating `H(A) + H(B)` at every split.
pub fn brute_force_kapur(hist: &[u64; 256]) -> Option<usize> {
    let entropy = |bins: &[u64]| {
        let total: u64 = bins.iter().sum();
        let mut h = 0.0;
        for &f in bins {
            if f > 0 {
                let p = f as f64 / total as f64;
                h -= p * p.ln();
            }
        }
        (total, h)
    };
    let mut best: Option<(usize, f64)> = None;
    for s in 1..256 {
        let (na, ha) = entropy(&hist[..s]);
        let (nb, hb) = entropy(&hist[s..]);
        if na == 0 || nb == 0 {
            continue;
        }
        let score = ha + hb;
        match best {
            Some((_, b)) if score <= b => {}
            _ => best = Some((s, score)),
        }
    }
    best.map(|b| b.0)
}

/// Sort every interior positive pixel by (value desc, index asc) and keep
/// those farther than `window` (Chebyshev) from all kept ones.
pub fn nms_oracle(
    map: &[f64],
    width: usize,
    height: usize,
    window: usize,
    border: usize,
    max: usize,
) -> Vec<(usize, usize, f64)> {
    let mut px: Vec<(f64, usize)> = map
        .iter()
        .enumerate()
        .filter(|&(i, &v)| {
            let (x, y) = (i % width, i / width);
            v > 0.0 && x >= border && y >= border && x + border < width && y + border < height
        })
        .map(|(i, &v)| (v, i))
        .collect();
    px.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut kept: Vec<(usize, usize, f64)> = Vec::new();
    for (v, i) in px {
        if kept.len() == max {
            break;
        }
        let (x, y) = (i % width, i / width);
        if kept
            .iter()
            .all(|&(kx, ky, _)| x.abs_diff(kx).max(y.abs_diff(ky)) > window)
        {
            kept.push((x, y, v));
        }
    }
    kept
}

/// Greedy matcher that materializes and sorts all edges.
pub fn edge_sort_match(
    n_a: usize,
    n_b: usize,
    weight: impl Fn(usize, usize) -> f64,
) -> Vec<(usize, usize, f64)> {
    let mut edges: Vec<(f64, usize, usize)> = (0..n_a)
        .flat_map(|a| (0..n_b).map(move |b| (a, b)))
        .map(|(a, b)| (weight(a, b), a, b))
        .collect();
    edges.sort_by(|x, y| {
        x.0.partial_cmp(&y.0)
            .unwrap()
            .then(x.1.cmp(&y.1))
            .then(x.2.cmp(&y.2))
    });
    let (mut used_a, mut used_b) = (vec![false; n_a], vec![false; n_b]);
    let mut out = Vec::new();
    for (w, a, b) in edges {
        if !used_a[a] && !used_b[b] {
            used_a[a] = true;
            used_b[b] = true;
            out.push((a, b, w));
        }
    }
    out
}

pub fn kp(x: usize, y: usize) -> Keypoint {
    Keypoint { x, y, score: 1.0 }
}

pub fn mat_mul(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                m[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    m
}

pub fn mat_apply(m: [[f64; 3]; 3], x: f64, y: f64) -> (f64, f64) {
    let w = m[2][0] * x + m[2][1] * y + m[2][2];
    (
        (m[0][0] * x + m[0][1] * y + m[0][2]) / w,
        (m[1][0] * x + m[1][1] * y + m[1][2]) / w,
    )
}

/// Grid of bright squares on a dark background, with every square corner.
pub struct SquareGrid {
    pub image: Tensor,
    pub corners: Vec<(usize, usize)>,
}

pub fn square_grid(rows: usize, cols: usize, side: usize, gap: usize, margin: usize) -> SquareGrid {
    let w = 2 * margin + cols * side + (cols - 1) * gap;
    let h = 2 * margin + rows * side + (rows - 1) * gap;
    let mut corners = Vec::new();
    let mut data = vec![50.0; w * h];
    for r in 0..rows {
        for c in 0..cols {
            let (x0, y0) = (margin + c * (side + gap), margin + r * (side + gap));
            for y in y0..y0 + side {
                for x in x0..x0 + side {
                    data[y * w + x] = 200.0;
                }
            }
            let (x1, y1) = (x0 + side - 1, y0 + side - 1);
            corners.extend([(x0, y0), (x1, y0), (x0, y1), (x1, y1)]);
        }
    }
    SquareGrid {
        image: Tensor::new(vec![1, h, w], data).unwrap(),
        corners,
    }
}

/// Horizontal then vertical Sobel derivative: their composition is the mixed
/// derivative, which responds at corners and vanishes along straight edges.
pub fn edge_filter_network() -> Network {
    let graph = parse_arch("input 1\ndx conv 1 3 3 1 1\ndy conv 1 3 3 1 1\n").unwrap();
    let sobel_x = vec![-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0];
    let sobel_y = vec![-1.0, -2.0, -1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0];
    let mut a = WeightArchive::new();
    a.insert_conv(
        "dx",
        Tensor::new(vec![1, 1, 3, 3], sobel_x).unwrap(),
        vec![0.0],
    )
    .unwrap();
    a.insert_conv(
        "dy",
        Tensor::new(vec![1, 1, 3, 3], sobel_y).unwrap(),
        vec![0.0],
    )
    .unwrap();
    Network::new(graph, a).unwrap()
}

/// Fraction of `truth` points with a detection within `radius` pixels.
pub fn recall(truth: &[(usize, usize)], found: &[Keypoint], radius: f64) -> f64 {
    let hit = truth
        .iter()
        .filter(|&&(x, y)| {
            found.iter().any(|k| {
                let (dx, dy) = (k.x as f64 - x as f64, k.y as f64 - y as f64);
                (dx * dx + dy * dy).sqrt() <= radius
            })
        })
        .count();
    hit as f64 / truth.len() as f64
}

/// Property-test settings with a fixed seed so runs are reproducible.
pub fn pt_config(cases: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..Default::default()
    }
}

/// Layer-by-layer forward pass written against the reference kernels.
pub fn composed_forward(g: &NetGraph, a: &WeightArchive, image: &Tensor, last: &str) -> Tensor {
    let (c, h, w) = image.chw().unwrap();
    let mut x = Tensor::from_fn3(c, h, w, |ci, y, xx| {
        (image.at3(ci, y, xx) - g.mean()[ci]) * g.scale()[ci]
    })
    .unwrap();
    for l in g.layers() {
        x = match l.kind {
            LayerKind::Conv { stride, pad, .. } => {
                let (wt, b) = a.conv(&l.name).unwrap();
                naive_conv(&x, wt, b, stride, pad)
            }
            LayerKind::Relu => x.map(|v| v.max(0.0)),
            LayerKind::MaxPool { k, stride } => naive_maxpool(&x, k, stride).0,
        };
        if l.name == last {
            break;
        }
    }
    x
}

/// `|Jᵀ F|` channel mean, with J assembled column by column from central differences.
pub fn explicit_jacobian_saliency(net: &Network, img: &Tensor, layer: &str) -> Vec<f64> {
    let (g, a) = (net.graph(), net.archive());
    let f = composed_forward(g, a, img, layer);
    let h = 1e-6;
    let grad: Vec<f64> = (0..img.len())
        .map(|j| {
            let mut p = img.clone();
            p.data_mut()[j] += h;
            let mut m = img.clone();
            m.data_mut()[j] -= h;
            let fp = composed_forward(g, a, &p, layer);
            let fm = composed_forward(g, a, &m, layer);
            (0..f.len())
                .map(|k| (fp.data()[k] - fm.data()[k]) / (2.0 * h) * f.data()[k])
                .sum()
        })
        .collect();
    let (c, hh, w) = img.chw().unwrap();
    (0..hh * w)
        .map(|p| (0..c).map(|ci| grad[ci * hh * w + p].abs()).sum::<f64>() / c as f64)
        .collect()
}

/// ReLU signs and max-pool argmaxes along the forward pass up to `last`.
pub fn activation_pattern(
    g: &NetGraph,
    a: &WeightArchive,
    image: &Tensor,
    last: &str,
) -> Vec<usize> {
    let (c, h, w) = image.chw().unwrap();
    let mut x = Tensor::from_fn3(c, h, w, |ci, y, xx| {
        (image.at3(ci, y, xx) - g.mean()[ci]) * g.scale()[ci]
    })
    .unwrap();
    let mut pattern = Vec::new();
    for l in g.layers() {
        x = match l.kind {
            LayerKind::Conv { stride, pad, .. } => {
                let (wt, b) = a.conv(&l.name).unwrap();
                naive_conv(&x, wt, b, stride, pad)
            }
            LayerKind::Relu => {
                pattern.extend(x.data().iter().map(|&v| usize::from(v > 0.0)));
                x.map(|v| v.max(0.0))
            }
            LayerKind::MaxPool { k, stride } => {
                let (y, idx) = naive_maxpool(&x, k, stride);
                pattern.extend(idx);
                y
            }
        };
        if l.name == last {
            break;
        }
    }
    pattern
}

/// True when no central-difference probe of size `step` crosses a kink.
pub fn pattern_stable(
    g: &NetGraph,
    a: &WeightArchive,
    image: &Tensor,
    last: &str,
    step: f64,
) -> bool {
    let base = activation_pattern(g, a, image, last);
    (0..image.len()).all(|j| {
        [step, -step].iter().all(|d| {
            let mut p = image.clone();
            p.data_mut()[j] += d;
            activation_pattern(g, a, &p, last) == base
        })
    })
}
