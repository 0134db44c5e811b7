mod common;

use common::*;
use elf_core::detector::{
    detect, histogram, kapur_threshold, laplacian_saliency, nms, sobel_saliency, DetectorConfig,
    NmsMetric,
};
use elf_core::kernels::{gaussian_blur, GaussianSpec};
use elf_core::netgraph::SaliencyMap;
use elf_core::{Error, Tensor};
use proptest::prelude::*;
use rand::Rng;

fn map(values: Tensor) -> SaliencyMap {
    SaliencyMap::new(values, "test").unwrap()
}

fn random_histogram(r: &mut rand_chacha::ChaCha8Rng) -> [u64; 256] {
    let mut h = [0u64; 256];
    let style = r.gen_range(0..3);
    for (i, bin) in h.iter_mut().enumerate() {
        *bin = match style {
            0 => r.gen_range(0..1000),
            // Sparse: most bins empty.
            1 => {
                if r.gen_bool(0.05) {
                    r.gen_range(1..50)
                } else {
                    0
                }
            }
            // Peaked around a random centre.
            _ => {
                let c = 128.0;
                (1000.0 * (-((i as f64 - c) / 20.0).powi(2)).exp()) as u64
            }
        };
    }
    if h.iter().filter(|&&v| v > 0).count() < 2 {
        h[3] += 1;
        h[250] += 1;
    }
    h
}

#[test]
fn kapur_matches_brute_force_on_random_histograms() {
    let mut r = rng(11);
    for _ in 0..100 {
        let h = random_histogram(&mut r);
        assert_eq!(Some(kapur_threshold(&h).unwrap()), brute_force_kapur(&h));
    }
}

#[test]
fn kapur_two_delta_takes_lowest_level() {
    let mut h = [0u64; 256];
    h[10] = 40;
    h[200] = 7;
    assert_eq!(kapur_threshold(&h).unwrap(), 11);
}

#[test]
fn kapur_single_bin_is_degenerate() {
    let mut h = [0u64; 256];
    h[77] = 5;
    assert!(matches!(
        kapur_threshold(&h),
        Err(Error::DegenerateHistogram)
    ));
    assert!(matches!(
        kapur_threshold(&[0; 256]),
        Err(Error::DegenerateHistogram)
    ));
}

#[test]
fn histogram_bins_floor_values() {
    let h = histogram(&[0.0, 0.99, 1.0, 254.999, 255.0]);
    assert_eq!((h[0], h[1], h[254], h[255]), (2, 1, 1, 1));
}

fn impulses(w: usize, h: usize, pts: &[(usize, usize, f64)]) -> SaliencyMap {
    let mut t = Tensor::zeros(vec![1, h, w]).unwrap();
    for &(x, y, v) in pts {
        t.data_mut()[y * w + x] = v;
    }
    map(t)
}

#[test]
fn single_impulse_gives_one_keypoint() {
    let d = detect(
        &impulses(100, 100, &[(50, 50, 1.0)]),
        &DetectorConfig::default(),
    )
    .unwrap();
    assert_eq!(d.keypoints.len(), 1);
    assert_eq!((d.keypoints[0].x, d.keypoints[0].y), (50, 50));
}

#[test]
fn close_impulses_are_suppressed() {
    let d = detect(
        &impulses(100, 100, &[(50, 50, 1.0), (55, 50, 1.0)]),
        &DetectorConfig::default(),
    )
    .unwrap();
    assert_eq!(d.keypoints.len(), 1);
}

/// Impulses on a jittered lattice with spacing strictly greater than `min_gap`.
fn planted(r: &mut rand_chacha::ChaCha8Rng, n: usize, min_gap: usize) -> Vec<(usize, usize, f64)> {
    let cell = min_gap + 5;
    let mut cells: Vec<(usize, usize)> = (0..6).flat_map(|i| (0..6).map(move |j| (i, j))).collect();
    for i in (1..cells.len()).rev() {
        cells.swap(i, r.gen_range(0..=i));
    }
    cells
        .into_iter()
        .take(n)
        .map(|(i, j)| {
            (
                20 + i * cell + r.gen_range(0..=2),
                20 + j * cell + r.gen_range(0..=2),
                r.gen_range(0.5..1.0),
            )
        })
        .collect()
}

#[test]
fn planted_impulses_match_sort_filter_oracle() {
    let mut r = rng(12);
    let cfg = DetectorConfig::default();
    for _ in 0..10 {
        let pts = planted(&mut r, 20, 25);
        let (w, h) = (230, 230);
        let m = impulses(w, h, &pts);
        let d = detect(&m, &cfg).unwrap();
        assert_eq!(d.keypoints.len(), 20);
        for &(x, y, _) in &pts {
            assert!(d.keypoints.iter().any(|k| (k.x, k.y) == (x, y)));
        }
        // Oracle on the same thresholded, denoised map.
        let lo = m
            .values()
            .data()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let hi = m
            .values()
            .data()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let gray = m.values().map(|v| (v - lo) / (hi - lo) * 255.0);
        let thr = gaussian_blur(&gray, &cfg.thr_blur).unwrap();
        let level = brute_force_kapur(&histogram(thr.data())).unwrap() as f64;
        let den =
            gaussian_blur(&gray, &cfg.noise_blur)
                .unwrap()
                .map(|v| if v < level { 0.0 } else { v });
        let want = nms_oracle(den.data(), w, h, cfg.w_nms, cfg.b_nms, cfg.max_keypoints);
        let got: Vec<(usize, usize, f64)> =
            d.keypoints.iter().map(|k| (k.x, k.y, k.score)).collect();
        assert_eq!(got, want);
    }
}

#[test]
fn nms_matches_oracle_on_random_maps() {
    let mut r = rng(13);
    for _ in 0..50 {
        let (w, h) = (r.gen_range(25..60), r.gen_range(25..60));
        let data: Vec<f64> = (0..w * h)
            .map(|_| {
                if r.gen_bool(0.3) {
                    0.0
                } else {
                    r.gen_range(0..40) as f64
                }
            })
            .collect();
        let (win, border, max) = (r.gen_range(1..6), r.gen_range(0..6), r.gen_range(1..40));
        let got: Vec<(usize, usize, f64)> =
            nms(&data, w, h, win, border, max, NmsMetric::Chebyshev)
                .into_iter()
                .map(|k| (k.x, k.y, k.score))
                .collect();
        assert_eq!(got, nms_oracle(&data, w, h, win, border, max));
    }
}

#[test]
fn euclidean_window_keeps_diagonal_neighbours() {
    let mut data = vec![0.0; 40 * 40];
    data[20 * 40 + 20] = 2.0;
    data[27 * 40 + 27] = 1.0; // Chebyshev 7, Euclidean ≈ 9.9
    let cheb = nms(&data, 40, 40, 8, 0, 10, NmsMetric::Chebyshev);
    let eucl = nms(&data, 40, 40, 8, 0, 10, NmsMetric::Euclidean);
    assert_eq!(cheb.len(), 1);
    assert_eq!(eucl.len(), 2);
}

#[test]
fn constant_and_zero_maps() {
    let cfg = DetectorConfig::default();
    let zero = detect(&map(Tensor::zeros(vec![1, 40, 40]).unwrap()), &cfg).unwrap();
    assert!(zero.keypoints.is_empty() && !zero.degenerate_histogram);
    let flat = detect(&map(Tensor::filled(vec![1, 40, 40], 3.0).unwrap()), &cfg).unwrap();
    assert!(flat.keypoints.is_empty() && flat.degenerate_histogram);
}

#[test]
fn map_smaller_than_border_band_is_rejected() {
    let cfg = DetectorConfig::default();
    assert!(detect(&map(Tensor::zeros(vec![1, 20, 40]).unwrap()), &cfg).is_err());
}

/// Direct 3 × 3 correlation with mirrored borders.
fn correlate_oracle(img: &[f64], w: usize, h: usize, k: [[f64; 3]; 3]) -> Vec<f64> {
    let refl = |i: isize, n: usize| -> usize {
        if i < 0 {
            (-i) as usize
        } else if i as usize >= n {
            2 * n - 2 - i as usize
        } else {
            i as usize
        }
    };
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (dy, row) in k.iter().enumerate() {
                for (dx, kv) in row.iter().enumerate() {
                    let yy = refl(y as isize + dy as isize - 1, h);
                    let xx = refl(x as isize + dx as isize - 1, w);
                    acc += kv * img[yy * w + xx];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

#[test]
fn gradient_baselines_match_convolution_oracle() {
    let img = random_tensor(vec![3, 11, 13], 0.0, 255.0, &mut rng(14));
    let (h, w) = (11, 13);
    let gray: Vec<f64> = (0..h * w)
        .map(|p| (0..3).map(|c| img.data()[c * h * w + p]).sum::<f64>() / 3.0)
        .collect();
    let gx = correlate_oracle(
        &gray,
        w,
        h,
        [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]],
    );
    let gy = correlate_oracle(
        &gray,
        w,
        h,
        [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]],
    );
    let lap = correlate_oracle(
        &gray,
        w,
        h,
        [[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]],
    );
    let s = sobel_saliency(&img).unwrap();
    let l = laplacian_saliency(&img).unwrap();
    for p in 0..h * w {
        assert!((s.values().data()[p] - (gx[p] * gx[p] + gy[p] * gy[p]).sqrt()).abs() < 1e-9);
        assert!((l.values().data()[p] - lap[p].abs()).abs() < 1e-9);
    }
}

#[test]
fn gradient_baselines_vanish_on_constant_images() {
    let img = Tensor::filled(vec![3, 9, 9], 80.0).unwrap();
    assert!(sobel_saliency(&img)
        .unwrap()
        .values()
        .data()
        .iter()
        .all(|&v| v == 0.0));
    assert!(laplacian_saliency(&img)
        .unwrap()
        .values()
        .data()
        .iter()
        .all(|&v| v == 0.0));
}

fn config_strategy() -> impl Strategy<Value = DetectorConfig> {
    (
        0usize..4,
        0.5f64..6.0,
        0usize..4,
        0.5f64..6.0,
        1usize..12,
        0usize..10,
        1usize..600,
    )
        .prop_map(|(a, sa, b, sb, w, bn, m)| DetectorConfig {
            thr_blur: GaussianSpec::new(2 * a + 1, sa).unwrap(),
            noise_blur: GaussianSpec::new(2 * b + 1, sb).unwrap(),
            w_nms: w,
            b_nms: bn,
            max_keypoints: m,
            nms_metric: NmsMetric::Chebyshev,
        })
}

proptest! {
    #![proptest_config(pt_config(100))]

    #[test]
    fn detection_invariants(cfg in config_strategy(), seed in any::<u64>(), w in 24usize..64, h in 24usize..64) {
        let m = map(random_tensor(vec![1, h, w], 0.0, 1.0, &mut rng(seed)));
        let d = detect(&m, &cfg).unwrap();
        let k = &d.keypoints;
        prop_assert!(k.len() <= cfg.max_keypoints);
        for (i, a) in k.iter().enumerate() {
            prop_assert!(a.x >= cfg.b_nms && a.x + cfg.b_nms < w);
            prop_assert!(a.y >= cfg.b_nms && a.y + cfg.b_nms < h);
            prop_assert!(a.score >= 0.0);
            for b in &k[i + 1..] {
                prop_assert!(a.x.abs_diff(b.x).max(a.y.abs_diff(b.y)) > cfg.w_nms);
                prop_assert!(a.score >= b.score);
            }
        }
    }

    #[test]
    fn detection_is_invariant_to_positive_affine_rescaling(
        seed in any::<u64>(), a in 0.01f64..100.0, b in -50.0f64..50.0
    ) {
        let values = random_tensor(vec![1, 40, 40], 0.0, 1.0, &mut rng(seed));
        let cfg = DetectorConfig::default();
        let d1 = detect(&map(values.clone()), &cfg).unwrap();
        // Shift so every entry stays non-negative.
        let shifted = values.map(|v| a * v + b.abs());
        let d2 = detect(&map(shifted), &cfg).unwrap();
        let p1: Vec<_> = d1.keypoints.iter().map(|k| (k.x, k.y)).collect();
        let p2: Vec<_> = d2.keypoints.iter().map(|k| (k.x, k.y)).collect();
        prop_assert_eq!(p1, p2);
    }

    #[test]
    fn kapur_equals_brute_force(bins in proptest::collection::vec(0u64..50, 256)) {
        let mut h = [0u64; 256];
        h.copy_from_slice(&bins);
        match brute_force_kapur(&h) {
            Some(level) => prop_assert_eq!(kapur_threshold(&h).unwrap(), level),
            None => prop_assert!(kapur_threshold(&h).is_err()),
        }
    }

    #[test]
    fn scores_equal_denoised_map(seed in any::<u64>()) {
        let m = map(random_tensor(vec![1, 48, 48], 0.0, 1.0, &mut rng(seed)));
        let cfg = DetectorConfig::default();
        let d = detect(&m, &cfg).unwrap();
        let lo = m.values().data().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = m.values().data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gray = m.values().map(|v| (v - lo) / (hi - lo) * 255.0);
        let den = gaussian_blur(&gray, &cfg.noise_blur).unwrap();
        for k in &d.keypoints {
            prop_assert_eq!(k.score, den.at3(0, k.y, k.x));
        }
    }
}
