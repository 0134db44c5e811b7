mod common;

use common::*;
use elf_core::kernels::{
    conv2d_forward, conv2d_vjp_input, gaussian_blur, maxpool_forward, maxpool_vjp, relu_forward,
    relu_vjp, GaussianSpec, ReluMode,
};
use elf_core::Tensor;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn conv_matches_direct_loops() {
    let mut r = rng(1);
    let x = random_tensor(vec![3, 8, 8], -1.0, 1.0, &mut r);
    let w = random_tensor(vec![4, 3, 3, 3], -1.0, 1.0, &mut r);
    let b: Vec<f64> = (0..4).map(|_| r.gen_range(-1.0..1.0)).collect();
    for pad in 0..=1 {
        let got = conv2d_forward(&x, &w, &b, 2, pad).unwrap();
        let want = naive_conv(&x, &w, &b, 2, pad);
        assert_eq!(got.dims(), want.dims());
        for (g, o) in got.data().iter().zip(want.data()) {
            assert!((g - o).abs() < 1e-12, "{g} vs {o}");
        }
    }
}

#[test]
fn conv_vjp_matches_finite_differences() {
    let mut r = rng(2);
    for (stride, pad, kh, kw) in [(1, 1, 3, 3), (2, 0, 3, 2), (2, 1, 1, 1), (1, 0, 2, 3)] {
        let x = random_tensor(vec![2, 7, 6], -1.0, 1.0, &mut r);
        let w = random_tensor(vec![3, 2, kh, kw], -1.0, 1.0, &mut r);
        let b = vec![0.3, -0.2, 0.1];
        let y = conv2d_forward(&x, &w, &b, stride, pad).unwrap();
        let g = random_tensor(y.dims().to_vec(), -1.0, 1.0, &mut r);
        let analytic = conv2d_vjp_input(&g, &w, stride, pad, x.dims()).unwrap();
        let numeric = fd_gradient(&x, 1e-6, |x| inner(&g, &naive_conv(x, &w, &b, stride, pad)));
        let e = rel_err(analytic.data(), &numeric);
        assert!(e < 1e-6, "stride {stride} pad {pad}: {e}");
    }
}

#[test]
fn relu_matches_elementwise_oracle() {
    let x = random_tensor(vec![2, 5, 5], -2.0, 2.0, &mut rng(3));
    let y = relu_forward(&x);
    for (a, b) in y.data().iter().zip(x.data()) {
        assert_eq!(*a, if *b > 0.0 { *b } else { 0.0 });
    }
    assert_eq!(
        relu_forward(&Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap()).data(),
        &[0.0, 0.0, 2.0]
    );
}

#[test]
fn relu_mask_vjp_matches_finite_differences() {
    let mut r = rng(4);
    let mut x = random_tensor(vec![3, 6, 6], -1.0, 1.0, &mut r);
    // Keep every coordinate away from the kink.
    x.data_mut().iter_mut().for_each(|v| {
        if v.abs() < 1e-3 {
            *v = 0.5
        }
    });
    let g = random_tensor(vec![3, 6, 6], -1.0, 1.0, &mut r);
    let analytic = relu_vjp(&g, &x, ReluMode::Mask).unwrap();
    let numeric = fd_gradient(&x, 1e-6, |x| inner(&g, &x.map(|v| v.max(0.0))));
    assert!(rel_err(analytic.data(), &numeric) < 1e-6);
    assert_eq!(relu_vjp(&g, &x, ReluMode::Identity).unwrap(), g);
}

#[test]
fn maxpool_matches_window_scan() {
    let mut r = rng(5);
    for (k, stride) in [(2, 2), (3, 2), (2, 1), (3, 3)] {
        let x = random_tensor(vec![1, 6, 6], -1.0, 1.0, &mut r);
        let (y, idx) = maxpool_forward(&x, k, stride).unwrap();
        let (want, want_idx) = naive_maxpool(&x, k, stride);
        assert_eq!(y, want);
        assert_eq!(idx.0, want_idx);
    }
}

#[test]
fn maxpool_ties_take_first_index() {
    let x = Tensor::filled(vec![1, 2, 2], 7.0).unwrap();
    let (y, idx) = maxpool_forward(&x, 2, 2).unwrap();
    assert_eq!(y.data(), &[7.0]);
    assert_eq!(idx.0, vec![0]);
    let x = Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(maxpool_forward(&x, 2, 2).unwrap().1 .0, vec![3]);
}

#[test]
fn maxpool_vjp_matches_finite_differences() {
    let mut r = rng(6);
    for (k, stride) in [(2, 2), (3, 2), (2, 1)] {
        // Distinct values at least 0.01 apart.
        let mut vals: Vec<f64> = (0..2 * 7 * 7).map(|i| i as f64 * 0.01).collect();
        for i in (1..vals.len()).rev() {
            vals.swap(i, r.gen_range(0..=i));
        }
        let x = Tensor::new(vec![2, 7, 7], vals).unwrap();
        let (y, idx) = maxpool_forward(&x, k, stride).unwrap();
        let g = random_tensor(y.dims().to_vec(), -1.0, 1.0, &mut r);
        let analytic = maxpool_vjp(&g, &idx, x.dims()).unwrap();
        let numeric = fd_gradient(&x, 1e-6, |x| inner(&g, &naive_maxpool(x, k, stride).0));
        assert!(rel_err(analytic.data(), &numeric) < 1e-6);
    }
}

#[test]
fn blur_impulse_is_kernel_outer_product() {
    let spec = GaussianSpec::new(5, 1.0).unwrap();
    let mut m = Tensor::zeros(vec![1, 9, 9]).unwrap();
    m.data_mut()[4 * 9 + 4] = 1.0;
    let out = gaussian_blur(&m, &spec).unwrap();
    // Tabulate the kernel directly.
    let raw: Vec<f64> = (0..5)
        .map(|i| (-((i as f64 - 2.0).powi(2)) / 2.0).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    let k: Vec<f64> = raw.iter().map(|v| v / total).collect();
    for y in 0..9 {
        for x in 0..9 {
            let want = if (2..7).contains(&y) && (2..7).contains(&x) {
                k[y - 2] * k[x - 2]
            } else {
                0.0
            };
            assert!((out.at3(0, y, x) - want).abs() < 1e-15);
        }
    }
}

#[test]
fn blur_identity_cases() {
    let m = random_tensor(vec![1, 6, 7], 0.0, 255.0, &mut rng(7));
    assert_eq!(
        gaussian_blur(&m, &GaussianSpec::new(1, 3.0).unwrap()).unwrap(),
        m
    );
    let c = Tensor::filled(vec![1, 6, 7], 42.0).unwrap();
    let out = gaussian_blur(&c, &GaussianSpec::new(17, 6.0).unwrap()).unwrap();
    assert!(out.data().iter().all(|v| (v - 42.0).abs() < 1e-12));
}

fn dims_strategy() -> impl Strategy<Value = (usize, usize, usize, usize, usize, usize, usize)> {
    // (c, h, w, out, k, stride, pad)
    (
        1usize..4,
        3usize..9,
        3usize..9,
        1usize..4,
        1usize..4,
        1usize..3,
        0usize..2,
    )
        .prop_filter("window fits", |&(_, h, w, _, k, _, p)| {
            k <= h + 2 * p && k <= w + 2 * p
        })
}

proptest! {
    #![proptest_config(pt_config(48))]

    #[test]
    fn conv_vjp_passes_central_differences(d in dims_strategy(), seed in any::<u64>()) {
        let (c, h, w, o, k, s, p) = d;
        let mut r = rng(seed);
        let x = random_tensor(vec![c, h, w], -1.0, 1.0, &mut r);
        let wt = random_tensor(vec![o, c, k, k], -1.0, 1.0, &mut r);
        let b = vec![0.0; o];
        let y = conv2d_forward(&x, &wt, &b, s, p).unwrap();
        let g = random_tensor(y.dims().to_vec(), -1.0, 1.0, &mut r);
        let analytic = conv2d_vjp_input(&g, &wt, s, p, x.dims()).unwrap();
        let numeric = fd_gradient(&x, 1e-6, |x| inner(&g, &conv2d_forward(x, &wt, &b, s, p).unwrap()));
        prop_assert!(rel_err(analytic.data(), &numeric) < 1e-6);
    }

    #[test]
    fn conv_is_linear(d in dims_strategy(), seed in any::<u64>(), a in -3.0f64..3.0, bb in -3.0f64..3.0) {
        let (c, h, w, o, k, s, p) = d;
        let mut r = rng(seed);
        let x = random_tensor(vec![c, h, w], -1.0, 1.0, &mut r);
        let y = random_tensor(vec![c, h, w], -1.0, 1.0, &mut r);
        let wt = random_tensor(vec![o, c, k, k], -1.0, 1.0, &mut r);
        let zero = vec![0.0; o];
        let mix = Tensor::new(
            x.dims().to_vec(),
            x.data().iter().zip(y.data()).map(|(u, v)| a * u + bb * v).collect(),
        ).unwrap();
        let lhs = conv2d_forward(&mix, &wt, &zero, s, p).unwrap();
        let fx = conv2d_forward(&x, &wt, &zero, s, p).unwrap();
        let fy = conv2d_forward(&y, &wt, &zero, s, p).unwrap();
        for i in 0..lhs.len() {
            let rhs = a * fx.data()[i] + bb * fy.data()[i];
            prop_assert!((lhs.data()[i] - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_kernel_is_normalized_and_symmetric(half in 0usize..12, sigma in 0.1f64..20.0) {
        let spec = GaussianSpec::new(2 * half + 1, sigma).unwrap();
        let k = spec.kernel();
        prop_assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..k.len() {
            prop_assert_eq!(k[i], k[k.len() - 1 - i]);
        }
    }

    #[test]
    fn maxpool_vjp_nonnegative_and_sparse(
        h in 2usize..9, w in 2usize..9, k in 1usize..3, s in 1usize..3, seed in any::<u64>()
    ) {
        prop_assume!(k <= h && k <= w);
        let mut r = rng(seed);
        let x = random_tensor(vec![2, h, w], -1.0, 1.0, &mut r);
        let (y, idx) = maxpool_forward(&x, k, s).unwrap();
        let g = random_tensor(y.dims().to_vec(), 0.0, 1.0, &mut r);
        let grad = maxpool_vjp(&g, &idx, x.dims()).unwrap();
        prop_assert!(grad.data().iter().all(|&v| v >= 0.0));
        prop_assert!(grad.data().iter().filter(|&&v| v != 0.0).count() <= y.len());
    }
}

#[test]
fn kernels_are_thread_count_independent() {
    let mut r = rng(8);
    let x = random_tensor(vec![8, 20, 20], -1.0, 1.0, &mut r);
    let w = random_tensor(vec![16, 8, 3, 3], -1.0, 1.0, &mut r);
    let b = vec![0.1; 16];
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let y = conv2d_forward(&x, &w, &b, 1, 1).unwrap();
                let g = conv2d_vjp_input(&y, &w, 1, 1, x.dims()).unwrap();
                (y, g)
            })
    };
    let (y1, g1) = run(1);
    let (y4, g4) = run(4);
    assert_eq!(y1.data(), y4.data());
    assert_eq!(g1.data(), g4.data());
}
