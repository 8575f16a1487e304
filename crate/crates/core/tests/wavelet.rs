mod common;

use common::*;
use proptest::prelude::*;
use wsscod::wavelet::*;
use wsscod::Tensor;

fn bands(s: &Subbands) -> [&Tensor; 4] {
    [&s.ll, &s.lh, &s.hl, &s.hh]
}

#[test]
fn energy_of_random_8x8() {
    for seed in 0..10 {
        let x = uniform(&mut rng(seed), &[1, 8, 8], -1.0, 1.0);
        let direct: f64 = x.data().iter().map(|v| v * v).sum();
        assert!((dwt_haar(&x).unwrap().energy() - direct).abs() < 1e-10);
    }
}

#[test]
fn checker_block_by_formula() {
    let (a, b, c, d) = (1.0, 0.0, 0.0, 1.0);
    let s = dwt_haar(&Tensor::new(vec![1, 2, 2], vec![a, b, c, d]).unwrap()).unwrap();
    assert_eq!(s.ll.data()[0], (a + b + c + d) / 2.0);
    assert_eq!(s.hl.data()[0], (a - b + c - d) / 2.0);
    assert_eq!(s.lh.data()[0], (a + b - c - d) / 2.0);
    assert_eq!(s.hh.data()[0], (a - b - c + d) / 2.0);
    assert_eq!((s.ll.data()[0], s.hh.data()[0]), (1.0, 1.0));
}

#[test]
fn gradient_matches_finite_differences() {
    for seed in 0..10 {
        let x = uniform(&mut rng(seed), &[2, 4, 6], -1.0, 1.0);
        let w: Vec<Tensor> = (0..4).map(|k| probe_weights(seed * 4 + k, &[2, 2, 3])).collect();
        let f = |x: &Tensor| {
            let s = dwt_haar(x).unwrap();
            bands(&s).iter().zip(&w).map(|(b, w)| dot(b, w)).sum::<f64>()
        };
        let grads = Subbands {
            ll: w[0].clone(),
            lh: w[1].clone(),
            hl: w[2].clone(),
            hh: w[3].clone(),
        };
        let a = dwt_haar_backward(&grads).unwrap();
        let n = numeric_grad(&x, f);
        let worst = a.data().iter().zip(n.data()).map(|(a, n)| (a - n).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "seed {seed}: {worst:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn perfect_reconstruction(seed in 0u64..100_000, c in 1usize..4, h in 1usize..6, w in 1usize..6) {
        let x = uniform(&mut rng(seed), &[c, 2 * h, 2 * w], -10.0, 10.0);
        let y = idwt_haar(&dwt_haar(&x).unwrap()).unwrap();
        for (a, b) in x.data().iter().zip(y.data()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn energy_is_conserved(seed in 0u64..100_000, c in 1usize..4, h in 1usize..6, w in 1usize..6) {
        let x = uniform(&mut rng(seed), &[c, 2 * h, 2 * w], -3.0, 3.0);
        let e: f64 = x.data().iter().map(|v| v * v).sum();
        prop_assert!((dwt_haar(&x).unwrap().energy() - e).abs() <= 1e-9);
    }

    #[test]
    fn transform_is_linear(seed in 0u64..100_000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let mut r = rng(seed);
        let x = uniform(&mut r, &[2, 6, 4], -1.0, 1.0);
        let y = uniform(&mut r, &[2, 6, 4], -1.0, 1.0);
        let mix = x.zip_map(&y, |a, b| alpha * a + beta * b).unwrap();
        let (sx, sy, sm) = (dwt_haar(&x).unwrap(), dwt_haar(&y).unwrap(), dwt_haar(&mix).unwrap());
        for ((bx, by), bm) in bands(&sx).iter().zip(bands(&sy)).zip(bands(&sm)) {
            for i in 0..bm.len() {
                prop_assert!((alpha * bx.data()[i] + beta * by.data()[i] - bm.data()[i]).abs() <= 1e-10);
            }
        }
    }
}
