mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use wsscod::losses::*;
use wsscod::numerics::sigmoid;
use wsscod::Tensor;

fn v(x: &[f64]) -> Tensor {
    Tensor::new(vec![1, 1, x.len()], x.to_vec()).unwrap()
}

#[test]
fn nc_values_by_direct_evaluation() {
    let (p, g) = (v(&[0.5, 0.5]), v(&[1.0, 0.0]));
    for q in [1.0, 2.0] {
        let num: f64 = 0.5f64.powf(q) + 0.5f64.powf(q);
        let den = (0.5 + 1.0) + (0.5 + 0.0) - (0.5 * 1.0 + 0.5 * 0.0);
        assert!((nc_loss(&p, &g, q).unwrap() - num / den).abs() < 1e-12);
    }
    assert!((nc_loss(&p, &g, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!((nc_loss(&p, &g, 2.0).unwrap() - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn nc_gradients_by_hand() {
    let (p, g) = (v(&[0.5, 0.5]), v(&[1.0, 0.0]));
    let d = nc_grad(&p, &g, 1.0, GradMode::DetachedDenominator).unwrap();
    assert!((d.data()[0] + 1.0 / 1.5).abs() < 1e-12);
    assert!((d.data()[1] - 1.0 / 1.5).abs() < 1e-12);
    let e = nc_grad(&p, &g, 1.0, GradMode::Exact).unwrap();
    assert!((e.data()[0] + 1.0 / 1.5).abs() < 1e-12);
    assert!((e.data()[1] - (1.5 - 1.0) / (1.5 * 1.5)).abs() < 1e-12);
    assert!((e.data()[1] - 0.2222).abs() < 1e-4);
}

#[test]
fn nc_rejects_empty_denominator() {
    let z = v(&[0.0, 0.0]);
    assert!(matches!(nc_loss(&z, &z, 1.0), Err(wsscod::Error::ZeroDenominator { .. })));
}

#[test]
fn nc_exact_gradient_matches_finite_differences() {
    for seed in 0..24 {
        let mut r = rng(seed);
        let p = uniform(&mut r, &[1, 4, 4], 0.05, 0.95);
        // alternate hard and soft targets
        let g = if seed % 2 == 0 { binary(&mut r, &[1, 4, 4], 0.4) } else { uniform(&mut r, &[1, 4, 4], 0.0, 1.0) };
        for q in [1.0, 1.5, 2.0] {
            let a = nc_grad(&p, &g, q, GradMode::Exact).unwrap();
            let n = numeric_grad(&p, |p| nc_loss(p, &g, q).unwrap());
            assert!(max_rel(&a, &n) < 1e-4, "seed {seed} q {q}: {:e}", max_rel(&a, &n));
        }
    }
}

#[test]
fn baseline_gradients_match_finite_differences() {
    for kind in [BaselineKind::Ce, BaselineKind::Iou, BaselineKind::Mae, BaselineKind::Gce] {
        for seed in 0..20 {
            let mut r = rng(seed);
            let p = uniform(&mut r, &[1, 4, 4], 0.05, 0.95);
            let g = binary(&mut r, &[1, 4, 4], 0.4);
            let a = baseline_loss(&p, &g, kind, 0.7).unwrap().grad;
            let n = numeric_grad(&p, |p| baseline_loss(p, &g, kind, 0.7).unwrap().value);
            assert!(max_rel(&a, &n) < 1e-4, "{kind:?} seed {seed}");
        }
    }
}

#[test]
fn dice_gradient_matches_finite_differences() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let p = uniform(&mut r, &[1, 5, 5], 0.05, 0.95);
        let g = binary(&mut r, &[1, 5, 5], 0.4);
        let a = dice_boundary_loss(&p, &g).unwrap().grad;
        let n = numeric_grad(&p, |p| dice_boundary_loss(p, &g).unwrap().value);
        assert!(max_rel(&a, &n) < 1e-4, "seed {seed}");
    }
}

#[test]
fn composite_gradient_on_4x4_toy() {
    let kinds = [LossKind::Nc, LossKind::Ce, LossKind::Iou, LossKind::Gce, LossKind::CeIou];
    for seed in 0..20 {
        let mut r = rng(seed);
        let g = binary(&mut r, &[1, 4, 4], 0.4);
        let z: Vec<Tensor> = [4, 4, 2, 2, 4].iter().map(|&s| uniform(&mut r, &[1, s, s], -2.0, 2.0)).collect();
        let mut spec = LossSpec::with_kind(kinds[seed as usize % kinds.len()]);
        spec.q_early = 1.5;
        spec.switch_epoch = 3;
        let refs: Vec<&Tensor> = z.iter().collect();
        let res = composite_loss(&refs, &g, &spec, 0).unwrap();
        for k in 0..z.len() {
            let n = numeric_grad(&z[k], |zk| {
                let mut refs = refs.clone();
                refs[k] = zk;
                composite_loss(&refs, &g, &spec, 0).unwrap().value
            });
            assert!(max_rel(&res.grads[k], &n) < 1e-4, "seed {seed} output {k}");
        }
    }
}

#[test]
fn composite_degenerate_cases() {
    let mut r = rng(5);
    let g = binary(&mut r, &[1, 4, 4], 0.5);
    let z = uniform(&mut r, &[1, 4, 4], -2.0, 2.0);
    let mut spec = LossSpec::nc(10);
    spec.dice_weight = 0.0;
    let one = composite_loss(&[&z], &g, &spec, 0).unwrap().value;
    assert!((one - nc_loss(&z.map(sigmoid), &g, 2.0).unwrap()).abs() < 1e-12);
    spec.dice_weight = 0.5;
    let one = composite_loss(&[&z], &g, &spec, 0).unwrap().value;
    let five = composite_loss(&[&z; 5], &g, &spec, 0).unwrap().value;
    assert!((one - five).abs() < 1e-12);
    assert!(composite_loss(&[], &g, &spec, 0).is_err());
}

#[test]
fn baseline_values_by_direct_evaluation() {
    let (p, g) = (v(&[0.5, 0.5]), v(&[1.0, 0.0]));
    let iou = baseline_loss(&p, &g, BaselineKind::Iou, 0.7).unwrap().value;
    assert!((iou - (1.0 - 0.5 / 1.5)).abs() < 1e-12);
    let ce = baseline_loss(&v(&[0.5; 6]), &v(&[1.0, 0.0, 1.0, 1.0, 0.0, 0.0]), BaselineKind::Ce, 0.7).unwrap().value;
    assert!((ce - 2f64.ln()).abs() < 1e-12);
    let gce = baseline_loss(&v(&[0.5]), &v(&[1.0]), BaselineKind::Gce, 0.7).unwrap().value;
    assert!((gce - (1.0 - 0.5f64.powf(0.7)) / 0.7).abs() < 1e-12);
    assert!((gce - 0.5492).abs() < 1e-4);
    let gce1 = baseline_loss(&v(&[1.0 - 1e-7]), &v(&[1.0]), BaselineKind::Gce, 0.7).unwrap().value;
    // p_t = 1 is clamped to 1 - 1e-7, leaving a residual of about 1e-7
    assert!(gce1 < 1.1e-7);
}

#[test]
fn mae_gradient_is_the_derivative_of_the_mean() {
    let (p, g) = (v(&[0.5, 0.5]), v(&[1.0, 0.0]));
    let r = baseline_loss(&p, &g, BaselineKind::Mae, 0.7).unwrap();
    assert_eq!(r.value, 0.5);
    let n = numeric_grad(&p, |p| baseline_loss(p, &g, BaselineKind::Mae, 0.7).unwrap().value);
    assert!(max_rel(&r.grad, &n) < 1e-9);
    assert_eq!(r.grad.data()[0].abs(), r.grad.data()[1].abs());
    assert_eq!(r.grad.data()[1], 1.0 / 2.0);
}

#[test]
fn dice_blob_against_dilated_copy_matches_brute_force() {
    let n = 16;
    for seed in 0..5 {
        let mut r = rng(seed);
        let (cy, cx) = (r.gen_range(5.0..11.0), r.gen_range(5.0..11.0));
        let rad: f64 = r.gen_range(2.5..4.5);
        let blob: Vec<f64> = (0..n * n)
            .map(|i| {
                let (y, x) = ((i / n) as f64, (i % n) as f64);
                if (y - cy).powi(2) + (x - cx).powi(2) <= rad * rad { 1.0 } else { 0.0 }
            })
            .collect();
        let dilated: Vec<f64> = (0..n * n)
            .map(|i| {
                let (y, x) = (i / n, i % n);
                let near = [(0i64, 0i64), (1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|&(dy, dx)| {
                    let (yy, xx) = (y as i64 + dy, x as i64 + dx);
                    (0..n as i64).contains(&yy) && (0..n as i64).contains(&xx) && blob[yy as usize * n + xx as usize] == 1.0
                });
                if near { 1.0 } else { 0.0 }
            })
            .collect();
        let (bp, bg) = (brute_boundary(&dilated, n), brute_boundary(&blob, n));
        let inter: f64 = bp.iter().zip(&bg).map(|(a, b)| a * b).sum();
        let total: f64 = bp.iter().sum::<f64>() + bg.iter().sum::<f64>();
        let expected = 1.0 - (2.0 * inter + 1.0) / (total + 1.0);
        let got = dice_boundary_loss(&v(&dilated).reshape(&[1, n, n]).unwrap(), &v(&blob).reshape(&[1, n, n]).unwrap())
            .unwrap()
            .value;
        assert!(expected > 0.0);
        assert!((got - expected).abs() < 1e-9, "seed {seed}: {got} vs {expected}");
    }
}

#[test]
fn detached_q1_gradients_share_one_magnitude() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let p = uniform(&mut r, &[1, 6, 6], 0.01, 0.99);
        let g = binary(&mut r, &[1, 6, 6], 0.3);
        let den: f64 = p.data().iter().zip(g.data()).map(|(a, b)| a + b - a * b).sum();
        let d = nc_grad(&p, &g, 1.0, GradMode::DetachedDenominator).unwrap();
        for &x in d.data() {
            assert!((x.abs() - 1.0 / den).abs() < 1e-12);
        }
        // exact mode on foreground pixels: the denominator term carries (1 - g) = 0
        let e = nc_grad(&p, &g, 1.0, GradMode::Exact).unwrap();
        for i in 0..p.len() {
            if g.data()[i] == 1.0 {
                assert_eq!(e.data()[i], d.data()[i]);
            }
        }
    }
}

#[test]
fn constant_prediction_sign_survives_symmetric_noise() {
    let n = 400;
    for f in [0.2, 0.35, 0.65, 0.8] {
        let n1 = (f * n as f64).round() as usize;
        let clean = constant_prediction_grad_sign(n, n1, 0, 0, 0);
        assert_eq!(clean, if f < 0.5 { 1.0 } else { -1.0 });
        for rho in [0.1, 0.3, 0.45] {
            let (fo, fz) = ((rho * n1 as f64).round() as usize, (rho * (n - n1) as f64).round() as usize);
            for seed in 0..5 {
                assert_eq!(constant_prediction_grad_sign(n, n1, fo, fz, seed), clean, "f {f} rho {rho}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn nc_zero_iff_equal(seed in 0u64..100_000, q in 1.0f64..2.0, same in any::<bool>()) {
        let mut r = rng(seed);
        let g = binary(&mut r, &[1, 4, 4], 0.5).map(|x| if x == 0.0 { 0.1 } else { 0.8 });
        let p = if same { g.clone() } else { uniform(&mut r, &[1, 4, 4], 0.0, 1.0) };
        let l = nc_loss(&p, &g, q).unwrap();
        prop_assert_eq!(l == 0.0, p == g);
        prop_assert!(l >= 0.0);
    }

    #[test]
    fn nc_is_permutation_invariant(seed in 0u64..100_000, q in 1.0f64..2.0) {
        use rand::seq::SliceRandom;
        let mut r = rng(seed);
        let p = uniform(&mut r, &[1, 1, 20], 0.0, 1.0);
        let g = binary(&mut r, &[1, 1, 20], 0.5);
        let mut perm: Vec<usize> = (0..20).collect();
        perm.shuffle(&mut r);
        let pp = Tensor::from_fn(&[1, 1, 20], |i| p.data()[perm[i]]);
        let gp = Tensor::from_fn(&[1, 1, 20], |i| g.data()[perm[i]]);
        let a = nc_loss(&p, &g, q).unwrap();
        let b = nc_loss(&pp, &gp, q).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn loss_gradients_are_finite(seed in 0u64..100_000) {
        let mut r = rng(seed);
        // saturated probabilities exercise the clamp
        let p = Tensor::from_fn(&[1, 3, 3], |_| [0.0, 1.0, r.gen_range(0.0..1.0)][r.gen_range(0..3)]);
        let g = binary(&mut r, &[1, 3, 3], 0.5);
        for kind in [BaselineKind::Ce, BaselineKind::Iou, BaselineKind::Mae, BaselineKind::Gce] {
            let res = baseline_loss(&p, &g, kind, 0.7);
            if let Ok(res) = res {
                prop_assert!(res.value.is_finite() && res.grad.is_finite());
            }
        }
    }
}
