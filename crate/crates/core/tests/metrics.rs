mod common;

use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use wsscod::data::{inject_noise, synth_camo};
use wsscod::metrics::*;
use wsscod::Tensor;

fn row(v: &[f64]) -> Tensor {
    Tensor::new(vec![1, 1, v.len()], v.to_vec()).unwrap()
}

#[test]
fn half_wrong_pixels_give_half_mae() {
    let g = row(&[1.0, 0.0, 1.0, 0.0]);
    let p = row(&[0.0, 0.0, 1.0, 1.0]);
    let wrong = p.data().iter().zip(g.data()).filter(|(a, b)| a != b).count();
    assert_eq!(mae_metric(&p, &g).unwrap(), wrong as f64 / 4.0);
    assert_eq!(mae_metric(&p, &g).unwrap(), 0.5);
}

#[test]
fn f_measure_by_counts() {
    // TP = 1, FP = 1, FN = 0
    let g = row(&[1.0, 0.0, 0.0, 0.0]);
    let p = row(&[1.0, 1.0, 0.0, 0.0]);
    let (prec, rec) = (1.0 / 2.0, 1.0 / 1.0);
    let expected = (1.0 + 0.3) * prec * rec / (0.3 * prec + rec);
    let got = f_measure(&p, &g, BETA2, Threshold::Fixed(0.5)).unwrap();
    assert!((got - expected).abs() < 1e-12);
    assert!((got - 0.5652).abs() < 1e-4);
    // the adaptive threshold is min(2 * 0.5, 1) = 1 and binarizes to the same map
    assert!((f_measure(&p, &g, BETA2, Threshold::Adaptive).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn anti_aligned_e_measure_on_half_mask() {
    let g = Tensor::from_fn(&[1, 16, 16], |i| if i % 16 < 8 { 1.0 } else { 0.0 });
    let p = g.map(|v| 1.0 - v);
    assert!(e_measure(&p, &g).unwrap() <= 0.25);
    assert!((e_measure(&g, &g).unwrap() - 1.0).abs() < 1e-6);
    assert!((s_measure(&g, &g, 0.5).unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn constant_prediction_scores_below_self() {
    for seed in 0..10 {
        let s = synth_camo(seed, 32, 0.5).unwrap();
        let m = s.gt.mean();
        let flat = s.gt.map(|_| m);
        assert!(s_measure(&flat, &s.gt, 0.5).unwrap() < s_measure(&s.gt, &s.gt, 0.5).unwrap());
    }
}

#[test]
fn half_overlapping_squares() {
    let a = square_mask(16, 2, 2, 8);
    let b = square_mask(16, 2, 6, 8);
    let (inter, union) = (8.0 * 4.0, 2.0 * 64.0 - 8.0 * 4.0);
    let got = iou_score(&a, &b, 0.5).unwrap();
    assert!((got - inter / union).abs() < 1e-12);
    assert!((got - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(iou_score(&a, &square_mask(16, 10, 10, 6), 0.5).unwrap(), 0.0);
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn corruption_degrades_every_measure() {
    let gts: Vec<Tensor> = (0..5).map(|s| synth_camo(40 + s, 64, 0.5).unwrap().gt).collect();
    let mut prev: Option<MetricReport> = None;
    for step in 0..=5 {
        let rho = step as f64 / 10.0;
        let reports: Vec<MetricReport> = gts
            .iter()
            .enumerate()
            .map(|(i, g)| MetricReport::single(&inject_noise(g, rho, i as u64).unwrap().mask, g).unwrap())
            .collect();
        let med = |f: fn(&MetricReport) -> f64| median(reports.iter().map(f).collect());
        let cur = MetricReport {
            mae: med(|r| r.mae),
            e_phi: med(|r| r.e_phi),
            f_beta: med(|r| r.f_beta),
            s_alpha: med(|r| r.s_alpha),
            iou: med(|r| r.iou),
            n_samples: 5,
        };
        if let Some(p) = prev {
            assert!(cur.mae >= p.mae, "rho {rho}");
            assert!(cur.e_phi <= p.e_phi, "rho {rho}");
            assert!(cur.f_beta <= p.f_beta, "rho {rho}");
            assert!(cur.s_alpha <= p.s_alpha, "rho {rho}");
            assert!(cur.iou <= p.iou, "rho {rho}");
        }
        prev = Some(cur);
    }
}

#[test]
fn report_serializations_agree() {
    let g = square_mask(8, 1, 1, 4);
    let r = MetricReport::single(&g.map(|v| 0.8 * v), &g).unwrap();
    let cells: Vec<&str> = MetricReport::CSV_HEADER.split(',').collect();
    let row = r.to_csv_row();
    assert_eq!(row.split(',').count(), cells.len());
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    for c in cells {
        assert!(json.get(c).is_some(), "{c}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pointwise_measures_are_permutation_equivariant(seed in 0u64..100_000) {
        let mut r = rng(seed);
        let p = uniform(&mut r, &[1, 6, 6], 0.0, 1.0);
        let mut g = binary(&mut r, &[1, 6, 6], 0.4);
        g.data_mut()[0] = 1.0;
        let mut perm: Vec<usize> = (0..36).collect();
        perm.shuffle(&mut r);
        let pp = Tensor::from_fn(p.shape(), |i| p.data()[perm[i]]);
        let gp = Tensor::from_fn(g.shape(), |i| g.data()[perm[i]]);
        prop_assert!((mae_metric(&p, &g).unwrap() - mae_metric(&pp, &gp).unwrap()).abs() < 1e-12);
        prop_assert_eq!(iou_score(&p, &g, 0.5).unwrap(), iou_score(&pp, &gp, 0.5).unwrap());
        for t in [Threshold::Adaptive, Threshold::Fixed(0.3)] {
            let a = f_measure(&p, &g, BETA2, t).unwrap();
            let b = f_measure(&pp, &gp, BETA2, t).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn all_measures_stay_in_unit_interval(seed in 0u64..100_000, ones in 0.0f64..1.0, h in 1usize..12, w in 1usize..12) {
        let mut r = rng(seed);
        let p = uniform(&mut r, &[1, h, w], 0.0, 1.0);
        let g = binary(&mut r, &[1, h, w], ones);
        let rep = MetricReport::single(&p, &g).unwrap();
        prop_assert!(rep.in_range(), "{:?}", rep);
        let bin = p.map(|v| v.round());
        prop_assert!(MetricReport::single(&bin, &g).unwrap().in_range());
    }
}
