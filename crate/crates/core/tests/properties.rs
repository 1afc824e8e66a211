use std::f64::consts::LN_2;

use proptest::prelude::*;

use fjs_core::harness::{aggregate, CellResult};
use fjs_core::importance::{l_sup, table_l_sup, ObjectiveBatch, UModel, VFeatures, VModel};
use fjs_core::nets::softmax;
use fjs_core::rng;
use fjs_core::theory::{jsd, plugin_objective, DiscreteJoint};
use fjs_core::toy::{read_csv, sample_source, sample_target, write_csv, HexagonSpec, SourceSpec};

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn pair(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    n.prop_flat_map(|n| (simplex(n), simplex(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn objective_never_below_the_divergence_bound(
        (p, q) in pair(2..=8),
        w in prop::collection::vec(0.01f64..50.0, 8),
    ) {
        let bound = 2.0 * (LN_2 - jsd(&p, &q));
        prop_assert!(plugin_objective(&p, &q, &w[..p.len()]) >= bound - 1e-9);
    }

    #[test]
    fn divergence_lies_in_unit_log_range((p, q) in pair(2..=8)) {
        let d = jsd(&p, &q);
        prop_assert!((-1e-12..=LN_2 + 1e-12).contains(&d));
        prop_assert!(jsd(&p, &p).abs() < 1e-12);
    }

    #[test]
    fn table_objective_respects_the_joint_bound(
        (p, q) in pair(4..=4),
        u in prop::collection::vec(0.05f64..20.0, 2),
        v in prop::collection::vec(0.05f64..20.0, 2),
    ) {
        let s = DiscreteJoint::new(2, 2, p.clone()).unwrap();
        let t = DiscreteJoint::new(2, 2, q.clone()).unwrap();
        prop_assert!(table_l_sup(&s, &t, &u, &v) >= 2.0 * (LN_2 - jsd(&p, &q)) - 1e-9);
    }

    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-40.0f64..40.0, 1..10)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn aggregate_matches_direct_statistics(
        nlls in prop::collection::vec(prop::option::of(0.1f64..3.0), 1..12),
    ) {
        let cells: Vec<CellResult> = nlls
            .iter()
            .enumerate()
            .map(|(i, v)| CellResult {
                method: "m".into(),
                seed: i as u64,
                nll: *v,
                error: v.is_none().then(|| "failed".into()),
                importance: None,
                bin_ratios: None,
            })
            .collect();
        let summary = &aggregate(&cells)[0];
        let ok: Vec<f64> = nlls.iter().flatten().copied().collect();
        prop_assert_eq!(summary.n, ok.len());
        prop_assert_eq!(summary.failed, nlls.len() - ok.len());
        match summary.mean {
            Some(m) => prop_assert!((m - ok.iter().sum::<f64>() / ok.len() as f64).abs() < 1e-12),
            None => prop_assert!(ok.is_empty()),
        }
        prop_assert_eq!(summary.std.is_some(), ok.len() > 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn objective_is_gauge_invariant(seed in 0u64..1000, k in 0.05f64..20.0) {
        let mut r = rng::seeded(seed);
        let mut u = UModel::init(3, &[8], &mut r).unwrap();
        u.log_scores.copy_from_slice(&[-0.5, 0.3, 1.1]);
        let v = VModel::init(VFeatures::Raw, &[8], &mut r).unwrap();
        let (mut u2, mut v2) = (u.clone(), v.clone());
        u2.rescale(k);
        v2.rescale(1.0 / k);
        let src = sample_source(&HexagonSpec::default(), &SourceSpec { counts: [20, 20, 5, 10] }, seed).unwrap();
        let tgt = sample_target(&HexagonSpec::default(), 50, seed).unwrap();
        let sb = ObjectiveBatch::labeled(&src.xs(), &src.ys()).unwrap();
        let tb = ObjectiveBatch::labeled(&tgt.xs(), &tgt.ys()).unwrap();
        let a = l_sup(&u, &v, &sb, &tb).unwrap().loss;
        let b = l_sup(&u2, &v2, &sb, &tb).unwrap().loss;
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn samples_stay_inside_the_hexagon(seed in any::<u64>(), counts in prop::array::uniform4(1usize..40)) {
        let hex = HexagonSpec::default();
        let src = sample_source(&hex, &SourceSpec { counts }, seed).unwrap();
        prop_assert_eq!(src.quadrant_counts(), counts);
        let tgt = sample_target(&hex, 100, seed).unwrap();
        prop_assert!(src.samples.iter().chain(&tgt.samples).all(|s| hex.contains(s.x, s.y)));
    }

    #[test]
    fn csv_round_trip_is_lossless(seed in any::<u64>(), n in 1usize..60) {
        let ds = sample_target(&HexagonSpec::default(), n, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        write_csv(&ds, &path).unwrap();
        prop_assert_eq!(read_csv(&path).unwrap(), ds);
    }
}
