use proptest::prelude::*;
use uncertain_attr::data::{fit_standardize, make_uncertainty_spec, RawTable, UncertaintyLevel};
use uncertain_attr::matrix::Matrix;
use uncertain_attr::metrics::{explanation_distance, prob_improvement_curve, FaithfulnessRecord, Technique};
use uncertain_attr::stimuli::largest_remainder;

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0..100.0f64, 3)
}

proptest! {
    #[test]
    fn distance_is_a_metric(a in vec3(), b in vec3(), c in vec3()) {
        let ab = explanation_distance(&a, &b).unwrap();
        prop_assert_eq!(explanation_distance(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(ab, explanation_distance(&b, &a).unwrap());
        prop_assert!(ab >= 0.0);
        let via = explanation_distance(&a, &c).unwrap() + explanation_distance(&c, &b).unwrap();
        prop_assert!(ab <= via + 1e-9 * (1.0 + via));
    }

    #[test]
    fn standardizing_inverts(rows in prop::collection::vec(prop::collection::vec(-1e3..1e3f64, 3), 3..30)) {
        // skip constant columns, which are rejected
        prop_assume!((0..3).all(|j| rows.iter().any(|r| (r[j] - rows[0][j]).abs() > 1e-6)));
        let n = rows.len();
        let table = RawTable::new(
            vec!["a".into(), "b".into(), "c".into()],
            Matrix::from_rows(&rows).unwrap(),
            vec![0.0; n],
        ).unwrap();
        let (scaler, z) = fit_standardize(&table).unwrap();
        let back = scaler.inverse_transform(&z).unwrap();
        for i in 0..n {
            for j in 0..3 {
                let (x, y) = (rows[i][j], back.rows.get(i, j));
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn sigma_is_zero_outside_the_listed_features(mask in prop::collection::vec(any::<bool>(), 4), level in 0..4usize) {
        let names = ["a", "b", "c", "d"];
        let rows: Vec<Vec<f64>> = (0..6).map(|i| (0..4).map(|j| (i * (j + 1)) as f64).collect()).collect();
        let table = RawTable::new(names.iter().map(|s| s.to_string()).collect(), Matrix::from_rows(&rows).unwrap(), vec![0.0; 6]).unwrap();
        let (_, data) = fit_standardize(&table).unwrap();
        let listed: Vec<String> = names.iter().zip(&mask).filter(|(_, m)| **m).map(|(s, _)| s.to_string()).collect();
        let level = [UncertaintyLevel::High, UncertaintyLevel::Medium, UncertaintyLevel::Low, UncertaintyLevel::None][level];
        let spec = make_uncertainty_spec(level, &listed, &data).unwrap();
        for (d, s) in spec.sigma.iter().enumerate() {
            prop_assert!(*s >= 0.0);
            if !mask[d] {
                prop_assert_eq!(*s, 0.0);
            } else {
                prop_assert_eq!(*s, level.sd_multiple());
            }
        }
    }

    #[test]
    fn curve_probabilities_are_probabilities(
        pairs in prop::collection::vec((0.0..10.0f64, 0.0..10.0f64), 1..80),
        bins in 1..12usize,
    ) {
        let rec = |i: usize, f0: f64, ef: f64, t| FaithfulnessRecord { instance_id: i, technique: t, f0, expected_f: ef, n_samples: 2 };
        let base: Vec<_> = pairs.iter().enumerate().map(|(i, (f0, _))| rec(i, *f0, *f0, Technique::Lime)).collect();
        let reg: Vec<_> = pairs.iter().enumerate().map(|(i, (_, ef))| rec(i, 0.0, *ef, Technique::RegLime)).collect();
        let curve = prob_improvement_curve(&reg, &base, bins).unwrap();
        prop_assert_eq!(curve.counts.iter().sum::<usize>(), pairs.len());
        prop_assert!(curve.prob_improved.iter().all(|p| (0.0..=1.0).contains(p)));
        prop_assert!(curve.bin_centers.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn apportionment_sums_and_respects_sizes(sizes in prop::collection::vec(0..40usize, 1..12), frac in 0.0..1.0f64) {
        let total = (sizes.iter().sum::<usize>() as f64 * frac) as usize;
        let alloc = largest_remainder(&sizes, total);
        prop_assert_eq!(alloc.iter().sum::<usize>(), total);
        prop_assert!(alloc.iter().zip(&sizes).all(|(a, s)| a <= s));
    }
}
