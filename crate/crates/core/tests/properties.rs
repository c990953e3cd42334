mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::mixed_spec;
use confound_audit::dataset::{
    binarize, impute, partition_by_patient, BinarizationMethod, BinarizationRule, ColumnData, Dataset, Group, Kind,
    Schema, VariableSpec,
};
use confound_audit::features::{fit_pca, joint_probabilities};
use confound_audit::matching::{matched_case_control, random_case_control, MatchLevel, MatchSpec};
use confound_audit::models::{fit_kernel_nb, fit_logistic, nb_class_posteriors, predict_proba};
use confound_audit::stats::{auc, bootstrap_auc_ci, fisher_exact, roc_curve, youden_point, Table2x2};
use confound_audit::synth::generate;
use nalgebra::DMatrix;
use proptest::collection::vec;
use proptest::prelude::*;

fn both_classes(labels: &[bool]) -> bool {
    labels.iter().any(|&l| l) && labels.iter().any(|&l| !l)
}

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    vec((-50i32..50, any::<bool>()), 4..80)
        .prop_map(|v| v.into_iter().map(|(s, l)| (s as f64 / 7.0, l)).unzip())
        .prop_filter("both classes", |(_, l): &(Vec<f64>, Vec<bool>)| both_classes(l))
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

proptest! {
    #[test]
    fn auc_survives_monotone_transforms((s, y) in scored()) {
        let cubed: Vec<f64> = s.iter().map(|v| v * v * v).collect();
        let shifted: Vec<f64> = s.iter().map(|v| 3.0 * v - 1.0).collect();
        let a = auc(&s, &y).unwrap();
        prop_assert!((a - auc(&cubed, &y).unwrap()).abs() < 1e-12);
        prop_assert!((a - auc(&shifted, &y).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn reversed_scores_complement_auc((s, y) in scored()) {
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((auc(&s, &y).unwrap() + auc(&neg, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fisher_is_symmetric(a in 0u64..30, b in 0u64..30, c in 0u64..30, d in 0u64..30) {
        let t = Table2x2::new(a, b, c, d);
        prop_assume!(a + b > 0 && c + d > 0 && a + c > 0 && b + d > 0);
        let p = fisher_exact(t).unwrap().p_value;
        prop_assert!((0.0..=1.0).contains(&p));
        for other in [t.swap_rows(), t.swap_cols(), t.transpose()] {
            let q = fisher_exact(other).unwrap().p_value;
            prop_assert!((p - q).abs() <= 1e-12 * p.max(1e-300) + 1e-15, "{} vs {}", p, q);
        }
    }

    #[test]
    fn youden_point_maximizes_j_over_the_curve((s, y) in scored()) {
        prop_assume!({
            let mut d = s.clone();
            d.sort_by(f64::total_cmp);
            d.dedup();
            d.len() > 1
        });
        let op = youden_point(&s, &y).unwrap();
        let best = roc_curve(&s, &y).unwrap().iter().map(|p| p.tpr - p.fpr).fold(f64::MIN, f64::max);
        prop_assert!((op.youden() - best).abs() < 1e-12, "{} vs {}", op.youden(), best);
        prop_assert_eq!(op.total() as usize, s.len());
    }

    #[test]
    fn predictions_ignore_a_constant_column_with_zero_weight(
        rows in vec((-3.0f64..3.0, -3.0f64..3.0, any::<bool>()), 10..40),
        c in -5.0f64..5.0,
    ) {
        let y: Vec<bool> = rows.iter().map(|r| r.2).collect();
        prop_assume!(both_classes(&y));
        let x = DMatrix::from_fn(rows.len(), 2, |i, j| if j == 0 { rows[i].0 } else { rows[i].1 });
        let model = fit_logistic(&x, &y, 1e-2).unwrap();
        let mut wide = model.clone();
        wide.coefficients.push(0.0);
        let xw = x.clone().insert_column(2, c);
        let p = predict_proba(&model, &x).unwrap();
        let q = predict_proba(&wide, &xw).unwrap();
        prop_assert_eq!(p, q);
    }

    #[test]
    fn nb_posteriors_are_a_distribution(
        rows in vec((-3.0f64..3.0, 0.0f64..1.0, any::<bool>()), 6..40),
        probe in (-10.0f64..10.0, -2.0f64..3.0),
    ) {
        let y: Vec<bool> = rows.iter().map(|r| r.2).collect();
        prop_assume!(y.iter().filter(|&&v| v).count() >= 2 && y.iter().filter(|&&v| !v).count() >= 2);
        let x = DMatrix::from_fn(rows.len(), 2, |i, j| if j == 0 { rows[i].0 } else { rows[i].1 });
        let nb = fit_kernel_nb(&x, &y).unwrap();
        let [p0, p1] = nb_class_posteriors(&nb, &[probe.0, probe.1]).unwrap();
        prop_assert!((0.0..=1.0).contains(&p0) && (0.0..=1.0).contains(&p1));
        prop_assert!((p0 + p1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn median_split_yields_both_levels(values in vec(-1000i32..1000, 2..60)) {
        let xs: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        // Both levels exist whenever something lies strictly above the median.
        let n = sorted.len();
        let med = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
        prop_assume!(sorted[n - 1] > med);
        let schema = Schema::new(vec![
            VariableSpec::new("y", Kind::Binary, Group::Outcome),
            VariableSpec::new("x", Kind::Continuous, Group::Pt),
        ]).unwrap();
        let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let ds = Dataset::new(
            &schema,
            vec![
                ColumnData::Numeric((0..n).map(|i| Some((i % 2) as f64)).collect()),
                ColumnData::Numeric(xs.iter().copied().map(Some).collect()),
            ],
            ids.clone(),
            ids,
            None,
        ).unwrap();
        let out = binarize(&ds, &[BinarizationRule::new("x", BinarizationMethod::MedianSplit)]).unwrap();
        let levels: BTreeSet<u64> = out.column("x").unwrap().numeric().unwrap().iter()
            .map(|v| v.unwrap().to_bits()).collect();
        prop_assert_eq!(levels.len(), 2);
    }

    #[test]
    fn pca_components_are_orthonormal(seed in any::<u64>(), n in 8usize..40, d in 2usize..8) {
        let mut rng = confound_audit::seed::rng(seed);
        let x = DMatrix::from_fn(n, d, |_, _| common::oracles::normal(&mut rng));
        let k = d.min(n - 1);
        let m = fit_pca(&x, k).unwrap();
        let gram = &m.components * m.components.transpose();
        let eye = DMatrix::<f64>::identity(m.k(), m.k());
        prop_assert!((gram - eye).abs().max() < 1e-10);
        for w in m.explained_variance.windows(2) {
            prop_assert!(w[0] >= w[1] - 1e-12);
        }
    }

    #[test]
    fn tsne_affinities_are_symmetric(seed in any::<u64>(), n in 12usize..40) {
        let mut rng = confound_audit::seed::rng(seed);
        let x = DMatrix::from_fn(n, 4, |_, _| common::oracles::normal(&mut rng));
        let p = joint_probabilities(&x, 3.0).unwrap();
        prop_assert!((&p - p.transpose()).abs().max() < 1e-15);
        prop_assert!((p.sum() - 1.0).abs() < 1e-9);
        prop_assert!((0..n).all(|i| p[(i, i)] == 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bootstrap_is_thread_count_invariant((s, y) in scored(), seed in any::<u64>()) {
        prop_assume!(y.iter().filter(|&&v| v).count() >= 2 && y.iter().filter(|&&v| !v).count() >= 2);
        let one = in_pool(1, || bootstrap_auc_ci(&s, &y, 200, seed).unwrap());
        let four = in_pool(4, || bootstrap_auc_ci(&s, &y, 200, seed).unwrap());
        prop_assert_eq!(one.0.to_bits(), four.0.to_bits());
        prop_assert_eq!(one.1.to_bits(), four.1.to_bits());
    }

    #[test]
    fn imputation_keeps_observed_cells(seed in 0u64..1000) {
        let mut spec = mixed_spec(seed);
        spec.n_patients = 120;
        let (ds, _) = generate(&spec).unwrap();
        prop_assume!(ds.missing_count() > 0);
        for targets in [vec![], vec!["bmi".to_string()]] {
            let out = impute(&ds, &targets).unwrap().dataset;
            prop_assert_eq!(out.missing_count(), 0);
            for (before, after) in ds.columns().iter().zip(out.columns()) {
                match (&before.data, &after.data) {
                    (ColumnData::Numeric(a), ColumnData::Numeric(b)) => {
                        for (x, y) in a.iter().zip(b) {
                            if let Some(x) = x {
                                prop_assert_eq!(x.to_bits(), y.unwrap().to_bits());
                            }
                        }
                    }
                    (ColumnData::Numeric(a), ColumnData::Levels(b)) => {
                        // Binary with gaps becomes categorical; observed values keep their meaning.
                        for (x, y) in a.iter().zip(b) {
                            if let Some(x) = x {
                                let y: f64 = y.as_deref().unwrap().parse().unwrap();
                                prop_assert_eq!(*x, y);
                            }
                        }
                    }
                    (ColumnData::Levels(a), ColumnData::Levels(b)) => {
                        for (x, y) in a.iter().zip(b) {
                            if x.is_some() {
                                prop_assert_eq!(x, y);
                            }
                        }
                    }
                    _ => prop_assert!(false, "column {} changed storage", before.name()),
                }
            }
        }
    }

    #[test]
    fn partition_keeps_patients_whole(seed in any::<u64>(), ratio in 0.1f64..0.9) {
        let mut spec = mixed_spec(seed % 1000);
        spec.n_patients = 150;
        let (ds, _) = generate(&spec).unwrap();
        let part = partition_by_patient(&ds, ratio, seed).unwrap();
        let mut side: BTreeMap<&str, bool> = BTreeMap::new();
        for (rows, train) in [(&part.train_indices, true), (&part.test_indices, false)] {
            for &r in rows.iter() {
                let prev = side.insert(ds.patient_ids()[r].as_str(), train);
                prop_assert!(prev.is_none() || prev == Some(train));
            }
        }
        prop_assert_eq!(part.train_indices.len() + part.test_indices.len(), ds.n_rows());
    }

    #[test]
    fn matching_uses_each_control_once_and_keeps_cases(seed in 0u64..1000) {
        let mut spec = mixed_spec(seed);
        spec.n_patients = 200;
        spec.rows_per_patient = (1, 1);
        let (ds, _) = generate(&spec).unwrap();
        let ds = impute(&ds, &[]).unwrap().dataset;
        let random = random_case_control(&ds, seed).unwrap();
        let mut case_sets = vec![random.cases()];
        for cohort in std::iter::once(random).chain(MatchLevel::LADDER[1..].iter().map(|&level| {
            let spec = MatchSpec::for_level(&ds, level, &["age".into(), "gender".into()], seed).unwrap();
            matched_case_control(&ds, &spec).unwrap()
        })) {
            let controls = cohort.controls();
            let unique: BTreeSet<usize> = controls.iter().copied().collect();
            prop_assert_eq!(unique.len(), controls.len());
            prop_assert!(cohort.unmatched_cases.is_empty());
            case_sets.push(cohort.cases());
        }
        prop_assert!(case_sets.windows(2).all(|w| w[0] == w[1]));
    }
}
