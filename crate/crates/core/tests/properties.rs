mod common;

use fswad_core::augmentation::{
    label_of_combination, sample_batch, AugmentedBatch, BatchComposition, OrdinalLabelScheme, SourceTag,
};
use fswad_core::evaluation::{auroc, confusion};
use fswad_core::inference::{ReferencePools, Scorer};
use fswad_core::ingest::{apply_normalize, fit_normalize, EncodedDataset, Provenance};
use fswad_core::model::ScoringModel;
use fswad_core::rng::seeded;
use fswad_core::sampling::{build_sample_sets, split_train_test, SampleSetSpec};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::Rng;

use common::{finite_difference_check, pairwise_auroc, random_problem};

fn scores_strategy() -> impl Strategy<Value = Vec<(f64, bool)>> {
    prop::collection::vec(
        (prop_oneof![(0..6i32).prop_map(|v| v as f64), -10.0..10.0f64], any::<bool>()),
        2..200,
    )
    .prop_filter("both classes", |v| v.iter().any(|x| x.1) && v.iter().any(|x| !x.1))
}

fn dataset(features: Array2<f64>, is_anomaly: Vec<bool>) -> EncodedDataset {
    let rows = features.nrows();
    let cols = features.ncols();
    EncodedDataset {
        features,
        is_anomaly,
        label_values: vec!["x".into(); rows],
        feature_names: (0..cols).map(|j| format!("f{j}")).collect(),
        provenance: Provenance {
            sources: vec![],
            schema_hash: String::new(),
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn auroc_matches_pairwise_oracle(scores in scores_strategy()) {
        prop_assert_eq!(auroc(&scores).unwrap(), pairwise_auroc(&scores));
    }

    #[test]
    fn auroc_invariant_under_monotone_maps(scores in scores_strategy()) {
        let base = auroc(&scores).unwrap();
        let mapped: Vec<(f64, bool)> = scores.iter().map(|&(s, y)| ((s / 3.0).exp() + 7.0, y)).collect();
        prop_assert_eq!(auroc(&mapped).unwrap(), base);
        let flipped: Vec<(f64, bool)> = scores.iter().map(|&(s, y)| (s, !y)).collect();
        prop_assert!((auroc(&flipped).unwrap() - (1.0 - base)).abs() < 1e-12);
    }

    #[test]
    fn confusion_counts_partition(scores in scores_strategy(), th in -10.0..10.0f64) {
        let c = confusion(&scores, th);
        prop_assert_eq!(c.tp + c.tn + c.fp + c.fn_, scores.len());
        let predicted = scores.iter().filter(|s| s.0 >= th).count();
        prop_assert_eq!(c.tp + c.fp, predicted);
    }

    #[test]
    fn normalization_round_trip(rows in 2usize..30, cols in 1usize..6, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let x = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-50.0..50.0));
        let (fitted, stats) = fit_normalize(&dataset(x.clone(), vec![false; rows])).unwrap();
        for j in 0..cols {
            let col = fitted.features.column(j);
            prop_assert_eq!(col.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
            prop_assert_eq!(col.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
        }
        let again = apply_normalize(&dataset(x, vec![false; rows]), &stats).unwrap();
        prop_assert_eq!(again.features, fitted.features);
    }

    #[test]
    fn balanced_batches_hit_every_class_equally(k in 2usize..=3, per_class in 1usize..10, seed in any::<u64>()) {
        let scheme = OrdinalLabelScheme::new(k, 4.0).unwrap();
        let labelled = [0usize, 1, 2];
        let unlabelled: Vec<usize> = (3..20).collect();
        let b = sample_batch(
            &labelled, &unlabelled, &scheme, per_class * (k + 1),
            BatchComposition::Balanced, &mut seeded(seed),
        ).unwrap();
        for label in scheme.labels() {
            prop_assert_eq!(b.instances.iter().filter(|i| i.label == label).count(), per_class);
        }
        for inst in &b.instances {
            prop_assert_eq!(inst.label, label_of_combination(&inst.tags, &scheme));
            for (m, t) in inst.members.iter().zip(&inst.tags) {
                prop_assert_eq!(*m < 3, *t == SourceTag::Labelled);
            }
        }
    }

    #[test]
    fn sample_sets_are_disjoint_and_sized(
        normals in 20usize..60,
        hidden in 3usize..10,
        labelled in 1usize..3,
        count in 1usize..4,
        seed in any::<u64>(),
    ) {
        let per_set_anom = hidden + labelled;
        let total_normals = normals * count + 5;
        let total_anoms = per_set_anom * count + 2;
        let n = total_normals + total_anoms;
        let truth: Vec<bool> = (0..n).map(|i| i >= total_normals).collect();
        let data = dataset(Array2::zeros((n, 1)), truth);
        let spec = SampleSetSpec {
            normal_count: normals,
            anomaly_total: per_set_anom,
            labelled_count: labelled,
            anomaly_percent: 100.0 * hidden as f64 / (normals + hidden) as f64,
            test_fraction: 2.0 / 9.0,
            seed,
            exclude_attack_families: vec![],
        };
        let sets = build_sample_sets(&data, &spec, count).unwrap();
        let mut seen = std::collections::HashSet::new();
        for set in &sets {
            let split = split_train_test(set, &data, spec.test_fraction, seed ^ 1).unwrap();
            prop_assert_eq!(split.labelled.len(), labelled);
            prop_assert!(split.labelled.iter().all(|&i| data.is_anomaly[i]));
            let d = split.unlabelled.len() + split.test.len();
            prop_assert_eq!(d, normals + hidden);
            prop_assert_eq!(split.test.len(), (spec.test_fraction * d as f64 + 1e-9).floor() as usize);
            for &i in split.labelled.iter().chain(&split.unlabelled).chain(&split.test) {
                prop_assert!(seen.insert(i), "row {} reused", i);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradient_matches_finite_differences(seed in any::<u64>()) {
        let (model, batch, features) = random_problem(&mut seeded(seed));
        let err = finite_difference_check(&model, &batch, &features, 1e-4);
        prop_assume!(err.is_some());
        prop_assert!(err.unwrap() <= 1e-4, "relative error {:?}", err);
    }

    #[test]
    fn duplicated_batch_has_the_same_gradient(seed in any::<u64>()) {
        let (model, batch, features) = random_problem(&mut seeded(seed));
        let doubled = AugmentedBatch {
            instances: batch.instances.iter().chain(&batch.instances).cloned().collect(),
        };
        let g1 = model.backward(&batch, &features).unwrap();
        let g2 = model.backward(&doubled, &features).unwrap();
        for (a, b) in g1.iter().zip(g2.iter()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn score_is_linear_between_kinks(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = rng.random_range(2..8);
        let model = ScoringModel::new(n, &[rng.random_range(1..8)], 3, 0.0, rng.random()).unwrap();
        let x: Vec<Array1<f64>> = (0..3).map(|_| Array1::from_shape_fn(n, |_| rng.random_range(0.0..1.0))).collect();
        let d = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
        let eps = 1e-3;
        let pattern = |t: f64| -> (f64, Vec<bool>) {
            let mut first = x[0].clone();
            first.scaled_add(t, &d);
            let views = [first.view(), x[1].view(), x[2].view()];
            let trace = model.member_trace(first.view()).unwrap();
            let signs = trace.pre_activations.iter().flat_map(|z| z.iter().map(|&v| v > 0.0)).collect();
            (model.forward(&views).unwrap().score, signs)
        };
        let (lo, p_lo) = pattern(-eps);
        let (mid, p_mid) = pattern(0.0);
        let (hi, p_hi) = pattern(eps);
        prop_assume!(p_lo == p_mid && p_mid == p_hi);
        prop_assert!((hi - 2.0 * mid + lo).abs() < 1e-9 * mid.abs().max(1.0));
    }
}

#[test]
fn monte_carlo_average_converges() {
    let mut rng = seeded(99);
    let n = 4;
    let features = Array2::from_shape_fn((40, n), |_| rng.random_range(0.0..1.0));
    let labelled: Vec<usize> = (0..8).collect();
    let unlabelled: Vec<usize> = (8..40).collect();
    let model = ScoringModel::new(n, &[6], 3, 0.0, 5).unwrap();
    let pools = ReferencePools {
        features: &features,
        labelled: &labelled,
        unlabelled: &unlabelled,
    };
    let mean_se = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0);
        (m, (var / v.len() as f64).sqrt())
    };
    for row in 0..10 {
        let record = features.row(row);
        let short = Scorer::new(&model, pools, 30).unwrap();
        let long = Scorer::new(&model, pools, 1000).unwrap();
        let (m30, se30) = mean_se(&short.repetition_scores(record, &mut seeded(row as u64)).unwrap());
        let (m1k, se1k) = mean_se(&long.repetition_scores(record, &mut seeded(1000 + row as u64)).unwrap());
        let bound = 3.0 * (se30 * se30 + se1k * se1k).sqrt();
        assert!((m30 - m1k).abs() <= bound.max(1e-12), "row {row}: {m30} vs {m1k} (bound {bound})");
    }
}

#[test]
fn table_one_enumeration() {
    for (k, expected) in [(3usize, vec![(12.0, 1), (8.0, 3), (4.0, 3), (0.0, 1)]), (2, vec![(8.0, 1), (4.0, 2), (0.0, 1)])] {
        let scheme = OrdinalLabelScheme::new(k, 4.0).unwrap();
        let mut counts = std::collections::BTreeMap::new();
        for bits in 0..(1u32 << k) {
            let tags: Vec<SourceTag> = (0..k)
                .map(|i| if bits >> i & 1 == 1 { SourceTag::Labelled } else { SourceTag::Unlabelled })
                .collect();
            *counts.entry(label_of_combination(&tags, &scheme) as i64).or_insert(0) += 1;
            let mut reversed = tags.clone();
            reversed.reverse();
            assert_eq!(label_of_combination(&reversed, &scheme), label_of_combination(&tags, &scheme));
        }
        let expected: std::collections::BTreeMap<i64, i32> =
            expected.into_iter().map(|(l, c)| (l as i64, c)).collect();
        assert_eq!(counts, expected);
    }
}

#[test]
fn random_scores_give_half_auroc() {
    let mut rng = seeded(3);
    let scores: Vec<(f64, bool)> = (0..20_000)
        .map(|_| (rng.random_range(0.0..1.0), rng.random_bool(0.1)))
        .collect();
    let a = auroc(&scores).unwrap();
    assert!((a - 0.5).abs() < 0.05, "{a}");
}
