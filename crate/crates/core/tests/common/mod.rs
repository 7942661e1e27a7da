#![allow(dead_code)]

use fswad_core::augmentation::{AugmentedBatch, AugmentedInstance, OrdinalLabelScheme, SourceTag};
use fswad_core::model::ScoringModel;
use fswad_core::FeatureMatrix;
use ndarray::Array2;
use rand::Rng;

/// Pairwise Mann-Whitney AUROC, half credit for ties, O(n²).
pub fn pairwise_auroc(scores: &[(f64, bool)]) -> f64 {
    let mut twice_wins = 0u64;
    let mut pairs = 0u64;
    for &(a, ya) in scores {
        if !ya {
            continue;
        }
        for &(b, yb) in scores {
            if yb {
                continue;
            }
            pairs += 1;
            if a > b {
                twice_wins += 2;
            } else if a == b {
                twice_wins += 1;
            }
        }
    }
    twice_wins as f64 / (2 * pairs) as f64
}

/// A small random model, feature matrix and labelled batch.
pub fn random_problem<R: Rng>(rng: &mut R) -> (ScoringModel, AugmentedBatch, FeatureMatrix) {
    let n = rng.random_range(3..=10);
    let h = rng.random_range(1..=8);
    let k = rng.random_range(2..=3);
    let rows = rng.random_range(6..=12);
    let lambda = rng.random_range(0.0..0.05);
    let model = ScoringModel::new(n, &[h], k, lambda, rng.random()).unwrap();
    let features = Array2::from_shape_fn((rows, n), |_| rng.random_range(0.0..1.0));
    let scheme = OrdinalLabelScheme::new(k, 4.0).unwrap();
    let batch_len = rng.random_range(1..=8);
    let instances = (0..batch_len)
        .map(|_| {
            let tags: Vec<SourceTag> = (0..k)
                .map(|_| {
                    if rng.random_bool(0.5) {
                        SourceTag::Labelled
                    } else {
                        SourceTag::Unlabelled
                    }
                })
                .collect();
            let count = tags.iter().filter(|&&t| t == SourceTag::Labelled).count();
            AugmentedInstance {
                members: (0..k).map(|_| rng.random_range(0..rows)).collect(),
                label: scheme.label_for_anomaly_count(count),
                tags,
            }
        })
        .collect();
    (model, AugmentedBatch { instances }, features)
}

/// Which side of every kink (ReLU inputs, loss residuals) the batch sits on.
fn kink_pattern(model: &ScoringModel, batch: &AugmentedBatch, features: &FeatureMatrix) -> Vec<i8> {
    let side = |v: f64| (v > 0.0) as i8 - (v < 0.0) as i8;
    let mut out = Vec::new();
    for inst in &batch.instances {
        let rows: Vec<_> = inst.members.iter().map(|&i| features.row(i)).collect();
        for r in &rows {
            for z in model.member_trace(*r).unwrap().pre_activations {
                out.extend(z.iter().map(|&v| side(v)));
            }
        }
        out.push(side(inst.label - model.forward(&rows).unwrap().score));
    }
    out
}

/// Central finite-difference check of every parameter. Returns the largest
/// relative error `|a - n| / max(|a|, |n|, 1e-4)`, or `None` when a ±eps step
/// crosses a kink (the draw should be replaced).
pub fn finite_difference_check(
    model: &ScoringModel,
    batch: &AugmentedBatch,
    features: &FeatureMatrix,
    eps: f64,
) -> Option<f64> {
    let analytic: Vec<f64> = model.backward(batch, features).unwrap().iter().copied().collect();
    let base = kink_pattern(model, batch, features);
    let mut worst: f64 = 0.0;
    for (j, &a) in analytic.iter().enumerate() {
        let eval = |delta: f64| {
            let mut m = model.clone();
            let mut p = m.params().clone();
            *p.iter_mut().nth(j).unwrap() += delta;
            m.set_params(p).unwrap();
            (kink_pattern(&m, batch, features) == base).then(|| m.objective(batch, features).unwrap())
        };
        let plus = eval(eps)?;
        let minus = eval(-eps)?;
        let numeric = (plus - minus) / (2.0 * eps);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-4);
        worst = worst.max(rel);
    }
    Some(worst)
}
