//! Training-instance augmentation: ordered k-tuples of rows drawn from the
//! labelled anomaly pool `A` and the unlabelled pool `U`, labelled by how many
//! members came from `A`.
//!
//! With k = 3 the eight `{A, U}` patterns collapse onto four ordinal targets:
//!
//! | A members | patterns            | target |
//! |-----------|---------------------|--------|
//! | 3         | AAA                 | 3m     |
//! | 2         | AAU, AUA, UAA       | 2m     |
//! | 1         | AUU, UAU, UUA       | m      |
//! | 0         | UUU                 | 0      |
//!
//! k = 2 gives the pair baseline with targets {2m, m, 0}.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GAP: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SourceTag {
    #[serde(rename = "A")]
    Labelled,
    #[serde(rename = "U")]
    Unlabelled,
}

/// Equally spaced ordinal targets `k·m > (k-1)·m > ... > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrdinalLabelScheme {
    arity: usize,
    gap: f64,
}

impl OrdinalLabelScheme {
    pub fn new(arity: usize, gap: f64) -> Result<Self> {
        if !(2..=3).contains(&arity) {
            return Err(Error::InvalidConfig(format!(
                "tuple size must be 2 or 3, got {arity}"
            )));
        }
        if !(gap.is_finite() && gap > 0.0) {
            return Err(Error::InvalidConfig(format!("gap must be positive, got {gap}")));
        }
        Ok(Self { arity, gap })
    }

    pub fn triplet() -> Self {
        Self {
            arity: 3,
            gap: DEFAULT_GAP,
        }
    }

    pub fn pair() -> Self {
        Self {
            arity: 2,
            gap: DEFAULT_GAP,
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn class_count(&self) -> usize {
        self.arity + 1
    }

    /// Targets in descending order: `[C1, C2, ..., C(k+1)]`.
    pub fn labels(&self) -> Vec<f64> {
        (0..=self.arity)
            .rev()
            .map(|a| self.label_for_anomaly_count(a))
            .collect()
    }

    pub fn label_for_anomaly_count(&self, count: usize) -> f64 {
        debug_assert!(count <= self.arity);
        count as f64 * self.gap
    }

    /// Expected test-time score of an anomalous record under a perfect model:
    /// the all-`A` target plus the one-`A` target.
    pub fn ideal_anomaly_score(&self) -> f64 {
        self.label_for_anomaly_count(self.arity) + self.label_for_anomaly_count(1)
    }

    /// Expected test-time score of a normal record under a perfect model.
    pub fn ideal_normal_score(&self) -> f64 {
        self.label_for_anomaly_count(self.arity - 1) + self.label_for_anomaly_count(0)
    }

    /// Midpoint of the two ideal scores. For k = 3 this equals
    /// `(C1 + C2 + C3 + C4) / 2`.
    pub fn default_threshold(&self) -> f64 {
        0.5 * (self.ideal_anomaly_score() + self.ideal_normal_score())
    }
}

impl Default for OrdinalLabelScheme {
    fn default() -> Self {
        Self::triplet()
    }
}

/// Ordinal target of a tag pattern; depends only on the number of `A` tags.
///
/// Panics if `tags.len()` differs from the scheme's tuple size.
pub fn label_of_combination(tags: &[SourceTag], scheme: &OrdinalLabelScheme) -> f64 {
    assert_eq!(tags.len(), scheme.arity(), "tag pattern length");
    let count = tags.iter().filter(|&&t| t == SourceTag::Labelled).count();
    scheme.label_for_anomaly_count(count)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedInstance {
    /// Row indices into the training feature matrix, in tuple order.
    pub members: Vec<usize>,
    pub tags: Vec<SourceTag>,
    pub label: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedBatch {
    pub instances: Vec<AugmentedInstance>,
}

impl AugmentedBatch {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchComposition {
    /// Equal instance count per ordinal class.
    #[default]
    Balanced,
    /// Every member drawn uniformly from `A ∪ U`; dominated by the all-`U` class.
    Uniform,
}

/// Draw one batch of augmented instances. Members are drawn with replacement
/// across instances; under `Balanced`, the positions of the `A` members within
/// a tuple are a uniform choice among the class's permutations.
pub fn sample_batch<R: Rng + ?Sized>(
    labelled: &[usize],
    unlabelled: &[usize],
    scheme: &OrdinalLabelScheme,
    batch_size: usize,
    composition: BatchComposition,
    rng: &mut R,
) -> Result<AugmentedBatch> {
    let k = scheme.arity();
    if labelled.is_empty() {
        return Err(Error::Empty("labelled anomaly pool"));
    }
    if unlabelled.len() < k {
        return Err(Error::Empty("unlabelled pool smaller than the tuple size"));
    }
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".into()));
    }

    let mut instances = Vec::with_capacity(batch_size);
    match composition {
        BatchComposition::Balanced => {
            let classes = scheme.class_count();
            if batch_size % classes != 0 {
                return Err(Error::InvalidConfig(format!(
                    "batch size {batch_size} is not a multiple of {classes} classes"
                )));
            }
            let per_class = batch_size / classes;
            for anomaly_count in (0..=k).rev() {
                for _ in 0..per_class {
                    let mut tags = vec![SourceTag::Unlabelled; k];
                    for pos in index::sample(rng, k, anomaly_count) {
                        tags[pos] = SourceTag::Labelled;
                    }
                    instances.push(draw_members(tags, labelled, unlabelled, scheme, rng));
                }
            }
        }
        BatchComposition::Uniform => {
            let total = labelled.len() + unlabelled.len();
            for _ in 0..batch_size {
                let mut members = Vec::with_capacity(k);
                let mut tags = Vec::with_capacity(k);
                for _ in 0..k {
                    let r = rng.random_range(0..total);
                    if r < labelled.len() {
                        members.push(labelled[r]);
                        tags.push(SourceTag::Labelled);
                    } else {
                        members.push(unlabelled[r - labelled.len()]);
                        tags.push(SourceTag::Unlabelled);
                    }
                }
                let label = label_of_combination(&tags, scheme);
                instances.push(AugmentedInstance {
                    members,
                    tags,
                    label,
                });
            }
        }
    }
    Ok(AugmentedBatch { instances })
}

fn draw_members<R: Rng + ?Sized>(
    tags: Vec<SourceTag>,
    labelled: &[usize],
    unlabelled: &[usize],
    scheme: &OrdinalLabelScheme,
    rng: &mut R,
) -> AugmentedInstance {
    let members = tags
        .iter()
        .map(|t| match t {
            SourceTag::Labelled => labelled[rng.random_range(0..labelled.len())],
            SourceTag::Unlabelled => unlabelled[rng.random_range(0..unlabelled.len())],
        })
        .collect();
    let label = label_of_combination(&tags, scheme);
    AugmentedInstance {
        members,
        tags,
        label,
    }
}
