//! SampleSet construction: disjoint random subsets with a small labelled
//! anomaly pool, a contaminated unlabelled pool, and a stratified test split.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::EncodedDataset;
use crate::rng::seeded;

pub const DEFAULT_TEST_FRACTION: f64 = 2.0 / 9.0;

/// Largest labelled pool allowed relative to the normal count.
pub const MAX_LABELLED_FRACTION: f64 = 0.1;

/// Allowed gap between the realised and target contamination, in percentage points.
pub const CONTAMINATION_TOLERANCE: f64 = 0.5;

fn default_test_fraction() -> f64 {
    DEFAULT_TEST_FRACTION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSetSpec {
    pub normal_count: usize,
    pub anomaly_total: usize,
    pub labelled_count: usize,
    /// Target anomaly percentage of the available set D.
    pub anomaly_percent: f64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    /// Label values that may not be drawn into the labelled pool.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exclude_attack_families: Vec<String>,
}

impl SampleSetSpec {
    /// Size of the available set D = N + A_total - A_labelled.
    pub fn available_size(&self) -> usize {
        self.normal_count + self.anomaly_total - self.labelled_count
    }

    /// Anomaly percentage of D.
    pub fn contamination_percent(&self) -> f64 {
        let hidden = self.anomaly_total.saturating_sub(self.labelled_count);
        100.0 * hidden as f64 / self.available_size() as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.normal_count == 0 {
            return bad("normal_count must be positive".into());
        }
        if self.labelled_count == 0 {
            return bad("labelled_count must be positive".into());
        }
        if self.labelled_count > self.anomaly_total {
            return bad(format!(
                "labelled_count {} exceeds anomaly_total {}",
                self.labelled_count, self.anomaly_total
            ));
        }
        if self.labelled_count as f64 > MAX_LABELLED_FRACTION * self.normal_count as f64 {
            return bad(format!(
                "labelled_count {} is not small against normal_count {}",
                self.labelled_count, self.normal_count
            ));
        }
        let realised = self.contamination_percent();
        if (realised - self.anomaly_percent).abs() > CONTAMINATION_TOLERANCE {
            return bad(format!(
                "contamination {realised:.2}% is off target {:.2}%",
                self.anomaly_percent
            ));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction {} outside (0, 1)", self.test_fraction));
        }
        Ok(())
    }
}

/// One experimental unit. All index lists point into the source dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSet {
    pub index: usize,
    /// Labelled anomaly pool A, in draw order.
    pub labelled: Vec<usize>,
    /// Unlabelled training pool U (contaminated; labels never consulted in training).
    pub unlabelled: Vec<usize>,
    /// Held-out evaluation rows.
    pub test: Vec<usize>,
    /// Labelled-pool reservations not used by this run.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reserved: Vec<usize>,
}

impl SampleSet {
    /// Keep the first `count` labelled anomalies; the rest move to `reserved`
    /// and take no part in training or evaluation.
    pub fn restrict_labelled(&self, count: usize) -> Result<SampleSet> {
        if count == 0 || count > self.labelled.len() {
            return Err(Error::InvalidSpec(format!(
                "cannot use {count} labelled anomalies from a pool of {}",
                self.labelled.len()
            )));
        }
        let mut out = self.clone();
        let extra = out.labelled.split_off(count);
        out.reserved.extend(extra);
        Ok(out)
    }

    pub fn training_rows(&self) -> Vec<usize> {
        self.labelled.iter().chain(&self.unlabelled).copied().collect()
    }
}

/// Draw `count` pairwise-disjoint SampleSets with `spec.normal_count` normals
/// and `spec.anomaly_total` anomalies each. The test partition is left empty;
/// see [`split_train_test`].
pub fn build_sample_sets(
    dataset: &EncodedDataset,
    spec: &SampleSetSpec,
    count: usize,
) -> Result<Vec<SampleSet>> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::InvalidSpec("count must be positive".into()));
    }
    let mut normals = dataset.normal_rows();
    let mut anomalies = dataset.anomaly_rows();
    let need_normals = count * spec.normal_count;
    let need_anomalies = count * spec.anomaly_total;
    if normals.len() < need_normals {
        return Err(Error::InsufficientRows {
            class: "normal",
            needed: need_normals,
            available: normals.len(),
        });
    }
    if anomalies.len() < need_anomalies {
        return Err(Error::InsufficientRows {
            class: "anomaly",
            needed: need_anomalies,
            available: anomalies.len(),
        });
    }

    let mut rng = seeded(spec.seed);
    normals.shuffle(&mut rng);
    anomalies.shuffle(&mut rng);

    let mut sets = Vec::with_capacity(count);
    for i in 0..count {
        let set_normals = &normals[i * spec.normal_count..(i + 1) * spec.normal_count];
        let set_anomalies = &anomalies[i * spec.anomaly_total..(i + 1) * spec.anomaly_total];

        let (labelled, hidden): (Vec<usize>, Vec<usize>) = if spec.exclude_attack_families.is_empty() {
            (
                set_anomalies[..spec.labelled_count].to_vec(),
                set_anomalies[spec.labelled_count..].to_vec(),
            )
        } else {
            let mut labelled = Vec::with_capacity(spec.labelled_count);
            let mut hidden = Vec::new();
            for &row in set_anomalies {
                let excluded = spec
                    .exclude_attack_families
                    .contains(&dataset.label_values[row]);
                if !excluded && labelled.len() < spec.labelled_count {
                    labelled.push(row);
                } else {
                    hidden.push(row);
                }
            }
            if labelled.len() < spec.labelled_count {
                return Err(Error::InsufficientRows {
                    class: "eligible labelled anomaly",
                    needed: spec.labelled_count,
                    available: labelled.len(),
                });
            }
            (labelled, hidden)
        };

        let mut available: Vec<usize> = set_normals.iter().copied().chain(hidden).collect();
        available.sort_unstable();
        sets.push(SampleSet {
            index: i,
            labelled,
            unlabelled: available,
            test: Vec::new(),
            reserved: Vec::new(),
        });
    }
    Ok(sets)
}

/// Move a stratified test split out of the available set (currently held in
/// `unlabelled`). The test side receives `floor(fraction * |D|)` rows of which
/// `round(fraction * anomalies_in_D)` are anomalies. The labelled pool is
/// never touched.
pub fn split_train_test(
    sample_set: &SampleSet,
    dataset: &EncodedDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<SampleSet> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidSpec(format!(
            "test_fraction {test_fraction} outside (0, 1)"
        )));
    }
    let pool: Vec<usize> = sample_set
        .unlabelled
        .iter()
        .chain(&sample_set.test)
        .copied()
        .collect();
    let (mut anomalies, mut normals): (Vec<usize>, Vec<usize>) =
        pool.iter().partition(|&&i| dataset.is_anomaly[i]);

    let test_size = (test_fraction * pool.len() as f64 + 1e-9).floor() as usize;
    if test_size == 0 || test_size >= pool.len() {
        return Err(Error::InvalidSpec(format!(
            "test_fraction {test_fraction} on {} rows leaves an empty side",
            pool.len()
        )));
    }
    let test_anomalies = ((test_fraction * anomalies.len() as f64).round() as usize)
        .min(anomalies.len())
        .min(test_size);
    let test_normals = test_size - test_anomalies;
    if test_normals > normals.len() {
        return Err(Error::InsufficientRows {
            class: "normal (test split)",
            needed: test_normals,
            available: normals.len(),
        });
    }

    let mut rng = seeded(seed);
    anomalies.shuffle(&mut rng);
    normals.shuffle(&mut rng);

    let mut test: Vec<usize> = anomalies[..test_anomalies]
        .iter()
        .chain(&normals[..test_normals])
        .copied()
        .collect();
    let mut train: Vec<usize> = anomalies[test_anomalies..]
        .iter()
        .chain(&normals[test_normals..])
        .copied()
        .collect();
    test.sort_unstable();
    train.sort_unstable();

    Ok(SampleSet {
        unlabelled: train,
        test,
        ..sample_set.clone()
    })
}

/// On-disk record of one SampleSet, enough to replay training and scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSetManifest {
    /// Prepared dataset the indices refer to.
    pub dataset: String,
    /// Seed the run was started with.
    #[serde(default)]
    pub base_seed: u64,
    pub schema_hash: String,
    pub spec: SampleSetSpec,
    pub split_seed: u64,
    pub sample_set: SampleSet,
}

impl SampleSetManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
