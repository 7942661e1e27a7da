//! Test-time scoring: pair each test record `T` with random references and
//! average the combined score over repeated draws.
//!
//! For k = 3 one repetition scores the tuples `(a1, a2, T)` and `(T, u1, u2)`
//! with `a*` drawn from the labelled pool and `u*` from the unlabelled pool,
//! and records `S3 = S1 + S2`. An anomalous `T` ideally lands near
//! `C1 + C3`, a normal one near `C2 + C4`.

use std::path::Path;

use ndarray::{Array1, ArrayView1};
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augmentation::OrdinalLabelScheme;
use crate::error::{Error, Result};
use crate::model::ScoringModel;
use crate::rng::seeded;
use crate::FeatureMatrix;

pub const DEFAULT_REPETITIONS: usize = 30;

/// How the two reference scores of one repetition are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    #[default]
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub repetitions: usize,
    /// Decision threshold `AD_th`; predict anomaly iff `score >= threshold`.
    pub threshold: f64,
    #[serde(default)]
    pub combine: Combine,
    pub seed: u64,
}

impl InferenceConfig {
    pub fn for_scheme(scheme: &OrdinalLabelScheme, seed: u64) -> Self {
        Self {
            repetitions: DEFAULT_REPETITIONS,
            threshold: scheme.default_threshold(),
            combine: Combine::Sum,
            seed,
        }
    }
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self::for_scheme(&OrdinalLabelScheme::triplet(), 0)
    }
}

/// Predicted label: anomaly iff `score >= threshold`.
pub fn classify(score: f64, config: &InferenceConfig) -> bool {
    score >= config.threshold
}

/// Reference pools for inference: rows of `features` known to be anomalies
/// and rows from the training unlabelled pool.
#[derive(Debug, Clone, Copy)]
pub struct ReferencePools<'a> {
    pub features: &'a FeatureMatrix,
    pub labelled: &'a [usize],
    pub unlabelled: &'a [usize],
}

/// Model plus pre-computed sub-network outputs of every reference row.
pub struct Scorer<'m> {
    model: &'m ScoringModel,
    labelled: Vec<Array1<f64>>,
    unlabelled: Vec<Array1<f64>>,
    repetitions: usize,
}

impl<'m> Scorer<'m> {
    pub fn new(model: &'m ScoringModel, pools: ReferencePools<'_>, repetitions: usize) -> Result<Self> {
        let refs = model.arity() - 1;
        if repetitions == 0 {
            return Err(Error::InvalidConfig("repetitions must be >= 1".into()));
        }
        if pools.labelled.len() < refs.max(1) {
            return Err(Error::InsufficientRows {
                class: "labelled reference",
                needed: refs.max(1),
                available: pools.labelled.len(),
            });
        }
        if pools.unlabelled.len() < refs.max(1) {
            return Err(Error::InsufficientRows {
                class: "unlabelled reference",
                needed: refs.max(1),
                available: pools.unlabelled.len(),
            });
        }
        let embed = |rows: &[usize]| -> Result<Vec<Array1<f64>>> {
            rows.iter()
                .map(|&i| {
                    if i >= pools.features.nrows() {
                        return Err(Error::DimensionMismatch {
                            expected: pools.features.nrows(),
                            actual: i,
                        });
                    }
                    model.embed(pools.features.row(i))
                })
                .collect()
        };
        Ok(Self {
            model,
            labelled: embed(pools.labelled)?,
            unlabelled: embed(pools.unlabelled)?,
            repetitions,
        })
    }

    /// Per-repetition combined scores `S3_r`.
    pub fn repetition_scores<R: Rng + ?Sized>(&self, record: ArrayView1<f64>, rng: &mut R) -> Result<Vec<f64>> {
        let t = self.model.embed(record)?;
        let refs = self.model.arity() - 1;
        let mut out = Vec::with_capacity(self.repetitions);
        let mut tuple: Vec<&Array1<f64>> = Vec::with_capacity(self.model.arity());
        for _ in 0..self.repetitions {
            tuple.clear();
            tuple.extend(index::sample(rng, self.labelled.len(), refs).into_iter().map(|i| &self.labelled[i]));
            tuple.push(&t);
            let s1 = self.model.score_embeddings(&tuple)?;

            tuple.clear();
            tuple.push(&t);
            tuple.extend(index::sample(rng, self.unlabelled.len(), refs).into_iter().map(|i| &self.unlabelled[i]));
            let s2 = self.model.score_embeddings(&tuple)?;

            out.push(s1 + s2);
        }
        Ok(out)
    }

    pub fn score<R: Rng + ?Sized>(&self, record: ArrayView1<f64>, rng: &mut R) -> Result<f64> {
        let reps = self.repetition_scores(record, rng)?;
        Ok(reps.iter().sum::<f64>() / reps.len() as f64)
    }
}

/// Mean combined score of one record, seeded from `config.seed`.
pub fn score_sample(
    model: &ScoringModel,
    record: ArrayView1<f64>,
    pools: ReferencePools<'_>,
    config: &InferenceConfig,
) -> Result<f64> {
    Scorer::new(model, pools, config.repetitions)?.score(record, &mut seeded(config.seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredRow {
    pub row_id: usize,
    pub score: f64,
    pub truth: bool,
}

/// Score every test row. Row `i` draws its references from a stream seeded
/// with `seed ^ row_ids[i]`, so results do not depend on row order.
pub fn score_dataset(
    model: &ScoringModel,
    test: &FeatureMatrix,
    row_ids: &[usize],
    truth: &[bool],
    pools: ReferencePools<'_>,
    config: &InferenceConfig,
) -> Result<Vec<ScoredRow>> {
    if row_ids.len() != test.nrows() || truth.len() != test.nrows() {
        return Err(Error::DimensionMismatch {
            expected: test.nrows(),
            actual: row_ids.len().min(truth.len()),
        });
    }
    if test.nrows() == 0 {
        return Ok(Vec::new());
    }
    let scorer = Scorer::new(model, pools, config.repetitions)?;
    (0..test.nrows())
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded(config.seed ^ row_ids[i] as u64);
            Ok(ScoredRow {
                row_id: row_ids[i],
                score: scorer.score(test.row(i), &mut rng)?,
                truth: truth[i],
            })
        })
        .collect()
}

/// `row_id,score,predicted,truth`
pub fn write_scores_csv(path: &Path, rows: &[ScoredRow], config: &InferenceConfig) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["row_id", "score", "predicted", "truth"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.row_id.to_string(),
            r.score.to_string(),
            u8::from(classify(r.score, config)).to_string(),
            u8::from(r.truth).to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Deserialize)]
struct ScoreRecord {
    row_id: usize,
    score: f64,
    truth: u8,
}

pub fn read_scores_csv(path: &Path) -> Result<Vec<ScoredRow>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize::<ScoreRecord>()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok(ScoredRow {
                row_id: rec.row_id,
                score: rec.score,
                truth: rec.truth != 0,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DenseLayer, Parameters};
    use ndarray::{array, Array2};

    /// Model whose score is the constant `c` for every tuple.
    fn constant_model(c: f64) -> ScoringModel {
        ScoringModel::from_parameters(
            3,
            0.0,
            Parameters {
                hidden: vec![DenseLayer {
                    weights: Array2::zeros((2, 2)),
                    bias: Array1::zeros(2),
                }],
                head_weights: Array1::zeros(6),
                head_bias: c,
            },
        )
        .unwrap()
    }

    #[test]
    fn constant_model_scores_twice_constant() {
        let x = Array2::from_elem((5, 2), 0.5);
        let (a, u) = (vec![0, 1], vec![2, 3, 4]);
        let m = constant_model(1.75);
        let cfg = InferenceConfig {
            repetitions: 1,
            ..InferenceConfig::default()
        };
        let p = ReferencePools {
            features: &x,
            labelled: &a,
            unlabelled: &u,
        };
        assert_eq!(score_sample(&m, x.row(0), p, &cfg).unwrap(), 3.5);
        let rows = score_dataset(&m, &x, &[0, 1, 2, 3, 4], &[false; 5], p, &cfg).unwrap();
        assert!(rows.iter().all(|r| r.score == 3.5));
    }

    #[test]
    fn classification_boundary_is_inclusive() {
        let cfg = InferenceConfig::default();
        assert_eq!(cfg.threshold, 12.0);
        assert!(classify(16.0, &cfg));
        assert!(!classify(8.0, &cfg));
        assert!(classify(12.0, &cfg));
    }

    #[test]
    fn pool_size_checks() {
        let x = Array2::from_elem((5, 2), 0.5);
        let m = constant_model(0.0);
        let p = ReferencePools {
            features: &x,
            labelled: &[0],
            unlabelled: &[1, 2],
        };
        assert!(score_sample(&m, x.row(0), p, &InferenceConfig::default()).is_err());
        let p = ReferencePools {
            features: &x,
            labelled: &[0, 1],
            unlabelled: &[2],
        };
        assert!(score_sample(&m, x.row(0), p, &InferenceConfig::default()).is_err());
    }

    #[test]
    fn empty_test_set() {
        let x = Array2::from_elem((5, 2), 0.5);
        let m = constant_model(0.0);
        let p = ReferencePools {
            features: &x,
            labelled: &[0, 1],
            unlabelled: &[2, 3],
        };
        let empty = Array2::zeros((0, 2));
        assert!(score_dataset(&m, &empty, &[], &[], p, &InferenceConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn scores_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let rows = vec![
            ScoredRow { row_id: 3, score: 15.125, truth: true },
            ScoredRow { row_id: 9, score: -0.5, truth: false },
        ];
        write_scores_csv(&path, &rows, &InferenceConfig::default()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("row_id,score,predicted,truth\n3,15.125,1,1\n"));
        assert_eq!(read_scores_csv(&path).unwrap(), rows);
    }

    #[test]
    fn row_order_independence() {
        let x = array![[0.1, 0.9], [0.8, 0.2], [0.3, 0.3], [0.6, 0.5], [0.9, 0.9], [0.2, 0.7]];
        let m = ScoringModel::new(2, &[4], 3, 0.0, 3).unwrap();
        let p = ReferencePools {
            features: &x,
            labelled: &[0, 1],
            unlabelled: &[2, 3],
        };
        let cfg = InferenceConfig::default();
        let test = x.select(ndarray::Axis(0), &[4, 5]);
        let fwd = score_dataset(&m, &test, &[4, 5], &[true, false], p, &cfg).unwrap();
        let rev_test = x.select(ndarray::Axis(0), &[5, 4]);
        let rev = score_dataset(&m, &rev_test, &[5, 4], &[false, true], p, &cfg).unwrap();
        assert_eq!(fwd[0], rev[1]);
        assert_eq!(fwd[1], rev[0]);
    }
}
