//! End-to-end experiment runner: SampleSets, one model per SampleSet and
//! method, scoring of the held-out split, and aggregation over SampleSets.

mod registry;
mod tables;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augmentation::{OrdinalLabelScheme, DEFAULT_GAP};
use crate::error::{Error, Result};
use crate::evaluation::{aggregate, evaluate, AggregateReport, EvaluationReport};
use crate::inference::{score_dataset, InferenceConfig, ReferencePools, ScoredRow, DEFAULT_REPETITIONS};
use crate::ingest::{apply_normalize, fit_normalize, EncodedDataset, NormalizationStats};
use crate::model::ScoringModel;
use crate::rng::SeedPath;
use crate::sampling::{
    build_sample_sets, split_train_test, SampleSet, SampleSetManifest, SampleSetSpec,
    CONTAMINATION_TOLERANCE, DEFAULT_TEST_FRACTION,
};
use crate::trainer::{train, TrainConfig, TrainingLog, TrainingPools};

pub use registry::{builtin_schema, DatasetConfig, BUILTIN_DATASETS};
pub use tables::{confusion_table_csv, metrics_table_csv, runs_csv, write_outputs};

/// Tuple arity of the scoring network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// k = 3.
    Triplet,
    /// k = 2 baseline.
    Pair,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Triplet => "triplet",
            Method::Pair => "pair",
        }
    }

    pub fn scheme(self, gap: f64) -> Result<OrdinalLabelScheme> {
        match self {
            Method::Triplet => OrdinalLabelScheme::new(3, gap),
            Method::Pair => OrdinalLabelScheme::new(2, gap),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "triplet" | "3" => Ok(Method::Triplet),
            "pair" | "2" => Ok(Method::Pair),
            other => Err(Error::InvalidConfig(format!(
                "unknown method `{other}` (expected triplet or pair)"
            ))),
        }
    }
}

/// Everything that shapes one train/score/evaluate run apart from the data
/// and the seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Ordinal label gap `m`.
    pub gap: f64,
    pub train: TrainConfig,
    pub repetitions: usize,
    /// Decision threshold; defaults to the scheme's midpoint.
    pub threshold: Option<f64>,
    pub test_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            gap: DEFAULT_GAP,
            train: TrainConfig::default(),
            repetitions: DEFAULT_REPETITIONS,
            threshold: None,
            test_fraction: DEFAULT_TEST_FRACTION,
        }
    }
}

impl PipelineConfig {
    pub fn threshold_for(&self, scheme: &OrdinalLabelScheme) -> f64 {
        self.threshold.unwrap_or_else(|| scheme.default_threshold())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub train: u64,
    pub inference: u64,
}

pub struct RunOutcome {
    pub model: ScoringModel,
    pub normalization: NormalizationStats,
    pub log: TrainingLog,
    pub scores: Vec<ScoredRow>,
    pub threshold: f64,
    pub report: EvaluationReport,
}

/// Fit normalization on A ∪ U, train, score the test rows and evaluate.
/// Ground truth of U rows is never read; test truth is used only for the report.
pub fn run_sample_set(
    dataset: &EncodedDataset,
    set: &SampleSet,
    method: Method,
    pipeline: &PipelineConfig,
    seeds: RunSeeds,
) -> Result<RunOutcome> {
    let scheme = method.scheme(pipeline.gap)?;
    if set.test.is_empty() {
        return Err(Error::Empty("test split"));
    }
    let train_rows = set.training_rows();
    let (train_data, stats) = fit_normalize(&dataset.select_rows(&train_rows))?;
    let test_data = apply_normalize(&dataset.select_rows(&set.test), &stats)?;

    let n_labelled = set.labelled.len();
    let pools = TrainingPools {
        labelled: (0..n_labelled).collect(),
        unlabelled: (n_labelled..train_rows.len()).collect(),
    };
    let train_config = TrainConfig {
        seed: seeds.train,
        ..pipeline.train.clone()
    };
    let (model, log) = train(&train_data.features, &pools, &scheme, &train_config)?;

    let threshold = pipeline.threshold_for(&scheme);
    let inference = InferenceConfig {
        repetitions: pipeline.repetitions,
        threshold,
        seed: seeds.inference,
        ..InferenceConfig::for_scheme(&scheme, seeds.inference)
    };
    let refs = ReferencePools {
        features: &train_data.features,
        labelled: &pools.labelled,
        unlabelled: &pools.unlabelled,
    };
    let scores = score_dataset(
        &model,
        &test_data.features,
        &set.test,
        &test_data.is_anomaly,
        refs,
        &inference,
    )?;
    let report = evaluate(&scores, threshold)?;
    Ok(RunOutcome {
        model,
        normalization: stats,
        log,
        scores,
        threshold,
        report,
    })
}

/// Rescale the anomaly total so the available set reaches `percent`%
/// contamination with `normal_count` and `labelled_count` unchanged.
pub fn vary_anomaly_percent(spec: &SampleSetSpec, percent: f64) -> Result<SampleSetSpec> {
    if !(percent > 0.0 && percent < 50.0) {
        return Err(Error::InvalidSpec(format!("anomaly percent {percent} outside (0, 50)")));
    }
    let hidden = (spec.normal_count as f64 * percent / (100.0 - percent)).round() as usize;
    if hidden < 1 {
        return Err(Error::InvalidSpec(format!(
            "{percent}% of {} normals leaves no hidden anomalies",
            spec.normal_count
        )));
    }
    Ok(SampleSetSpec {
        anomaly_total: hidden + spec.labelled_count,
        anomaly_percent: percent,
        ..spec.clone()
    })
}

/// Grow the labelled reservation to `reserve` without changing D.
fn with_reservation(spec: &SampleSetSpec, reserve: usize) -> SampleSetSpec {
    if reserve <= spec.labelled_count {
        return spec.clone();
    }
    SampleSetSpec {
        anomaly_total: spec.anomaly_total + reserve - spec.labelled_count,
        labelled_count: reserve,
        ..spec.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// 1: fixed labelled count and contamination; 2: labelled sweep;
    /// 3: contamination sweep.
    pub experiment_id: u8,
    pub dataset: String,
    pub labelled_anomaly_counts: Vec<usize>,
    pub anomaly_percents: Vec<f64>,
    pub fixed_labelled: usize,
    pub fixed_percent: f64,
    pub sample_set_count: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
    pub pipeline: PipelineConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment_id: 1,
            dataset: "nslkdd".into(),
            labelled_anomaly_counts: vec![30, 60, 120],
            anomaly_percents: vec![2.0, 5.0, 10.0],
            fixed_labelled: 60,
            fixed_percent: 10.0,
            sample_set_count: 5,
            methods: vec![Method::Triplet, Method::Pair],
            seed: 0,
            jobs: 0,
            pipeline: PipelineConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(1..=3).contains(&self.experiment_id) {
            return bad(format!("experiment id {} not in 1..=3", self.experiment_id));
        }
        if self.labelled_anomaly_counts.is_empty() || self.labelled_anomaly_counts.contains(&0) {
            return bad("labelled_anomaly_counts must be non-empty and positive".into());
        }
        if self.anomaly_percents.is_empty() || self.anomaly_percents.iter().any(|p| !(*p > 0.0)) {
            return bad("anomaly_percents must be non-empty and positive".into());
        }
        if self.fixed_labelled == 0 || !(self.fixed_percent > 0.0) {
            return bad("fixed labelled count and percent must be positive".into());
        }
        if self.sample_set_count == 0 {
            return bad("sample_set_count must be positive".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        Ok(())
    }

    /// Column heading of the sweep variable in result tables.
    pub fn sweep_name(&self) -> &'static str {
        if self.experiment_id == 3 {
            "anomaly_percent"
        } else {
            "labelled"
        }
    }
}

/// One value of the swept variable with the SampleSet spec it draws from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Display form of the swept value (`60`, `2`).
    pub value: String,
    pub labelled: usize,
    pub spec: SampleSetSpec,
}

impl SweepPoint {
    pub fn key(&self, config: &ExperimentConfig) -> String {
        format!("{}_{}", config.sweep_name(), self.value)
    }
}

fn fmt_value(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        v.to_string()
    }
}

pub fn sweep_points(config: &ExperimentConfig, base: &SampleSetSpec) -> Result<Vec<SweepPoint>> {
    config.validate()?;
    let points = match config.experiment_id {
        1 => {
            let mut spec = with_reservation(base, config.fixed_labelled);
            if (spec.contamination_percent() - config.fixed_percent).abs() > CONTAMINATION_TOLERANCE {
                spec = vary_anomaly_percent(&spec, config.fixed_percent)?;
            }
            vec![SweepPoint {
                value: config.fixed_labelled.to_string(),
                labelled: config.fixed_labelled,
                spec,
            }]
        }
        2 => {
            let reserve = *config.labelled_anomaly_counts.iter().max().expect("validated");
            let spec = with_reservation(base, reserve);
            config
                .labelled_anomaly_counts
                .iter()
                .map(|&l| SweepPoint {
                    value: l.to_string(),
                    labelled: l,
                    spec: spec.clone(),
                })
                .collect()
        }
        _ => {
            let fixed = SampleSetSpec {
                anomaly_total: base.anomaly_total - base.labelled_count + config.fixed_labelled,
                labelled_count: config.fixed_labelled,
                ..base.clone()
            };
            config
                .anomaly_percents
                .iter()
                .map(|&p| {
                    Ok(SweepPoint {
                        value: fmt_value(p),
                        labelled: config.fixed_labelled,
                        spec: vary_anomaly_percent(&fixed, p)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    for p in &points {
        p.spec.validate()?;
    }
    Ok(points)
}

/// Seed of the SampleSet draw. Depends only on the spec, so sweep points that
/// share a spec share their SampleSets (and test splits).
pub fn sample_set_seed(base_seed: u64, dataset: &str, spec: &SampleSetSpec) -> u64 {
    SeedPath::new(base_seed)
        .push(dataset)
        .push("samplesets")
        .push(spec.normal_count)
        .push(spec.anomaly_total)
        .push(spec.labelled_count)
        .push(spec.test_fraction)
        .finish()
}

pub fn run_seeds(base_seed: u64, dataset: &str, point_key: &str, index: usize, method: Method) -> RunSeeds {
    let path = SeedPath::new(base_seed)
        .push(dataset)
        .push(point_key)
        .push(index)
        .push(method.name());
    RunSeeds {
        train: path.clone().push("train").finish(),
        inference: path.push("score").finish(),
    }
}

/// Draw the SampleSets of one sweep point, split them and restrict the
/// labelled pool. Returns one manifest per SampleSet.
pub fn prepare_sample_sets(
    dataset: &EncodedDataset,
    dataset_id: &str,
    point: &SweepPoint,
    config: &ExperimentConfig,
) -> Result<Vec<SampleSetManifest>> {
    let seed = sample_set_seed(config.seed, dataset_id, &point.spec);
    let spec = SampleSetSpec {
        seed,
        test_fraction: config.pipeline.test_fraction,
        ..point.spec.clone()
    };
    let sets = build_sample_sets(dataset, &spec, config.sample_set_count)?;
    sets.iter()
        .map(|set| {
            let split_seed = SeedPath::new(seed).push("split").push(set.index).finish();
            let split = split_train_test(set, dataset, spec.test_fraction, split_seed)?;
            Ok(SampleSetManifest {
                dataset: dataset_id.to_string(),
                base_seed: config.seed,
                schema_hash: dataset.provenance.schema_hash.clone(),
                spec: spec.clone(),
                split_seed,
                sample_set: split.restrict_labelled(point.labelled)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub sample_set: usize,
    pub method: Method,
    pub seeds: RunSeeds,
    pub threshold: f64,
    pub report: EvaluationReport,
    pub log: TrainingLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub aggregate: AggregateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub point: SweepPoint,
    pub key: String,
    pub seed: u64,
    pub manifests: Vec<SampleSetManifest>,
    /// Ordered by method, then SampleSet index.
    pub runs: Vec<RunRecord>,
    pub summaries: Vec<MethodSummary>,
}

impl PointResult {
    pub fn summary(&self, method: Method) -> Option<&AggregateReport> {
        self.summaries
            .iter()
            .find(|s| s.method == method)
            .map(|s| &s.aggregate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub points: Vec<PointResult>,
}

impl ExperimentResult {
    pub fn point(&self, value: &str) -> Option<&PointResult> {
        self.points.iter().find(|p| p.point.value == value)
    }
}

/// Run every (sweep point, SampleSet, method) job. Jobs run in parallel; the
/// result is independent of scheduling.
pub fn run_experiment(
    config: &ExperimentConfig,
    dataset: &EncodedDataset,
    base: &SampleSetSpec,
) -> Result<ExperimentResult> {
    let points = sweep_points(config, base)?;
    let prepared: Vec<(SweepPoint, String, Vec<SampleSetManifest>)> = points
        .into_iter()
        .map(|p| {
            let manifests = prepare_sample_sets(dataset, &config.dataset, &p, config)?;
            let key = p.key(config);
            Ok((p, key, manifests))
        })
        .collect::<Result<_>>()?;

    let mut methods = config.methods.clone();
    methods.sort();
    methods.dedup();
    let jobs: Vec<(usize, Method, usize)> = prepared
        .iter()
        .enumerate()
        .flat_map(|(pi, (_, _, manifests))| {
            let methods = &methods;
            methods
                .iter()
                .flat_map(move |&m| (0..manifests.len()).map(move |si| (pi, m, si)))
        })
        .collect();

    let run_job = |&(pi, method, si): &(usize, Method, usize)| -> Result<RunRecord> {
        let (_, key, manifests) = &prepared[pi];
        let set = &manifests[si].sample_set;
        let seeds = run_seeds(config.seed, &config.dataset, key, set.index, method);
        log::info!("{key}: {method} on SampleSet {}", set.index);
        let out = run_sample_set(dataset, set, method, &config.pipeline, seeds)?;
        log::info!(
            "{key}: {method} on SampleSet {} -> AUROC {:.4}",
            set.index,
            out.report.auroc
        );
        Ok(RunRecord {
            sample_set: set.index,
            method,
            seeds,
            threshold: out.threshold,
            report: out.report,
            log: out.log,
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let records: Vec<RunRecord> =
        pool.install(|| jobs.par_iter().map(run_job).collect::<Result<Vec<_>>>())?;

    let mut records = records.into_iter();
    let mut out = Vec::with_capacity(prepared.len());
    for (point, key, manifests) in prepared {
        let runs: Vec<RunRecord> = records.by_ref().take(methods.len() * manifests.len()).collect();
        let summaries = methods
            .iter()
            .map(|&m| {
                let reports: Vec<EvaluationReport> =
                    runs.iter().filter(|r| r.method == m).map(|r| r.report).collect();
                Ok(MethodSummary {
                    method: m,
                    aggregate: aggregate(&reports)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(PointResult {
            point,
            key,
            seed: config.seed,
            manifests,
            runs,
            summaries,
        });
    }
    Ok(ExperimentResult {
        config: config.clone(),
        points: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nsl() -> SampleSetSpec {
        DatasetConfig::builtin("nslkdd").unwrap().sample_set
    }

    #[test]
    fn contamination_rescaling() {
        let base = SampleSetSpec {
            labelled_count: 60,
            anomaly_total: 1560,
            ..nsl()
        };
        let ten = vary_anomaly_percent(&base, 10.0).unwrap();
        assert_eq!(ten.anomaly_total - 60, 1496);
        assert_eq!(ten.normal_count, 13460);
        let two = vary_anomaly_percent(&base, 2.0).unwrap();
        assert_eq!(two.anomaly_total - 60, 275);
        assert!(vary_anomaly_percent(&base, 0.001).is_err());
        assert!(vary_anomaly_percent(&base, 50.0).is_err());
    }

    #[test]
    fn experiment_two_shares_one_spec() {
        let cfg = ExperimentConfig {
            experiment_id: 2,
            ..Default::default()
        };
        let pts = sweep_points(&cfg, &nsl()).unwrap();
        assert_eq!(pts.iter().map(|p| p.labelled).collect::<Vec<_>>(), [30, 60, 120]);
        assert!(pts.iter().all(|p| p.spec == pts[0].spec));
        assert_eq!(pts[0].spec.labelled_count, 120);
    }

    #[test]
    fn experiment_one_uses_table_spec() {
        let pts = sweep_points(&ExperimentConfig::default(), &nsl()).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].labelled, 60);
        assert_eq!(pts[0].spec, nsl());
    }

    #[test]
    fn experiment_three_holds_normals_fixed() {
        let cfg = ExperimentConfig {
            experiment_id: 3,
            ..Default::default()
        };
        let pts = sweep_points(&cfg, &nsl()).unwrap();
        assert_eq!(
            pts.iter().map(|p| p.value.as_str()).collect::<Vec<_>>(),
            ["2", "5", "10"]
        );
        for p in &pts {
            assert_eq!(p.spec.normal_count, 13460);
            assert_eq!(p.spec.labelled_count, 60);
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        cfg.experiment_id = 4;
        assert!(cfg.validate().is_err());
        cfg = ExperimentConfig {
            labelled_anomaly_counts: vec![],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        cfg = ExperimentConfig {
            methods: vec![],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn method_parsing() {
        assert_eq!("triplet".parse::<Method>().unwrap(), Method::Triplet);
        assert_eq!("pair".parse::<Method>().unwrap(), Method::Pair);
        assert!("quad".parse::<Method>().is_err());
    }
}
