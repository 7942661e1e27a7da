//! Mini-batch training of the scoring network on freshly augmented batches.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augmentation::{sample_batch, BatchComposition, OrdinalLabelScheme};
use crate::error::{Error, Result};
use crate::model::{Parameters, ScoringModel, DEFAULT_HIDDEN, DEFAULT_LAMBDA};
use crate::rng::{seeded, SeedPath};
use crate::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Rmsprop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub steps_per_epoch: usize,
    /// Rounded down to a multiple of the ordinal class count.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub lambda: f64,
    pub hidden_sizes: Vec<usize>,
    pub batch_composition: BatchComposition,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            steps_per_epoch: 20,
            batch_size: 64,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Rmsprop,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            lambda: DEFAULT_LAMBDA,
            hidden_sizes: vec![DEFAULT_HIDDEN],
            batch_composition: BatchComposition::Balanced,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn effective_batch_size(&self, scheme: &OrdinalLabelScheme) -> usize {
        match self.batch_composition {
            BatchComposition::Balanced => self.batch_size - self.batch_size % scheme.class_count(),
            BatchComposition::Uniform => self.batch_size,
        }
    }

    pub fn validate(&self, scheme: &OrdinalLabelScheme) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.epochs == 0 || self.steps_per_epoch == 0 {
            return bad("epochs and steps_per_epoch must be positive".into());
        }
        if self.batch_size < scheme.class_count() {
            return bad(format!(
                "batch_size {} is below the {} ordinal classes",
                self.batch_size,
                scheme.class_count()
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!("learning_rate {}", self.learning_rate));
        }
        if !(self.rmsprop_decay > 0.0 && self.rmsprop_decay < 1.0) {
            return bad(format!("rmsprop_decay {}", self.rmsprop_decay));
        }
        if !(self.rmsprop_epsilon > 0.0) {
            return bad(format!("rmsprop_epsilon {}", self.rmsprop_epsilon));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda {}", self.lambda));
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return bad(format!("hidden_sizes {:?}", self.hidden_sizes));
        }
        Ok(())
    }
}

/// Running optimizer state; RMSprop keeps a mean-square accumulator.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    mean_square: Option<Parameters>,
}

impl OptimizerState {
    pub fn new() -> Self {
        Self { mean_square: None }
    }
}

impl Default for OptimizerState {
    fn default() -> Self {
        Self::new()
    }
}

/// One parameter update.
///
/// * sgd: `θ ← θ − lr·g`
/// * rmsprop: `v ← ρ·v + (1−ρ)·g²`, `θ ← θ − lr·g / (√v + ε)`
pub fn update_step(
    params: &mut Parameters,
    gradient: &Parameters,
    state: &mut OptimizerState,
    config: &TrainConfig,
) -> Result<()> {
    if !params.same_shape(gradient) {
        return Err(Error::InvalidConfig("gradient shape differs from parameters".into()));
    }
    let lr = config.learning_rate;
    match config.optimizer {
        OptimizerKind::Sgd => {
            for (p, g) in params.iter_mut().zip(gradient.iter()) {
                *p -= lr * g;
            }
        }
        OptimizerKind::Rmsprop => {
            let rho = config.rmsprop_decay;
            let eps = config.rmsprop_epsilon;
            let v = state
                .mean_square
                .get_or_insert_with(|| Parameters::zeros_like(gradient));
            for ((p, g), v) in params.iter_mut().zip(gradient.iter()).zip(v.iter_mut()) {
                *v = rho * *v + (1.0 - rho) * g * g;
                *p -= lr * g / (v.sqrt() + eps);
            }
        }
    }
    Ok(())
}

/// Row indices of the two training pools within the feature matrix. Ground
/// truth for `unlabelled` is deliberately absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPools {
    pub labelled: Vec<usize>,
    pub unlabelled: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_objective: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,mean_objective\n");
        for r in &self.epochs {
            out.push_str(&format!("{},{}\n", r.epoch, r.mean_objective));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Train a fresh model for `epochs × steps_per_epoch` updates, drawing a new
/// augmented batch at every step.
pub fn train(
    features: &FeatureMatrix,
    pools: &TrainingPools,
    scheme: &OrdinalLabelScheme,
    config: &TrainConfig,
) -> Result<(ScoringModel, TrainingLog)> {
    config.validate(scheme)?;
    if pools.labelled.is_empty() {
        return Err(Error::Empty("labelled anomaly pool"));
    }
    if pools.unlabelled.is_empty() {
        return Err(Error::Empty("unlabelled pool"));
    }
    if let Some(&bad) = pools
        .labelled
        .iter()
        .chain(&pools.unlabelled)
        .find(|&&i| i >= features.nrows())
    {
        return Err(Error::DimensionMismatch {
            expected: features.nrows(),
            actual: bad,
        });
    }

    let mut model = ScoringModel::new(
        features.ncols(),
        &config.hidden_sizes,
        scheme.arity(),
        config.lambda,
        SeedPath::new(config.seed).push("init").finish(),
    )?;
    let batch_size = config.effective_batch_size(scheme);
    let mut state = OptimizerState::new();
    let mut log = TrainingLog::default();

    for epoch in 0..config.epochs {
        let mut sum = 0.0;
        for step in 0..config.steps_per_epoch {
            let global_step = epoch * config.steps_per_epoch + step;
            let mut rng = seeded(SeedPath::new(config.seed).push("batch").push(global_step).finish());
            let batch = sample_batch(
                &pools.labelled,
                &pools.unlabelled,
                scheme,
                batch_size,
                config.batch_composition,
                &mut rng,
            )?;
            let (objective, gradient) = model.objective_and_gradient(&batch, features)?;
            if !objective.is_finite() {
                return Err(Error::Diverged { epoch, step, objective });
            }
            sum += objective;
            update_step(model.params_mut(), &gradient, &mut state, config)?;
            if !model.params().is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    objective: f64::NAN,
                });
            }
        }
        let mean_objective = sum / config.steps_per_epoch as f64;
        log::debug!("epoch {epoch}: mean objective {mean_objective:.5}");
        log.epochs.push(EpochRecord {
            epoch,
            mean_objective,
        });
    }
    Ok((model, log))
}
