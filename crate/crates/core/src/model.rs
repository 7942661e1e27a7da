//! Shared-weight anomaly scoring network.
//!
//! Every member of a k-tuple passes through the same stack of dense ReLU
//! layers; the k member representations are concatenated in tuple order and a
//! linear head maps the result to an unbounded scalar score. Training
//! minimizes
//!
//! ```text
//! J(θ) = mean_B |y − φ(tuple; θ)| + λ · R(θ)
//! ```
//!
//! where `R` is the squared L2 norm of all weight matrices (biases excluded).

use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augmentation::AugmentedBatch;
use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::FeatureMatrix;

pub const DEFAULT_HIDDEN: usize = 20;
pub const DEFAULT_LAMBDA: f64 = 0.01;

const FORMAT_NAME: &str = "fswad-scoring-model";
const FORMAT_VERSION: u32 = 1;

/// Dense layer `out = W · in + b`, with `W` stored as `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    fn glorot<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let a = (6.0 / (inputs + outputs) as f64).sqrt();
        Self {
            weights: Array2::from_shape_simple_fn((outputs, inputs), || rng.random_range(-a..=a)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

/// Trainable parameters θ. Also used as the gradient and optimizer-state
/// container, since all three share one shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub hidden: Vec<DenseLayer>,
    pub head_weights: Array1<f64>,
    pub head_bias: f64,
}

impl Parameters {
    pub fn zeros_like(other: &Parameters) -> Self {
        Self {
            hidden: other
                .hidden
                .iter()
                .map(|l| DenseLayer::zeros(l.inputs(), l.outputs()))
                .collect(),
            head_weights: Array1::zeros(other.head_weights.len()),
            head_bias: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat view: each hidden layer's weights (row-major) then bias, then the
    /// head weights and the head bias.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.hidden
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
            .chain(self.head_weights.iter())
            .chain(std::iter::once(&self.head_bias))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.hidden
            .iter_mut()
            .flat_map(|l| {
                let DenseLayer { weights, bias } = l;
                weights.iter_mut().chain(bias.iter_mut())
            })
            .chain(self.head_weights.iter_mut())
            .chain(std::iter::once(&mut self.head_bias))
    }

    /// Squared L2 norm over weights only.
    pub fn weight_norm_sq(&self) -> f64 {
        self.hidden
            .iter()
            .map(|l| l.weights.iter().map(|w| w * w).sum::<f64>())
            .sum::<f64>()
            + self.head_weights.iter().map(|w| w * w).sum::<f64>()
    }

    pub fn same_shape(&self, other: &Parameters) -> bool {
        self.hidden.len() == other.hidden.len()
            && self
                .hidden
                .iter()
                .zip(&other.hidden)
                .all(|(a, b)| a.weights.dim() == b.weights.dim() && a.bias.len() == b.bias.len())
            && self.head_weights.len() == other.head_weights.len()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

/// Score of one tuple with its intermediate representations.
#[derive(Debug, Clone, PartialEq)]
pub struct TupleScore {
    pub score: f64,
    /// Sub-network output per tuple position.
    pub members: Vec<Array1<f64>>,
    /// Concatenation of `members` in tuple order.
    pub combined: Array1<f64>,
}

/// Per-member layer activations recorded during a forward pass.
#[derive(Debug, Clone)]
pub struct MemberTrace {
    pub pre_activations: Vec<Array1<f64>>,
    pub activations: Vec<Array1<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringModel {
    arity: usize,
    lambda: f64,
    params: Parameters,
}

impl ScoringModel {
    /// Glorot-uniform weights, zero biases.
    pub fn new(
        input_dim: usize,
        hidden_sizes: &[usize],
        arity: usize,
        lambda: f64,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || hidden_sizes.is_empty() || hidden_sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "bad network shape: input {input_dim}, hidden {hidden_sizes:?}"
            )));
        }
        let mut rng = seeded(seed);
        let mut hidden = Vec::with_capacity(hidden_sizes.len());
        let mut fan_in = input_dim;
        for &h in hidden_sizes {
            hidden.push(DenseLayer::glorot(fan_in, h, &mut rng));
            fan_in = h;
        }
        let head = DenseLayer::glorot(arity * fan_in, 1, &mut rng);
        Self::from_parameters(
            arity,
            lambda,
            Parameters {
                hidden,
                head_weights: head.weights.row(0).to_owned(),
                head_bias: 0.0,
            },
        )
    }

    pub fn from_parameters(arity: usize, lambda: f64, params: Parameters) -> Result<Self> {
        if arity == 0 {
            return Err(Error::InvalidConfig("tuple size must be positive".into()));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {lambda}")));
        }
        let first = params
            .hidden
            .first()
            .ok_or_else(|| Error::InvalidConfig("at least one hidden layer required".into()))?;
        if first.inputs() == 0 {
            return Err(Error::InvalidConfig("input dimension must be positive".into()));
        }
        for (i, layer) in params.hidden.iter().enumerate() {
            if layer.bias.len() != layer.outputs() {
                return Err(Error::InvalidConfig(format!("layer {i}: bias length mismatch")));
            }
            if i > 0 && layer.inputs() != params.hidden[i - 1].outputs() {
                return Err(Error::InvalidConfig(format!("layer {i}: input width mismatch")));
            }
        }
        let embedding = params.hidden.last().map(DenseLayer::outputs).unwrap_or(0);
        if params.head_weights.len() != arity * embedding {
            return Err(Error::DimensionMismatch {
                expected: arity * embedding,
                actual: params.head_weights.len(),
            });
        }
        if !params.is_finite() {
            return Err(Error::InvalidConfig("non-finite parameter".into()));
        }
        Ok(Self {
            arity,
            lambda,
            params,
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn input_dim(&self) -> usize {
        self.params.hidden[0].inputs()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.params.hidden.iter().map(DenseLayer::outputs).collect()
    }

    pub fn embedding_dim(&self) -> usize {
        self.params.hidden.last().map(DenseLayer::outputs).unwrap_or(0)
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut Parameters {
        &mut self.params
    }

    /// Replace parameters; shapes must match.
    pub fn set_params(&mut self, params: Parameters) -> Result<()> {
        if !self.params.same_shape(&params) {
            return Err(Error::InvalidConfig("parameter shape mismatch".into()));
        }
        self.params = params;
        Ok(())
    }

    fn check_record(&self, record: ArrayView1<f64>) -> Result<()> {
        if record.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: record.len(),
            });
        }
        if let Some(j) = record.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: 0, feature: j });
        }
        Ok(())
    }

    fn trace(&self, record: ArrayView1<f64>) -> MemberTrace {
        let mut pre_activations = Vec::with_capacity(self.params.hidden.len());
        let mut activations: Vec<Array1<f64>> = Vec::with_capacity(self.params.hidden.len());
        for layer in &self.params.hidden {
            let z = match activations.last() {
                None => layer.weights.dot(&record) + &layer.bias,
                Some(prev) => layer.weights.dot(prev) + &layer.bias,
            };
            activations.push(z.mapv(relu));
            pre_activations.push(z);
        }
        MemberTrace {
            pre_activations,
            activations,
        }
    }

    /// Shared sub-network output for one record.
    pub fn embed(&self, record: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_record(record)?;
        Ok(self
            .trace(record)
            .activations
            .pop()
            .expect("at least one hidden layer"))
    }

    /// Layer-by-layer activations of one record (for diagnostics and
    /// gradient checks).
    pub fn member_trace(&self, record: ArrayView1<f64>) -> Result<MemberTrace> {
        self.check_record(record)?;
        Ok(self.trace(record))
    }

    /// Head output for already-embedded members, in tuple order.
    pub fn score_embeddings(&self, members: &[&Array1<f64>]) -> Result<f64> {
        if members.len() != self.arity {
            return Err(Error::DimensionMismatch {
                expected: self.arity,
                actual: members.len(),
            });
        }
        let combined = self.concat(members.iter().copied())?;
        Ok(self.head(&combined))
    }

    fn concat<'a>(&self, members: impl Iterator<Item = &'a Array1<f64>>) -> Result<Array1<f64>> {
        let h = self.embedding_dim();
        let mut combined = Array1::zeros(self.arity * h);
        for (p, c) in members.enumerate() {
            if c.len() != h {
                return Err(Error::DimensionMismatch {
                    expected: h,
                    actual: c.len(),
                });
            }
            combined.slice_mut(s![p * h..(p + 1) * h]).assign(c);
        }
        Ok(combined)
    }

    fn head(&self, combined: &Array1<f64>) -> f64 {
        self.params.head_weights.dot(combined) + self.params.head_bias
    }

    pub fn forward(&self, tuple: &[ArrayView1<f64>]) -> Result<TupleScore> {
        if tuple.len() != self.arity {
            return Err(Error::DimensionMismatch {
                expected: self.arity,
                actual: tuple.len(),
            });
        }
        let members = tuple
            .iter()
            .map(|x| self.embed(*x))
            .collect::<Result<Vec<_>>>()?;
        let combined = self.concat(members.iter())?;
        let score = self.head(&combined);
        Ok(TupleScore {
            score,
            members,
            combined,
        })
    }

    fn tuple_rows<'a>(&self, features: &'a FeatureMatrix, members: &[usize]) -> Result<Vec<ArrayView1<'a, f64>>> {
        members
            .iter()
            .map(|&i| {
                if i < features.nrows() {
                    Ok(features.row(i))
                } else {
                    Err(Error::DimensionMismatch {
                        expected: features.nrows(),
                        actual: i,
                    })
                }
            })
            .collect()
    }

    /// Mean absolute error over the batch plus `λ · R(θ)`.
    pub fn objective(&self, batch: &AugmentedBatch, features: &FeatureMatrix) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let mut total = 0.0;
        for inst in &batch.instances {
            let rows = self.tuple_rows(features, &inst.members)?;
            total += loss(self.forward(&rows)?.score, inst.label);
        }
        Ok(total / batch.len() as f64 + self.lambda * self.params.weight_norm_sq())
    }

    /// Gradient of [`Self::objective`] with respect to all parameters.
    pub fn backward(&self, batch: &AugmentedBatch, features: &FeatureMatrix) -> Result<Parameters> {
        self.objective_and_gradient(batch, features).map(|(_, g)| g)
    }

    /// Objective value and its gradient from one pass.
    ///
    /// Subgradients: `d|u|/du = sign(u)` with 0 at `u = 0`; `ReLU'(0) = 0`.
    /// Shared sub-network gradients are summed over tuple positions.
    pub fn objective_and_gradient(
        &self,
        batch: &AugmentedBatch,
        features: &FeatureMatrix,
    ) -> Result<(f64, Parameters)> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let h = self.embedding_dim();
        let scale = 1.0 / batch.len() as f64;
        let mut grad = Parameters::zeros_like(&self.params);
        let mut total = 0.0;

        for inst in &batch.instances {
            let rows = self.tuple_rows(features, &inst.members)?;
            if rows.len() != self.arity {
                return Err(Error::DimensionMismatch {
                    expected: self.arity,
                    actual: rows.len(),
                });
            }
            for r in &rows {
                self.check_record(*r)?;
            }
            let traces: Vec<MemberTrace> = rows.iter().map(|r| self.trace(*r)).collect();
            let combined = self.concat(traces.iter().map(|t| t.activations.last().unwrap()))?;
            let score = self.head(&combined);
            total += loss(score, inst.label);

            let d_score = -sign(inst.label - score) * scale;
            if d_score == 0.0 {
                continue;
            }
            grad.head_bias += d_score;
            grad.head_weights.scaled_add(d_score, &combined);

            for (p, (trace, input)) in traces.iter().zip(&rows).enumerate() {
                let mut delta = self.params.head_weights.slice(s![p * h..(p + 1) * h]).to_owned() * d_score;
                for l in (0..self.params.hidden.len()).rev() {
                    Zip::from(&mut delta)
                        .and(&trace.pre_activations[l])
                        .for_each(|d, &z| {
                            if z <= 0.0 {
                                *d = 0.0;
                            }
                        });
                    let layer_in = if l == 0 { *input } else { trace.activations[l - 1].view() };
                    let g = &mut grad.hidden[l];
                    for (i, &d) in delta.iter().enumerate() {
                        if d != 0.0 {
                            g.weights.row_mut(i).scaled_add(d, &layer_in);
                        }
                    }
                    g.bias += &delta;
                    if l > 0 {
                        delta = self.params.hidden[l].weights.t().dot(&delta);
                    }
                }
            }
        }

        if self.lambda > 0.0 {
            let two_lambda = 2.0 * self.lambda;
            for (g, p) in grad.hidden.iter_mut().zip(&self.params.hidden) {
                g.weights.scaled_add(two_lambda, &p.weights);
            }
            grad.head_weights.scaled_add(two_lambda, &self.params.head_weights);
        }

        let objective = total * scale + self.lambda * self.params.weight_norm_sq();
        Ok((objective, grad))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            input_dim: self.input_dim(),
            hidden_sizes: self.hidden_sizes(),
            arity: self.arity,
            lambda: self.lambda,
            parameters: self.params.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != FORMAT_NAME || file.version != FORMAT_VERSION {
            return Err(Error::Serde(format!(
                "unsupported model format {} v{}",
                file.format, file.version
            )));
        }
        let model = Self::from_parameters(file.arity, file.lambda, file.parameters)?;
        if model.input_dim() != file.input_dim || model.hidden_sizes() != file.hidden_sizes {
            return Err(Error::Serde("model header disagrees with parameter shapes".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    input_dim: usize,
    hidden_sizes: Vec<usize>,
    arity: usize,
    lambda: f64,
    parameters: Parameters,
}

/// Absolute prediction error `|y − s|`.
pub fn loss(score: f64, label: f64) -> f64 {
    (label - score).abs()
}

fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

fn sign(u: f64) -> f64 {
    if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        0.0
    }
}
