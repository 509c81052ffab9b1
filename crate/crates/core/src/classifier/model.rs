use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::featurize::{build_featurizer, Featurizer, FeaturizerSpec, SparseVector};
use super::ClassifierError;
use crate::dataset::{Dataset, LabelSet};

const MODEL_FORMAT: &str = "curator-model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub max_epochs: usize,
    pub loss_tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            l2_lambda: 1e-4,
            max_epochs: 200,
            loss_tolerance: 1e-6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ClassifierError::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(ClassifierError::InvalidConfig("l2_lambda must be non-negative".into()));
        }
        if self.loss_tolerance.is_nan() || self.loss_tolerance <= 0.0 {
            return Err(ClassifierError::InvalidConfig("loss_tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Multinomial logistic classifier over a fixed featurizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    format: String,
    featurizer: FeaturizerSpec,
    labels: Vec<String>,
    bias: Vec<f64>,
    /// One dense row of length `featurizer.dimension` per class.
    weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class_index: usize,
    pub label: String,
    pub probabilities: Vec<f64>,
}

impl Prediction {
    pub fn confidence(&self) -> f64 {
        self.probabilities[self.class_index]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub loss: f64,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Model {
    /// All-zero parameters: uniform probabilities, first label predicted.
    pub fn zeros(labels: &LabelSet, featurizer: FeaturizerSpec) -> Self {
        let c = labels.len();
        Self {
            format: MODEL_FORMAT.into(),
            labels: labels.names().map(str::to_string).collect(),
            bias: vec![0.0; c],
            weights: vec![vec![0.0; featurizer.dimension]; c],
            featurizer,
        }
    }

    pub fn from_parts(
        featurizer: FeaturizerSpec,
        labels: Vec<String>,
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
    ) -> Result<Self, ClassifierError> {
        let m = Self {
            format: MODEL_FORMAT.into(),
            featurizer,
            labels,
            bias,
            weights,
        };
        m.check_shapes()?;
        Ok(m)
    }

    fn check_shapes(&self) -> Result<(), ClassifierError> {
        let c = self.labels.len();
        if c < 2 || self.bias.len() != c || self.weights.len() != c {
            return Err(ClassifierError::Shape(format!(
                "{} labels, {} bias entries, {} weight rows",
                c,
                self.bias.len(),
                self.weights.len()
            )));
        }
        if let Some(row) = self.weights.iter().find(|r| r.len() != self.featurizer.dimension) {
            return Err(ClassifierError::Shape(format!(
                "weight row of length {}, expected {}",
                row.len(),
                self.featurizer.dimension
            )));
        }
        Ok(())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn featurizer_spec(&self) -> &FeaturizerSpec {
        &self.featurizer
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.weights
    }

    pub fn featurizer(&self) -> Result<Box<dyn Featurizer>, ClassifierError> {
        build_featurizer(&self.featurizer)
    }

    pub fn logits(&self, x: &SparseVector) -> Vec<f64> {
        logits(&self.weights, &self.bias, x)
    }

    pub fn predict_vector(&self, x: &SparseVector) -> Prediction {
        let probabilities = softmax(&self.logits(x));
        let class_index = argmax(&probabilities);
        Prediction {
            class_index,
            label: self.labels[class_index].clone(),
            probabilities,
        }
    }

    /// Featurizes `text` with the model's own featurizer and predicts.
    /// Only the remote featurizer can fail.
    pub fn predict(&self, text: &str) -> Result<Prediction, ClassifierError> {
        let f = self.featurizer()?;
        self.predict_with(f.as_ref(), text)
    }

    pub fn predict_with(&self, featurizer: &dyn Featurizer, text: &str) -> Result<Prediction, ClassifierError> {
        let x = featurizer.featurize_batch(&[text])?.pop().unwrap_or_default();
        Ok(self.predict_vector(&x))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
        let json = serde_json::to_string(self)?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClassifierError> {
        let text = fs::read_to_string(path)?;
        let model: Model = serde_json::from_str(&text)?;
        if model.format != MODEL_FORMAT {
            return Err(ClassifierError::Shape(format!("unknown model format `{}`", model.format)));
        }
        model.featurizer.validate()?;
        model.check_shapes()?;
        Ok(model)
    }
}

fn logits(weights: &[Vec<f64>], bias: &[f64], x: &SparseVector) -> Vec<f64> {
    weights
        .iter()
        .zip(bias)
        .map(|(row, b)| b + x.entries().iter().map(|&(i, v)| row[i as usize] * v).sum::<f64>())
        .collect()
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(z);
    z.iter().map(|v| (v - lse).exp()).collect()
}

/// Index of the maximum; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy plus `lambda * ||W||_F^2` and its exact gradient.
/// Vector indices address columns of `weights`.
fn objective(weights: &[Vec<f64>], bias: &[f64], lambda: f64, batch: &[(SparseVector, usize)]) -> Gradient {
    let c = weights.len();
    let d = weights.first().map_or(0, Vec::len);
    let n = batch.len() as f64;
    let mut gw = vec![vec![0.0; d]; c];
    let mut gb = vec![0.0; c];
    let mut loss = 0.0;
    for (x, y) in batch {
        let z = logits(weights, bias, x);
        let lse = log_sum_exp(&z);
        loss += lse - z[*y];
        for k in 0..c {
            let residual = ((z[k] - lse).exp() - if k == *y { 1.0 } else { 0.0 }) / n;
            gb[k] += residual;
            for &(i, v) in x.entries() {
                gw[k][i as usize] += residual * v;
            }
        }
    }
    loss /= n;
    let mut penalty = 0.0;
    for (row, grow) in weights.iter().zip(gw.iter_mut()) {
        for (w, g) in row.iter().zip(grow.iter_mut()) {
            penalty += w * w;
            *g += 2.0 * lambda * w;
        }
    }
    Gradient {
        loss: loss + lambda * penalty,
        weights: gw,
        bias: gb,
    }
}

/// Regularized multinomial log-loss of `model` on `batch` with its analytic gradient.
pub fn loss_and_gradient(
    model: &Model,
    batch: &[(SparseVector, usize)],
    l2_lambda: f64,
) -> Result<Gradient, ClassifierError> {
    if batch.is_empty() {
        return Err(ClassifierError::EmptyBatch);
    }
    let c = model.num_classes();
    for (x, y) in batch {
        if *y >= c {
            return Err(ClassifierError::Shape(format!("class index {y} out of range for {c} classes")));
        }
        if x.min_dimension() > model.featurizer.dimension {
            return Err(ClassifierError::Shape("feature index beyond model dimension".into()));
        }
    }
    Ok(objective(&model.weights, &model.bias, l2_lambda, batch))
}

/// Full-batch gradient descent from zero initialization.
pub fn train(
    labels: &LabelSet,
    dataset: &Dataset,
    spec: &FeaturizerSpec,
    cfg: &TrainConfig,
) -> Result<Model, ClassifierError> {
    let featurizer = build_featurizer(spec)?;
    train_with(labels, dataset, featurizer.as_ref(), cfg).map(|(m, _)| m)
}

/// Like [`train`], reusing `featurizer` and returning the per-epoch loss trace.
pub fn train_with(
    labels: &LabelSet,
    dataset: &Dataset,
    featurizer: &dyn Featurizer,
    cfg: &TrainConfig,
) -> Result<(Model, Vec<f64>), ClassifierError> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    if dataset.distinct_labels() < 2 {
        return Err(ClassifierError::DegenerateTrainingSet);
    }
    let texts: Vec<&str> = dataset.iter().map(|e| e.text.as_str()).collect();
    let vectors = featurizer.featurize_batch(&texts)?;
    let mut batch = Vec::with_capacity(vectors.len());
    for (x, ex) in vectors.into_iter().zip(dataset.iter()) {
        let y = labels
            .index_of(&ex.label)
            .ok_or_else(|| ClassifierError::LabelMismatch(format!("unknown label `{}`", ex.label)))?;
        batch.push((x, y));
    }

    // Columns no example touches keep exactly zero weight, so optimize only
    // the active ones and scatter back at the end.
    let mut active: BTreeMap<u32, u32> = BTreeMap::new();
    for (x, _) in &batch {
        for &(i, _) in x.entries() {
            active.insert(i, 0);
        }
    }
    let columns: Vec<u32> = active.keys().copied().collect();
    for (slot, col) in columns.iter().enumerate() {
        active.insert(*col, slot as u32);
    }
    let compact: Vec<(SparseVector, usize)> = batch.iter().map(|(x, y)| (x.remap(&active), *y)).collect();

    let c = labels.len();
    let mut w = vec![vec![0.0; columns.len()]; c];
    let mut b = vec![0.0; c];
    let mut losses = Vec::new();
    for _ in 0..cfg.max_epochs {
        let g = objective(&w, &b, cfg.l2_lambda, &compact);
        if let Some(prev) = losses.last() {
            if (g.loss - prev).abs() < cfg.loss_tolerance {
                losses.push(g.loss);
                break;
            }
        }
        losses.push(g.loss);
        for (row, grow) in w.iter_mut().zip(&g.weights) {
            for (wv, gv) in row.iter_mut().zip(grow) {
                *wv -= cfg.learning_rate * gv;
            }
        }
        for (bv, gv) in b.iter_mut().zip(&g.bias) {
            *bv -= cfg.learning_rate * gv;
        }
    }

    let spec = featurizer.spec().clone();
    let mut model = Model::zeros(labels, spec);
    for (k, row) in w.iter().enumerate() {
        for (slot, col) in columns.iter().enumerate() {
            model.weights[k][*col as usize] = row[slot];
        }
    }
    model.bias = b;
    Ok((model, losses))
}
