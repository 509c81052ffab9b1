use serde::{Deserialize, Serialize};

use super::featurize::Featurizer;
use super::model::Model;
use super::ClassifierError;
use crate::dataset::Dataset;

/// Maximum error traces kept per true class.
pub const TRACES_PER_CLASS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTrace {
    pub text: String,
    pub true_label: String,
    pub predicted_label: String,
    pub predicted_probability: f64,
}

/// Diagnostics returned by the classifier tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub labels: Vec<String>,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_f1: Vec<f64>,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<u64>>,
    pub per_class_error_rate: Vec<f64>,
    pub error_traces: Vec<ErrorTrace>,
}

/// One scored item: true class, predicted class, probability of the
/// predicted class, and the source text.
#[derive(Debug, Clone)]
pub struct ScoredItem<'a> {
    pub true_class: usize,
    pub predicted_class: usize,
    pub predicted_probability: f64,
    pub text: &'a str,
}

impl EvalReport {
    pub fn from_predictions(labels: &[String], items: &[ScoredItem<'_>]) -> Result<Self, ClassifierError> {
        if items.is_empty() {
            return Err(ClassifierError::EmptyEvalSet);
        }
        let c = labels.len();
        let mut confusion = vec![vec![0u64; c]; c];
        for it in items {
            if it.true_class >= c || it.predicted_class >= c {
                return Err(ClassifierError::Shape("class index out of range".into()));
            }
            confusion[it.true_class][it.predicted_class] += 1;
        }

        let n = items.len() as f64;
        let correct: u64 = (0..c).map(|i| confusion[i][i]).sum();
        let mut per_class_f1 = Vec::with_capacity(c);
        let mut per_class_error_rate = Vec::with_capacity(c);
        for k in 0..c {
            let tp = confusion[k][k] as f64;
            let row: u64 = confusion[k].iter().sum();
            let col: u64 = confusion.iter().map(|r| r[k]).sum();
            let precision = if col > 0 { tp / col as f64 } else { 0.0 };
            let recall = if row > 0 { tp / row as f64 } else { 0.0 };
            per_class_f1.push(if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            });
            per_class_error_rate.push(if row > 0 { 1.0 - tp / row as f64 } else { 0.0 });
        }
        let macro_f1 = per_class_f1.iter().sum::<f64>() / c as f64;

        let mut errors: Vec<&ScoredItem<'_>> =
            items.iter().filter(|it| it.true_class != it.predicted_class).collect();
        errors.sort_by(|a, b| b.predicted_probability.total_cmp(&a.predicted_probability));
        let mut kept = vec![0usize; c];
        let mut error_traces = Vec::new();
        for it in errors {
            if kept[it.true_class] == TRACES_PER_CLASS {
                continue;
            }
            kept[it.true_class] += 1;
            error_traces.push(ErrorTrace {
                text: it.text.to_string(),
                true_label: labels[it.true_class].clone(),
                predicted_label: labels[it.predicted_class].clone(),
                predicted_probability: it.predicted_probability,
            });
        }

        Ok(Self {
            labels: labels.to_vec(),
            accuracy: correct as f64 / n,
            macro_f1,
            per_class_f1,
            confusion,
            per_class_error_rate,
            error_traces,
        })
    }

    pub fn evaluated(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }
}

pub fn evaluate(model: &Model, dataset: &Dataset) -> Result<EvalReport, ClassifierError> {
    let f = model.featurizer()?;
    evaluate_with(model, f.as_ref(), dataset)
}

pub fn evaluate_with(
    model: &Model,
    featurizer: &dyn Featurizer,
    dataset: &Dataset,
) -> Result<EvalReport, ClassifierError> {
    if dataset.is_empty() {
        return Err(ClassifierError::EmptyEvalSet);
    }
    if !dataset.labels().names().eq(model.labels().iter().map(String::as_str)) {
        return Err(ClassifierError::LabelMismatch(format!(
            "dataset labels {:?} differ from model labels {:?}",
            dataset.labels().names().collect::<Vec<_>>(),
            model.labels()
        )));
    }
    let texts: Vec<&str> = dataset.iter().map(|e| e.text.as_str()).collect();
    let vectors = featurizer.featurize_batch(&texts)?;
    let items: Vec<ScoredItem<'_>> = vectors
        .iter()
        .zip(dataset.iter())
        .map(|(x, ex)| {
            let p = model.predict_vector(x);
            ScoredItem {
                true_class: dataset.labels().index_of(&ex.label).expect("validated"),
                predicted_class: p.class_index,
                predicted_probability: p.confidence(),
                text: &ex.text,
            }
        })
        .collect();
    EvalReport::from_predictions(model.labels(), &items)
}
