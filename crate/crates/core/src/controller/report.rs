use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AnalysisRecord, CurationResult, LoopConfig, StopReason};
use crate::curation::RejectionReason;
use crate::dataset::{Label, TaskSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub labels: Vec<Label>,
    pub shots: usize,
    pub task_description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub index: usize,
    pub accepted: usize,
    pub train_size: usize,
    pub rejection_tallies: BTreeMap<RejectionReason, usize>,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: Vec<Vec<u64>>,
    pub per_class_error_rate: Vec<f64>,
    pub improvement_over_best: f64,
    pub analysis: Option<AnalysisRecord>,
    pub stop_decision: Option<StopReason>,
}

/// Where a run wrote its files, relative to the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifacts {
    pub model: String,
    pub train_set: String,
    pub validation_set: String,
    pub result: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub task: TaskSummary,
    pub config: LoopConfig,
    pub provider: String,
    pub iterations: Vec<IterationSummary>,
    pub stop_reason: StopReason,
    pub best_iteration: Option<usize>,
    pub best_macro_f1: Option<f64>,
    pub final_train_size: usize,
    pub generated_per_class: BTreeMap<String, usize>,
    pub artifacts: RunArtifacts,
}

impl RunReport {
    pub fn new(task: &TaskSpec, config: &LoopConfig, provider: &str, result: &CurationResult, artifacts: RunArtifacts) -> Self {
        let iterations = result
            .history
            .iter()
            .map(|r| IterationSummary {
                index: r.index,
                accepted: r.generated_batch.len(),
                train_size: r.train_size,
                rejection_tallies: r.rejection_tallies.clone(),
                accuracy: r.eval.accuracy,
                macro_f1: r.eval.macro_f1,
                confusion: r.eval.confusion.clone(),
                per_class_error_rate: r.eval.per_class_error_rate.clone(),
                improvement_over_best: r.improvement_over_best,
                analysis: r.analysis.clone(),
                stop_decision: r.stop_decision,
            })
            .collect();
        Self {
            task: TaskSummary {
                labels: task.label_set.iter().cloned().collect(),
                shots: task.shots,
                task_description: task.task_description.clone(),
            },
            config: config.clone(),
            provider: provider.to_string(),
            iterations,
            stop_reason: result.stop_reason,
            // 1-based, matching iteration indices
            best_iteration: result.best_index.map(|i| i + 1),
            best_macro_f1: result.best_metric(),
            final_train_size: result.final_train_set.len(),
            generated_per_class: result.ledger.generated_per_class.clone(),
            artifacts,
        }
    }
}
