//! LLM-curated training data for lightweight text classifiers.
//!
//! An LLM writes a validation set and seed training data for a label set,
//! a small linear classifier is trained on it, the classifier's mistakes are
//! fed back to the LLM, and the LLM writes targeted examples for the next
//! round. The loop stops on an iteration cap, a validation plateau, or an
//! exhausted per-class budget.
//!
//! * [`dataset`]: labels, examples, deduplicated datasets, record files
//! * [`classifier`]: featurizers, logistic head, evaluation reports
//! * [`llm`]: chat-completion providers (HTTP and scripted mock)
//! * [`curation`]: batch screening and per-class budgets
//! * [`controller`]: the loop itself
//! * [`cli`]: the `curator` command line

pub mod classifier;
pub mod cli;
pub mod controller;
pub mod curation;
pub mod dataset;
pub mod llm;

pub use classifier::{evaluate, train, EvalReport, FeaturizerSpec, Model, TrainConfig};
pub use controller::{run, CurationResult, Curator, LoopConfig, StopReason};
pub use dataset::{normalize_text, Dataset, Example, Label, LabelSet, TaskSpec};
