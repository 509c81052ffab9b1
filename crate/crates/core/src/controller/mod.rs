//! The generate / evaluate / refine loop.
//!
//! [`initialize`] asks the LLM for a class-balanced validation set that is
//! disjoint from the seed examples and freezes it. Each iteration then
//! requests a batch of new examples, screens it with
//! [`filter_batch`](crate::curation::filter_batch), retrains the classifier
//! on the cumulative training set, evaluates on the validation set, and asks
//! the LLM to analyze the errors. The best iteration by validation macro-F1
//! (earliest on ties) supplies the returned model and training set.

mod prompts;
mod report;
mod stop;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use prompts::{
    build_analyze_prompt, build_generate_prompt, build_validation_prompt, parse_analysis, parse_examples,
    sample_existing, AnalysisRecord, SAMPLES_PER_CLASS, SYSTEM_PROMPT,
};
pub use report::{IterationSummary, RunArtifacts, RunReport};
pub use stop::{improvement_flags, is_plateau, should_stop, StopReason};

use crate::classifier::{
    build_featurizer, evaluate_with, train_with, ClassifierError, EvalReport, Featurizer, FeaturizerSpec, Model,
    TrainConfig,
};
use crate::curation::{filter_batch, request_plan, BudgetLedger, CurationPolicy, RejectionReason};
use crate::dataset::{normalize_text, Dataset, DatasetError, Example, Origin, TaskSpec};
use crate::llm::{
    extract_structured, ChatMessage, ChatProvider, CompletionRequest, ProviderError, ANALYZE_TEMPERATURE,
    GENERATE_TEMPERATURE,
};

/// Re-prompts allowed for short validation classes.
pub const VALIDATION_REPROMPTS: usize = 3;
pub const GENERATE_MAX_TOKENS: u32 = 4096;
pub const ANALYZE_MAX_TOKENS: u32 = 1024;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimaryMetric {
    #[default]
    MacroF1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    pub max_iterations: usize,
    pub plateau_epsilon: f64,
    pub plateau_patience: usize,
    pub val_per_class: usize,
    pub primary_metric: PrimaryMetric,
    pub policy: CurationPolicy,
    pub train_config: TrainConfig,
    pub featurizer: FeaturizerSpec,
    pub rng_seed: u64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            plateau_epsilon: 0.005,
            plateau_patience: 2,
            val_per_class: 16,
            primary_metric: PrimaryMetric::MacroF1,
            policy: CurationPolicy::default(),
            train_config: TrainConfig::default(),
            featurizer: FeaturizerSpec::default(),
            rng_seed: 0,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), LoopError> {
        let bad = |m: String| Err(LoopError::InvalidConfig(m));
        if self.max_iterations < 1 {
            return bad("max_iterations must be >= 1".into());
        }
        if self.plateau_epsilon.is_nan() || self.plateau_epsilon <= 0.0 {
            return bad("plateau_epsilon must be > 0".into());
        }
        if self.plateau_patience < 1 {
            return bad("plateau_patience must be >= 1".into());
        }
        if self.val_per_class < 1 {
            return bad("val_per_class must be >= 1".into());
        }
        self.policy.validate().map_err(|e| LoopError::InvalidConfig(e.to_string()))?;
        self.train_config
            .validate()
            .map_err(|e| LoopError::InvalidConfig(e.to_string()))?;
        self.featurizer
            .validate()
            .map_err(|e| LoopError::InvalidConfig(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LoopError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("validation set generation failed; counts per class: {counts:?}")]
    InitializationFailed { counts: BTreeMap<String, usize> },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub index: usize,
    /// Accepted examples of this iteration only.
    pub generated_batch: Dataset,
    pub rejection_tallies: BTreeMap<RejectionReason, usize>,
    /// Cumulative training set size after this iteration's batch.
    pub train_size: usize,
    pub eval: EvalReport,
    pub analysis: Option<AnalysisRecord>,
    pub metric_value: f64,
    pub improvement_over_best: f64,
    pub stop_decision: Option<StopReason>,
}

#[derive(Debug, Clone)]
pub struct LoopState {
    pub task: TaskSpec,
    pub train_set: Dataset,
    pub validation_set: Dataset,
    pub ledger: BudgetLedger,
    pub history: Vec<IterationRecord>,
    pub best_index: Option<usize>,
    pub best_model: Model,
    pub best_train_set: Dataset,
    pub last_analysis: Option<AnalysisRecord>,
}

impl LoopState {
    pub fn metrics(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.metric_value).collect()
    }

    fn best_metric(&self) -> Option<f64> {
        self.best_index.map(|i| self.history[i].metric_value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurationResult {
    pub final_train_set: Dataset,
    pub validation_set: Dataset,
    pub model: Model,
    pub stop_reason: StopReason,
    /// Index into `history` of the returned model; `None` if no iteration completed.
    pub best_index: Option<usize>,
    pub ledger: BudgetLedger,
    pub history: Vec<IterationRecord>,
}

impl CurationResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    pub fn best_metric(&self) -> Option<f64> {
        self.best_index.map(|i| self.history[i].metric_value)
    }
}

/// Runs the loop against one provider with one featurizer.
pub struct Curator<'a, P: ChatProvider + ?Sized> {
    cfg: LoopConfig,
    provider: &'a P,
    featurizer: Box<dyn Featurizer>,
}

impl<'a, P: ChatProvider + ?Sized> Curator<'a, P> {
    pub fn new(cfg: LoopConfig, provider: &'a P) -> Result<Self, LoopError> {
        cfg.validate()?;
        let featurizer = build_featurizer(&cfg.featurizer)?;
        Ok(Self {
            cfg,
            provider,
            featurizer,
        })
    }

    pub fn with_featurizer(cfg: LoopConfig, provider: &'a P, featurizer: Box<dyn Featurizer>) -> Result<Self, LoopError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            provider,
            featurizer,
        })
    }

    pub fn config(&self) -> &LoopConfig {
        &self.cfg
    }

    fn ask(&self, messages: Vec<ChatMessage>, temperature: f64, max_tokens: u32) -> Result<String, ProviderError> {
        let req = CompletionRequest::new(messages, temperature, max_tokens)?;
        self.provider.complete(&req)
    }

    /// Model trained on `train`, or the all-zero model when `train` cannot
    /// be fit (empty or single-class).
    fn fit(&self, train: &Dataset) -> Result<Model, ClassifierError> {
        match train_with(train.labels(), train, self.featurizer.as_ref(), &self.cfg.train_config) {
            Ok((m, _)) => Ok(m),
            Err(ClassifierError::EmptyTrainingSet | ClassifierError::DegenerateTrainingSet) => {
                log::warn!("training set has fewer than two classes; using the uniform model");
                Ok(Model::zeros(train.labels(), self.featurizer.spec().clone()))
            }
            Err(e) => Err(e),
        }
    }

    /// Builds the frozen validation set and seeds the training set.
    pub fn initialize(&self, task: &TaskSpec) -> Result<LoopState, LoopError> {
        let labels = task.label_set.clone();
        let seeds = task.seed_examples();
        let target = self.cfg.val_per_class;
        let mut val = Dataset::new(labels.clone());
        let avoid: Vec<&Example> = seeds.iter().collect();

        for attempt in 0..=VALIDATION_REPROMPTS {
            let counts = val.class_count_vec();
            let needs: Vec<(String, usize)> = labels
                .names()
                .zip(&counts)
                .map(|(n, &c)| (n.to_string(), target.saturating_sub(c)))
                .collect();
            if needs.iter().all(|(_, n)| *n == 0) {
                break;
            }
            let prompt = build_validation_prompt(task, &needs, &avoid);
            let reply = self.ask(
                vec![ChatMessage::system(SYSTEM_PROMPT), ChatMessage::user(prompt)],
                GENERATE_TEMPERATURE,
                GENERATE_MAX_TOKENS,
            )?;
            let candidates = match extract_structured(&reply)
                .ok()
                .and_then(|v| parse_examples(&v, Origin::Validation, 0))
            {
                Some(c) => c,
                None => {
                    log::warn!("validation attempt {}: unparseable reply", attempt + 1);
                    continue;
                }
            };
            let mut room: BTreeMap<String, usize> = needs.into_iter().collect();
            for ex in candidates {
                let Some(left) = room.get_mut(&ex.label) else {
                    continue;
                };
                if *left == 0 || seeds.contains_key(&normalize_text(&ex.text)) {
                    continue;
                }
                if val.insert(ex)? {
                    *left -= 1;
                }
            }
        }

        let minimum = target.div_ceil(2);
        if val.class_count_vec().iter().any(|&c| c < minimum) {
            return Err(LoopError::InitializationFailed {
                counts: val.class_counts(),
            });
        }

        let best_model = self.fit(&seeds)?;
        Ok(LoopState {
            task: task.clone(),
            train_set: seeds.clone(),
            validation_set: val,
            ledger: BudgetLedger::new(&labels, self.cfg.policy.per_class_budget),
            history: Vec::new(),
            best_index: None,
            best_model,
            best_train_set: seeds,
            last_analysis: None,
        })
    }

    fn generate(&self, state: &LoopState, iteration: u32) -> Result<Vec<Example>, ProviderError> {
        let priority = state.last_analysis.as_ref().map(|a| a.priority_labels.as_slice());
        let plan = request_plan(&state.task.label_set, &state.ledger, &self.cfg.policy, priority);
        let sample_seed = self.cfg.rng_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ u64::from(iteration);
        let prompt = build_generate_prompt(state, &plan, sample_seed);
        let mut messages = vec![ChatMessage::system(SYSTEM_PROMPT), ChatMessage::user(prompt)];
        let reply = self.ask(messages.clone(), GENERATE_TEMPERATURE, GENERATE_MAX_TOKENS)?;
        let parsed = extract_structured(&reply)
            .map_err(|e| e.reason)
            .and_then(|v| parse_examples(&v, Origin::Generated, iteration).ok_or_else(|| "no examples list".to_string()));
        match parsed {
            Ok(c) => Ok(c),
            Err(reason) => {
                log::warn!("iteration {iteration}: unparseable batch ({reason}); re-prompting");
                messages.push(ChatMessage::assistant(reply));
                messages.push(ChatMessage::user(prompts::build_repair_message(&reason)));
                let retry = self.ask(messages, GENERATE_TEMPERATURE, GENERATE_MAX_TOKENS)?;
                Ok(extract_structured(&retry)
                    .ok()
                    .and_then(|v| parse_examples(&v, Origin::Generated, iteration))
                    .unwrap_or_else(|| {
                        log::warn!("iteration {iteration}: batch still unparseable; continuing with none");
                        Vec::new()
                    }))
            }
        }
    }

    fn analyze(&self, state: &LoopState, report: &EvalReport) -> Result<Option<AnalysisRecord>, ProviderError> {
        let prompt = build_analyze_prompt(state, report);
        let reply = self.ask(
            vec![ChatMessage::system(SYSTEM_PROMPT), ChatMessage::user(prompt)],
            ANALYZE_TEMPERATURE,
            ANALYZE_MAX_TOKENS,
        )?;
        let parsed = extract_structured(&reply)
            .ok()
            .and_then(|v| parse_analysis(&v, &state.task.label_set));
        Ok(match parsed {
            Some((record, dropped)) => {
                if !dropped.is_empty() {
                    log::warn!("analysis named unknown labels {dropped:?}; dropped");
                }
                Some(record)
            }
            None => {
                log::warn!("analysis reply unparseable; continuing without analysis");
                None
            }
        })
    }

    /// One Generate, Filter, Train & Evaluate, Analyze cycle. On error the
    /// state is left as it was before the call, apart from LLM calls spent.
    pub fn run_iteration(&self, state: &mut LoopState) -> Result<IterationRecord, LoopError> {
        let index = state.history.len() + 1;
        let iteration = index as u32;

        let candidates = self.generate(state, iteration)?;
        let outcome = filter_batch(
            candidates,
            &state.train_set,
            &state.validation_set,
            &state.ledger,
            &self.cfg.policy,
            self.featurizer.as_ref(),
        )?;
        let tallies = outcome.tallies();
        let mut batch = Dataset::new(state.task.label_set.clone());
        let mut train = state.train_set.clone();
        for ex in &outcome.accepted {
            batch.insert(ex.clone())?;
            train.insert(ex.clone())?;
        }
        let counts = batch.class_count_vec();
        let spread = counts.iter().max().unwrap_or(&0) - counts.iter().min().unwrap_or(&0);
        if spread > self.cfg.policy.balance_tolerance {
            log::warn!("iteration {index}: accepted per-class counts {counts:?} exceed balance tolerance");
        }

        let model = self.fit(&train)?;
        let eval = evaluate_with(&model, self.featurizer.as_ref(), &state.validation_set)?;

        let mut next = LoopState {
            train_set: train,
            ledger: outcome.ledger,
            ..state.clone()
        };
        let analysis = self.analyze(&next, &eval)?;

        let metric_value = eval.macro_f1;
        let improvement_over_best = metric_value - next.best_metric().unwrap_or(0.0);
        let record = IterationRecord {
            index,
            generated_batch: batch,
            rejection_tallies: tallies,
            train_size: next.train_set.len(),
            eval,
            analysis: analysis.clone(),
            metric_value,
            improvement_over_best,
            stop_decision: None,
        };
        if next.best_metric().is_none_or(|best| metric_value > best) {
            next.best_index = Some(index - 1);
            next.best_model = model;
            next.best_train_set = next.train_set.clone();
        }
        next.last_analysis = analysis;
        next.history.push(record.clone());
        *state = next;
        Ok(record)
    }

    pub fn run(&self, task: &TaskSpec) -> Result<CurationResult, LoopError> {
        let mut state = self.initialize(task)?;
        self.run_from(&mut state)
    }

    /// Iterates from an initialized state until a stop condition holds.
    pub fn run_from(&self, state: &mut LoopState) -> Result<CurationResult, LoopError> {
        let stop_reason = loop {
            match self.run_iteration(state) {
                Ok(_) => {}
                Err(LoopError::Provider(e)) => {
                    log::error!("provider failure: {e}; stopping with best-so-far artifacts");
                    break StopReason::ProviderFailure;
                }
                Err(e) => return Err(e),
            }
            if let Some(reason) = should_stop(&state.metrics(), &state.ledger, &self.cfg) {
                state.history.last_mut().expect("one iteration ran").stop_decision = Some(reason);
                break reason;
            }
        };
        Ok(CurationResult {
            final_train_set: state.best_train_set.clone(),
            validation_set: state.validation_set.clone(),
            model: state.best_model.clone(),
            stop_reason,
            best_index: state.best_index,
            ledger: state.ledger.clone(),
            history: state.history.clone(),
        })
    }
}

pub fn initialize<P: ChatProvider + ?Sized>(task: &TaskSpec, cfg: &LoopConfig, provider: &P) -> Result<LoopState, LoopError> {
    Curator::new(cfg.clone(), provider)?.initialize(task)
}

pub fn run_iteration<P: ChatProvider + ?Sized>(
    state: &mut LoopState,
    cfg: &LoopConfig,
    provider: &P,
) -> Result<IterationRecord, LoopError> {
    Curator::new(cfg.clone(), provider)?.run_iteration(state)
}

pub fn run<P: ChatProvider + ?Sized>(task: &TaskSpec, cfg: &LoopConfig, provider: &P) -> Result<CurationResult, LoopError> {
    Curator::new(cfg.clone(), provider)?.run(task)
}
