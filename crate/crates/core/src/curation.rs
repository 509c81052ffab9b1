//! Constraints on generated batches: deduplication, near-duplicate and
//! validation-overlap screening, and per-class budgets.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{ClassifierError, Featurizer, SparseVector};
use crate::dataset::{normalize_text, Dataset, Example, LabelSet};

#[derive(Debug, Error)]
#[error("invalid curation policy: {0}")]
pub struct PolicyError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationPolicy {
    /// Total accepted generated examples allowed per class.
    pub per_class_budget: usize,
    /// Examples requested per class per iteration.
    pub batch_per_class: usize,
    pub near_dup_cosine: f64,
    pub val_overlap_cosine: f64,
    /// Largest spread of accepted per-class counts in one batch before a
    /// warning is logged.
    pub balance_tolerance: usize,
}

impl Default for CurationPolicy {
    fn default() -> Self {
        Self {
            per_class_budget: 64,
            batch_per_class: 8,
            near_dup_cosine: 0.95,
            val_overlap_cosine: 0.90,
            balance_tolerance: 8,
        }
    }
}

impl CurationPolicy {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let in_unit = |v: f64| v > 0.0 && v <= 1.0;
        if !in_unit(self.near_dup_cosine) || !in_unit(self.val_overlap_cosine) {
            return Err(PolicyError("cosine thresholds must lie in (0, 1]".into()));
        }
        if self.batch_per_class < 1 || self.per_class_budget < self.batch_per_class {
            return Err(PolicyError(format!(
                "need per_class_budget >= batch_per_class >= 1, got {} and {}",
                self.per_class_budget, self.batch_per_class
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub generated_per_class: BTreeMap<String, usize>,
    pub budget: usize,
}

impl BudgetLedger {
    pub fn new(labels: &LabelSet, budget: usize) -> Self {
        Self {
            generated_per_class: labels.names().map(|n| (n.to_string(), 0)).collect(),
            budget,
        }
    }

    pub fn generated(&self, label: &str) -> usize {
        self.generated_per_class.get(label).copied().unwrap_or(0)
    }

    pub fn remaining(&self, label: &str) -> usize {
        self.budget.saturating_sub(self.generated(label))
    }

    pub fn all_exhausted(&self) -> bool {
        self.generated_per_class.keys().all(|l| self.remaining(l) == 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    EmptyText,
    InvalidLabel,
    ExactDuplicate,
    NearDuplicate,
    ValOverlap,
    BudgetExhausted,
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectionReason::EmptyText => "empty_text",
            RejectionReason::InvalidLabel => "invalid_label",
            RejectionReason::ExactDuplicate => "exact_duplicate",
            RejectionReason::NearDuplicate => "near_duplicate",
            RejectionReason::ValOverlap => "val_overlap",
            RejectionReason::BudgetExhausted => "budget_exhausted",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub example: Example,
    pub reason: RejectionReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub accepted: Vec<Example>,
    pub rejections: Vec<Rejection>,
    pub ledger: BudgetLedger,
}

impl FilterOutcome {
    pub fn tallies(&self) -> BTreeMap<RejectionReason, usize> {
        let mut t = BTreeMap::new();
        for r in &self.rejections {
            *t.entry(r.reason).or_insert(0) += 1;
        }
        t
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine_similarity(a: &SparseVector, b: &SparseVector) -> f64 {
    let aa = a.dot(a);
    let bb = b.dot(b);
    if aa == 0.0 || bb == 0.0 {
        return 0.0;
    }
    (a.dot(b) / (aa * bb).sqrt()).clamp(-1.0, 1.0)
}

fn vectors_of(featurizer: &dyn Featurizer, ds: &Dataset) -> Result<Vec<SparseVector>, ClassifierError> {
    let texts: Vec<&str> = ds.iter().map(|e| e.text.as_str()).collect();
    featurizer.featurize_batch(&texts)
}

/// Screens `candidates` in order. Each candidate is checked for, in turn:
/// empty text, unknown label, exact duplicate (train, val, or an earlier
/// accepted candidate), near duplicate (train or earlier accepted), overlap
/// with validation, and budget. The first failing check names the rejection.
pub fn filter_batch(
    candidates: Vec<Example>,
    train: &Dataset,
    val: &Dataset,
    ledger: &BudgetLedger,
    policy: &CurationPolicy,
    featurizer: &dyn Featurizer,
) -> Result<FilterOutcome, ClassifierError> {
    let labels = train.labels();
    let mut ledger = ledger.clone();
    let mut reference = vectors_of(featurizer, train)?;
    let val_vectors = vectors_of(featurizer, val)?;
    let mut seen: HashSet<String> = HashSet::new();
    let mut accepted = Vec::new();
    let mut rejections = Vec::new();

    let texts: Vec<&str> = candidates.iter().map(|e| e.text.as_str()).collect();
    let candidate_vectors = featurizer.featurize_batch(&texts)?;

    for (example, vector) in candidates.into_iter().zip(candidate_vectors) {
        let key = normalize_text(&example.text);
        let reason = if key.is_empty() {
            Some(RejectionReason::EmptyText)
        } else if !labels.contains(&example.label) {
            Some(RejectionReason::InvalidLabel)
        } else if train.contains_key(&key) || val.contains_key(&key) || seen.contains(&key) {
            Some(RejectionReason::ExactDuplicate)
        } else if reference
            .iter()
            .any(|r| cosine_similarity(&vector, r) >= policy.near_dup_cosine)
        {
            Some(RejectionReason::NearDuplicate)
        } else if val_vectors
            .iter()
            .any(|v| cosine_similarity(&vector, v) >= policy.val_overlap_cosine)
        {
            Some(RejectionReason::ValOverlap)
        } else if ledger.generated(&example.label) + 1 > ledger.budget {
            Some(RejectionReason::BudgetExhausted)
        } else {
            None
        };
        match reason {
            Some(reason) => rejections.push(Rejection { example, reason }),
            None => {
                *ledger
                    .generated_per_class
                    .get_mut(&example.label)
                    .expect("ledger covers every label") += 1;
                seen.insert(key);
                reference.push(vector);
                accepted.push(example);
            }
        }
    }
    Ok(FilterOutcome {
        accepted,
        rejections,
        ledger,
    })
}

/// Per-class counts to request from the next Generate call, in label order.
///
/// Without priorities every class asks for `batch_per_class`; with a
/// non-empty priority list, prioritized classes ask for `batch_per_class`
/// and the rest for half of it (at least 1). Everything is capped by the
/// remaining budget.
pub fn request_plan(
    labels: &LabelSet,
    ledger: &BudgetLedger,
    policy: &CurationPolicy,
    priority_labels: Option<&[String]>,
) -> Vec<(String, usize)> {
    let g = policy.batch_per_class;
    let priority = priority_labels.filter(|p| !p.is_empty());
    labels
        .names()
        .map(|name| {
            let wanted = match priority {
                Some(p) if !p.iter().any(|l| l == name) => (g / 2).max(1),
                _ => g,
            };
            (name.to_string(), wanted.min(ledger.remaining(name)))
        })
        .collect()
}
