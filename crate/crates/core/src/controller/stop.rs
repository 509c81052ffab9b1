use serde::{Deserialize, Serialize};

use super::LoopConfig;
use crate::curation::BudgetLedger;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIterations,
    Plateau,
    BudgetExhausted,
    ProviderFailure,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::MaxIterations => "max_iterations",
            StopReason::Plateau => "plateau",
            StopReason::BudgetExhausted => "budget_exhausted",
            StopReason::ProviderFailure => "provider_failure",
        })
    }
}

/// Whether each iteration improved on the best value before it by more
/// than `epsilon`. The first iteration always counts as improving.
pub fn improvement_flags(history: &[f64], epsilon: f64) -> Vec<bool> {
    let mut best = f64::NEG_INFINITY;
    history
        .iter()
        .map(|&m| {
            let improving = m - best > epsilon;
            best = best.max(m);
            improving
        })
        .collect()
}

/// True when the last `patience` iterations all failed to improve.
pub fn is_plateau(history: &[f64], epsilon: f64, patience: usize) -> bool {
    let flags = improvement_flags(history, epsilon);
    patience >= 1 && flags.len() >= patience && flags[flags.len() - patience..].iter().all(|f| !f)
}

/// Stop decision after an iteration. When several conditions hold the
/// iteration cap wins over a plateau, which wins over budget exhaustion.
pub fn should_stop(history: &[f64], ledger: &BudgetLedger, cfg: &LoopConfig) -> Option<StopReason> {
    if history.len() >= cfg.max_iterations {
        Some(StopReason::MaxIterations)
    } else if is_plateau(history, cfg.plateau_epsilon, cfg.plateau_patience) {
        Some(StopReason::Plateau)
    } else if ledger.all_exhausted() {
        Some(StopReason::BudgetExhausted)
    } else {
        None
    }
}
