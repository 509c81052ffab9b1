//! Prompt templates for the Generate and Analyze steps, and parsers for the
//! structured replies.

use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::LoopState;
use crate::classifier::EvalReport;
use crate::dataset::{Dataset, Example, LabelSet, Origin, TaskSpec};

/// Existing examples shown per class in a Generate prompt.
pub const SAMPLES_PER_CLASS: usize = 3;

pub const SYSTEM_PROMPT: &str = "You curate training data for a small text classifier. \
You write realistic, varied short texts for the requested labels, study the classifier's \
mistakes, and target its weaknesses. Always answer with a single fenced JSON block in the \
exact format requested.";

pub const EXAMPLES_FORMAT: &str = "Reply with one fenced JSON block and nothing else:\n\
```json\n{\"examples\": [{\"text\": \"<example text>\", \"label\": \"<label name>\"}]}\n```\n\
Use label names exactly as written above. Do not repeat texts shown in this message.";

pub const ANALYSIS_FORMAT: &str = "Reply with one fenced JSON block and nothing else:\n\
```json\n{\"failure_modes\": [\"...\"], \"data_needs\": [\"...\"], \"priority_labels\": [\"<label name>\"]}\n```\n\
failure_modes: systematic confusions, misleading lexical cues, negation, domain shift and similar.\n\
data_needs: what the next batch should contain (hard negatives, paraphrases, boundary cases, ...).\n\
priority_labels: the labels that need the most new data.";

/// Structured outcome of an Analyze step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub failure_modes: Vec<String>,
    pub data_needs: Vec<String>,
    pub priority_labels: Vec<String>,
}

fn describe_task(out: &mut String, task: &TaskSpec) {
    if let Some(desc) = &task.task_description {
        let _ = writeln!(out, "Task: {desc}\n");
    }
    out.push_str("Labels:\n");
    for label in task.label_set.iter() {
        match &label.description {
            Some(d) => {
                let _ = writeln!(out, "- {}: {}", label.name, d);
            }
            None => {
                let _ = writeln!(out, "- {}", label.name);
            }
        }
    }
    out.push('\n');
}

fn describe_counts(out: &mut String, counts: &[(String, usize)]) {
    for (label, n) in counts.iter().filter(|(_, n)| *n > 0) {
        let _ = writeln!(out, "- {label}: {n}");
    }
    out.push('\n');
}

/// Prompt asking for held-out validation examples.
pub fn build_validation_prompt(task: &TaskSpec, needs: &[(String, usize)], avoid: &[&Example]) -> String {
    let mut out = String::new();
    describe_task(&mut out, task);
    out.push_str(
        "Write a held-out validation set for this task: clear, realistic, varied examples whose label \
is unambiguous. Number of examples needed per label:\n",
    );
    describe_counts(&mut out, needs);
    if !avoid.is_empty() {
        out.push_str("These texts are already used for training; do not reuse or paraphrase them:\n");
        for ex in avoid {
            let _ = writeln!(out, "- [{}] {}", ex.label, ex.text);
        }
        out.push('\n');
    }
    out.push_str(EXAMPLES_FORMAT);
    out
}

/// Up to [`SAMPLES_PER_CLASS`] training texts per label, chosen with a seeded RNG.
pub fn sample_existing(train: &Dataset, seed: u64) -> Vec<(String, Vec<String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    train
        .labels()
        .names()
        .map(|name| {
            let members: Vec<&Example> = train.iter().filter(|e| e.label == name).collect();
            let picked = members
                .choose_multiple(&mut rng, SAMPLES_PER_CLASS)
                .map(|e| e.text.clone())
                .collect();
            (name.to_string(), picked)
        })
        .collect()
}

fn render_analysis(out: &mut String, analysis: &AnalysisRecord) {
    out.push_str("Latest analysis of the classifier:\n");
    for m in &analysis.failure_modes {
        let _ = writeln!(out, "- failure mode: {m}");
    }
    for n in &analysis.data_needs {
        let _ = writeln!(out, "- data need: {n}");
    }
    if !analysis.priority_labels.is_empty() {
        let _ = writeln!(out, "- priority labels: {}", analysis.priority_labels.join(", "));
    }
    out.push('\n');
}

/// Generate-step prompt: labels, sample data, latest analysis and the
/// requested per-class counts.
pub fn build_generate_prompt(state: &LoopState, plan: &[(String, usize)], sample_seed: u64) -> String {
    let mut out = String::new();
    describe_task(&mut out, &state.task);
    let samples = sample_existing(&state.train_set, sample_seed);
    if samples.iter().any(|(_, s)| !s.is_empty()) {
        out.push_str("Examples already in the training set:\n");
        for (label, texts) in &samples {
            for t in texts {
                let _ = writeln!(out, "- [{label}] {t}");
            }
        }
        out.push('\n');
    }
    if let Some(analysis) = &state.last_analysis {
        render_analysis(&mut out, analysis);
    }
    out.push_str(
        "Write new training examples that are diverse in wording, length and topic, and that address \
the weaknesses described above. Number of examples per label:\n",
    );
    describe_counts(&mut out, plan);
    out.push_str(EXAMPLES_FORMAT);
    out
}

fn render_confusion(out: &mut String, report: &EvalReport) {
    out.push_str("| true \\ predicted |");
    for l in &report.labels {
        let _ = write!(out, " {l} |");
    }
    out.push('\n');
    out.push_str("|---|");
    for _ in &report.labels {
        out.push_str("---|");
    }
    out.push('\n');
    for (label, row) in report.labels.iter().zip(&report.confusion) {
        let _ = write!(out, "| {label} |");
        for cell in row {
            let _ = write!(out, " {cell} |");
        }
        out.push('\n');
    }
}

/// Analyze-step prompt: the classifier's validation diagnostics.
pub fn build_analyze_prompt(state: &LoopState, report: &EvalReport) -> String {
    let mut out = String::new();
    describe_task(&mut out, &state.task);
    let _ = writeln!(
        out,
        "The classifier was trained on {} examples and evaluated on {} validation examples.\n",
        state.train_set.len(),
        report.evaluated()
    );
    let _ = writeln!(out, "Accuracy: {:.4}", report.accuracy);
    let _ = writeln!(out, "Macro-F1: {:.4}\n", report.macro_f1);
    out.push_str("Confusion matrix (rows: true label, columns: predicted label):\n");
    render_confusion(&mut out, report);
    out.push_str("\nPer-class error rates:\n");
    for (l, e) in report.labels.iter().zip(&report.per_class_error_rate) {
        let _ = writeln!(out, "- {l}: {e:.4}");
    }
    if report.error_traces.is_empty() {
        out.push_str("\nNo validation errors.\n");
    } else {
        out.push_str("\nMisclassified validation examples (most confident first):\n");
        for t in &report.error_traces {
            let _ = writeln!(
                out,
                "- \"{}\" true={} predicted={} p={:.3}",
                t.text, t.true_label, t.predicted_label, t.predicted_probability
            );
        }
    }
    out.push_str(
        "\nSummarize what the classifier gets right and wrong, and what data would fix its errors.\n\n",
    );
    out.push_str(ANALYSIS_FORMAT);
    out
}

pub fn build_repair_message(reason: &str) -> String {
    format!("Your previous reply could not be parsed ({reason}). {EXAMPLES_FORMAT}")
}

fn string_field(v: &Value, key: &str) -> String {
    v.get(key).and_then(Value::as_str).unwrap_or_default().to_string()
}

/// Reads `{"examples": [...]}` or a bare array. `None` if neither shape.
/// Items missing `text` or `label` come back with empty strings so the
/// filter can reject them with a reason.
pub fn parse_examples(value: &Value, origin: Origin, iteration: u32) -> Option<Vec<Example>> {
    let items = match value {
        Value::Array(items) => items,
        Value::Object(map) => map.get("examples")?.as_array()?,
        _ => return None,
    };
    Some(
        items
            .iter()
            .map(|it| Example::new(string_field(it, "text"), string_field(it, "label"), origin, iteration))
            .collect(),
    )
}

fn string_list(v: &Value, key: &str) -> Vec<String> {
    v.get(key)
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_str).map(str::to_string).collect())
        .unwrap_or_default()
}

/// Reads an analysis object. Unknown priority labels are dropped and
/// returned separately.
pub fn parse_analysis(value: &Value, labels: &LabelSet) -> Option<(AnalysisRecord, Vec<String>)> {
    if !value.is_object() {
        return None;
    }
    let (priority_labels, dropped): (Vec<String>, Vec<String>) =
        string_list(value, "priority_labels").into_iter().partition(|l| labels.contains(l));
    Some((
        AnalysisRecord {
            failure_modes: string_list(value, "failure_modes"),
            data_needs: string_list(value, "data_needs"),
            priority_labels,
        },
        dropped,
    ))
}
