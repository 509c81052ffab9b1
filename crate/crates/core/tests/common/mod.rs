//! Scripted-LLM fixtures: keyword-separable topic data rendered as the
//! fenced JSON replies the loop expects.

#![allow(dead_code)]

use curator::dataset::{Label, LabelSet, TaskSpec};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub const LABELS: [&str; 3] = ["sports", "business", "science"];

pub const KEYWORDS: [[&str; 12]; 3] = [
    [
        "goal", "striker", "league", "tournament", "coach", "referee", "stadium", "penalty", "midfielder",
        "championship", "playoff", "goalkeeper",
    ],
    [
        "revenue", "shareholders", "merger", "quarterly", "profit", "investors", "dividend", "acquisition",
        "earnings", "startup", "valuation", "ceo",
    ],
    [
        "telescope", "molecule", "genome", "physicist", "laboratory", "quantum", "neutron", "fossil", "enzyme",
        "astronomers", "particle", "microscope",
    ],
];

pub const FILLERS: [&str; 24] = [
    "the", "today", "new", "report", "after", "week", "announced", "big", "major", "latest", "officials",
    "during", "local", "surprising", "morning", "yesterday", "headline", "early", "record", "update", "strong",
    "story", "reported", "huge",
];

pub fn label_set() -> LabelSet {
    LabelSet::new(vec![
        Label::with_description("sports", "matches, teams, athletes and competitions"),
        Label::with_description("business", "companies, markets and the economy"),
        Label::with_description("science", "research, discoveries and technology"),
    ])
    .unwrap()
}

pub fn zero_shot_task() -> TaskSpec {
    TaskSpec::zero_shot(label_set(), Some("Classify short news headlines by topic.".into()))
}

/// Text built from three keywords of `class` (drawn from `keyword_pool`
/// indices) and three fillers.
pub fn topic_text(rng: &mut ChaCha8Rng, class: usize, keyword_pool: &[usize]) -> String {
    let kws: Vec<&str> = keyword_pool
        .choose_multiple(rng, 3)
        .map(|&i| KEYWORDS[class][i])
        .collect();
    let fill: Vec<&&str> = FILLERS.choose_multiple(rng, 3).collect();
    format!("{} {} {} {} {} {}", fill[0], kws[0], fill[1], kws[1], kws[2], fill[2])
}

pub fn examples_reply(items: &[(String, String)]) -> String {
    let examples: Vec<_> = items.iter().map(|(t, l)| json!({"text": t, "label": l})).collect();
    format!(
        "Here is the batch.\n```json\n{}\n```\n",
        serde_json::to_string_pretty(&json!({ "examples": examples })).unwrap()
    )
}

pub fn analysis_reply(priority: &[&str]) -> String {
    format!(
        "```json\n{}\n```",
        json!({
            "failure_modes": ["confuses closely related topics"],
            "data_needs": ["boundary cases between topics"],
            "priority_labels": priority,
        })
    )
}

/// `per_class` texts per label using the full keyword pool.
pub fn balanced_batch(rng: &mut ChaCha8Rng, per_class: usize) -> Vec<(String, String)> {
    let all: Vec<usize> = (0..12).collect();
    let mut out = Vec::new();
    for _ in 0..per_class {
        for (c, l) in LABELS.iter().enumerate() {
            out.push((topic_text(rng, c, &all), l.to_string()));
        }
    }
    out
}

/// Validation reply followed by (generate, analyze) pairs for `iterations`.
pub fn separable_script(seed: u64, iterations: usize, val_per_class: usize, per_class: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut script = vec![examples_reply(&balanced_batch(&mut rng, val_per_class))];
    for _ in 0..iterations {
        script.push(examples_reply(&balanced_batch(&mut rng, per_class)));
        script.push(analysis_reply(&["science"]));
    }
    script
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
