//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one status line; exits non-zero if a gating one fails.

mod common;

use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use common::*;
use curator::classifier::{loss_and_gradient, EvalReport, ScoredItem, SparseVector};
use curator::controller::{should_stop, Curator, LoopConfig, StopReason};
use curator::curation::{BudgetLedger, CurationPolicy, RejectionReason};
use curator::dataset::{normalize_text, Dataset, Example, LabelSet, Origin};
use curator::llm::MockProvider;
use curator::{evaluate, FeaturizerSpec, Model};
use rand::Rng;

const LIVE_TARGET_ACCURACY: f64 = 82.6;
const LIVE_TOLERANCE_POINTS: f64 = 15.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(id: u32, name: &str, limit: Duration, f: impl FnOnce() -> Result<String, String>) -> bool {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let out = match result {
        Ok(d) if elapsed <= limit => Outcome { pass: true, detail: d },
        Ok(d) => Outcome {
            pass: false,
            detail: format!("{d}; too slow"),
        },
        Err(d) => Outcome { pass: false, detail: d },
    };
    println!(
        "{} [{id}] {name}: {} ({:.2}s, limit {}s)",
        if out.pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    out.pass
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn names(c: usize) -> Vec<String> {
    (0..c).map(|i| format!("c{i}")).collect()
}

fn gradient_oracle() -> Result<String, String> {
    let mut r = rng(0x67);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let c = r.gen_range(2..=4);
        let d = r.gen_range(2..=16);
        let n = r.gen_range(1..=8);
        let lambda = if case % 4 == 0 { 0.0 } else { r.gen_range(0.0..0.1) };
        let weights: Vec<Vec<f64>> = (0..c).map(|_| (0..d).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
        let bias: Vec<f64> = (0..c).map(|_| r.gen_range(-1.0..1.0)).collect();
        let batch: Vec<(SparseVector, usize)> = (0..n)
            .map(|_| {
                let mut pairs = Vec::new();
                for j in 0..d as u32 {
                    if r.gen_bool(0.5) {
                        pairs.push((j, r.gen_range(-1.0..1.0)));
                    }
                }
                let x = SparseVector::from_pairs(pairs);
                (x, r.gen_range(0..c))
            })
            .collect();
        let model = Model::from_parts(FeaturizerSpec::hashed(d), names(c), weights, bias).map_err(|e| e.to_string())?;
        let g = loss_and_gradient(&model, &batch, lambda).map_err(|e| e.to_string())?;

        let loss_at = |m: &Model| loss_and_gradient(m, &batch, lambda).map(|g| g.loss).unwrap();
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for k in 0..c {
            for j in 0..d {
                let mut plus = model.clone();
                plus.weights_mut()[k][j] += h;
                let mut minus = model.clone();
                minus.weights_mut()[k][j] -= h;
                numeric.push((loss_at(&plus) - loss_at(&minus)) / (2.0 * h));
                analytic.push(g.weights[k][j]);
            }
            let mut plus = model.clone();
            plus.bias_mut()[k] += h;
            let mut minus = model.clone();
            minus.bias_mut()[k] -= h;
            numeric.push((loss_at(&plus) - loss_at(&minus)) / (2.0 * h));
            analytic.push(g.bias[k]);
        }
        let diff = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        let rel = diff / na.max(nn).max(1e-12);
        worst = worst.max(rel);
        ensure(rel < 1e-6, || format!("case {case}: relative error {rel:.3e}"))?;
    }
    Ok(format!("100 instances, worst relative error {worst:.2e} < 1e-6"))
}

/// Recount from raw (true, predicted) pairs.
fn brute_force(c: usize, pairs: &[(usize, usize)]) -> (Vec<Vec<u64>>, f64, f64) {
    let mut confusion = vec![vec![0u64; c]; c];
    for &(t, p) in pairs {
        confusion[t][p] += 1;
    }
    let correct = pairs.iter().filter(|(t, p)| t == p).count();
    let accuracy = correct as f64 / pairs.len() as f64;
    let mut f1_sum = 0.0;
    for k in 0..c {
        let tp = pairs.iter().filter(|&&(t, p)| t == k && p == k).count() as f64;
        let fp = pairs.iter().filter(|&&(t, p)| t != k && p == k).count() as f64;
        let fn_ = pairs.iter().filter(|&&(t, p)| t == k && p != k).count() as f64;
        let precision = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
        let recall = if tp + fn_ == 0.0 { 0.0 } else { tp / (tp + fn_) };
        f1_sum += if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
    }
    (confusion, accuracy, f1_sum / c as f64)
}

fn compare(report: &EvalReport, c: usize, pairs: &[(usize, usize)], tag: &str) -> Result<bool, String> {
    let (confusion, accuracy, macro_f1) = brute_force(c, pairs);
    ensure(report.confusion == confusion, || format!("{tag}: confusion {:?} vs {confusion:?}", report.confusion))?;
    ensure(report.accuracy == accuracy, || format!("{tag}: accuracy {} vs {accuracy}", report.accuracy))?;
    ensure((report.macro_f1 - macro_f1).abs() < 1e-12, || {
        format!("{tag}: macro-F1 {} vs {macro_f1}", report.macro_f1)
    })?;
    Ok((0..c).any(|k| confusion[k][k] == 0))
}

fn metrics_oracle() -> Result<String, String> {
    let mut r = rng(0x3e7);
    let mut with_zero_class = 0;
    for set in 0..200 {
        let c = r.gen_range(2..=5);
        let n = r.gen_range(1..=40);
        let has_zero = if set % 2 == 0 {
            // synthetic predictions, some classes never predicted or never true
            let skew = r.gen_range(1..=c);
            let pairs: Vec<(usize, usize)> = (0..n).map(|_| (r.gen_range(0..c), r.gen_range(0..skew))).collect();
            let texts: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
            let items: Vec<ScoredItem> = pairs
                .iter()
                .zip(&texts)
                .map(|(&(t, p), s)| ScoredItem {
                    true_class: t,
                    predicted_class: p,
                    predicted_probability: 0.5,
                    text: s,
                })
                .collect();
            let report = EvalReport::from_predictions(&names(c), &items).map_err(|e| e.to_string())?;
            compare(&report, c, &pairs, &format!("set {set}"))?
        } else {
            // a random model scored through evaluate(); predictions recomputed by hand
            let d = 64;
            let spec = FeaturizerSpec::hashed(d);
            let labels = LabelSet::from_names(&names(c)).unwrap();
            let weights: Vec<Vec<f64>> = (0..c).map(|_| (0..d).map(|_| r.gen_range(-2.0..2.0)).collect()).collect();
            let bias: Vec<f64> = (0..c).map(|_| r.gen_range(-1.0..1.0)).collect();
            let model = Model::from_parts(spec.clone(), names(c), weights.clone(), bias.clone()).unwrap();
            let mut ds = Dataset::new(labels);
            let mut i = 0;
            while ds.len() < n {
                let words: Vec<String> = (0..r.gen_range(1..5)).map(|_| format!("w{}", r.gen_range(0..30))).collect();
                let text = format!("{} {i}", words.join(" "));
                i += 1;
                ds.insert(Example::seed(text, format!("c{}", r.gen_range(0..c)))).unwrap();
            }
            let pairs: Vec<(usize, usize)> = ds
                .iter()
                .map(|e| {
                    let x = curator::classifier::featurize(&spec, &e.text);
                    let logits: Vec<f64> = (0..c)
                        .map(|k| bias[k] + x.entries().iter().map(|&(j, v)| weights[k][j as usize] * v).sum::<f64>())
                        .collect();
                    let mut best = 0;
                    for k in 1..c {
                        if logits[k] > logits[best] {
                            best = k;
                        }
                    }
                    (e.label[1..].parse().unwrap(), best)
                })
                .collect();
            let report = evaluate(&model, &ds).map_err(|e| e.to_string())?;
            compare(&report, c, &pairs, &format!("set {set}"))?
        };
        with_zero_class += has_zero as usize;
    }

    let pairs = [(0, 0), (0, 0), (1, 0), (1, 1)];
    let items: Vec<ScoredItem> = pairs
        .iter()
        .map(|&(t, p)| ScoredItem {
            true_class: t,
            predicted_class: p,
            predicted_probability: 0.9,
            text: "x",
        })
        .collect();
    let hand = EvalReport::from_predictions(&names(2), &items).map_err(|e| e.to_string())?;
    ensure(hand.confusion == vec![vec![2, 0], vec![1, 1]], || format!("hand confusion {:?}", hand.confusion))?;
    ensure(hand.accuracy == 0.75, || format!("hand accuracy {}", hand.accuracy))?;
    ensure((hand.macro_f1 - 11.0 / 15.0).abs() < 1e-12, || format!("hand macro-F1 {}", hand.macro_f1))?;
    Ok(format!(
        "200 sets exact ({with_zero_class} with a zero-F1 class); [[2,0],[1,1]] -> 0.75 / 11/15"
    ))
}

/// Stop decision evaluated straight from the rule text.
fn plateau_rule(history: &[f64], eps: f64, p: usize, max_iterations: usize) -> Option<StopReason> {
    let n = history.len();
    let non_improving = |t: usize| t > 0 && history[t] - history[..t].iter().cloned().fold(f64::MIN, f64::max) <= eps;
    if n >= max_iterations {
        Some(StopReason::MaxIterations)
    } else if n >= p && (n - p..n).all(non_improving) {
        Some(StopReason::Plateau)
    } else {
        None
    }
}

fn plateau_oracle() -> Result<String, String> {
    let mut r = rng(0x91a);
    let labels = label_set();
    let ledger = BudgetLedger::new(&labels, 64);
    let mut plateaus = 0;
    for case in 0..1000 {
        let len = r.gen_range(1..=20);
        let eps: f64 = 0.05 * (1.0 - r.gen::<f64>());
        let p = r.gen_range(1..=3);
        let mut history = Vec::with_capacity(len);
        let mut m: f64 = r.gen_range(0.2..0.6);
        for _ in 0..len {
            m = match r.gen_range(0..4) {
                0 => m,
                1 => m + eps,
                2 => m + r.gen_range(-0.05..0.05),
                _ => m + r.gen_range(0.0..0.1),
            };
            history.push(m.clamp(0.0, 1.0));
        }
        let cfg = LoopConfig {
            max_iterations: r.gen_range(1..=25),
            plateau_epsilon: eps,
            plateau_patience: p,
            ..LoopConfig::default()
        };
        let expected = plateau_rule(&history, eps, p, cfg.max_iterations);
        let got = should_stop(&history, &ledger, &cfg);
        ensure(got == expected, || {
            format!("case {case}: {got:?} vs {expected:?} for {history:?} eps={eps} p={p}")
        })?;
        plateaus += (expected == Some(StopReason::Plateau)) as usize;
    }
    Ok(format!("1000 histories agree ({plateaus} plateau stops)"))
}

fn loop_invariants(result: &curator::CurationResult, budget: usize) -> Result<(), String> {
    let train = &result.final_train_set;
    let val_keys: HashSet<String> = result.validation_set.iter().map(|e| normalize_text(&e.text)).collect();
    let mut keys = HashSet::new();
    let mut generated: BTreeMap<&str, usize> = BTreeMap::new();
    for e in train.iter() {
        let k = normalize_text(&e.text);
        ensure(!val_keys.contains(&k), || format!("train text in validation: {}", e.text))?;
        ensure(keys.insert(k), || format!("duplicate in train: {}", e.text))?;
        if e.origin == Origin::Generated {
            *generated.entry(&e.label).or_default() += 1;
        }
    }
    for label in train.labels().names() {
        let g = result.ledger.generated(label);
        ensure(g <= budget, || format!("{label}: {g} generated > budget {budget}"))?;
        ensure(generated.get(label).copied().unwrap_or(0) <= g, || format!("{label}: train exceeds ledger"))?;
    }
    let mut prev = 0;
    for h in &result.history {
        ensure(h.train_size >= prev, || "training set shrank".into())?;
        prev = h.train_size;
    }
    if let Some(b) = result.best_index {
        ensure(train.len() == result.history[b].train_size, || "final train set is not the best one".into())?;
    }
    Ok(())
}

fn end_to_end() -> Result<String, String> {
    let run_once = || {
        let provider = MockProvider::new(separable_script(2024, 3, 16, 8));
        let cfg = LoopConfig {
            max_iterations: 3,
            rng_seed: 7,
            ..LoopConfig::default()
        };
        Curator::new(cfg, &provider)
            .and_then(|c| c.run(&zero_shot_task()))
            .map_err(|e| e.to_string())
    };
    let a = run_once()?;
    let b = run_once()?;
    let best = a.best_metric().ok_or("no iterations ran")?;
    ensure(best >= 0.95, || format!("best macro-F1 {best:.4} < 0.95"))?;
    ensure(
        matches!(a.stop_reason, StopReason::Plateau | StopReason::MaxIterations),
        || format!("stop reason {}", a.stop_reason),
    )?;
    loop_invariants(&a, CurationPolicy::default().per_class_budget)?;
    ensure(a.to_json() == b.to_json(), || "serialized results differ between runs".into())?;
    Ok(format!(
        "best macro-F1 {best:.4}, stop {}, {} iterations, byte-identical reruns",
        a.stop_reason,
        a.history.len()
    ))
}

fn shout(text: &str) -> String {
    format!("{}!", text.to_uppercase())
}

fn doubled(text: &str) -> String {
    format!("{text} {text}")
}

fn adversarial() -> Result<String, String> {
    const ITERATIONS: usize = 5;
    let budget = 5;
    let mut r = rng(0xadd);
    let val = balanced_batch(&mut r, 16);
    let mut script = vec![examples_reply(&val)];
    let mut first_fresh: Vec<(String, String)> = Vec::new();
    for it in 0..ITERATIONS {
        let fresh = balanced_batch(&mut r, 2);
        let mut batch = fresh.clone();
        // exact duplicates: re-cased copies from this batch or the first one
        let source = if it == 0 { &fresh } else { &first_fresh };
        for i in 0..6 {
            let (t, l) = &source[i % source.len()];
            batch.push((shout(t), l.clone()));
        }
        batch.push((val[it].0.clone(), val[it].1.clone()));
        // near duplicates of this batch's fresh items
        for (t, l) in fresh.iter().take(3) {
            batch.push((doubled(t), l.clone()));
        }
        batch.push((doubled(&val[it + 10].0), val[it + 10].1.clone()));
        batch.push((topic_text(&mut r, 0, &(0..12).collect::<Vec<_>>()), "politics".into()));
        batch.push((topic_text(&mut r, 1, &(0..12).collect::<Vec<_>>()), "weather".into()));
        batch.push(("  ?! ".into(), "sports".into()));
        assert_eq!(batch.len(), 20);
        if it == 0 {
            first_fresh = fresh;
        }
        script.push(examples_reply(&batch));
        script.push(analysis_reply(&["science"]));
    }
    let provider = MockProvider::new(script);
    let cfg = LoopConfig {
        max_iterations: ITERATIONS,
        plateau_patience: ITERATIONS,
        policy: CurationPolicy {
            per_class_budget: budget,
            batch_per_class: 4,
            ..CurationPolicy::default()
        },
        ..LoopConfig::default()
    };
    let result = Curator::new(cfg, &provider)
        .and_then(|c| c.run(&zero_shot_task()))
        .map_err(|e| e.to_string())?;

    let mut totals: BTreeMap<RejectionReason, usize> = BTreeMap::new();
    for h in &result.history {
        let rejected: usize = h.rejection_tallies.values().sum();
        ensure(h.generated_batch.len() + rejected == 20, || {
            format!("iteration {}: {} accepted + {rejected} rejected != 20", h.index, h.generated_batch.len())
        })?;
        let t = |k| h.rejection_tallies.get(&k).copied().unwrap_or(0);
        ensure(t(RejectionReason::EmptyText) == 1, || format!("iteration {}: empty_text", h.index))?;
        ensure(t(RejectionReason::InvalidLabel) == 2, || format!("iteration {}: invalid_label", h.index))?;
        ensure(t(RejectionReason::ExactDuplicate) == 7, || {
            format!("iteration {}: exact_duplicate {}", h.index, t(RejectionReason::ExactDuplicate))
        })?;
        ensure(t(RejectionReason::NearDuplicate) == 3, || {
            format!("iteration {}: near_duplicate {}", h.index, t(RejectionReason::NearDuplicate))
        })?;
        ensure(t(RejectionReason::ValOverlap) == 1, || format!("iteration {}: val_overlap", h.index))?;
        for (k, v) in &h.rejection_tallies {
            *totals.entry(*k).or_default() += v;
        }
    }
    ensure(totals.get(&RejectionReason::BudgetExhausted).copied().unwrap_or(0) > 0, || {
        "budget never bound".into()
    })?;
    loop_invariants(&result, budget)?;
    let tallies: Vec<String> = totals.iter().map(|(k, v)| format!("{k}={v}")).collect();
    Ok(format!(
        "{} iterations, stop {}, {}",
        result.history.len(),
        result.stop_reason,
        tallies.join(" ")
    ))
}

fn main() {
    let mut ok = true;
    println!("INFO [1] scope: full-scale reproduction is out of reach offline; criteria 2-6 are the gating checks");
    ok &= check(2, "gradient oracle", Duration::from_secs(5), gradient_oracle);
    ok &= check(3, "metrics oracle", Duration::from_secs(5), metrics_oracle);
    ok &= check(4, "plateau oracle", Duration::from_secs(5), plateau_oracle);
    ok &= check(5, "end-to-end mock run", Duration::from_secs(60), end_to_end);
    ok &= check(6, "adversarial curation invariants", Duration::from_secs(10), adversarial);
    println!(
        "SKIP [7] live zero-shot run (manual, non-gating): target accuracy {LIVE_TARGET_ACCURACY} +/- {LIVE_TOLERANCE_POINTS} points, see README"
    );
    if !ok {
        std::process::exit(1);
    }
}
