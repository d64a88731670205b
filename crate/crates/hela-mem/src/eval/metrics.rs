//! Answer scoring: token-level F1 and BLEU-1 over normalized text, plus the
//! token counter used for context-size accounting.

use std::collections::BTreeMap;

/// Lowercase, strip punctuation, drop English articles, split on whitespace.
pub fn normalize_answer(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|raw| raw.chars().filter(|c| c.is_alphanumeric()).collect::<String>())
        .filter(|t| !t.is_empty() && t != "a" && t != "an" && t != "the")
        .collect()
}

fn token_counts(tokens: &[String]) -> BTreeMap<&str, usize> {
    let mut counts = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    counts
}

fn common_count(pred: &[String], gold: &[String]) -> usize {
    let pred_counts = token_counts(pred);
    let gold_counts = token_counts(gold);
    pred_counts
        .iter()
        .map(|(t, &c)| c.min(*gold_counts.get(t).unwrap_or(&0)))
        .sum()
}

/// Token-multiset F1 after normalization. Both sides empty scores 1.0;
/// exactly one side empty scores 0.0.
pub fn f1_score(prediction: &str, gold: &str) -> f64 {
    let pred = normalize_answer(prediction);
    let gold = normalize_answer(gold);
    match (pred.is_empty(), gold.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        (false, false) => {}
    }
    let common = common_count(&pred, &gold) as f64;
    if common == 0.0 {
        return 0.0;
    }
    let precision = common / pred.len() as f64;
    let recall = common / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Modified unigram precision with a brevity penalty of
/// `exp(1 - |gold|/|pred|)` when the prediction is shorter than the gold.
/// Empty predictions score 0.0.
pub fn bleu1_score(prediction: &str, gold: &str) -> f64 {
    let pred = normalize_answer(prediction);
    let gold = normalize_answer(gold);
    if pred.is_empty() {
        return 0.0;
    }
    if gold.is_empty() {
        return 0.0;
    }
    let clipped = common_count(&pred, &gold) as f64;
    let precision = clipped / pred.len() as f64;
    let brevity = if pred.len() < gold.len() {
        (1.0 - gold.len() as f64 / pred.len() as f64).exp()
    } else {
        1.0
    };
    precision * brevity
}

/// Pluggable token counting for context-size accounting.
pub trait TokenCounter {
    fn count(&self, text: &str) -> usize;
}

/// The default counter: whitespace-delimited tokens.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenCounter;

impl TokenCounter for WhitespaceTokenCounter {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

/// Count tokens with the default whitespace counter.
pub fn count_tokens(text: &str) -> usize {
    WhitespaceTokenCounter.count(text)
}
