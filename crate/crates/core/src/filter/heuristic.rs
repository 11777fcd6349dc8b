//! Offline lexical stand-in for an MNLI classifier.

use std::collections::BTreeSet;

use super::verdict::{NliProvider, NliVerdict};
use crate::corpus::tokenize_words;
use crate::error::Result;

/// Minimum shared fraction of the smaller content-word set.
pub const OVERLAP_THRESHOLD: f64 = 0.3;
/// How many tokens away a negation may sit from the shared word it negates.
pub const NEGATION_REACH: usize = 2;

pub const CONTRADICTION: NliVerdict = NliVerdict {
    contradiction: 0.8,
    neutral: 0.1,
    entailment: 0.1,
};
pub const NEUTRAL: NliVerdict = NliVerdict {
    contradiction: 0.1,
    neutral: 0.8,
    entailment: 0.1,
};
pub const ENTAILMENT: NliVerdict = NliVerdict {
    contradiction: 0.1,
    neutral: 0.1,
    entailment: 0.8,
};

const FUNCTION_WORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be",
    "been", "being", "but", "by", "can", "could", "did", "do", "does", "for", "from", "had", "has",
    "have", "he", "her", "him", "his", "i", "if", "in", "into", "is", "it", "its", "may", "me",
    "might", "my", "of", "on", "or", "our", "shall", "she", "should", "so", "than", "that", "the",
    "their", "them", "then", "there", "these", "they", "this", "those", "to", "too", "us", "very",
    "was", "we", "were", "what", "when", "which", "who", "will", "with", "would", "you", "your",
];

pub fn is_negation(token: &str) -> bool {
    matches!(
        token,
        "not" | "no" | "never" | "nor" | "cannot" | "nothing" | "none"
    ) || token.ends_with("n't")
}

fn is_content(token: &str) -> bool {
    !is_negation(token) && !FUNCTION_WORDS.contains(&token)
}

fn negates_shared(tokens: &[String], shared: &BTreeSet<&str>) -> bool {
    tokens.iter().enumerate().any(|(j, t)| {
        is_negation(t) && {
            let lo = j.saturating_sub(NEGATION_REACH);
            let hi = (j + NEGATION_REACH).min(tokens.len() - 1);
            (lo..=hi).any(|k| k != j && shared.contains(tokens[k].as_str()))
        }
    })
}

/// Deterministic lexical verdict:
///
/// * contradiction `(0.8, 0.1, 0.1)` when the content words overlap by at
///   least [`OVERLAP_THRESHOLD`] of the smaller set and exactly one side has a
///   negation within [`NEGATION_REACH`] tokens of a shared content word;
/// * entailment `(0.1, 0.1, 0.8)` when one token set contains the other;
/// * neutral `(0.1, 0.8, 0.1)` otherwise.
pub fn heuristic_classify(premise: &str, hypothesis: &str) -> NliVerdict {
    let tp = tokenize_words(premise);
    let th = tokenize_words(hypothesis);
    let cp: BTreeSet<&str> = tp
        .iter()
        .map(String::as_str)
        .filter(|t| is_content(t))
        .collect();
    let ch: BTreeSet<&str> = th
        .iter()
        .map(String::as_str)
        .filter(|t| is_content(t))
        .collect();
    let shared: BTreeSet<&str> = cp.intersection(&ch).copied().collect();
    let smaller = cp.len().min(ch.len());
    if smaller > 0 && shared.len() as f64 >= OVERLAP_THRESHOLD * smaller as f64 {
        let neg_p = negates_shared(&tp, &shared);
        let neg_h = negates_shared(&th, &shared);
        if neg_p != neg_h {
            return CONTRADICTION;
        }
    }
    let sp: BTreeSet<&str> = tp.iter().map(String::as_str).collect();
    let sh: BTreeSet<&str> = th.iter().map(String::as_str).collect();
    if !sp.is_empty() && !sh.is_empty() && (sp.is_subset(&sh) || sh.is_subset(&sp)) {
        return ENTAILMENT;
    }
    NEUTRAL
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicProvider;

impl NliProvider for HeuristicProvider {
    fn name(&self) -> String {
        "heuristic".into()
    }

    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict> {
        Ok(heuristic_classify(premise, hypothesis))
    }
}
