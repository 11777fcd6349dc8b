use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WordListKind {
    Dictionary,
    Stopwords,
}

/// A set of lowercase, non-empty words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordList {
    pub kind: WordListKind,
    words: BTreeSet<String>,
}

impl WordList {
    pub fn new<I, S>(kind: WordListKind, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        Self { kind, words }
    }

    /// Parses the one-word-per-line format; `#` lines are comments.
    pub fn parse(kind: WordListKind, source: &str) -> Self {
        Self::new(
            kind,
            source
                .lines()
                .map(str::trim)
                .filter(|l| !l.starts_with('#')),
        )
    }

    pub fn load(kind: WordListKind, path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(kind, &s))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Words in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// A word token with its character (not byte) span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordSpan {
    pub start: usize,
    pub end: usize,
    pub word: String,
}

/// Tokens with character spans: maximal alphabetic runs, joined across single
/// apostrophes that sit between two letters.
pub fn word_spans(text: &str) -> Vec<WordSpan> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].is_alphabetic() {
            i += 1;
            continue;
        }
        let start = i;
        let mut word = String::new();
        loop {
            while i < chars.len() && chars[i].is_alphabetic() {
                word.extend(chars[i].to_lowercase());
                i += 1;
            }
            let joins =
                i + 1 < chars.len() && is_apostrophe(chars[i]) && chars[i + 1].is_alphabetic();
            if !joins {
                break;
            }
            word.push('\'');
            i += 1;
        }
        out.push(WordSpan {
            start,
            end: i,
            word,
        });
    }
    out
}

/// Lowercased word tokens; everything that is not a letter or an internal
/// apostrophe separates tokens.
pub fn tokenize_words(text: &str) -> Vec<String> {
    word_spans(text).into_iter().map(|s| s.word).collect()
}

/// Dictionary words that never occur as a token of `author_text`.
pub fn missing_words(dictionary: &WordList, author_text: &str) -> WordList {
    let seen: BTreeSet<String> = tokenize_words(author_text).into_iter().collect();
    WordList {
        kind: dictionary.kind,
        words: dictionary.words.difference(&seen).cloned().collect(),
    }
}

/// Stop words the author never used: `missing ∩ stopwords`.
pub fn candidate_extension_words(missing: &WordList, stopwords: &WordList) -> WordList {
    WordList {
        kind: WordListKind::Stopwords,
        words: missing
            .words
            .intersection(&stopwords.words)
            .cloned()
            .collect(),
    }
}
