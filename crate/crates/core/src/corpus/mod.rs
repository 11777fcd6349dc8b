//! Text ingestion: normalization, character vocabulary, windowed training
//! pairs, chunking, and the vocabulary-extension word lists.

mod chunk;
mod vocab;
mod words;

pub use chunk::{
    chunk_text, select_neutral_chunks, ChunkId, ChunkSource, NeutralSelection, TextChunk,
};
pub use vocab::{one_hot, Vocabulary};
pub use words::{
    candidate_extension_words, missing_words, tokenize_words, word_spans, WordList, WordListKind,
    WordSpan,
};

use crate::error::{Error, Result};

/// Lowercases, drops control characters and collapses every whitespace run
/// into one space. Leading and trailing whitespace is removed.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.chars() {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if ch.is_control() {
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.extend(ch.to_lowercase());
    }
    out
}

/// A window of `seq_len` ids and the id that follows it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPair {
    pub window: Vec<usize>,
    pub target: usize,
}

/// Number of pairs produced from `len` ids.
pub fn pair_count(len: usize, seq_len: usize, stride: usize) -> usize {
    if len < seq_len + 1 || stride == 0 {
        0
    } else {
        (len - seq_len - 1) / stride + 1
    }
}

/// Borrowed windows `(ids[i..i+seq_len], ids[i+seq_len])` for
/// `i = 0, stride, 2·stride, …`.
pub fn windows(
    ids: &[usize],
    seq_len: usize,
    stride: usize,
) -> impl Iterator<Item = (&[usize], usize)> + '_ {
    (0..pair_count(ids.len(), seq_len, stride)).map(move |k| {
        let i = k * stride;
        (&ids[i..i + seq_len], ids[i + seq_len])
    })
}

pub fn make_training_pairs(
    text: &str,
    vocab: &Vocabulary,
    seq_len: usize,
    stride: usize,
) -> Result<Vec<TrainingPair>> {
    if stride == 0 || seq_len == 0 {
        return Err(Error::Config("seq_len and stride must be positive".into()));
    }
    let ids = vocab.encode(text)?;
    if ids.len() < seq_len + 1 {
        return Err(Error::ChunkTooShort {
            len: ids.len(),
            needed: seq_len + 1,
        });
    }
    Ok(windows(&ids, seq_len, stride)
        .map(|(w, t)| TrainingPair {
            window: w.to_vec(),
            target: t,
        })
        .collect())
}

/// Result of the vocabulary-extension procedure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extension {
    /// Dictionary words the author never used.
    pub missing: WordList,
    /// Stop words among the missing ones; these drive chunk selection.
    pub candidates: WordList,
    pub selection: NeutralSelection,
}

/// Finds dictionary words absent from the author's text, keeps the stop words
/// among them, and pulls neutral passages that use those words.
pub fn vocabulary_extension(
    author_text: &str,
    neutral_text: &str,
    dictionary: &WordList,
    stopwords: &WordList,
    chunk_len: usize,
    max_per_word: usize,
) -> Extension {
    let missing = missing_words(dictionary, author_text);
    let candidates = candidate_extension_words(&missing, stopwords);
    let selection = select_neutral_chunks(neutral_text, &candidates, chunk_len, max_per_word);
    Extension {
        missing,
        candidates,
        selection,
    }
}
