use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bijective character ↔ id map, ids assigned in first-appearance order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub struct Vocabulary {
    chars: Vec<char>,
    index_of: HashMap<char, usize>,
}

impl Vocabulary {
    /// Builds the vocabulary of `text` in first-appearance order.
    pub fn build(text: &str) -> Result<Self> {
        if text.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut chars = Vec::new();
        let mut index_of = HashMap::new();
        for ch in text.chars() {
            index_of.entry(ch).or_insert_with(|| {
                chars.push(ch);
                chars.len() - 1
            });
        }
        Ok(Self { chars, index_of })
    }

    /// Builds one vocabulary over several texts, scanned in order.
    pub fn build_many<'a>(texts: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut joined = String::new();
        for t in texts {
            joined.push_str(t);
        }
        Self::build(&joined)
    }

    pub fn size(&self) -> usize {
        self.chars.len()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn id(&self, ch: char) -> Option<usize> {
        self.index_of.get(&ch).copied()
    }

    pub fn char_at(&self, id: usize) -> Option<char> {
        self.chars.get(id).copied()
    }

    /// Maps text to ids, failing on the first character outside the vocabulary.
    pub fn encode(&self, text: &str) -> Result<Vec<usize>> {
        text.char_indices()
            .map(|(offset, ch)| self.id(ch).ok_or(Error::OutOfVocabulary { ch, offset }))
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Result<String> {
        ids.iter()
            .map(|&id| {
                self.char_at(id).ok_or(Error::IdOutOfRange {
                    id,
                    size: self.size(),
                })
            })
            .collect()
    }

    /// Distinct characters of `text` that the vocabulary does not contain, in
    /// first-appearance order.
    pub fn unknown_chars(&self, text: &str) -> Vec<char> {
        let mut seen = Vec::new();
        for ch in text.chars() {
            if self.id(ch).is_none() && !seen.contains(&ch) {
                seen.push(ch);
            }
        }
        seen
    }

    /// Most frequent character of `text` among vocabulary members; ties go to
    /// the lower id.
    pub fn most_frequent(&self, text: &str) -> Option<usize> {
        let mut counts = vec![0usize; self.size()];
        for ch in text.chars() {
            if let Some(id) = self.id(ch) {
                counts[id] += 1;
            }
        }
        let (best, &count) = counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
        (count > 0).then_some(best)
    }
}

impl From<String> for Vocabulary {
    fn from(s: String) -> Self {
        let chars: Vec<char> = s.chars().collect();
        let index_of = chars.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        Self { chars, index_of }
    }
}

impl From<Vocabulary> for String {
    fn from(v: Vocabulary) -> Self {
        v.chars.into_iter().collect()
    }
}

/// One-hot encoding of `id` over `size` classes.
pub fn one_hot(id: usize, size: usize) -> Result<Vec<f64>> {
    if id >= size {
        return Err(Error::IdOutOfRange { id, size });
    }
    let mut v = vec![0.0; size];
    v[id] = 1.0;
    Ok(v)
}
