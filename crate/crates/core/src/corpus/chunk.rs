use std::fmt;

use serde::{Deserialize, Serialize};

use super::words::{word_spans, WordList};

/// Where a chunk of text came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkSource {
    Author,
    GroundTruth,
    Neutral,
}

/// 64-bit FNV-1a hash of the chunk's UTF-8 bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChunkId(pub u64);

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

impl ChunkId {
    pub fn of(text: &str) -> Self {
        let mut h = FNV_OFFSET;
        for b in text.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        ChunkId(h)
    }

    pub fn to_hex(self) -> String {
        format!("{:016x}", self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        if s.len() != 16 {
            return None;
        }
        u64::from_str_radix(s, 16).ok().map(ChunkId)
    }
}

impl fmt::Display for ChunkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl Serialize for ChunkId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for ChunkId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        ChunkId::from_hex(&s).ok_or_else(|| serde::de::Error::custom(format!("bad chunk id {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextChunk {
    pub id: ChunkId,
    pub source: ChunkSource,
    pub text: String,
}

impl TextChunk {
    pub fn new(text: impl Into<String>, source: ChunkSource) -> Self {
        let text = text.into();
        Self {
            id: ChunkId::of(&text),
            source,
            text,
        }
    }
}

/// Splits text into chunks of at most `target_chars` characters.
///
/// Paragraphs (blank-line separated) are packed greedily; a paragraph longer
/// than the target is cut at whitespace. Internal whitespace is preserved.
pub fn chunk_text(text: &str, target_chars: usize) -> Vec<String> {
    let target = target_chars.max(1);
    let mut pieces: Vec<String> = Vec::new();
    for para in paragraphs(text) {
        if para.chars().count() <= target {
            pieces.push(para.to_string());
            continue;
        }
        let mut cur = String::new();
        let mut cur_len = 0;
        for word in para.split_whitespace() {
            let wlen = word.chars().count();
            if cur_len > 0 && cur_len + 1 + wlen > target {
                pieces.push(std::mem::take(&mut cur));
                cur_len = 0;
            }
            if cur_len > 0 {
                cur.push(' ');
                cur_len += 1;
            }
            cur.push_str(word);
            cur_len += wlen;
        }
        if !cur.is_empty() {
            pieces.push(cur);
        }
    }

    let mut out: Vec<String> = Vec::new();
    let mut cur = String::new();
    let mut cur_len = 0;
    for p in pieces {
        let plen = p.chars().count();
        if cur_len > 0 && cur_len + 2 + plen > target {
            out.push(std::mem::take(&mut cur));
            cur_len = 0;
        }
        if cur_len > 0 {
            cur.push_str("\n\n");
            cur_len += 2;
        }
        cur.push_str(&p);
        cur_len += plen;
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn paragraphs(text: &str) -> impl Iterator<Item = &str> {
    let mut rest = text;
    std::iter::from_fn(move || loop {
        if rest.is_empty() {
            return None;
        }
        let (para, next) = split_blank_line(rest);
        rest = next;
        let para = para.trim();
        if !para.is_empty() {
            return Some(para);
        }
    })
}

fn split_blank_line(s: &str) -> (&str, &str) {
    let mut offset = 0;
    for line in s.split_inclusive('\n') {
        if line.trim().is_empty() && offset > 0 {
            return (&s[..offset], &s[offset + line.len()..]);
        }
        offset += line.len();
    }
    (s, "")
}

/// Chunks selected from the neutral text, plus the targets that never occur.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NeutralSelection {
    pub chunks: Vec<TextChunk>,
    pub not_found: Vec<String>,
}

/// For each target word (sorted order), takes up to `max_per_word` windows of
/// `chunk_len` characters centred on its first whole-token occurrences.
pub fn select_neutral_chunks(
    neutral_text: &str,
    targets: &WordList,
    chunk_len: usize,
    max_per_word: usize,
) -> NeutralSelection {
    let chars: Vec<char> = neutral_text.chars().collect();
    let spans = word_spans(neutral_text);
    let mut out = NeutralSelection::default();
    for target in targets.iter() {
        let hits: Vec<_> = spans
            .iter()
            .filter(|s| s.word == target)
            .take(max_per_word)
            .collect();
        if hits.is_empty() {
            out.not_found.push(target.to_string());
            continue;
        }
        for span in hits {
            let (start, end) = centred_window(span.start, span.end, chunk_len, chars.len());
            let text: String = chars[start..end].iter().collect();
            out.chunks.push(TextChunk::new(text, ChunkSource::Neutral));
        }
    }
    out
}

fn centred_window(word_start: usize, word_end: usize, len: usize, total: usize) -> (usize, usize) {
    if len >= total {
        return (0, total);
    }
    let mid = (word_start + word_end) / 2;
    let start = mid.saturating_sub(len / 2).min(total - len);
    (start, start + len)
}
