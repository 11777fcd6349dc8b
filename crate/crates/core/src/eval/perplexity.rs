use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_text, windows};
use crate::error::{Error, Result};
use crate::nn::{forward, LOG_EPS};
use crate::train::Checkpoint;

/// Probability the model gave the true character at `position`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionProb {
    /// Character offset of the predicted character in the evaluated text.
    pub position: usize,
    pub char: char,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerplexityReport {
    /// Mean of `−ln p` in nats, with `p` floored at `LOG_EPS`.
    pub loss: f64,
    /// `exp(loss)`.
    pub perplexity: f64,
    pub positions: Vec<PositionProb>,
}

impl PerplexityReport {
    pub fn n(&self) -> usize {
        self.positions.len()
    }

    /// CSV `position,char,prob`.
    pub fn dump_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for p in &self.positions {
            w.serialize(p)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// Reads a dump written by [`PerplexityReport::dump_csv`].
pub fn parse_probability_dump(csv_text: &str) -> Result<Vec<PositionProb>> {
    csv::Reader::from_reader(csv_text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Applies the checkpoint's text normalization to evaluation text.
pub fn prepare_eval_text(ck: &Checkpoint, text: &str) -> String {
    if ck.config.normalize {
        normalize_text(text)
    } else {
        text.to_string()
    }
}

/// Slides a `seq_len` window over `text` with stride 1 and scores every
/// character after the first window.
pub fn perplexity(ck: &Checkpoint, text: &str) -> Result<PerplexityReport> {
    let seq_len = ck.config.seq_len;
    let chars: Vec<char> = text.chars().collect();
    if chars.len() < seq_len + 1 {
        return Err(Error::ChunkTooShort {
            len: chars.len(),
            needed: seq_len + 1,
        });
    }
    let unknown = ck.vocab.unknown_chars(text);
    if !unknown.is_empty() {
        return Err(Error::UnknownCharacters(unknown));
    }
    let ids = ck.vocab.encode(text)?;
    let mut total = 0.0;
    let mut positions = Vec::with_capacity(ids.len() - seq_len);
    for (k, (window, target)) in windows(&ids, seq_len, 1).enumerate() {
        let out = forward(&ck.params, window)?;
        let prob = out.probs[target];
        total -= prob.max(LOG_EPS).ln();
        positions.push(PositionProb {
            position: k + seq_len,
            char: chars[k + seq_len],
            prob,
        });
    }
    let loss = total / positions.len() as f64;
    Ok(PerplexityReport {
        loss,
        perplexity: loss.exp(),
        positions,
    })
}
