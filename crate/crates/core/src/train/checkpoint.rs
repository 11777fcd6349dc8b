//! Binary checkpoint container.
//!
//! ```text
//! magic           8 bytes   "AUTHLMCK"
//! format_version  u32 LE
//! header_len      u64 LE
//! header          header_len bytes of UTF-8 JSON (config, vocabulary,
//!                 provenance, tensor manifest)
//! payload         f64 LE values of every manifest tensor, in manifest order
//! crc32           u32 LE over all preceding bytes
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::PhaseSummary;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::filter::FilterConfig;
use crate::nn::{ModelParams, Tensor};
use crate::optim::OptimState;

pub const MAGIC: &[u8; 8] = b"AUTHLMCK";
pub const FORMAT_VERSION: u32 = 1;

const MOMENT1: &str = "adam_m.";
const MOMENT2: &str = "adam_v.";

/// Where a model came from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Provenance {
    /// Corpus label to chunk-id style FNV-1a hash of the normalized text.
    pub corpus_hashes: BTreeMap<String, String>,
    pub provider: Option<String>,
    pub premise_role: Option<String>,
    pub filter: Option<FilterConfig>,
    pub phases: Vec<PhaseSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub vocab: Vocabulary,
    pub params: ModelParams,
    pub optim: OptimState,
    /// Left padding for short prompts: the author corpus's most frequent
    /// character.
    pub pad_id: usize,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: TrainConfig,
    vocab: Vocabulary,
    pad_id: usize,
    optim_step: u64,
    provenance: Provenance,
    tensors: Vec<TensorEntry>,
}

fn manifest(ck: &Checkpoint) -> Vec<(String, &Tensor)> {
    let mut out: Vec<(String, &Tensor)> = ck
        .params
        .named_tensors()
        .into_iter()
        .map(|(n, t)| (n.to_string(), t))
        .collect();
    for (prefix, set) in [(MOMENT1, &ck.optim.m), (MOMENT2, &ck.optim.v)] {
        out.extend(
            set.named_tensors()
                .into_iter()
                .map(|(n, t)| (format!("{prefix}{n}"), t)),
        );
    }
    out
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

impl Checkpoint {
    pub fn step(&self) -> u64 {
        self.optim.step
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let tensors = manifest(self);
        let header = Header {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            pad_id: self.pad_id,
            optim_step: self.optim.step,
            provenance: self.provenance.clone(),
            tensors: tensors
                .iter()
                .map(|(n, t)| TensorEntry {
                    name: n.clone(),
                    rows: t.rows(),
                    cols: t.cols(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let payload: usize = tensors.iter().map(|(_, t)| t.len() * 8).sum();
        let mut out = Vec::with_capacity(8 + 4 + 8 + json.len() + payload + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in &tensors {
            for x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        const FIXED: usize = 8 + 4 + 8;
        if bytes.len() < FIXED + 4 || &bytes[..8] != MAGIC {
            return Err(Error::Integrity(
                "not a checkpoint (bad magic or truncated)".into(),
            ));
        }
        let body = &bytes[..bytes.len() - 4];
        let stored = read_u32(bytes, bytes.len() - 4);
        let actual = crc32fast::hash(body);
        if stored != actual {
            return Err(Error::Integrity(format!(
                "checksum mismatch (stored {stored:08x}, computed {actual:08x})"
            )));
        }
        let version = read_u32(bytes, 8);
        if version != FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let header_end = FIXED
            .checked_add(header_len)
            .filter(|&e| e <= body.len())
            .ok_or_else(|| Error::Integrity("header length exceeds file".into()))?;
        let header: Header = serde_json::from_slice(&body[FIXED..header_end])
            .map_err(|e| Error::Integrity(format!("header: {e}")))?;

        let arch = header.config.architecture;
        let hidden = header.config.hidden;
        let v = header.vocab.size();
        let mut params = ModelParams::zeros(arch, hidden, v);
        let mut m = ModelParams::zeros(arch, hidden, v);
        let mut vv = ModelParams::zeros(arch, hidden, v);
        let mut slots: Vec<(String, &mut Tensor)> = Vec::new();
        for (prefix, set) in [("", &mut params), (MOMENT1, &mut m), (MOMENT2, &mut vv)] {
            slots.extend(
                set.named_tensors_mut()
                    .into_iter()
                    .map(|(n, t)| (format!("{prefix}{n}"), t)),
            );
        }
        if slots.len() != header.tensors.len() {
            return Err(Error::Integrity(format!(
                "manifest lists {} tensors, {arch:?} needs {}",
                header.tensors.len(),
                slots.len()
            )));
        }
        let mut at = header_end;
        for ((name, t), entry) in slots.into_iter().zip(&header.tensors) {
            if entry.name != name || (entry.rows, entry.cols) != t.shape() {
                return Err(Error::Integrity(format!(
                    "manifest entry {} {}x{} does not match expected {name} {:?}",
                    entry.name,
                    entry.rows,
                    entry.cols,
                    t.shape()
                )));
            }
            let n = t.len() * 8;
            if at + n > body.len() {
                return Err(Error::Integrity("payload truncated".into()));
            }
            for (x, chunk) in t
                .data_mut()
                .iter_mut()
                .zip(body[at..at + n].chunks_exact(8))
            {
                *x = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            }
            at += n;
        }
        if at != body.len() {
            return Err(Error::Integrity(format!(
                "{} trailing payload bytes",
                body.len() - at
            )));
        }
        if let Some(name) = params.first_non_finite() {
            return Err(Error::Integrity(format!("non-finite values in {name}")));
        }
        if header.pad_id >= v {
            return Err(Error::Integrity(format!(
                "pad id {} outside vocabulary",
                header.pad_id
            )));
        }
        Ok(Checkpoint {
            config: header.config,
            vocab: header.vocab,
            params,
            optim: OptimState {
                step: header.optim_step,
                m,
                v: vv,
            },
            pad_id: header.pad_id,
            provenance: header.provenance,
        })
    }

    /// Writes through a temporary sibling and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
