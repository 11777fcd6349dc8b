//! Contradiction filtering of ground-truth chunks against the author corpus.
//!
//! A ground chunk is rejected as soon as one author chunk, used as the NLI
//! premise with the ground chunk as hypothesis, scores a contradiction
//! probability at or above the threshold. Rejected ids go into a persistent
//! [`ChunkBin`]; a chunk already in the bin is rejected without any provider
//! call.

mod bin;
mod heuristic;
mod remote;
mod verdict;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use bin::{BinLock, ChunkBin};
pub use heuristic::{
    heuristic_classify, is_negation, HeuristicProvider, NEGATION_REACH, OVERLAP_THRESHOLD,
};
pub use remote::{Health, RemoteProvider, ENDPOINT_ENV};
pub use verdict::{NliLabel, NliProvider, NliVerdict, SIMPLEX_TOL, WIRE_SIMPLEX_TOL};

use crate::corpus::{ChunkId, TextChunk};
use crate::error::{Error, Result};

/// Which side of the pair the author chunk takes. Only one order is
/// supported; it is recorded in reports so runs stay auditable.
pub const PREMISE_ROLE: &str = "author";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub threshold: f64,
    /// Scan at most this many author chunks per ground chunk.
    pub max_author_chunks: Option<usize>,
    /// Extra attempts after a retriable provider failure.
    pub retries: u32,
    pub retry_backoff_ms: u64,
    /// Ground chunks scanned concurrently.
    pub parallelism: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            max_author_chunks: None,
            retries: 2,
            retry_backoff_ms: 250,
            parallelism: 4,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!(
                "filter threshold {} not in (0, 1)",
                self.threshold
            )));
        }
        if self.parallelism == 0 {
            return Err(Error::Config(
                "filter parallelism must be at least 1".into(),
            ));
        }
        if self.max_author_chunks == Some(0) {
            return Err(Error::Config("max_author_chunks must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accepted,
    Rejected,
    Undecided,
}

/// One provider call in a chunk's scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub premise: ChunkId,
    pub verdict: NliVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkReport {
    pub id: ChunkId,
    pub decision: Decision,
    pub from_bin: bool,
    pub calls: usize,
    pub trail: Vec<VerdictRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub provider: String,
    pub premise_role: String,
    pub threshold: f64,
    pub author_chunks_scanned: usize,
    pub provider_calls: usize,
    pub bin_hits: usize,
    pub accepted: Vec<ChunkId>,
    pub rejected: Vec<ChunkId>,
    pub undecided: Vec<ChunkId>,
    pub chunks: Vec<ChunkReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub accepted: Vec<TextChunk>,
    pub rejected: Vec<TextChunk>,
    pub undecided: Vec<TextChunk>,
    pub report: FilterReport,
}

struct Scan {
    contradicted: bool,
    calls: usize,
    trail: Vec<VerdictRecord>,
}

fn classify_with_retry(
    provider: &dyn NliProvider,
    premise: &str,
    hypothesis: &str,
    cfg: &FilterConfig,
) -> Result<NliVerdict> {
    let mut attempt = 0;
    loop {
        match provider.classify(premise, hypothesis) {
            Err(Error::ProviderUnavailable(msg)) if attempt < cfg.retries => {
                attempt += 1;
                log::warn!("provider unavailable (attempt {attempt}): {msg}");
                if cfg.retry_backoff_ms > 0 {
                    std::thread::sleep(Duration::from_millis(
                        cfg.retry_backoff_ms << (attempt - 1),
                    ));
                }
            }
            other => return other,
        }
    }
}

/// Sequential scan of the author chunks for one ground chunk; stops at the
/// first verdict at or above the threshold. Calls made before a failure are
/// counted in `calls_out`.
fn scan(
    chunk: &TextChunk,
    authors: &[TextChunk],
    provider: &dyn NliProvider,
    cfg: &FilterConfig,
    calls_out: &mut usize,
) -> Result<Scan> {
    let mut trail = Vec::new();
    for a in authors {
        *calls_out += 1;
        let verdict = classify_with_retry(provider, &a.text, &chunk.text, cfg)?;
        trail.push(VerdictRecord {
            premise: a.id,
            verdict,
        });
        if verdict.contradiction >= cfg.threshold {
            return Ok(Scan {
                contradicted: true,
                calls: trail.len(),
                trail,
            });
        }
    }
    Ok(Scan {
        contradicted: false,
        calls: trail.len(),
        trail,
    })
}

fn capped<'a>(authors: &'a [TextChunk], cfg: &FilterConfig) -> &'a [TextChunk] {
    match cfg.max_author_chunks {
        Some(n) if n < authors.len() => &authors[..n],
        _ => authors,
    }
}

/// Whether `chunk` contradicts the author corpus. A bin hit returns `true`
/// without calling the provider; a new contradiction is added to `bin`.
pub fn is_contradicted(
    chunk: &TextChunk,
    author_chunks: &[TextChunk],
    provider: &dyn NliProvider,
    cfg: &FilterConfig,
    bin: &mut ChunkBin,
) -> Result<bool> {
    cfg.validate()?;
    if bin.contains(chunk.id) {
        return Ok(true);
    }
    if author_chunks.is_empty() {
        return Err(Error::InsufficientData(
            "no author chunks to compare against".into(),
        ));
    }
    let mut calls = 0;
    let s = scan(chunk, capped(author_chunks, cfg), provider, cfg, &mut calls)?;
    if s.contradicted {
        bin.insert(chunk.id);
    }
    Ok(s.contradicted)
}

/// Partitions `ground` into accepted, rejected and undecided chunks, keeping
/// input order within each part.
///
/// Distinct chunks are scanned concurrently (up to `cfg.parallelism` at a
/// time). Chunks whose provider calls keep failing are undecided and left
/// out of training. The bin is updated only after all scans finish, in input
/// order; repeated ids are scanned once.
pub fn filter_corpus(
    ground: &[TextChunk],
    author_chunks: &[TextChunk],
    provider: &dyn NliProvider,
    cfg: &FilterConfig,
    bin: &mut ChunkBin,
) -> Result<FilterOutcome> {
    cfg.validate()?;
    let authors = capped(author_chunks, cfg);
    if authors.is_empty() && ground.iter().any(|c| !bin.contains(c.id)) {
        return Err(Error::InsufficientData(
            "no author chunks to compare against".into(),
        ));
    }

    let mut work: Vec<usize> = Vec::new();
    let mut first_of: HashMap<ChunkId, usize> = HashMap::new();
    for (i, c) in ground.iter().enumerate() {
        if !bin.contains(c.id) && !first_of.contains_key(&c.id) {
            first_of.insert(c.id, i);
            work.push(i);
        }
    }

    let results: Vec<Mutex<Option<(usize, Result<Scan>)>>> =
        work.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = cfg.parallelism.min(work.len()).max(1);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= work.len() {
                    break;
                }
                let mut calls = 0;
                let r = scan(&ground[work[k]], authors, provider, cfg, &mut calls);
                *results[k].lock().expect("result slot") = Some((calls, r));
            });
        }
    });
    let mut scans: HashMap<ChunkId, (usize, Result<Scan>)> = HashMap::new();
    for (k, slot) in results.into_iter().enumerate() {
        let r = slot
            .into_inner()
            .expect("result slot")
            .expect("every work item is scanned");
        scans.insert(ground[work[k]].id, r);
    }

    let mut out = FilterOutcome {
        accepted: Vec::new(),
        rejected: Vec::new(),
        undecided: Vec::new(),
        report: FilterReport {
            provider: provider.name(),
            premise_role: PREMISE_ROLE.into(),
            threshold: cfg.threshold,
            author_chunks_scanned: authors.len(),
            provider_calls: 0,
            bin_hits: 0,
            accepted: Vec::new(),
            rejected: Vec::new(),
            undecided: Vec::new(),
            chunks: Vec::new(),
        },
    };
    for (i, chunk) in ground.iter().enumerate() {
        let fresh = first_of.get(&chunk.id) == Some(&i);
        let entry = if bin.contains(chunk.id) {
            out.report.bin_hits += 1;
            ChunkReport {
                id: chunk.id,
                decision: Decision::Rejected,
                from_bin: true,
                calls: 0,
                trail: Vec::new(),
                error: None,
            }
        } else if fresh {
            let (calls, r) = scans.remove(&chunk.id).expect("scanned");
            out.report.provider_calls += calls;
            match r {
                Ok(s) => {
                    if s.contradicted {
                        bin.insert(chunk.id);
                    }
                    ChunkReport {
                        id: chunk.id,
                        decision: if s.contradicted {
                            Decision::Rejected
                        } else {
                            Decision::Accepted
                        },
                        from_bin: false,
                        calls: s.calls,
                        trail: s.trail,
                        error: None,
                    }
                }
                Err(e) => {
                    log::warn!("chunk {} undecided: {e}", chunk.id);
                    ChunkReport {
                        id: chunk.id,
                        decision: Decision::Undecided,
                        from_bin: false,
                        calls,
                        trail: Vec::new(),
                        error: Some(e.to_string()),
                    }
                }
            }
        } else {
            // Repeat of an earlier chunk that was not rejected.
            let first = out
                .report
                .chunks
                .iter()
                .find(|r| r.id == chunk.id)
                .expect("first occurrence reported");
            ChunkReport {
                id: chunk.id,
                decision: first.decision,
                from_bin: false,
                calls: 0,
                trail: Vec::new(),
                error: first.error.clone(),
            }
        };
        match entry.decision {
            Decision::Accepted => {
                out.report.accepted.push(chunk.id);
                out.accepted.push(chunk.clone());
            }
            Decision::Rejected => {
                out.report.rejected.push(chunk.id);
                out.rejected.push(chunk.clone());
            }
            Decision::Undecided => {
                out.report.undecided.push(chunk.id);
                out.undecided.push(chunk.clone());
            }
        }
        out.report.chunks.push(entry);
    }
    Ok(out)
}
