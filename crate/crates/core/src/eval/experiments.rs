use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::generate::{generate_traced, SamplingConfig};
use super::non_dictionary_rate;
use super::perplexity::{perplexity, PerplexityReport};
use crate::corpus::{normalize_text, WordList};
use crate::error::{Error, Result};
use crate::nn::Architecture;
use crate::train::{Checkpoint, Phase, Pipeline, TrainConfig};

pub const SAME_AUTHOR: &str = "same_author";
pub const OTHER_AUTHOR: &str = "other_author";

/// Consecutive, non-overlapping chunks of exactly `chunk_chars` characters
/// from the start of `text`; the first `n` are returned.
pub fn disjoint_chunks(text: &str, chunk_chars: usize, n: usize) -> Result<Vec<String>> {
    if chunk_chars == 0 {
        return Err(Error::Config("chunk size must be positive".into()));
    }
    let chars: Vec<char> = text.chars().collect();
    let available = chars.len() / chunk_chars;
    if available < n {
        return Err(Error::InsufficientData(format!(
            "{} characters give {available} chunks of {chunk_chars}, need {n}",
            chars.len()
        )));
    }
    Ok(chars
        .chunks_exact(chunk_chars)
        .take(n)
        .map(|c| c.iter().collect())
        .collect())
}

/// Runs `f` over `0..n` on up to `available_parallelism` threads and returns
/// the results in index order.
fn parallel_map<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |p| p.get())
        .min(n.max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<T>>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = f(i);
                slots.lock().expect("result slots poisoned")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots poisoned")
        .into_iter()
        .map(|r| r.expect("every index visited"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub checkpoint_sha256: String,
    pub step: u64,
    pub architecture: Architecture,
    pub vocab_size: usize,
    /// Character used to left-pad short prompts.
    pub pad_char: String,
    pub seq_len: usize,
    pub chunk_chars: usize,
    pub sampling: Option<SamplingConfig>,
}

impl ReportMetadata {
    pub fn new(
        ck: &Checkpoint,
        chunk_chars: usize,
        sampling: Option<SamplingConfig>,
    ) -> Result<Self> {
        Ok(Self {
            checkpoint_sha256: hex::encode(Sha256::digest(ck.to_bytes()?)),
            step: ck.step(),
            architecture: ck.params.architecture(),
            vocab_size: ck.vocab.size(),
            pad_char: ck
                .vocab
                .char_at(ck.pad_id)
                .map(String::from)
                .unwrap_or_default(),
            seq_len: ck.config.seq_len,
            chunk_chars,
            sampling,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub experiment: usize,
    pub corpus: String,
    pub loss: f64,
    pub perplexity: f64,
    pub positions: usize,
    /// Percentage of generated word tokens missing from the dictionary.
    pub non_dictionary_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub experiment: usize,
    pub same_perplexity: f64,
    pub other_perplexity: f64,
    /// Strictly lower perplexity on the same author's text.
    pub same_wins: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub metadata: ReportMetadata,
    pub rows: Vec<ExperimentRow>,
    pub outcomes: Vec<ExperimentOutcome>,
    pub wins: usize,
}

impl ExperimentReport {
    /// CSV `experiment,corpus,loss,perplexity,positions,non_dictionary_rate`;
    /// the rate is empty when no dictionary was given.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// Optional generation step of an author comparison: a continuation is
/// sampled from the first `seq_len` characters of every chunk and scored
/// against `dictionary`.
#[derive(Debug, Clone, Copy)]
pub struct GenerationProbe<'a> {
    pub dictionary: &'a WordList,
    pub sampling: &'a SamplingConfig,
}

fn evaluate_chunk(
    ck: &Checkpoint,
    chunk: &str,
    probe: Option<GenerationProbe<'_>>,
) -> Result<(PerplexityReport, Option<f64>)> {
    let pp = perplexity(ck, chunk)?;
    let rate = match probe {
        None => None,
        Some(g) => {
            let prompt: String = chunk.chars().take(ck.config.seq_len).collect();
            let out = generate_traced(ck, &prompt, g.sampling)?;
            Some(non_dictionary_rate(&out.continuation, g.dictionary))
        }
    };
    Ok((pp, rate))
}

/// Experiment `i` scores `same[i]` and `other[i]`; the same author wins when
/// its perplexity is strictly lower.
pub fn author_comparison(
    ck: &Checkpoint,
    same: &[String],
    other: &[String],
    n_experiments: usize,
    probe: Option<GenerationProbe<'_>>,
) -> Result<ExperimentReport> {
    if n_experiments == 0 {
        return Err(Error::Config("at least one experiment is required".into()));
    }
    for (label, side) in [(SAME_AUTHOR, same), (OTHER_AUTHOR, other)] {
        if side.len() < n_experiments {
            return Err(Error::InsufficientData(format!(
                "{label}: {} chunks for {n_experiments} experiments",
                side.len()
            )));
        }
    }
    let jobs: Vec<(usize, &str, &str)> = (0..n_experiments)
        .flat_map(|i| {
            [
                (i, SAME_AUTHOR, same[i].as_str()),
                (i, OTHER_AUTHOR, other[i].as_str()),
            ]
        })
        .collect();
    let results = parallel_map(jobs.len(), |j| evaluate_chunk(ck, jobs[j].2, probe))?;
    let rows: Vec<ExperimentRow> = jobs
        .iter()
        .zip(&results)
        .map(|(&(i, label, _), (pp, rate))| ExperimentRow {
            experiment: i + 1,
            corpus: label.to_string(),
            loss: pp.loss,
            perplexity: pp.perplexity,
            positions: pp.n(),
            non_dictionary_rate: *rate,
        })
        .collect();
    let outcomes: Vec<ExperimentOutcome> = rows
        .chunks_exact(2)
        .map(|pair| ExperimentOutcome {
            experiment: pair[0].experiment,
            same_perplexity: pair[0].perplexity,
            other_perplexity: pair[1].perplexity,
            same_wins: pair[0].perplexity < pair[1].perplexity,
        })
        .collect();
    let chunk_chars = same[0].chars().count();
    Ok(ExperimentReport {
        metadata: ReportMetadata::new(ck, chunk_chars, probe.map(|g| g.sampling.clone()))?,
        wins: outcomes.iter().filter(|o| o.same_wins).count(),
        rows,
        outcomes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    /// Shared settings; architecture and seed are overridden per run.
    pub base: TrainConfig,
    pub architectures: Vec<Architecture>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub seed: u64,
    pub architecture: Architecture,
    pub steps: u64,
    /// Mean training loss of the last ten log windows.
    pub train_loss: Option<f64>,
    /// Held-out loss and perplexity.
    pub loss: f64,
    pub perplexity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRanking {
    pub seed: u64,
    /// Best (lowest held-out perplexity) first.
    pub ranking: Vec<Architecture>,
    /// Perplexity is non-decreasing along bilstm, lstm_uni, rnn (restricted
    /// to the architectures that were run).
    pub ordering_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub rankings: Vec<SeedRanking>,
    pub orderings_held: usize,
}

impl ComparisonTable {
    /// CSV `seed,architecture,steps,train_loss,loss,perplexity`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// Trains one model per (seed, architecture) on the author text alone, with
/// the same step budget, and scores each on `test_text`. The vocabulary is
/// the author text's, so `test_text` must not use other characters.
pub fn compare_architectures(
    author_text: &str,
    test_text: &str,
    cfg: &ComparisonConfig,
) -> Result<ComparisonTable> {
    if cfg.architectures.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::Config(
            "comparison needs at least one architecture and one seed".into(),
        ));
    }
    let test = if cfg.base.normalize {
        normalize_text(test_text)
    } else {
        test_text.to_string()
    };
    let jobs: Vec<(u64, Architecture)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| cfg.architectures.iter().map(move |&a| (s, a)))
        .collect();
    let rows = parallel_map(jobs.len(), |j| {
        let (seed, architecture) = jobs[j];
        let train = TrainConfig {
            architecture,
            seed,
            ..cfg.base.clone()
        };
        let mut p = Pipeline::new(author_text, "", &[], train)?;
        let summary = p
            .trainer
            .run_phase(Phase::Author, &p.author, cfg.base.steps.author)?;
        let ck = p.trainer.checkpoint();
        let pp = perplexity(&ck, &test)?;
        log::info!(
            "{} seed {seed}: held-out pp {:.4}",
            architecture.name(),
            pp.perplexity
        );
        Ok(ComparisonRow {
            seed,
            architecture,
            steps: summary.steps,
            train_loss: p.trainer.log.trend(10).map(|t| t.1),
            loss: pp.loss,
            perplexity: pp.perplexity,
        })
    })?;
    let rankings: Vec<SeedRanking> = cfg
        .seeds
        .iter()
        .map(|&seed| {
            let mut mine: Vec<&ComparisonRow> = rows.iter().filter(|r| r.seed == seed).collect();
            let canonical: Vec<f64> = Architecture::ALL
                .iter()
                .filter_map(|a| {
                    mine.iter()
                        .find(|r| r.architecture == *a)
                        .map(|r| r.perplexity)
                })
                .collect();
            let ordering_holds = canonical.windows(2).all(|w| w[0] <= w[1]);
            mine.sort_by(|a, b| a.perplexity.total_cmp(&b.perplexity));
            SeedRanking {
                seed,
                ranking: mine.iter().map(|r| r.architecture).collect(),
                ordering_holds,
            }
        })
        .collect();
    Ok(ComparisonTable {
        orderings_held: rankings.iter().filter(|r| r.ordering_holds).count(),
        rows,
        rankings,
    })
}
