//! The three-phase training pipeline: the author's corpus, then the ground
//! truth that survives the contradiction filter, then neutral passages that
//! extend the vocabulary.

mod checkpoint;
mod config;
mod training_log;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, Provenance, FORMAT_VERSION, MAGIC};
pub use config::{
    CorpusPaths, ExtensionConfig, Init, PhaseSteps, ProviderSpec, RunConfig, TrainConfig,
};
pub use training_log::{LogRow, TrainingLog};

use crate::corpus::{
    chunk_text, normalize_text, pair_count, ChunkId, ChunkSource, TextChunk, Vocabulary,
};
use crate::error::{Error, Result};
use crate::filter::{
    filter_corpus, ChunkBin, FilterConfig, FilterOutcome, NliProvider, PREMISE_ROLE,
};
use crate::nn::{backward, cross_entropy, forward, ModelParams};
use crate::optim::{clip_gradients, step, OptimConfig, OptimState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Author,
    Ground,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub phase: Phase,
    pub chunks: usize,
    pub skipped_chunks: usize,
    pub pairs: usize,
    pub steps: u64,
    pub first_step: u64,
}

/// One update on one pair: forward, loss, backward, clip, optimizer step.
/// Returns the loss before the update.
///
/// A non-finite loss or gradient is reported as divergence before anything
/// is modified, so `params` and `state` still hold the last good values.
pub fn train_step(
    params: &mut ModelParams,
    state: &mut OptimState,
    cfg: &OptimConfig,
    window: &[usize],
    target: usize,
) -> Result<f64> {
    let trace = forward(params, window)?;
    let loss = cross_entropy(&trace.probs, target)?;
    if !loss.is_finite() {
        return Err(Error::Divergence(format!(
            "loss at step {}",
            state.step + 1
        )));
    }
    let mut grads = backward(&trace, target, params)?;
    clip_gradients(&mut grads, cfg.clip_norm);
    step(params, &grads, state, cfg)?;
    Ok(loss)
}

/// Cuts raw text into chunks and (optionally) normalizes each one. Empty
/// chunks are dropped.
pub fn prepare_chunks(
    text: &str,
    source: ChunkSource,
    chunk_chars: usize,
    normalize: bool,
) -> Vec<TextChunk> {
    chunk_text(text, chunk_chars)
        .into_iter()
        .map(|c| if normalize { normalize_text(&c) } else { c })
        .filter(|c| !c.is_empty())
        .map(|c| TextChunk::new(c, source))
        .collect()
}

/// Model, optimizer state and log of one training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub vocab: Vocabulary,
    pub params: ModelParams,
    pub optim: OptimState,
    pub log: TrainingLog,
    pub pad_id: usize,
    pub provenance: Provenance,
}

impl Trainer {
    pub fn new(config: TrainConfig, vocab: Vocabulary, pad_id: usize) -> Result<Self> {
        config.validate()?;
        let v = vocab.size();
        if pad_id >= v {
            return Err(Error::IdOutOfRange {
                id: pad_id,
                size: v,
            });
        }
        let params = match config.init {
            config::Init::Uniform => {
                ModelParams::init(config.architecture, config.hidden, v, config.seed)
            }
            config::Init::Zero => ModelParams::zeros(config.architecture, config.hidden, v),
        };
        Ok(Self {
            optim: OptimState::new(&params),
            log: TrainingLog::new(config.log_window),
            params,
            vocab,
            pad_id,
            provenance: Provenance::default(),
            config,
        })
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Self {
        Self {
            log: TrainingLog::new(ck.config.log_window),
            config: ck.config,
            vocab: ck.vocab,
            params: ck.params,
            optim: ck.optim,
            pad_id: ck.pad_id,
            provenance: ck.provenance,
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            params: self.params.clone(),
            optim: self.optim.clone(),
            pad_id: self.pad_id,
            provenance: self.provenance.clone(),
        }
    }

    /// Trains `steps` updates on the pairs of `chunks`, in order, cycling
    /// when the steps outnumber the pairs. Windows never cross chunk
    /// boundaries. Chunks with characters outside the vocabulary are skipped
    /// with a warning; chunks shorter than `seq_len + 1` yield no pairs.
    pub fn run_phase(
        &mut self,
        phase: Phase,
        chunks: &[TextChunk],
        steps: u64,
    ) -> Result<PhaseSummary> {
        let (seq_len, stride) = (self.config.seq_len, self.config.stride);
        let mut encoded: Vec<Vec<usize>> = Vec::new();
        let mut skipped = 0;
        for c in chunks {
            match self.vocab.encode(&c.text) {
                Ok(ids) => encoded.push(ids),
                Err(e) => {
                    skipped += 1;
                    log::warn!("{phase:?}: skipping chunk {}: {e}", c.id);
                }
            }
        }
        let index: Vec<(usize, usize)> = encoded
            .iter()
            .enumerate()
            .flat_map(|(ci, ids)| {
                (0..pair_count(ids.len(), seq_len, stride)).map(move |k| (ci, k * stride))
            })
            .collect();
        let summary = PhaseSummary {
            phase,
            chunks: encoded.len(),
            skipped_chunks: skipped,
            pairs: index.len(),
            steps: if index.is_empty() { 0 } else { steps },
            first_step: self.optim.step,
        };
        if index.is_empty() {
            if steps > 0 {
                log::warn!("{phase:?}: no training pairs, phase skipped");
            }
            return Ok(summary);
        }
        let cfg = self.config.phase_optim(phase);
        for s in 0..steps {
            let (ci, start) = index[(s % index.len() as u64) as usize];
            let ids = &encoded[ci];
            let loss = train_step(
                &mut self.params,
                &mut self.optim,
                &cfg,
                &ids[start..start + seq_len],
                ids[start + seq_len],
            )?;
            self.log.record(loss);
            if (s + 1) % 1000 == 0 {
                if let Some(r) = self.log.rows().last() {
                    log::info!(
                        "{phase:?} step {}/{steps}: window loss {:.4}, pp {:.3}",
                        s + 1,
                        r.mean_loss,
                        r.mean_perplexity
                    );
                }
            }
        }
        Ok(summary)
    }
}

/// Output of [`Pipeline::run`].
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub phases: Vec<PhaseSummary>,
    pub filter: FilterOutcome,
}

/// Chunked corpora plus the trainer that will consume them. The trainer is
/// public so a caller can checkpoint the last good state after an error.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub trainer: Trainer,
    pub author: Vec<TextChunk>,
    pub ground: Vec<TextChunk>,
    pub neutral: Vec<TextChunk>,
}

fn corpus_hash(chunks: &[TextChunk]) -> String {
    let joined: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
    ChunkId::of(&joined.join("\n\n")).to_hex()
}

impl Pipeline {
    /// Chunks and normalizes the corpora and builds the vocabulary over all
    /// of them, author text first.
    pub fn new(
        author_text: &str,
        ground_text: &str,
        neutral_chunks: &[TextChunk],
        config: TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        let author = prepare_chunks(
            author_text,
            ChunkSource::Author,
            config.chunk_chars,
            config.normalize,
        );
        if author.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let ground = prepare_chunks(
            ground_text,
            ChunkSource::GroundTruth,
            config.chunk_chars,
            config.normalize,
        );
        let neutral: Vec<TextChunk> = neutral_chunks
            .iter()
            .map(|c| {
                if config.normalize {
                    TextChunk::new(normalize_text(&c.text), ChunkSource::Neutral)
                } else {
                    TextChunk::new(c.text.clone(), ChunkSource::Neutral)
                }
            })
            .filter(|c| !c.text.is_empty())
            .collect();
        let vocab = Vocabulary::build_many(
            author
                .iter()
                .chain(&ground)
                .chain(&neutral)
                .map(|c| c.text.as_str()),
        )?;
        let author_joined: String = author.iter().map(|c| c.text.as_str()).collect();
        let pad_id = vocab
            .most_frequent(&author_joined)
            .ok_or(Error::EmptyCorpus)?;
        let mut trainer = Trainer::new(config, vocab, pad_id)?;
        let mut hashes = BTreeMap::new();
        hashes.insert("author".to_string(), corpus_hash(&author));
        hashes.insert("ground_truth".to_string(), corpus_hash(&ground));
        hashes.insert("neutral".to_string(), corpus_hash(&neutral));
        trainer.provenance.corpus_hashes = hashes;
        Ok(Self {
            trainer,
            author,
            ground,
            neutral,
        })
    }

    /// Phase A on the author chunks while the ground chunks are filtered
    /// against them; then Phase B on the accepted ground chunks and Phase C
    /// on the neutral chunks.
    pub fn run(
        &mut self,
        provider: &dyn NliProvider,
        filter_cfg: &FilterConfig,
        bin: &mut ChunkBin,
    ) -> Result<PipelineReport> {
        let steps = self.trainer.config.steps;
        let (author, ground, neutral) = (&self.author, &self.ground, &self.neutral);
        let trainer = &mut self.trainer;
        let (phase_a, filtered) = std::thread::scope(|s| {
            let filter = s.spawn(move || filter_corpus(ground, author, provider, filter_cfg, bin));
            let a = trainer.run_phase(Phase::Author, author, steps.author);
            (a, filter.join().expect("filter thread panicked"))
        });
        let phase_a = phase_a?;
        let filtered = filtered?;
        if steps.author > 0 && phase_a.pairs == 0 {
            return Err(Error::InsufficientData(format!(
                "author corpus yields no windows of {} characters",
                self.trainer.config.seq_len + 1
            )));
        }
        if filtered.accepted.is_empty() && steps.ground > 0 {
            log::warn!("no ground-truth chunks accepted; ground phase skipped");
        }
        let phase_b = self
            .trainer
            .run_phase(Phase::Ground, &filtered.accepted, steps.ground)?;
        let phase_c = self
            .trainer
            .run_phase(Phase::Neutral, neutral, steps.neutral)?;
        let phases = vec![phase_a, phase_b, phase_c];
        let prov = &mut self.trainer.provenance;
        prov.provider = Some(provider.name());
        prov.premise_role = Some(PREMISE_ROLE.to_string());
        prov.filter = Some(filter_cfg.clone());
        prov.phases = phases.clone();
        Ok(PipelineReport {
            phases,
            filter: filtered,
        })
    }
}

/// Builds a [`Pipeline`], runs it and returns the final checkpoint.
pub fn train_full_pipeline(
    author_text: &str,
    ground_text: &str,
    neutral_chunks: &[TextChunk],
    provider: &dyn NliProvider,
    filter_cfg: &FilterConfig,
    bin: &mut ChunkBin,
    config: TrainConfig,
) -> Result<(Checkpoint, PipelineReport, TrainingLog)> {
    let mut p = Pipeline::new(author_text, ground_text, neutral_chunks, config)?;
    let report = p.run(provider, filter_cfg, bin)?;
    Ok((p.trainer.checkpoint(), report, p.trainer.log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Architecture;

    fn tiny() -> TrainConfig {
        TrainConfig {
            hidden: 6,
            seq_len: 5,
            chunk_chars: 40,
            log_window: 4,
            steps: PhaseSteps {
                author: 20,
                ground: 8,
                neutral: 4,
            },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_model_loss_is_ln_v() {
        let vocab = Vocabulary::build("abcdefg").unwrap();
        let cfg = TrainConfig {
            init: Init::Zero,
            ..tiny()
        };
        let mut t = Trainer::new(cfg, vocab, 0).unwrap();
        let loss = train_step(
            &mut t.params,
            &mut t.optim,
            &OptimConfig::default(),
            &[0, 1, 2, 3, 4],
            5,
        )
        .unwrap();
        assert!((loss - 7f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn zero_steps_leave_params_alone() {
        let vocab = Vocabulary::build("abcdefg hij").unwrap();
        let mut t = Trainer::new(tiny(), vocab, 0).unwrap();
        let before = t.params.clone();
        let chunks = prepare_chunks("abcdefg hij abc", ChunkSource::Author, 40, true);
        let s = t.run_phase(Phase::Author, &chunks, 0).unwrap();
        assert_eq!(t.params, before);
        assert!(t.log.rows().is_empty());
        assert_eq!(s.pairs, 10);
    }

    #[test]
    fn unencodable_chunks_are_skipped() {
        let vocab = Vocabulary::build("abcdefg").unwrap();
        let mut t = Trainer::new(tiny(), vocab, 0).unwrap();
        let chunks = vec![
            TextChunk::new("abcdefgabc", ChunkSource::Author),
            TextChunk::new("xyzxyzxyz", ChunkSource::Author),
        ];
        let s = t.run_phase(Phase::Author, &chunks, 3).unwrap();
        assert_eq!((s.chunks, s.skipped_chunks, s.pairs), (1, 1, 5));
    }

    #[test]
    fn pipeline_is_deterministic_and_trains_every_phase() {
        let author = "the river runs to the sea.\n\nthe sea is wide and the river is long.";
        let ground = "rivers carry water.\n\nthe sea holds salt water.";
        let neutral = vec![TextChunk::new(
            "of all the rivers, none",
            ChunkSource::Neutral,
        )];
        let run = || {
            let mut bin = ChunkBin::new();
            train_full_pipeline(
                author,
                ground,
                &neutral,
                &crate::filter::HeuristicProvider,
                &FilterConfig::default(),
                &mut bin,
                tiny(),
            )
            .unwrap()
        };
        let (a, report, log) = run();
        let (b, _, _) = run();
        assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
        assert_eq!(report.phases.len(), 3);
        assert_eq!(a.step(), 32);
        assert_eq!(log.losses().len(), 32);
        assert_eq!(a.params.architecture(), Architecture::Bilstm);
        assert_eq!(a.vocab.char_at(a.pad_id), Some(' '));
    }
}
