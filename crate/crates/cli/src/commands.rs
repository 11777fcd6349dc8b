use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use authorlm::corpus::{vocabulary_extension, ChunkSource, TextChunk, WordList, WordListKind};
use authorlm::eval::{
    author_comparison, compare_architectures, disjoint_chunks, perplexity, prepare_eval_text,
    ComparisonConfig, ExperimentReport, GenerationProbe, SamplingConfig,
};
use authorlm::filter::{
    filter_corpus, BinLock, ChunkBin, FilterConfig, HeuristicProvider, NliProvider, RemoteProvider,
};
use authorlm::nn::Architecture;
use authorlm::train::{
    prepare_chunks, Checkpoint, Init, Pipeline, ProviderSpec, RunConfig, TrainConfig,
};
use authorlm::{Error, Result};
use serde::Serialize;

use crate::manifest::{ensure_dir, RunManifest};
use crate::{
    CompareArgs, EvalArgs, ExtendVocabArgs, FilterArgs, GenerateArgs, InitArgs, TrainArgs,
};

const REMOTE_TIMEOUT: Duration = Duration::from_secs(60);

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Parses a run config and resolves its relative paths against the file's
/// directory.
pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = RunConfig::from_json(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let c = &mut cfg.corpora;
    c.author = resolve(base, &c.author);
    for p in [
        &mut c.ground,
        &mut c.neutral,
        &mut c.dictionary,
        &mut c.stopwords,
        &mut cfg.bin_path,
    ]
    .into_iter()
    .flatten()
    {
        *p = resolve(base, p);
    }
    cfg.output_dir = resolve(base, &cfg.output_dir);
    Ok(cfg)
}

/// The provider named by `spec`; a remote one must pass a health check.
fn make_provider(spec: &ProviderSpec, retries: u32) -> Result<Box<dyn NliProvider>> {
    match spec {
        ProviderSpec::Heuristic => Ok(Box::new(HeuristicProvider)),
        ProviderSpec::Remote(url) => {
            let remote = RemoteProvider::from_env_or(url, REMOTE_TIMEOUT);
            let mut attempt = 0;
            loop {
                match remote.health() {
                    Ok(h) if h.status == "ok" => {
                        log::info!("NLI service {} ready, model {}", remote.endpoint(), h.model);
                        return Ok(Box::new(remote));
                    }
                    Ok(h) => {
                        return Err(Error::ProviderUnavailable(format!(
                            "{}/health reports status {:?}",
                            remote.endpoint(),
                            h.status
                        )))
                    }
                    Err(e @ Error::ProviderUnavailable(_)) if attempt < retries => {
                        attempt += 1;
                        log::warn!("{e}; retry {attempt}/{retries}");
                        std::thread::sleep(Duration::from_millis(250 << attempt));
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
}

fn parse_provider(s: &str) -> Result<ProviderSpec> {
    s.parse()
}

/// Holds the bin lock for the duration of a command.
struct BinState {
    bin: ChunkBin,
    path: Option<PathBuf>,
    _lock: Option<BinLock>,
}

impl BinState {
    fn open(path: Option<PathBuf>) -> Result<Self> {
        match path {
            None => Ok(Self {
                bin: ChunkBin::new(),
                path: None,
                _lock: None,
            }),
            Some(p) => {
                let lock = BinLock::acquire(&p)?;
                Ok(Self {
                    bin: ChunkBin::load(&p)?,
                    path: Some(p),
                    _lock: Some(lock),
                })
            }
        }
    }

    fn save(&self) -> Result<()> {
        match &self.path {
            Some(p) => self.bin.save(p),
            None => Ok(()),
        }
    }
}

fn ids_file(chunks: &[TextChunk]) -> String {
    chunks.iter().map(|c| format!("{}\n", c.id)).collect()
}

fn pretty(v: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    phases: &'a [authorlm::train::PhaseSummary],
    steps: u64,
    final_window: Option<&'a authorlm::train::LogRow>,
    vocab_size: usize,
    pad_char: String,
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = load_run_config(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.train.seed = seed;
    }
    if let Some(p) = &a.provider {
        cfg.provider = parse_provider(p)?;
    }
    if let Some(b) = a.bin {
        cfg.bin_path = Some(b);
    }
    if let Some(o) = a.output_dir {
        cfg.output_dir = o;
    }
    cfg.validate()?;
    let out = cfg.output_dir.clone();
    ensure_dir(&out)?;
    let mut m = RunManifest::new("train", &cfg, Some(cfg.train.seed))?;

    let author = m.read_text("author", &cfg.corpora.author)?;
    let ground = match &cfg.corpora.ground {
        Some(p) => m.read_text("ground", p)?,
        None => String::new(),
    };
    let neutral_chunks = match (
        &cfg.corpora.neutral,
        &cfg.corpora.dictionary,
        &cfg.corpora.stopwords,
    ) {
        (Some(n), Some(d), Some(s)) => {
            let neutral = m.read_text("neutral", n)?;
            let dict = WordList::parse(WordListKind::Dictionary, &m.read_text("dictionary", d)?);
            let stop = WordList::parse(WordListKind::Stopwords, &m.read_text("stopwords", s)?);
            let ext = vocabulary_extension(
                &author,
                &neutral,
                &dict,
                &stop,
                cfg.extension.chunk_len,
                cfg.extension.max_per_word,
            );
            log::info!(
                "vocabulary extension: {} missing words, {} candidates, {} neutral chunks",
                ext.missing.len(),
                ext.candidates.len(),
                ext.selection.chunks.len()
            );
            ext.selection.chunks
        }
        _ => Vec::new(),
    };

    let provider = make_provider(&cfg.provider, cfg.filter.retries)?;
    let mut bin = BinState::open(cfg.bin_path.clone())?;
    let mut pipeline = Pipeline::new(&author, &ground, &neutral_chunks, cfg.train.clone())?;
    let run = pipeline.run(provider.as_ref(), &cfg.filter, &mut bin.bin);
    bin.save()?;
    let trainer = &pipeline.trainer;
    m.write_output(&out, "training_log.csv", trainer.log.to_csv())?;
    if a.dump_losses {
        m.write_output(&out, "losses.csv", trainer.log.losses_csv())?;
    }
    let report = match run {
        Ok(r) => r,
        Err(e) => {
            if matches!(e, Error::Divergence(_)) {
                trainer
                    .checkpoint()
                    .save(&out.join("checkpoint.last_good.bin"))?;
                m.add_output("checkpoint.last_good.bin");
            }
            m.finish(&out)?;
            return Err(e);
        }
    };
    let ck = trainer.checkpoint();
    ck.save(&out.join("checkpoint.bin"))?;
    m.add_output("checkpoint.bin");
    m.write_output(&out, "filter_report.json", pretty(&report.filter.report)?)?;
    let summary = TrainSummary {
        phases: &report.phases,
        steps: ck.step(),
        final_window: trainer.log.rows().last(),
        vocab_size: ck.vocab.size(),
        pad_char: ck
            .vocab
            .char_at(ck.pad_id)
            .map(String::from)
            .unwrap_or_default(),
    };
    m.write_output(&out, "summary.json", pretty(&summary)?)?;
    if let Some(r) = trainer.log.rows().last() {
        eprintln!(
            "trained {} steps; last window loss {:.4}, perplexity {:.4}",
            ck.step(),
            r.mean_loss,
            r.mean_perplexity
        );
    }
    m.finish(&out)
}

/// Lowercases and maps whitespace to spaces when the model was trained on
/// normalized text. Unlike corpus normalization, runs of spaces and a
/// trailing space are kept because they condition the continuation.
fn prepare_prompt(ck: &Checkpoint, prompt: &str) -> String {
    if !ck.config.normalize {
        return prompt.to_string();
    }
    prompt
        .chars()
        .filter(|c| !c.is_control() || c.is_whitespace())
        .flat_map(|c| {
            if c.is_whitespace() {
                vec![' ']
            } else {
                c.to_lowercase().collect()
            }
        })
        .collect()
}

fn sampling(
    mode: &str,
    temperature: f64,
    top_k: usize,
    seed: u64,
    length: usize,
) -> Result<SamplingConfig> {
    let cfg = SamplingConfig {
        mode: mode.parse()?,
        temperature,
        top_k,
        seed,
        length,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn generate(a: GenerateArgs) -> Result<()> {
    let cfg = sampling(&a.mode, a.temperature, a.top_k, a.seed, a.length)?;
    let ck = Checkpoint::load(&a.checkpoint)?;
    let prompt = prepare_prompt(&ck, &a.prompt);
    let text = authorlm::eval::generate(&ck, &prompt, &cfg)?;
    println!("{text}");
    Ok(())
}

pub fn filter(a: FilterArgs) -> Result<()> {
    let fcfg = FilterConfig {
        threshold: a.threshold,
        max_author_chunks: a.max_author_chunks,
        retries: a.retries,
        parallelism: a.parallelism,
        ..FilterConfig::default()
    };
    fcfg.validate()?;
    let spec = parse_provider(&a.provider)?;
    if a.chunk_chars == 0 {
        return Err(Error::Config("chunk_chars must be positive".into()));
    }
    ensure_dir(&a.output_dir)?;
    #[derive(Serialize)]
    struct Snapshot<'a> {
        filter: &'a FilterConfig,
        provider: String,
        chunk_chars: usize,
        normalize: bool,
        bin: &'a Option<PathBuf>,
    }
    let mut m = RunManifest::new(
        "filter",
        Snapshot {
            filter: &fcfg,
            provider: spec.to_string(),
            chunk_chars: a.chunk_chars,
            normalize: !a.no_normalize,
            bin: &a.bin,
        },
        None,
    )?;
    let author = m.read_text("author", &a.author)?;
    let ground = m.read_text("ground", &a.ground)?;
    let authors = prepare_chunks(&author, ChunkSource::Author, a.chunk_chars, !a.no_normalize);
    let grounds = prepare_chunks(
        &ground,
        ChunkSource::GroundTruth,
        a.chunk_chars,
        !a.no_normalize,
    );
    if authors.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let provider = make_provider(&spec, fcfg.retries)?;
    let mut bin = BinState::open(a.bin.clone())?;
    let outcome = filter_corpus(&grounds, &authors, provider.as_ref(), &fcfg, &mut bin.bin)?;
    bin.save()?;
    let out = &a.output_dir;
    m.write_output(out, "accepted.txt", ids_file(&outcome.accepted))?;
    m.write_output(out, "rejected.txt", ids_file(&outcome.rejected))?;
    m.write_output(out, "undecided.txt", ids_file(&outcome.undecided))?;
    m.write_output(out, "filter_report.json", pretty(&outcome.report)?)?;
    m.finish(out)?;
    let r = &outcome.report;
    eprintln!(
        "{} ground chunks: {} accepted, {} rejected, {} undecided; {} provider calls, {} bin hits",
        grounds.len(),
        r.accepted.len(),
        r.rejected.len(),
        r.undecided.len(),
        r.provider_calls,
        r.bin_hits
    );
    if let Some(c) = r.chunks.iter().find(|c| c.error.is_some()) {
        return Err(Error::ProviderUnavailable(format!(
            "{} chunks undecided; first: {}: {}",
            r.undecided.len(),
            c.id,
            c.error.as_deref().unwrap_or_default()
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct TestScore {
    loss: f64,
    perplexity: f64,
    positions: usize,
    vocab_size: usize,
}

#[derive(Serialize)]
struct EvalSummary {
    test: TestScore,
    experiments: Option<ExperimentReport>,
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let sampling_cfg = sampling(&a.mode, a.temperature, a.top_k, a.seed, a.length)?;
    ensure_dir(&a.output_dir)?;
    #[derive(Serialize)]
    struct Snapshot<'a> {
        experiments: usize,
        chunk_chars: usize,
        sampling: &'a SamplingConfig,
    }
    let mut m = RunManifest::new(
        "eval",
        Snapshot {
            experiments: a.experiments,
            chunk_chars: a.chunk_chars,
            sampling: &sampling_cfg,
        },
        Some(a.seed),
    )?;
    let ck = Checkpoint::from_bytes(&m.read_input("checkpoint", &a.checkpoint)?)?;
    let test = prepare_eval_text(&ck, &m.read_text("test", &a.test)?);
    let dictionary = match &a.dictionary {
        Some(p) => Some(WordList::parse(
            WordListKind::Dictionary,
            &m.read_text("dictionary", p)?,
        )),
        None => None,
    };
    let pp = perplexity(&ck, &test)?;
    let out = &a.output_dir;
    m.write_output(out, "probs.csv", pp.dump_csv()?)?;
    let experiments = match &a.other_author {
        None => None,
        Some(p) => {
            let other = prepare_eval_text(&ck, &m.read_text("other_author", p)?);
            let same = disjoint_chunks(&test, a.chunk_chars, a.experiments)?;
            let other = disjoint_chunks(&other, a.chunk_chars, a.experiments)?;
            let probe = dictionary.as_ref().map(|d| GenerationProbe {
                dictionary: d,
                sampling: &sampling_cfg,
            });
            let report = author_comparison(&ck, &same, &other, a.experiments, probe)?;
            m.write_output(out, "experiments.csv", report.to_csv()?)?;
            eprintln!(
                "same author wins {} of {} experiments",
                report.wins, a.experiments
            );
            Some(report)
        }
    };
    eprintln!(
        "test loss {:.6}, perplexity {:.6} over {} positions",
        pp.loss,
        pp.perplexity,
        pp.n()
    );
    let summary = EvalSummary {
        test: TestScore {
            loss: pp.loss,
            perplexity: pp.perplexity,
            positions: pp.n(),
            vocab_size: ck.vocab.size(),
        },
        experiments,
    };
    m.write_output(out, "eval.json", pretty(&summary)?)?;
    m.finish(out)
}

pub fn compare(a: CompareArgs) -> Result<()> {
    let cfg = load_run_config(&a.config)?;
    let architectures = a
        .architectures
        .iter()
        .map(|s| s.parse::<Architecture>())
        .collect::<Result<Vec<_>>>()?;
    let seeds = if a.seeds.is_empty() {
        vec![cfg.train.seed]
    } else {
        a.seeds.clone()
    };
    let ccfg = ComparisonConfig {
        base: cfg.train.clone(),
        architectures,
        seeds,
    };
    ensure_dir(&a.output_dir)?;
    let mut m = RunManifest::new("compare", &ccfg, None)?;
    let author = m.read_text("author", &cfg.corpora.author)?;
    let test = m.read_text("test", &a.test)?;
    let table = compare_architectures(&author, &test, &ccfg)?;
    let out = &a.output_dir;
    m.write_output(out, "comparison.csv", table.to_csv()?)?;
    m.write_output(out, "comparison.json", pretty(&table)?)?;
    m.finish(out)?;
    for r in &table.rankings {
        let names: Vec<&str> = r.ranking.iter().map(|a| a.name()).collect();
        eprintln!("seed {}: {}", r.seed, names.join(" < "));
    }
    Ok(())
}

pub fn extend_vocab(a: ExtendVocabArgs) -> Result<()> {
    if a.chunk_len == 0 || a.max_per_word == 0 {
        return Err(Error::Config(
            "chunk_len and max_per_word must be positive".into(),
        ));
    }
    ensure_dir(&a.output_dir)?;
    #[derive(Serialize)]
    struct Snapshot {
        chunk_len: usize,
        max_per_word: usize,
    }
    let mut m = RunManifest::new(
        "extend-vocab",
        Snapshot {
            chunk_len: a.chunk_len,
            max_per_word: a.max_per_word,
        },
        None,
    )?;
    let author = m.read_text("author", &a.author)?;
    let neutral = m.read_text("neutral", &a.neutral)?;
    let dict = WordList::parse(
        WordListKind::Dictionary,
        &m.read_text("dictionary", &a.dictionary)?,
    );
    let stop = WordList::parse(
        WordListKind::Stopwords,
        &m.read_text("stopwords", &a.stopwords)?,
    );
    let ext = vocabulary_extension(&author, &neutral, &dict, &stop, a.chunk_len, a.max_per_word);

    #[derive(Serialize)]
    struct Chunk<'a> {
        id: String,
        text: &'a str,
    }
    #[derive(Serialize)]
    struct Report<'a> {
        missing_words: usize,
        candidates: Vec<&'a str>,
        not_found: &'a [String],
        chunks: Vec<Chunk<'a>>,
    }
    let report = Report {
        missing_words: ext.missing.len(),
        candidates: ext.candidates.iter().collect(),
        not_found: &ext.selection.not_found,
        chunks: ext
            .selection
            .chunks
            .iter()
            .map(|c| Chunk {
                id: c.id.to_hex(),
                text: &c.text,
            })
            .collect(),
    };
    let out = &a.output_dir;
    let words: String = ext.candidates.iter().map(|w| format!("{w}\n")).collect();
    m.write_output(out, "candidates.txt", words)?;
    m.write_output(out, "extension.json", pretty(&report)?)?;
    m.finish(out)?;
    eprintln!(
        "{} missing words, {} stop-word candidates, {} neutral chunks",
        ext.missing.len(),
        ext.candidates.len(),
        ext.selection.chunks.len()
    );
    Ok(())
}

pub fn init_checkpoint(a: InitArgs) -> Result<()> {
    let init = match a.init.as_str() {
        "zero" => Init::Zero,
        "uniform" => Init::Uniform,
        other => {
            return Err(Error::Config(format!(
                "unknown init {other:?} (zero, uniform)"
            )))
        }
    };
    let cfg = TrainConfig {
        architecture: a.architecture.parse()?,
        hidden: a.hidden,
        seq_len: a.seq_len,
        chunk_chars: TrainConfig::default().chunk_chars.max(a.seq_len + 1),
        seed: a.seed,
        init,
        ..TrainConfig::default()
    };
    let author = fs::read_to_string(&a.author).map_err(|e| Error::io(&a.author, e))?;
    let p = Pipeline::new(&author, "", &[], cfg)?;
    if let Some(dir) = a.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    let ck = p.trainer.checkpoint();
    ck.save(&a.output)?;
    eprintln!("wrote {} (V = {})", a.output.display(), ck.vocab.size());
    Ok(())
}
