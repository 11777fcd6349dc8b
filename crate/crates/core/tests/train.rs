mod common;

use authorlm::corpus::{ChunkSource, TextChunk, Vocabulary};
use authorlm::filter::{ChunkBin, FilterConfig, HeuristicProvider, NliProvider};
use authorlm::nn::Architecture;
use authorlm::optim::OptimConfig;
use authorlm::train::{
    prepare_chunks, train_full_pipeline, Init, Phase, PhaseSteps, Pipeline, TrainConfig, Trainer,
};
use authorlm::Error;
use common::stubs::{all_contradiction, all_entailment, Counting, Marker};

const AUTHOR: &str =
    "of man's first disobedience, and the fruit\nof that forbidden tree whose mortal taste\n\n\
brought death into the world, and all our woe,\nwith loss of eden, till one greater man\n\n\
restore us, and regain the blissful seat,\nsing heavenly muse, that on the secret top";
const GROUND: &str =
    "the garden was planted in the east.\n\nthe tree stood in the middle of the garden.\n\n\
xcontra the fruit was never forbidden.\n\nthe river went out of eden to water the garden.";

fn small(arch: Architecture) -> TrainConfig {
    TrainConfig {
        architecture: arch,
        hidden: 8,
        seq_len: 12,
        chunk_chars: 60,
        log_window: 5,
        steps: PhaseSteps {
            author: 60,
            ground: 20,
            neutral: 10,
        },
        ..TrainConfig::default()
    }
}

fn neutral() -> Vec<TextChunk> {
    vec![TextChunk::new(
        "and whence, and when, and where the river ran",
        ChunkSource::Neutral,
    )]
}

fn run(
    provider: &dyn NliProvider,
    cfg: TrainConfig,
) -> (
    authorlm::train::Checkpoint,
    authorlm::train::PipelineReport,
    authorlm::train::TrainingLog,
) {
    let mut bin = ChunkBin::new();
    train_full_pipeline(
        AUTHOR,
        GROUND,
        &neutral(),
        provider,
        &FilterConfig::default(),
        &mut bin,
        cfg,
    )
    .unwrap()
}

#[test]
fn one_pair_is_memorized() {
    let cfg = TrainConfig::default();
    let text: String = "it is a truth universally acknowledged, that a single man in possession of a good fortune, must be in want of a wife"
        .chars()
        .take(cfg.seq_len + 1)
        .collect();
    let vocab = Vocabulary::build(&text).unwrap();
    let mut t = Trainer::new(cfg, vocab, 0).unwrap();
    let chunks = [TextChunk::new(text, ChunkSource::Author)];
    let s = t.run_phase(Phase::Author, &chunks, 200).unwrap();
    assert_eq!(s.pairs, 1);
    let last = *t.log.losses().last().unwrap();
    assert!(last < 0.05, "loss after 200 steps on one pair: {last}");
}

#[test]
fn zero_init_first_loss_is_ln_v() {
    for arch in Architecture::ALL {
        let cfg = TrainConfig {
            init: Init::Zero,
            ..small(arch)
        };
        let (ck, _, log) = run(&HeuristicProvider, cfg);
        let v = ck.vocab.size() as f64;
        assert!((log.losses()[0] - v.ln()).abs() < 1e-9, "{arch:?}");
    }
}

#[test]
fn log_rows_recompute_from_the_loss_dump() {
    let (_, _, log) = run(&HeuristicProvider, small(Architecture::Bilstm));
    let mut lines = log
        .losses_csv()
        .lines()
        .map(str::to_string)
        .collect::<Vec<_>>()
        .into_iter();
    assert_eq!(lines.next().unwrap(), "step,loss");
    let losses: Vec<f64> = lines
        .enumerate()
        .map(|(i, l)| {
            let (step, loss) = l.split_once(',').unwrap();
            assert_eq!(step.parse::<usize>().unwrap(), i);
            loss.parse().unwrap()
        })
        .collect();
    assert_eq!(losses, log.losses());
    let w = log.window();
    assert_eq!(log.rows().len(), losses.len() / w);
    let csv = log.to_csv();
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("window,mean_loss,mean_perplexity"));
    for (k, line) in rows.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let mean: f64 = losses[k * w..(k + 1) * w].iter().sum::<f64>() / w as f64;
        let logged: f64 = f[1].parse().unwrap();
        let pp: f64 = f[2].parse().unwrap();
        assert_eq!(f[0].parse::<usize>().unwrap(), k);
        assert!((logged - mean).abs() < 1e-12);
        assert!((pp - logged.exp()).abs() < 1e-9);
    }
}

#[test]
fn loss_sequence_is_bitwise_reproducible() {
    for arch in Architecture::ALL {
        let (a, _, la) = run(&HeuristicProvider, small(arch));
        let (b, _, lb) = run(&HeuristicProvider, small(arch));
        let bits = |l: &authorlm::train::TrainingLog| {
            l.losses().iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(bits(&la), bits(&lb));
        assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
    }
}

#[test]
fn seed_changes_the_run() {
    let (a, _, _) = run(&HeuristicProvider, small(Architecture::Bilstm));
    let (b, _, _) = run(
        &HeuristicProvider,
        TrainConfig {
            seed: 1,
            ..small(Architecture::Bilstm)
        },
    );
    assert_ne!(a.params, b.params);
}

#[test]
fn all_contradiction_skips_the_ground_phase() {
    let (ck, report, log) = run(&all_contradiction(), small(Architecture::Bilstm));
    assert!(report.filter.accepted.is_empty());
    let b = &report.phases[1];
    assert_eq!(
        (b.phase, b.chunks, b.pairs, b.steps),
        (Phase::Ground, 0, 0, 0)
    );
    assert_eq!(log.losses().len(), 70);

    let without_b = TrainConfig {
        steps: PhaseSteps {
            ground: 0,
            ..small(Architecture::Bilstm).steps
        },
        ..small(Architecture::Bilstm)
    };
    let (reference, _, _) = run(&HeuristicProvider, without_b);
    assert_eq!(ck.params, reference.params);
    assert_eq!(ck.optim, reference.optim);
}

#[test]
fn all_entailment_trains_on_every_ground_chunk() {
    let cfg = small(Architecture::Bilstm);
    let (_, report, log) = run(&all_entailment(), cfg.clone());
    let ground = prepare_chunks(GROUND, ChunkSource::GroundTruth, cfg.chunk_chars, true);
    assert_eq!(report.filter.accepted, ground);
    assert_eq!(report.phases[1].chunks, ground.len());
    assert_eq!(report.phases[1].steps, 20);
    assert_eq!(log.losses().len(), 90);
}

#[test]
fn ground_phase_uses_only_accepted_chunks() {
    let cfg = small(Architecture::Bilstm);
    let provider = Counting::new(Marker("xcontra"));
    let (_, report, _) = run(&provider, cfg);
    let rejected = &report.filter.rejected;
    assert_eq!(rejected.len(), 1);
    assert!(rejected[0].text.contains("xcontra"));
    assert!(report
        .filter
        .accepted
        .iter()
        .all(|c| !c.text.contains("xcontra")));
    assert_eq!(report.phases[1].chunks, report.filter.accepted.len());
    assert!(provider.calls() > 0);
    for id in &report.filter.report.rejected {
        assert!(!report.filter.accepted.iter().any(|c| c.id == *id));
    }
}

#[test]
fn phases_run_in_order() {
    let (ck, report, _) = run(&HeuristicProvider, small(Architecture::Bilstm));
    let firsts: Vec<u64> = report.phases.iter().map(|p| p.first_step).collect();
    let b_steps = report.phases[1].steps;
    assert_eq!(firsts, vec![0, 60, 60 + b_steps]);
    assert_eq!(ck.provenance.phases, report.phases);
    assert_eq!(ck.provenance.premise_role.as_deref(), Some("author"));
    assert!(ck.provenance.corpus_hashes.contains_key("author"));
}

#[test]
fn vocabulary_covers_every_corpus() {
    let p = Pipeline::new(
        "abc abc abc abc abc abc abc abc",
        "xyz",
        &[TextChunk::new("q", ChunkSource::Neutral)],
        TrainConfig {
            seq_len: 4,
            chunk_chars: 20,
            hidden: 3,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    for ch in "abc xyzq".chars() {
        assert!(p.trainer.vocab.id(ch).is_some(), "{ch:?}");
    }
    assert_eq!(p.trainer.vocab.char_at(p.trainer.pad_id), Some('a'));
}

#[test]
fn healthy_run_trends_down() {
    let text = "the quick brown fox jumps over the lazy dog. ".repeat(40);
    let cfg = TrainConfig {
        hidden: 16,
        seq_len: 10,
        chunk_chars: 400,
        log_window: 20,
        optim: OptimConfig {
            learning_rate: 1e-2,
            ..OptimConfig::default()
        },
        ..TrainConfig::default()
    };
    let mut p = Pipeline::new(&text, "", &[], cfg).unwrap();
    let author = p.author.clone();
    p.trainer.run_phase(Phase::Author, &author, 600).unwrap();
    let (first, last) = p.trainer.log.trend(10).unwrap();
    assert!(last < first, "first {first} last {last}");
}

#[test]
fn divergence_keeps_the_last_good_state() {
    let cfg = TrainConfig {
        hidden: 4,
        seq_len: 6,
        chunk_chars: 40,
        optim: OptimConfig {
            learning_rate: f64::MAX,
            ..OptimConfig::default()
        },
        ..TrainConfig::default()
    };
    let mut p = Pipeline::new("abcdefg abcdefg abcdefg", "", &[], cfg).unwrap();
    let author = p.author.clone();
    let err = p.trainer.run_phase(Phase::Author, &author, 50).unwrap_err();
    assert!(matches!(err, Error::Divergence(_)), "{err}");
    assert_eq!(p.trainer.params.first_non_finite(), None);
    let ck = p.trainer.checkpoint();
    assert_eq!(ck.step() as usize, p.trainer.log.losses().len());
    let back = authorlm::train::Checkpoint::from_bytes(&ck.to_bytes().unwrap()).unwrap();
    assert_eq!(back.params, ck.params);
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        TrainConfig {
            hidden: 0,
            ..TrainConfig::default()
        },
        TrainConfig {
            seq_len: 0,
            ..TrainConfig::default()
        },
        TrainConfig {
            chunk_chars: 100,
            ..TrainConfig::default()
        },
        TrainConfig {
            fine_tune_learning_rate: Some(-1.0),
            ..TrainConfig::default()
        },
    ];
    for cfg in bad {
        assert!(matches!(
            Pipeline::new(AUTHOR, "", &[], cfg),
            Err(Error::Config(_))
        ));
    }
    assert!(matches!(
        Pipeline::new("", "", &[], TrainConfig::default()),
        Err(Error::EmptyCorpus)
    ));
}
