mod common;

use std::collections::BTreeSet;

use authorlm::corpus::{ChunkId, ChunkSource, TextChunk};
use authorlm::filter::{
    filter_corpus, heuristic_classify, is_contradicted, BinLock, ChunkBin, Decision, FilterConfig,
    HeuristicProvider, NliLabel, NliProvider,
};
use authorlm::Error;
use common::stubs::{all_contradiction, all_entailment, Counting, Graded, Marker};
use proptest::prelude::*;

fn chunks(texts: &[&str], source: ChunkSource) -> Vec<TextChunk> {
    texts.iter().map(|t| TextChunk::new(*t, source)).collect()
}

fn authors() -> Vec<TextChunk> {
    chunks(
        &[
            "the sky is blue over eden",
            "the river runs to the sea",
            "adam walked in the garden",
        ],
        ChunkSource::Author,
    )
}

fn ground() -> Vec<TextChunk> {
    chunks(
        &[
            "a garden lay in the east",
            "XMARKERX the sea is dry",
            "the river is long",
            "stars are bright XMARKERX",
            "the sky is not blue over eden",
        ],
        ChunkSource::GroundTruth,
    )
}

fn cfg(threshold: f64) -> FilterConfig {
    FilterConfig {
        threshold,
        retry_backoff_ms: 0,
        ..FilterConfig::default()
    }
}

#[test]
fn contradiction_stub_rejects_after_one_call() {
    let p = Counting::new(all_contradiction());
    let mut bin = ChunkBin::new();
    let g = &ground()[0];
    assert!(is_contradicted(g, &authors(), &p, &cfg(0.5), &mut bin).unwrap());
    assert_eq!(p.calls(), 1);
    assert!(bin.contains(g.id));
}

#[test]
fn entailment_stub_scans_every_author_chunk() {
    let p = Counting::new(all_entailment());
    let mut bin = ChunkBin::new();
    assert!(!is_contradicted(&ground()[0], &authors(), &p, &cfg(0.5), &mut bin).unwrap());
    assert_eq!(p.calls(), authors().len());
    assert!(bin.is_empty());
}

#[test]
fn binned_chunk_needs_no_calls() {
    let p = Counting::new(all_entailment());
    let mut bin = ChunkBin::new();
    let g = &ground()[2];
    bin.insert(g.id);
    assert!(is_contradicted(g, &authors(), &p, &cfg(0.5), &mut bin).unwrap());
    assert_eq!(p.calls(), 0);
    assert!(is_contradicted(g, &[], &p, &cfg(0.5), &mut bin).unwrap());
}

#[test]
fn empty_author_corpus_is_an_error() {
    let mut bin = ChunkBin::new();
    let err =
        is_contradicted(&ground()[0], &[], &HeuristicProvider, &cfg(0.5), &mut bin).unwrap_err();
    assert!(matches!(err, Error::InsufficientData(_)));
}

#[test]
fn marker_stub_rejects_exactly_the_marked_chunks() {
    let mut bin = ChunkBin::new();
    let out = filter_corpus(
        &ground(),
        &authors(),
        &Marker("XMARKERX"),
        &cfg(0.5),
        &mut bin,
    )
    .unwrap();
    let marked: Vec<TextChunk> = ground()
        .into_iter()
        .filter(|c| c.text.contains("XMARKERX"))
        .collect();
    let unmarked: Vec<TextChunk> = ground()
        .into_iter()
        .filter(|c| !c.text.contains("XMARKERX"))
        .collect();
    assert_eq!(out.rejected, marked);
    assert_eq!(out.accepted, unmarked);
    assert!(out.undecided.is_empty());
    assert_eq!(bin.len(), 2);
    assert_eq!(out.report.provider_calls, 2 + 3 * 3);
}

#[test]
fn all_entailment_accepts_everything() {
    let mut bin = ChunkBin::new();
    let out = filter_corpus(
        &ground(),
        &authors(),
        &all_entailment(),
        &cfg(0.5),
        &mut bin,
    )
    .unwrap();
    assert_eq!(out.accepted, ground());
    assert!(out.rejected.is_empty() && bin.is_empty());
}

#[test]
fn warm_bin_rerun_makes_no_calls() {
    for provider in [
        &Marker("XMARKERX") as &dyn NliProvider,
        &HeuristicProvider,
        &Graded,
    ] {
        let mut bin = ChunkBin::new();
        let cold = filter_corpus(&ground(), &authors(), provider, &cfg(0.5), &mut bin).unwrap();
        let counted = Counting::new(all_entailment());
        let rejected_only: Vec<TextChunk> = cold.rejected.clone();
        let warm =
            filter_corpus(&rejected_only, &authors(), &counted, &cfg(0.5), &mut bin).unwrap();
        assert_eq!(counted.calls(), 0);
        assert_eq!(warm.rejected, cold.rejected);
        assert_eq!(warm.report.bin_hits, cold.rejected.len());
        assert!(warm
            .report
            .chunks
            .iter()
            .all(|c| c.from_bin && c.calls == 0));
    }
}

#[test]
fn heuristic_rejects_the_negated_chunk() {
    let mut bin = ChunkBin::new();
    let out = filter_corpus(
        &ground(),
        &authors(),
        &HeuristicProvider,
        &cfg(0.5),
        &mut bin,
    )
    .unwrap();
    assert_eq!(out.rejected.len(), 1);
    assert_eq!(out.rejected[0].text, "the sky is not blue over eden");
    let r = out
        .report
        .chunks
        .iter()
        .find(|c| c.decision == Decision::Rejected)
        .unwrap();
    assert_eq!(r.calls, 1);
    assert_eq!(r.trail[0].premise, authors()[0].id);
}

fn rejected_ids(provider: &dyn NliProvider, t: f64) -> BTreeSet<ChunkId> {
    let ground: Vec<TextChunk> = (0..40)
        .map(|i| TextChunk::new(format!("ground chunk number {i}"), ChunkSource::GroundTruth))
        .collect();
    let mut bin = ChunkBin::new();
    let out = filter_corpus(&ground, &authors(), provider, &cfg(t), &mut bin).unwrap();
    assert_eq!(out.accepted.len() + out.rejected.len(), ground.len());
    out.rejected.iter().map(|c| c.id).collect()
}

#[test]
fn raising_the_threshold_only_accepts_more() {
    let ts = [0.01, 0.5, 0.99];
    for provider in [&Graded as &dyn NliProvider, &HeuristicProvider] {
        let sets: Vec<BTreeSet<ChunkId>> = ts.iter().map(|&t| rejected_ids(provider, t)).collect();
        assert!(sets[1].is_subset(&sets[0]));
        assert!(sets[2].is_subset(&sets[1]));
    }
    let graded: Vec<usize> = ts.iter().map(|&t| rejected_ids(&Graded, t).len()).collect();
    assert!(graded[0] > graded[1] && graded[1] > graded[2], "{graded:?}");
}

#[test]
fn report_serializes_with_ids_and_decisions() {
    let mut bin = ChunkBin::new();
    let out = filter_corpus(
        &ground(),
        &authors(),
        &Marker("XMARKERX"),
        &cfg(0.5),
        &mut bin,
    )
    .unwrap();
    let json = serde_json::to_value(&out.report).unwrap();
    assert_eq!(json["premise_role"], "author");
    assert_eq!(json["threshold"], 0.5);
    assert_eq!(json["rejected"][0], ground()[1].id.to_hex());
    assert_eq!(json["chunks"][1]["decision"], "rejected");
    assert!(json["chunks"][0].get("error").is_none());
}

#[test]
fn bin_persists_and_locks() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bin.txt");
    let mut bin = ChunkBin::new();
    filter_corpus(
        &ground(),
        &authors(),
        &Marker("XMARKERX"),
        &cfg(0.5),
        &mut bin,
    )
    .unwrap();
    bin.save(&path).unwrap();
    let loaded = ChunkBin::load(&path).unwrap();
    assert_eq!(loaded, bin);
    assert_eq!(loaded.render(), std::fs::read_to_string(&path).unwrap());

    let lock = BinLock::acquire(&path).unwrap();
    assert!(matches!(BinLock::acquire(&path), Err(Error::Locked(_))));
    drop(lock);
    BinLock::acquire(&path).unwrap();
}

fn label(s: &str) -> NliLabel {
    match s {
        "contradiction" => NliLabel::Contradiction,
        "neutral" => NliLabel::Neutral,
        "entailment" => NliLabel::Entailment,
        other => panic!("bad label {other}"),
    }
}

#[test]
fn heuristic_agrees_with_labelled_pairs() {
    let tsv = include_str!("fixtures/nli_pairs.tsv");
    let rows: Vec<(&str, &str, NliLabel)> = tsv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            assert_eq!(f.len(), 3, "{l}");
            (f[0], f[1], label(f[2]))
        })
        .collect();
    assert_eq!(rows.len(), 50);
    let agree = rows
        .iter()
        .filter(|(p, h, l)| heuristic_classify(p, h).argmax() == *l)
        .count();
    let rate = agree as f64 / rows.len() as f64;
    println!("heuristic agreement {agree}/50 = {rate:.2}");
    assert!(rate >= 0.7, "agreement {rate}");
}

fn arb_verdict_provider() -> impl Strategy<Value = Vec<u16>> {
    prop::collection::vec(0u16..1000, 1..40)
}

/// Contradiction scores from a table, indexed by a hash of the pair.
struct Table(Vec<u16>);

impl NliProvider for Table {
    fn name(&self) -> String {
        "table".into()
    }

    fn classify(
        &self,
        premise: &str,
        hypothesis: &str,
    ) -> authorlm::Result<authorlm::filter::NliVerdict> {
        let k = ChunkId::of(&format!("{premise}\u{0}{hypothesis}")).0 as usize % self.0.len();
        let c = self.0[k] as f64 / 1000.0;
        authorlm::filter::NliVerdict::new(c, 1.0 - c, 0.0)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filtering_partitions_in_order(
        scores in arb_verdict_provider(),
        ground_ids in prop::collection::vec(0u8..12, 0..16),
        n_auth in 1usize..5,
        t in 0.05f64..0.95,
        parallelism in 1usize..5,
        pre_binned in prop::collection::vec(0u8..12, 0..4),
    ) {
        let ground: Vec<TextChunk> = ground_ids.iter().map(|i| TextChunk::new(format!("g{i}"), ChunkSource::GroundTruth)).collect();
        let authors: Vec<TextChunk> = (0..n_auth).map(|i| TextChunk::new(format!("a{i}"), ChunkSource::Author)).collect();
        let config = FilterConfig { threshold: t, parallelism, ..cfg(0.5) };
        let mut bin = ChunkBin::new();
        for i in &pre_binned {
            bin.insert(ChunkId::of(&format!("g{i}")));
        }
        let before = bin.clone();
        let provider = Counting::new(Table(scores.clone()));
        let out = filter_corpus(&ground, &authors, &provider, &config, &mut bin).unwrap();

        prop_assert_eq!(out.accepted.len() + out.rejected.len() + out.undecided.len(), ground.len());
        prop_assert!(out.undecided.is_empty());
        let mut a = out.accepted.iter().peekable();
        let mut r = out.rejected.iter().peekable();
        for c in &ground {
            if a.peek() == Some(&c) { a.next(); } else { prop_assert_eq!(r.next(), Some(c)); }
        }
        prop_assert!(before.iter().all(|id| bin.contains(id)));
        for c in &out.rejected { prop_assert!(bin.contains(c.id)); }
        for c in &out.accepted { prop_assert!(!bin.contains(c.id)); }
        prop_assert!(provider.calls() <= ground.len() * authors.len());
        prop_assert_eq!(provider.calls(), out.report.provider_calls);
        let binned_calls: usize = out.report.chunks.iter().filter(|c| c.from_bin).map(|c| c.calls).sum();
        prop_assert_eq!(binned_calls, 0);

        let mut bin2 = before.clone();
        let again = filter_corpus(&ground, &authors, &Table(scores), &FilterConfig { parallelism: 1, ..config }, &mut bin2).unwrap();
        prop_assert_eq!(again.accepted, out.accepted);
        prop_assert_eq!(again.rejected, out.rejected);
        prop_assert_eq!(bin2, bin);
    }

    #[test]
    fn threshold_is_monotone(scores in arb_verdict_provider(), t1 in 0.01f64..0.99, t2 in 0.01f64..0.99) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let ground: Vec<TextChunk> = (0..10).map(|i| TextChunk::new(format!("g{i}"), ChunkSource::GroundTruth)).collect();
        let run = |t: f64| {
            let mut bin = ChunkBin::new();
            let out = filter_corpus(&ground, &authors(), &Table(scores.clone()), &cfg(t), &mut bin).unwrap();
            out.rejected.iter().map(|c| c.id).collect::<BTreeSet<_>>()
        };
        prop_assert!(run(hi).is_subset(&run(lo)));
    }
}
