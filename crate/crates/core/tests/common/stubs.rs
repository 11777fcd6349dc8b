//! Scripted NLI providers.

use std::sync::atomic::{AtomicUsize, Ordering};

use authorlm::filter::{NliProvider, NliVerdict};
use authorlm::Result;

/// Wraps a provider and counts its calls.
pub struct Counting<P> {
    pub inner: P,
    calls: AtomicUsize,
}

impl<P> Counting<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<P: NliProvider> NliProvider for Counting<P> {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.classify(premise, hypothesis)
    }
}

/// Same verdict for every pair.
pub struct Fixed(pub NliVerdict);

impl NliProvider for Fixed {
    fn name(&self) -> String {
        "fixed".into()
    }

    fn classify(&self, _: &str, _: &str) -> Result<NliVerdict> {
        Ok(self.0)
    }
}

pub fn all_contradiction() -> Fixed {
    Fixed(NliVerdict::new(0.98, 0.01, 0.01).unwrap())
}

pub fn all_entailment() -> Fixed {
    Fixed(NliVerdict::new(0.01, 0.01, 0.98).unwrap())
}

/// Contradiction 0.9 when the hypothesis contains `marker`, else 0.05.
pub struct Marker(pub &'static str);

impl NliProvider for Marker {
    fn name(&self) -> String {
        format!("marker:{}", self.0)
    }

    fn classify(&self, _: &str, hypothesis: &str) -> Result<NliVerdict> {
        if hypothesis.contains(self.0) {
            NliVerdict::new(0.9, 0.05, 0.05)
        } else {
            NliVerdict::new(0.05, 0.9, 0.05)
        }
    }
}

/// Contradiction score spread over [0, 1) by a hash of the pair.
pub struct Graded;

impl NliProvider for Graded {
    fn name(&self) -> String {
        "graded".into()
    }

    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict> {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in premise.bytes().chain([0]).chain(hypothesis.bytes()) {
            h = (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3);
        }
        let c = (h % 1000) as f64 / 1000.0;
        NliVerdict::new(c, 1.0 - c, 0.0)
    }
}
