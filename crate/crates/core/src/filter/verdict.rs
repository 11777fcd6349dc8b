use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of a locally produced verdict.
pub const SIMPLEX_TOL: f64 = 1e-6;
/// Looser tolerance for probabilities that crossed the wire.
pub const WIRE_SIMPLEX_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NliLabel {
    Contradiction,
    Neutral,
    Entailment,
}

/// Three-way NLI distribution for an ordered (premise, hypothesis) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NliVerdict {
    pub contradiction: f64,
    pub neutral: f64,
    pub entailment: f64,
}

impl NliVerdict {
    pub fn new(contradiction: f64, neutral: f64, entailment: f64) -> Result<Self> {
        let v = Self {
            contradiction,
            neutral,
            entailment,
        };
        v.validate(SIMPLEX_TOL)?;
        Ok(v)
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let parts = [self.contradiction, self.neutral, self.entailment];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Protocol(format!(
                "verdict component outside [0, 1]: {self:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::Protocol(format!(
                "verdict sums to {sum}, not 1 ± {tol}"
            )));
        }
        Ok(())
    }

    /// Ties resolve in the order contradiction, neutral, entailment.
    pub fn argmax(&self) -> NliLabel {
        if self.contradiction >= self.neutral && self.contradiction >= self.entailment {
            NliLabel::Contradiction
        } else if self.neutral >= self.entailment {
            NliLabel::Neutral
        } else {
            NliLabel::Entailment
        }
    }
}

/// Anything that scores (premise, hypothesis) pairs.
pub trait NliProvider: Send + Sync {
    /// Stable description recorded in reports.
    fn name(&self) -> String;

    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict>;

    fn classify_batch(&self, pairs: &[(String, String)]) -> Result<Vec<NliVerdict>> {
        pairs.iter().map(|(p, h)| self.classify(p, h)).collect()
    }
}

impl<T: NliProvider + ?Sized> NliProvider for &T {
    fn name(&self) -> String {
        (**self).name()
    }

    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict> {
        (**self).classify(premise, hypothesis)
    }

    fn classify_batch(&self, pairs: &[(String, String)]) -> Result<Vec<NliVerdict>> {
        (**self).classify_batch(pairs)
    }
}

impl<T: NliProvider + ?Sized> NliProvider for Box<T> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict> {
        (**self).classify(premise, hypothesis)
    }

    fn classify_batch(&self, pairs: &[(String, String)]) -> Result<Vec<NliVerdict>> {
        (**self).classify_batch(pairs)
    }
}
