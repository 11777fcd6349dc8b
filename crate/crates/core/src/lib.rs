//! Character-level author-style language modeling.
//!
//! A sequence-to-one Bi-LSTM (with unidirectional LSTM and plain RNN
//! baselines) is trained in three phases: the author's own corpus, ground-truth
//! text that survives an NLI contradiction check against the author, and
//! neutral passages that introduce stop words the author never used. The
//! crate also covers generation and the perplexity-based evaluations.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod filter;
pub mod nn;
pub mod optim;
pub mod train;

pub use error::{Error, ErrorClass, Result};
