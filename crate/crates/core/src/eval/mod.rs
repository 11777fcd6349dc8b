//! Prompt-conditioned generation and the perplexity-based evaluations.

mod experiments;
mod generate;
mod perplexity;

pub use experiments::{
    author_comparison, compare_architectures, disjoint_chunks, ComparisonConfig, ComparisonRow,
    ComparisonTable, ExperimentOutcome, ExperimentReport, ExperimentRow, GenerationProbe,
    ReportMetadata, SeedRanking, OTHER_AUTHOR, SAME_AUTHOR,
};
pub use generate::{
    generate, generate_traced, initial_window, Generation, SampledChar, SamplingConfig,
    SamplingMode,
};
pub use perplexity::{
    parse_probability_dump, perplexity, prepare_eval_text, PerplexityReport, PositionProb,
};

use crate::corpus::{tokenize_words, WordList};

/// Percentage of word tokens of `text` that are not in `dictionary`; 0 when
/// the text has no tokens.
pub fn non_dictionary_rate(text: &str, dictionary: &WordList) -> f64 {
    let tokens = tokenize_words(text);
    if tokens.is_empty() {
        return 0.0;
    }
    let missing = tokens.iter().filter(|t| !dictionary.contains(t)).count();
    100.0 * missing as f64 / tokens.len() as f64
}
