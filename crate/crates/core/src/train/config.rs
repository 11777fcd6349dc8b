use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::FilterConfig;
use crate::nn::Architecture;
use crate::optim::OptimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Seeded uniform weights, forget bias 1.
    #[default]
    Uniform,
    /// All parameters zero: a uniform predictor, useful as a baseline.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseSteps {
    pub author: u64,
    pub ground: u64,
    pub neutral: u64,
}

impl Default for PhaseSteps {
    fn default() -> Self {
        Self {
            author: 25_000,
            ground: 5_000,
            neutral: 1_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub hidden: usize,
    pub seq_len: usize,
    pub stride: usize,
    /// Target size of the chunks corpora are cut into.
    pub chunk_chars: usize,
    pub steps: PhaseSteps,
    /// Steps averaged into one log row.
    pub log_window: usize,
    pub optim: OptimConfig,
    /// Learning rate for the ground-truth and neutral phases; defaults to
    /// `optim.learning_rate`.
    pub fine_tune_learning_rate: Option<f64>,
    pub seed: u64,
    pub init: Init,
    /// Lowercase and collapse whitespace before building the vocabulary.
    pub normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Bilstm,
            hidden: 100,
            seq_len: 100,
            stride: 1,
            chunk_chars: 2000,
            steps: PhaseSteps::default(),
            log_window: 100,
            optim: OptimConfig::default(),
            fine_tune_learning_rate: None,
            seed: 0,
            init: Init::Uniform,
            normalize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden", self.hidden),
            ("seq_len", self.seq_len),
            ("stride", self.stride),
            ("log_window", self.log_window),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.chunk_chars <= self.seq_len {
            return Err(Error::Config(format!(
                "chunk_chars ({}) must exceed seq_len ({})",
                self.chunk_chars, self.seq_len
            )));
        }
        self.optim.validate()?;
        if let Some(lr) = self.fine_tune_learning_rate {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!(
                    "fine_tune_learning_rate {lr} must be positive"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn phase_optim(&self, phase: super::Phase) -> OptimConfig {
        let mut o = self.optim.clone();
        if phase != super::Phase::Author {
            if let Some(lr) = self.fine_tune_learning_rate {
                o.learning_rate = lr;
            }
        }
        o
    }
}

/// Which NLI provider the filter uses.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ProviderSpec {
    #[default]
    Heuristic,
    Remote(String),
}

impl FromStr for ProviderSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heuristic" => Ok(ProviderSpec::Heuristic),
            _ => match s.strip_prefix("remote:") {
                Some(url) if !url.is_empty() => Ok(ProviderSpec::Remote(url.to_string())),
                _ => Err(Error::Config(format!(
                    "provider {s:?} is neither \"heuristic\" nor \"remote:<url>\""
                ))),
            },
        }
    }
}

impl fmt::Display for ProviderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderSpec::Heuristic => f.write_str("heuristic"),
            ProviderSpec::Remote(url) => write!(f, "remote:{url}"),
        }
    }
}

impl Serialize for ProviderSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ProviderSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusPaths {
    pub author: PathBuf,
    #[serde(default)]
    pub ground: Option<PathBuf>,
    #[serde(default)]
    pub neutral: Option<PathBuf>,
    #[serde(default)]
    pub dictionary: Option<PathBuf>,
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtensionConfig {
    /// Characters per neutral chunk.
    pub chunk_len: usize,
    pub max_per_word: usize,
}

impl Default for ExtensionConfig {
    fn default() -> Self {
        Self {
            chunk_len: 400,
            max_per_word: 2,
        }
    }
}

/// Everything a training run needs; relative paths are resolved against the
/// config file's directory by the front end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub train: TrainConfig,
    pub corpora: CorpusPaths,
    #[serde(default)]
    pub provider: ProviderSpec,
    #[serde(default)]
    pub bin_path: Option<PathBuf>,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub extension: ExtensionConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/default")
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.filter.validate()?;
        if self.extension.chunk_len <= self.train.seq_len {
            return Err(Error::Config(format!(
                "extension.chunk_len ({}) must exceed seq_len ({})",
                self.extension.chunk_len, self.train.seq_len
            )));
        }
        if self.corpora.neutral.is_some() != self.corpora.dictionary.is_some()
            || self.corpora.dictionary.is_some() != self.corpora.stopwords.is_some()
        {
            return Err(Error::Config(
                "corpora.neutral, corpora.dictionary and corpora.stopwords must be given together"
                    .into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_dimensions() {
        let c = TrainConfig::default();
        assert_eq!(
            (c.hidden, c.seq_len, c.stride, c.log_window),
            (100, 100, 1, 100)
        );
        assert_eq!(c.architecture, Architecture::Bilstm);
        c.validate().unwrap();
    }

    #[test]
    fn provider_spec_parses() {
        assert_eq!(
            "heuristic".parse::<ProviderSpec>().unwrap(),
            ProviderSpec::Heuristic
        );
        assert_eq!(
            "remote:http://127.0.0.1:8000"
                .parse::<ProviderSpec>()
                .unwrap(),
            ProviderSpec::Remote("http://127.0.0.1:8000".into())
        );
        assert!("remote:".parse::<ProviderSpec>().is_err());
        assert!("roberta".parse::<ProviderSpec>().is_err());
    }

    #[test]
    fn run_config_rejects_unknown_fields() {
        let ok = r#"{"corpora": {"author": "a.txt"}, "train": {"hidden": 8, "seq_len": 4, "chunk_chars": 50}}"#;
        let cfg = RunConfig::from_json(ok).unwrap();
        assert_eq!(cfg.train.hidden, 8);
        assert_eq!(cfg.provider, ProviderSpec::Heuristic);
        let bad = r#"{"corpora": {"author": "a.txt"}, "train": {"hiden": 8}}"#;
        assert!(matches!(RunConfig::from_json(bad), Err(Error::Config(_))));
        let partial = r#"{"corpora": {"author": "a.txt", "neutral": "n.txt"}}"#;
        assert!(RunConfig::from_json(partial).is_err());
    }
}
