use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{forward, softmax};
use crate::train::Checkpoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Always the most probable character. Ignores the seed.
    Greedy,
    /// Sample from `softmax(logits / temperature)`.
    #[default]
    Temperature,
    /// Temperature sampling restricted to the `top_k` most probable characters.
    TopK,
}

impl std::str::FromStr for SamplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(SamplingMode::Greedy),
            "temperature" => Ok(SamplingMode::Temperature),
            "top_k" | "top-k" => Ok(SamplingMode::TopK),
            _ => Err(Error::Config(format!(
                "unknown sampling mode {s:?} (greedy, temperature, top_k)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub mode: SamplingMode,
    pub temperature: f64,
    pub top_k: usize,
    pub seed: u64,
    /// Characters to generate after the prompt.
    pub length: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            mode: SamplingMode::Temperature,
            temperature: 0.8,
            top_k: 5,
            seed: 0,
            length: 500,
        }
    }
}

impl SamplingConfig {
    pub fn greedy(length: usize) -> Self {
        Self {
            mode: SamplingMode::Greedy,
            length,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!(
                "temperature {} must be positive",
                self.temperature
            )));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// One generated character with the model's (untempered) probability for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledChar {
    pub id: usize,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    /// Prompt followed by the continuation.
    pub text: String,
    pub continuation: String,
    pub trace: Vec<SampledChar>,
}

/// The first window: the last `seq_len` prompt ids, left-padded with `pad`.
pub fn initial_window(prompt_ids: &[usize], seq_len: usize, pad: usize) -> Vec<usize> {
    if prompt_ids.len() >= seq_len {
        prompt_ids[prompt_ids.len() - seq_len..].to_vec()
    } else {
        let mut w = vec![pad; seq_len - prompt_ids.len()];
        w.extend_from_slice(prompt_ids);
        w
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw; only ids with positive weight can be returned.
fn draw(weights: &[(usize, f64)], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().map(|w| w.1).sum();
    let u = rng.random::<f64>() * total;
    let mut cum = 0.0;
    let mut last = weights[0].0;
    for &(id, w) in weights {
        if w <= 0.0 {
            continue;
        }
        cum += w;
        last = id;
        if cum > u {
            return id;
        }
    }
    last
}

fn choose(logits: &[f64], probs: &[f64], cfg: &SamplingConfig, rng: &mut ChaCha8Rng) -> usize {
    match cfg.mode {
        SamplingMode::Greedy => argmax(probs),
        SamplingMode::Temperature => {
            let scaled: Vec<f64> = logits.iter().map(|z| z / cfg.temperature).collect();
            let p = softmax(&scaled);
            let w: Vec<(usize, f64)> = p.into_iter().enumerate().collect();
            draw(&w, rng)
        }
        SamplingMode::TopK => {
            let mut order: Vec<usize> = (0..logits.len()).collect();
            order.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]).then(a.cmp(&b)));
            order.truncate(cfg.top_k);
            let scaled: Vec<f64> = order.iter().map(|&i| logits[i] / cfg.temperature).collect();
            let p = softmax(&scaled);
            let w: Vec<(usize, f64)> = order.into_iter().zip(p).collect();
            draw(&w, rng)
        }
    }
}

/// Generates `cfg.length` characters after `prompt` and keeps the sampling
/// trace.
///
/// The prompt must be non-empty and made of vocabulary characters. Each
/// step predicts from the current window, appends the chosen character and
/// slides the window by one.
pub fn generate_traced(ck: &Checkpoint, prompt: &str, cfg: &SamplingConfig) -> Result<Generation> {
    cfg.validate()?;
    if prompt.is_empty() {
        return Err(Error::ChunkTooShort { len: 0, needed: 1 });
    }
    let unknown = ck.vocab.unknown_chars(prompt);
    if !unknown.is_empty() {
        return Err(Error::UnknownCharacters(unknown));
    }
    let ids = ck.vocab.encode(prompt)?;
    let mut window = initial_window(&ids, ck.config.seq_len, ck.pad_id);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = Vec::with_capacity(cfg.length);
    for _ in 0..cfg.length {
        let out = forward(&ck.params, &window)?;
        let id = choose(&out.logits, &out.probs, cfg, &mut rng);
        trace.push(SampledChar {
            id,
            prob: out.probs[id],
        });
        window.rotate_left(1);
        *window.last_mut().expect("seq_len > 0") = id;
    }
    let ids: Vec<usize> = trace.iter().map(|s| s.id).collect();
    let continuation = ck.vocab.decode(&ids)?;
    Ok(Generation {
        text: format!("{prompt}{continuation}"),
        continuation,
        trace,
    })
}

/// Prompt plus `cfg.length` generated characters.
pub fn generate(ck: &Checkpoint, prompt: &str, cfg: &SamplingConfig) -> Result<String> {
    generate_traced(ck, prompt, cfg).map(|g| g.text)
}
