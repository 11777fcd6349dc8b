#![allow(dead_code)]

//! Straight-line dense reimplementation of the model equations, used as an
//! oracle. It builds the explicit one-hot input and the concatenation
//! `[h_{t-1}, x_t]`, and shares no code with the library's forward pass.
//! Generic over the scalar so the same equations run in `f64` and in
//! double-double precision.

mod dd;
pub mod stubs;

#[allow(unused_imports)]
pub use dd::Dd;

use std::ops::{Add, Div, Mul, Neg, Sub};

use authorlm::nn::{DirectionParams, Encoder, GateParams, ModelParams, Tensor};

pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn of(x: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn to_f64(self) -> f64;

    fn tanh(self) -> Self {
        let one = Self::of(1.0);
        one - Self::of(2.0) / ((self * Self::of(2.0)).exp() + one)
    }

    fn sigmoid(self) -> Self {
        Self::of(1.0) / (Self::of(1.0) + (-self).exp())
    }
}

impl Scalar for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
}

fn dense_affine<S: Scalar>(w: &Tensor, b: &Tensor, input: &[S]) -> Vec<S> {
    let mut out = Vec::with_capacity(w.rows());
    for r in 0..w.rows() {
        let mut acc = S::of(b.get(r, 0));
        for c in 0..w.cols() {
            acc = acc + S::of(w.get(r, c)) * input[c];
        }
        out.push(acc);
    }
    out
}

fn concat_input<S: Scalar>(h: &[S], x: usize, vocab: usize) -> Vec<S> {
    let mut v = h.to_vec();
    let mut onehot = vec![S::of(0.0); vocab];
    onehot[x] = S::of(1.0);
    v.extend(onehot);
    v
}

pub fn dense_lstm_step<S: Scalar>(
    p: &DirectionParams,
    h: &[S],
    c: &[S],
    x: usize,
    vocab: usize,
) -> (Vec<S>, Vec<S>) {
    let input = concat_input(h, x, vocab);
    let f: Vec<S> = dense_affine(&p.forget.w, &p.forget.b, &input)
        .into_iter()
        .map(S::sigmoid)
        .collect();
    let i: Vec<S> = dense_affine(&p.input.w, &p.input.b, &input)
        .into_iter()
        .map(S::sigmoid)
        .collect();
    let o: Vec<S> = dense_affine(&p.output.w, &p.output.b, &input)
        .into_iter()
        .map(S::sigmoid)
        .collect();
    let g: Vec<S> = dense_affine(&p.cell.w, &p.cell.b, &input)
        .into_iter()
        .map(S::tanh)
        .collect();
    let mut c_new = Vec::with_capacity(h.len());
    let mut h_new = Vec::with_capacity(h.len());
    for k in 0..h.len() {
        let ck = f[k] * c[k] + i[k] * g[k];
        c_new.push(ck);
        h_new.push(o[k] * ck.tanh());
    }
    (h_new, c_new)
}

fn dense_lstm<S: Scalar>(
    p: &DirectionParams,
    seq: &[usize],
    hidden: usize,
    vocab: usize,
) -> Vec<S> {
    let mut h = vec![S::of(0.0); hidden];
    let mut c = vec![S::of(0.0); hidden];
    for &x in seq {
        let (hn, cn) = dense_lstm_step(p, &h, &c, x, vocab);
        h = hn;
        c = cn;
    }
    h
}

fn dense_rnn<S: Scalar>(p: &GateParams, seq: &[usize], hidden: usize, vocab: usize) -> Vec<S> {
    let mut h = vec![S::of(0.0); hidden];
    for &x in seq {
        h = dense_affine(&p.w, &p.b, &concat_input(&h, x, vocab))
            .into_iter()
            .map(S::tanh)
            .collect();
    }
    h
}

/// Next-character distribution computed densely in precision `S`.
pub fn dense_probs_in<S: Scalar>(params: &ModelParams, window: &[usize]) -> Vec<S> {
    let (hidden, vocab) = (params.hidden, params.vocab_size);
    let features = match &params.encoder {
        Encoder::Lstm { fwd, bwd } => {
            let mut f = dense_lstm(fwd, window, hidden, vocab);
            if let Some(b) = bwd {
                let rev: Vec<usize> = window.iter().rev().copied().collect();
                f.extend(dense_lstm::<S>(b, &rev, hidden, vocab));
            }
            f
        }
        Encoder::Rnn { cell } => dense_rnn(cell, window, hidden, vocab),
    };
    let logits = dense_affine(&params.proj_w, &params.proj_b, &features);
    let exps: Vec<S> = logits.into_iter().map(S::exp).collect();
    let total = exps.iter().fold(S::of(0.0), |a, &e| a + e);
    exps.into_iter().map(|e| e / total).collect()
}

pub fn dense_probs(params: &ModelParams, window: &[usize]) -> Vec<f64> {
    dense_probs_in::<f64>(params, window)
}

pub fn dense_loss_in<S: Scalar>(params: &ModelParams, window: &[usize], target: usize) -> S {
    -(dense_probs_in::<S>(params, window)[target] + S::of(1e-12)).ln()
}

pub fn dense_loss(params: &ModelParams, window: &[usize], target: usize) -> f64 {
    dense_loss_in::<f64>(params, window, target)
}

/// Params drawn uniformly from (−scale, scale) for every coordinate.
pub fn random_params(
    arch: authorlm::nn::Architecture,
    hidden: usize,
    vocab: usize,
    scale: f64,
    seed: u64,
) -> ModelParams {
    use rand::{Rng, SeedableRng};
    let mut p = ModelParams::zeros(arch, hidden, vocab);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for (_, t) in p.named_tensors_mut() {
        for x in t.data_mut() {
            *x = rng.random_range(-scale..scale);
        }
    }
    p
}

/// Checkpoint around `params` with the vocabulary of `vocab_text`, padding
/// with id 0.
pub fn checkpoint_for(
    params: ModelParams,
    vocab_text: &str,
    seq_len: usize,
) -> authorlm::train::Checkpoint {
    use authorlm::train::{Checkpoint, TrainConfig};
    let vocab = authorlm::corpus::Vocabulary::build(vocab_text).unwrap();
    assert_eq!(
        vocab.size(),
        params.vocab_size,
        "vocabulary and params disagree"
    );
    let config = TrainConfig {
        architecture: params.architecture(),
        hidden: params.hidden,
        seq_len,
        chunk_chars: seq_len + 100,
        ..TrainConfig::default()
    };
    Checkpoint {
        config,
        vocab,
        optim: authorlm::optim::OptimState::new(&params),
        params,
        pad_id: 0,
        provenance: Default::default(),
    }
}
