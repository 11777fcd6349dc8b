//! LSTM / RNN cells, sequence-to-one encoders and exact backpropagation
//! through time.

use super::activation::{sigmoid_scalar, softmax};
use super::params::{DirectionParams, Encoder, GateParams, GradientSet, ModelParams};
use crate::error::{Error, Result};

/// Added to the target probability before taking the log.
pub const LOG_EPS: f64 = 1e-12;

/// Hidden state `h` and cell state `c` of one LSTM direction.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl CellState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Everything one LSTM step produced, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep {
    pub x: usize,
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub o: Vec<f64>,
    pub cand: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnStep {
    pub x: usize,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EncoderTrace {
    Lstm {
        fwd: Vec<LstmStep>,
        /// Steps of the reverse direction in processing order (last character first).
        bwd: Option<Vec<LstmStep>>,
    },
    Rnn(Vec<RnnStep>),
}

/// Forward activations for one window plus the predictive distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub encoder: EncoderTrace,
    pub features: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        match &self.encoder {
            EncoderTrace::Lstm { fwd, .. } => fwd.len(),
            EncoderTrace::Rnn(steps) => steps.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_input(x: usize, vocab: usize) -> Result<()> {
    if x >= vocab {
        return Err(Error::IdOutOfRange { id: x, size: vocab });
    }
    Ok(())
}

/// One LSTM step on input id `x`:
///
/// ```text
/// f = σ(W_f·[h, x] + b_f)    i = σ(W_i·[h, x] + b_i)    o = σ(W_o·[h, x] + b_o)
/// c̃ = tanh(W_c·[h, x] + b_c)
/// c' = f ⊙ c + i ⊙ c̃         h' = o ⊙ tanh(c')
/// ```
pub fn lstm_cell_forward(
    x: usize,
    prev: &CellState,
    p: &DirectionParams,
) -> Result<(CellState, LstmStep)> {
    let hidden = p.forget.hidden();
    let vocab = p.forget.w.cols() - hidden;
    if prev.h.len() != hidden || prev.c.len() != hidden {
        return Err(Error::Shape(format!(
            "state has ({}, {}) components, cell expects {hidden}",
            prev.h.len(),
            prev.c.len()
        )));
    }
    check_input(x, vocab)?;
    let f: Vec<f64> = p
        .forget
        .preactivation(&prev.h, x)
        .into_iter()
        .map(sigmoid_scalar)
        .collect();
    let i: Vec<f64> = p
        .input
        .preactivation(&prev.h, x)
        .into_iter()
        .map(sigmoid_scalar)
        .collect();
    let o: Vec<f64> = p
        .output
        .preactivation(&prev.h, x)
        .into_iter()
        .map(sigmoid_scalar)
        .collect();
    let cand: Vec<f64> = p
        .cell
        .preactivation(&prev.h, x)
        .into_iter()
        .map(f64::tanh)
        .collect();
    let c: Vec<f64> = (0..hidden)
        .map(|k| f[k] * prev.c[k] + i[k] * cand[k])
        .collect();
    let h: Vec<f64> = (0..hidden).map(|k| o[k] * c[k].tanh()).collect();
    let state = CellState {
        h: h.clone(),
        c: c.clone(),
    };
    Ok((
        state,
        LstmStep {
            x,
            f,
            i,
            o,
            cand,
            c,
            h,
        },
    ))
}

/// `h' = tanh(W·[h, x] + b)`.
pub fn rnn_cell_forward(x: usize, h_prev: &[f64], p: &GateParams) -> Result<Vec<f64>> {
    let hidden = p.hidden();
    if h_prev.len() != hidden {
        return Err(Error::Shape(format!(
            "state has {} components, cell expects {hidden}",
            h_prev.len()
        )));
    }
    check_input(x, p.w.cols() - hidden)?;
    Ok(p.preactivation(h_prev, x)
        .into_iter()
        .map(f64::tanh)
        .collect())
}

fn run_lstm<'a>(
    ids: impl Iterator<Item = &'a usize>,
    p: &DirectionParams,
    hidden: usize,
) -> Result<Vec<LstmStep>> {
    let mut state = CellState::zeros(hidden);
    let mut steps = Vec::new();
    for &x in ids {
        let (next, rec) = lstm_cell_forward(x, &state, p)?;
        state = next;
        steps.push(rec);
    }
    Ok(steps)
}

/// Sequence-to-one forward pass over `window`.
///
/// The forward direction reads the window left to right; the reverse
/// direction (Bi-LSTM only) reads it right to left. Their final hidden states
/// are concatenated `[h_fwd, h_bwd]` and projected to a softmax over the
/// vocabulary, which predicts the character following the window.
pub fn forward(params: &ModelParams, window: &[usize]) -> Result<ForwardTrace> {
    if window.is_empty() {
        return Err(Error::Shape("empty window".into()));
    }
    let hidden = params.hidden;
    let (encoder, features) = match &params.encoder {
        Encoder::Lstm { fwd, bwd } => {
            let fsteps = run_lstm(window.iter(), fwd, hidden)?;
            let mut features = fsteps.last().map(|s| s.h.clone()).unwrap_or_default();
            let bsteps = match bwd {
                Some(b) => {
                    let steps = run_lstm(window.iter().rev(), b, hidden)?;
                    features.extend_from_slice(&steps.last().expect("non-empty window").h);
                    Some(steps)
                }
                None => None,
            };
            (
                EncoderTrace::Lstm {
                    fwd: fsteps,
                    bwd: bsteps,
                },
                features,
            )
        }
        Encoder::Rnn { cell } => {
            let mut h = vec![0.0; hidden];
            let mut steps = Vec::with_capacity(window.len());
            for &x in window {
                h = rnn_cell_forward(x, &h, cell)?;
                steps.push(RnnStep { x, h: h.clone() });
            }
            (EncoderTrace::Rnn(steps), h)
        }
    };
    let mut logits = params.proj_w.matvec(&features);
    for (z, b) in logits.iter_mut().zip(params.proj_b.data()) {
        *z += b;
    }
    let probs = softmax(&logits);
    Ok(ForwardTrace {
        encoder,
        features,
        logits,
        probs,
    })
}

/// `−ln(p[target] + ε)`.
pub fn cross_entropy(probs: &[f64], target: usize) -> Result<f64> {
    let p = probs.get(target).ok_or(Error::IdOutOfRange {
        id: target,
        size: probs.len(),
    })?;
    Ok(-(p + LOG_EPS).ln())
}

fn lstm_direction_backward(
    steps: &[LstmStep],
    p: &DirectionParams,
    g: &mut DirectionParams,
    dh_last: &[f64],
) {
    let hidden = dh_last.len();
    let zeros = vec![0.0; hidden];
    let mut dh = dh_last.to_vec();
    let mut dc = vec![0.0; hidden];
    let mut dz_f = vec![0.0; hidden];
    let mut dz_i = vec![0.0; hidden];
    let mut dz_o = vec![0.0; hidden];
    let mut dz_c = vec![0.0; hidden];
    for t in (0..steps.len()).rev() {
        let s = &steps[t];
        let (h_prev, c_prev) = if t > 0 {
            (&steps[t - 1].h[..], &steps[t - 1].c[..])
        } else {
            (&zeros[..], &zeros[..])
        };
        for k in 0..hidden {
            let tc = s.c[k].tanh();
            dz_o[k] = dh[k] * tc * s.o[k] * (1.0 - s.o[k]);
            dc[k] += dh[k] * s.o[k] * (1.0 - tc * tc);
            dz_f[k] = dc[k] * c_prev[k] * s.f[k] * (1.0 - s.f[k]);
            dz_i[k] = dc[k] * s.cand[k] * s.i[k] * (1.0 - s.i[k]);
            dz_c[k] = dc[k] * s.i[k] * (1.0 - s.cand[k] * s.cand[k]);
        }
        g.forget.accumulate(&dz_f, h_prev, s.x);
        g.input.accumulate(&dz_i, h_prev, s.x);
        g.output.accumulate(&dz_o, h_prev, s.x);
        g.cell.accumulate(&dz_c, h_prev, s.x);

        dh.iter_mut().for_each(|v| *v = 0.0);
        p.forget.backprop_hidden(&dz_f, &mut dh);
        p.input.backprop_hidden(&dz_i, &mut dh);
        p.output.backprop_hidden(&dz_o, &mut dh);
        p.cell.backprop_hidden(&dz_c, &mut dh);
        for k in 0..hidden {
            dc[k] *= s.f[k];
        }
    }
}

fn rnn_backward(steps: &[RnnStep], p: &GateParams, g: &mut GateParams, dh_last: &[f64]) {
    let hidden = dh_last.len();
    let zeros = vec![0.0; hidden];
    let mut dh = dh_last.to_vec();
    let mut dz = vec![0.0; hidden];
    for t in (0..steps.len()).rev() {
        let s = &steps[t];
        let h_prev = if t > 0 {
            &steps[t - 1].h[..]
        } else {
            &zeros[..]
        };
        for k in 0..hidden {
            dz[k] = dh[k] * (1.0 - s.h[k] * s.h[k]);
        }
        g.accumulate(&dz, h_prev, s.x);
        dh.iter_mut().for_each(|v| *v = 0.0);
        p.backprop_hidden(&dz, &mut dh);
    }
}

/// Exact gradient of `cross_entropy(trace.probs, target)` (without the ε
/// floor) with respect to every parameter.
pub fn backward(trace: &ForwardTrace, target: usize, params: &ModelParams) -> Result<GradientSet> {
    if target >= params.vocab_size {
        return Err(Error::IdOutOfRange {
            id: target,
            size: params.vocab_size,
        });
    }
    let mut grads = params.zeros_like();
    let mut dlogits = trace.probs.clone();
    dlogits[target] -= 1.0;
    grads.proj_w.add_outer(&dlogits, &trace.features);
    grads.proj_b.data_mut().copy_from_slice(&dlogits);
    let mut dfeat = vec![0.0; trace.features.len()];
    params.proj_w.add_matvec_t(&dlogits, &mut dfeat);

    let hidden = params.hidden;
    match (&trace.encoder, &params.encoder, &mut grads.encoder) {
        (
            EncoderTrace::Lstm { fwd: fs, bwd: bs },
            Encoder::Lstm { fwd, bwd },
            Encoder::Lstm { fwd: gf, bwd: gb },
        ) => {
            lstm_direction_backward(fs, fwd, gf, &dfeat[..hidden]);
            match (bs, bwd, gb) {
                (Some(bs), Some(bwd), Some(gb)) => {
                    lstm_direction_backward(bs, bwd, gb, &dfeat[hidden..])
                }
                (None, None, None) => {}
                _ => {
                    return Err(Error::Shape(
                        "trace does not match parameter architecture".into(),
                    ))
                }
            }
        }
        (EncoderTrace::Rnn(steps), Encoder::Rnn { cell }, Encoder::Rnn { cell: gc }) => {
            rnn_backward(steps, cell, gc, &dfeat);
        }
        _ => {
            return Err(Error::Shape(
                "trace does not match parameter architecture".into(),
            ))
        }
    }
    Ok(grads)
}

/// Forward, loss and gradients for one training pair.
pub fn loss_and_gradients(
    params: &ModelParams,
    window: &[usize],
    target: usize,
) -> Result<(f64, GradientSet)> {
    let trace = forward(params, window)?;
    let loss = cross_entropy(&trace.probs, target)?;
    let grads = backward(&trace, target, params)?;
    Ok((loss, grads))
}

/// Loss only; used by finite-difference checks and evaluation.
pub fn window_loss(params: &ModelParams, window: &[usize], target: usize) -> Result<f64> {
    let trace = forward(params, window)?;
    cross_entropy(&trace.probs, target)
}
