use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Which sequence encoder sits in front of the softmax head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Bilstm,
    LstmUni,
    Rnn,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [
        Architecture::Bilstm,
        Architecture::LstmUni,
        Architecture::Rnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Bilstm => "bilstm",
            Architecture::LstmUni => "lstm_uni",
            Architecture::Rnn => "rnn",
        }
    }

    /// Width of the feature vector fed to the projection.
    pub fn feature_dim(self, hidden: usize) -> usize {
        match self {
            Architecture::Bilstm => 2 * hidden,
            Architecture::LstmUni | Architecture::Rnn => hidden,
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bilstm" => Ok(Architecture::Bilstm),
            "lstm_uni" => Ok(Architecture::LstmUni),
            "rnn" => Ok(Architecture::Rnn),
            _ => Err(Error::Config(format!("unknown architecture {s:?}"))),
        }
    }
}

/// Weights acting on `[h_{t-1}, x_t]` plus bias: `w` is `hidden × (hidden + V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    pub w: Tensor,
    pub b: Tensor,
}

impl GateParams {
    pub fn zeros(hidden: usize, vocab: usize) -> Self {
        Self {
            w: Tensor::zeros(hidden, hidden + vocab),
            b: Tensor::zeros(hidden, 1),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w.rows()
    }

    /// `W·[h, onehot(x)] + b`, using that the input part is a column lookup.
    pub(crate) fn preactivation(&self, h_prev: &[f64], x: usize) -> Vec<f64> {
        let hidden = self.hidden();
        (0..hidden)
            .map(|r| {
                let row = self.w.row(r);
                super::tensor::dot(&row[..hidden], h_prev) + row[hidden + x] + self.b.get(r, 0)
            })
            .collect()
    }

    /// Accumulates the gradient of a preactivation with upstream `dz`.
    pub(crate) fn accumulate(&mut self, dz: &[f64], h_prev: &[f64], x: usize) {
        let hidden = self.hidden();
        for (r, &d) in dz.iter().enumerate() {
            let row = self.w.row_mut(r);
            super::tensor::axpy(d, h_prev, &mut row[..hidden]);
            row[hidden + x] += d;
        }
        for (b, &d) in self.b.data_mut().iter_mut().zip(dz) {
            *b += d;
        }
    }

    /// `out += W_hᵀ · dz`, the recurrent part of the input gradient.
    pub(crate) fn backprop_hidden(&self, dz: &[f64], out: &mut [f64]) {
        let hidden = self.hidden();
        for (r, &d) in dz.iter().enumerate() {
            super::tensor::axpy(d, &self.w.row(r)[..hidden], out);
        }
    }
}

/// The four gates of one LSTM direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionParams {
    pub forget: GateParams,
    pub input: GateParams,
    pub output: GateParams,
    pub cell: GateParams,
}

impl DirectionParams {
    pub fn zeros(hidden: usize, vocab: usize) -> Self {
        Self {
            forget: GateParams::zeros(hidden, vocab),
            input: GateParams::zeros(hidden, vocab),
            output: GateParams::zeros(hidden, vocab),
            cell: GateParams::zeros(hidden, vocab),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Encoder {
    Lstm {
        fwd: DirectionParams,
        bwd: Option<DirectionParams>,
    },
    Rnn {
        cell: GateParams,
    },
}

/// Every trainable tensor of a model: encoder plus the `V × D` softmax head.
///
/// The same type carries gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub hidden: usize,
    pub vocab_size: usize,
    pub encoder: Encoder,
    pub proj_w: Tensor,
    pub proj_b: Tensor,
}

/// Gradients are shape-congruent parameter sets.
pub type GradientSet = ModelParams;

impl ModelParams {
    pub fn zeros(arch: Architecture, hidden: usize, vocab_size: usize) -> Self {
        let encoder = match arch {
            Architecture::Bilstm => Encoder::Lstm {
                fwd: DirectionParams::zeros(hidden, vocab_size),
                bwd: Some(DirectionParams::zeros(hidden, vocab_size)),
            },
            Architecture::LstmUni => Encoder::Lstm {
                fwd: DirectionParams::zeros(hidden, vocab_size),
                bwd: None,
            },
            Architecture::Rnn => Encoder::Rnn {
                cell: GateParams::zeros(hidden, vocab_size),
            },
        };
        Self {
            hidden,
            vocab_size,
            encoder,
            proj_w: Tensor::zeros(vocab_size, arch.feature_dim(hidden)),
            proj_b: Tensor::zeros(vocab_size, 1),
        }
    }

    /// Uniform(−k, k) weights with k = 1/√(hidden + V); biases zero except the
    /// forget gate, which starts at 1.
    pub fn init(arch: Architecture, hidden: usize, vocab_size: usize, seed: u64) -> Self {
        let mut p = Self::zeros(arch, hidden, vocab_size);
        let k = 1.0 / ((hidden + vocab_size) as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, t) in p.named_tensors_mut() {
            if name.ends_with(".w") {
                t.data_mut()
                    .iter_mut()
                    .for_each(|x| *x = rng.random_range(-k..k));
            } else if name.ends_with("forget.b") {
                t.fill(1.0);
            }
        }
        p
    }

    pub fn architecture(&self) -> Architecture {
        match &self.encoder {
            Encoder::Lstm { bwd: Some(_), .. } => Architecture::Bilstm,
            Encoder::Lstm { bwd: None, .. } => Architecture::LstmUni,
            Encoder::Rnn { .. } => Architecture::Rnn,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.architecture(), self.hidden, self.vocab_size)
    }

    /// Tensors in canonical (checkpoint manifest) order.
    pub fn named_tensors(&self) -> Vec<(&'static str, &Tensor)> {
        let mut out = Vec::new();
        match &self.encoder {
            Encoder::Lstm { fwd, bwd } => {
                push_direction(&mut out, fwd, FWD_NAMES);
                if let Some(b) = bwd {
                    push_direction(&mut out, b, BWD_NAMES);
                }
            }
            Encoder::Rnn { cell } => {
                out.push(("rnn.w", &cell.w));
                out.push(("rnn.b", &cell.b));
            }
        }
        out.push(("proj.w", &self.proj_w));
        out.push(("proj.b", &self.proj_b));
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        let mut out = Vec::new();
        match &mut self.encoder {
            Encoder::Lstm { fwd, bwd } => {
                push_direction_mut(&mut out, fwd, FWD_NAMES);
                if let Some(b) = bwd {
                    push_direction_mut(&mut out, b, BWD_NAMES);
                }
            }
            Encoder::Rnn { cell } => {
                out.push(("rnn.w", &mut cell.w));
                out.push(("rnn.b", &mut cell.b));
            }
        }
        out.push(("proj.w", &mut self.proj_w));
        out.push(("proj.b", &mut self.proj_b));
        out
    }

    pub fn num_params(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.named_tensors()
            .iter()
            .map(|(_, t)| t.sum_sq())
            .sum::<f64>()
            .sqrt()
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.named_tensors()
            .into_iter()
            .find(|(_, t)| !t.is_finite())
            .map(|(n, _)| n)
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.named_tensors_mut() {
            t.data_mut().iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn check_congruent(&self, other: &ModelParams) -> Result<()> {
        let a = self.named_tensors();
        let b = other.named_tensors();
        let same = a.len() == b.len()
            && a.iter()
                .zip(&b)
                .all(|((na, ta), (nb, tb))| na == nb && ta.shape() == tb.shape());
        if same {
            Ok(())
        } else {
            Err(Error::Shape("parameter sets are not congruent".into()))
        }
    }
}

const FWD_NAMES: [&str; 8] = [
    "fwd.forget.w",
    "fwd.forget.b",
    "fwd.input.w",
    "fwd.input.b",
    "fwd.output.w",
    "fwd.output.b",
    "fwd.cell.w",
    "fwd.cell.b",
];
const BWD_NAMES: [&str; 8] = [
    "bwd.forget.w",
    "bwd.forget.b",
    "bwd.input.w",
    "bwd.input.b",
    "bwd.output.w",
    "bwd.output.b",
    "bwd.cell.w",
    "bwd.cell.b",
];

fn push_direction<'a>(
    out: &mut Vec<(&'static str, &'a Tensor)>,
    d: &'a DirectionParams,
    names: [&'static str; 8],
) {
    let gates = [&d.forget, &d.input, &d.output, &d.cell];
    for (k, g) in gates.into_iter().enumerate() {
        out.push((names[2 * k], &g.w));
        out.push((names[2 * k + 1], &g.b));
    }
}

fn push_direction_mut<'a>(
    out: &mut Vec<(&'static str, &'a mut Tensor)>,
    d: &'a mut DirectionParams,
    names: [&'static str; 8],
) {
    let DirectionParams {
        forget,
        input,
        output,
        cell,
    } = d;
    for (k, g) in [forget, input, output, cell].into_iter().enumerate() {
        out.push((names[2 * k], &mut g.w));
        out.push((names[2 * k + 1], &mut g.b));
    }
}
