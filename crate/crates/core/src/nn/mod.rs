//! From-scratch numeric kernel: small dense tensors, activations, LSTM and
//! RNN cells, sequence-to-one encoders with a softmax head, and BPTT.

mod activation;
mod model;
mod params;
mod tensor;

pub use activation::{sigmoid, sigmoid_scalar, softmax, tanh};
pub use model::{
    backward, cross_entropy, forward, loss_and_gradients, lstm_cell_forward, rnn_cell_forward,
    window_loss, CellState, EncoderTrace, ForwardTrace, LstmStep, RnnStep, LOG_EPS,
};
pub use params::{Architecture, DirectionParams, Encoder, GateParams, GradientSet, ModelParams};
pub use tensor::{axpy, dot, Tensor};
