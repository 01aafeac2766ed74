//! Differentiable building blocks with hand-written reverse-mode gradients.

pub mod adam;
pub mod biaffine;
pub mod embed;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod lstm;
pub mod params;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use biaffine::{biaffine_scores, BiaffineParams};
pub use embed::{EmbeddingTables, Vocab, Vocabularies};
pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::{Linear, Mlp};
pub use loss::{head_cross_entropy, head_probabilities, softmax_cross_entropy};
pub use lstm::{bilstm_forward, lstm_forward, BiLstm, LstmParams, LstmState};
pub use params::Params;
pub use tensor::Tensor;
