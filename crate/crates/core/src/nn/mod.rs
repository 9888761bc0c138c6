//! Layers and losses with hand-written backward passes.

pub mod activation;
pub mod attention;
pub mod dropout;
pub mod linear;
pub mod loss;
pub mod lstm;

pub use activation::{log_softmax_slice, softmax, softmax_slice};
pub use attention::{bilinear_attention, AttentionCache, BilinearAttention};
pub use dropout::{dropout_mask, SeqDropout};
pub use linear::{affine, Affine};
pub use loss::{multilabel_bce_loss, tag_xent_loss};
pub use lstm::{bilstm_encode, lstm_step, BiLstm, BiLstmCache, LstmCell};
