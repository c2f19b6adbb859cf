//! Knowledge distillation: softened probabilities, the KL distillation
//! loss, the combined objective and a small deterministic trainer.

mod loss;
mod net;
mod train;

pub use loss::{bce_with_logits, kd_loss, kd_loss_per_bit, kl_divergence, sigmoid, softened_probs, total_loss};
pub use net::{backward, batch_loss, ForwardCache, LogitLoss, LossParts, Net, NetSpec};
pub use train::{
    loss_history_from_csv, loss_history_to_csv, train, Batch, BatchSource, Checkpoint,
    DistillConfig, LossRecord, Objective, TrainConfig, TrainRun,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KdError {
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("alpha must be non-negative and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("logit vector is empty")]
    EmptyLogits,
    #[error("non-finite logit {0}")]
    NonFiniteLogit(f64),
    #[error("vector lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("`{name}` does not sum to 1 (sum = {sum})")]
    NotADistribution { name: &'static str, sum: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training diverged at step {step}: non-finite loss")]
    Diverged { step: usize },
    #[error("bad checkpoint: {message}")]
    BadCheckpoint { message: String },
    #[error("bad loss CSV at line {line}: {message}")]
    BadLossCsv { line: usize, message: String },
}
