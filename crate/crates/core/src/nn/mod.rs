//! Minimal differentiable layer stack: dense and 1-D convolution layers,
//! ReLU, the MSE+cosine reconstruction loss, Adam, and a finite-difference
//! gradient checker.
//!
//! Parameters are `f32`; loss reductions and optimizer bias corrections run
//! in `f64`.

mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod loss;
mod network;
mod scalar;
mod tensor;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{adam_step, AdamState};
pub use gradcheck::gradcheck;
pub use loss::{mse_cosine_loss, COSINE_EPS};
pub use network::{Gradients, LayerSpec, Network, Shape, Trace};
pub use scalar::Scalar;
pub use tensor::Tensor;
pub(crate) use train::AutoencoderTrainer;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("invalid shape {0}")]
    InvalidShape(String),
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("invalid training configuration: {0}")]
    Config(String),
}

/// Optimisation settings shared by every training loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Compressor defaults: 50 epochs, lr 0.001, batch 64.
    pub fn compressor_default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 1e-3,
            batch_size: 64,
            seed: 0,
        }
    }

    /// Mixer defaults: 100 epochs, lr 0.001, batch 128.
    pub fn mixer_default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 1e-3,
            batch_size: 128,
            seed: 0,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    /// `epochs == 0` is accepted and means "leave the model untouched".
    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(NnError::Config(format!("learning rate {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(NnError::Config("batch size 0".into()));
        }
        Ok(())
    }
}

/// Deterministic epoch order: a seeded shuffle of `0..n`.
pub(crate) fn epoch_order<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}
