//! Per-method undercomplete autoencoders.
//!
//! Each channel gets its own [`CompressorModel`]. The encoder widens the
//! channel count with two strided convolutions, then two dense layers bring
//! the flattened features down to a code of length `d`. The decoder is a
//! dense stack from `d` back to the method's output length. Every compressor
//! in one instance shares `d`, so the codes can be concatenated.

use std::path::Path;

use serde_json::json;
use thiserror::Error;

use crate::nn::checkpoint::{self, CheckpointError};
use crate::nn::loss::mse_cosine;
use crate::nn::{epoch_order, AutoencoderTrainer, LayerSpec, Network, NnError, Shape, TrainConfig};
use crate::rng::stage_rng;
use crate::signal::{MethodId, TransformedSequence};

/// Default code length.
pub const DEFAULT_CODE_LENGTH: usize = 128;
/// Width of the hidden dense layers on both sides of the code.
pub const HIDDEN_WIDTH: usize = 256;

#[derive(Debug, Error)]
pub enum CompressorError {
    #[error("code length {code_length} must be smaller than the input length {input_length}")]
    NotUndercomplete { code_length: usize, input_length: usize },
    #[error("input length {0} is too short for the convolutional encoder")]
    TooShort(usize),
    #[error("a {found} sequence was given to the {expected} compressor")]
    MethodMismatch { expected: MethodId, found: MethodId },
    #[error("expected a vector of length {expected}, found {found}")]
    Length { expected: usize, found: usize },
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("training diverged: non-finite loss in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("checkpoint does not describe a compressor: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// `v_x`: one channel's code.
#[derive(Clone, Debug, PartialEq)]
pub struct Code {
    pub method_id: MethodId,
    pub values: Vec<f32>,
}

impl AsRef<[f32]> for Code {
    fn as_ref(&self) -> &[f32] {
        &self.values
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompressorModel {
    method_id: MethodId,
    encoder: Network<f32>,
    decoder: Network<f32>,
    input_length: usize,
    code_length: usize,
    seed: u64,
    epochs: usize,
}

/// Encoder layer stack for an input of length `l` and code length `d`.
pub fn encoder_specs(l: usize, d: usize) -> Result<Vec<LayerSpec>, CompressorError> {
    let convs = [
        LayerSpec::Conv1d {
            in_channels: 1,
            out_channels: 16,
            kernel: 7,
            stride: 2,
        },
        LayerSpec::Relu,
        LayerSpec::Conv1d {
            in_channels: 16,
            out_channels: 32,
            kernel: 5,
            stride: 2,
        },
        LayerSpec::Relu,
    ];
    let mut shape = Shape {
        channels: 1,
        length: l,
    };
    for s in &convs {
        shape = s.output_shape(shape).map_err(|_| CompressorError::TooShort(l))?;
    }
    let mut specs = convs.to_vec();
    specs.extend([
        LayerSpec::Linear {
            inputs: shape.features(),
            outputs: HIDDEN_WIDTH,
        },
        LayerSpec::Relu,
        LayerSpec::Linear {
            inputs: HIDDEN_WIDTH,
            outputs: d,
        },
    ]);
    Ok(specs)
}

pub fn decoder_specs(d: usize, l: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Linear {
            inputs: d,
            outputs: HIDDEN_WIDTH,
        },
        LayerSpec::Relu,
        LayerSpec::Linear {
            inputs: HIDDEN_WIDTH,
            outputs: l,
        },
    ]
}

fn stem(method_id: &MethodId) -> String {
    format!("compressor_{}", method_id.slug())
}

impl CompressorModel {
    /// A freshly initialised compressor. Rejects `code_length >= input_length`.
    pub fn new(method_id: MethodId, input_length: usize, code_length: usize, seed: u64) -> Result<Self, CompressorError> {
        if code_length == 0 || code_length >= input_length {
            return Err(CompressorError::NotUndercomplete {
                code_length,
                input_length,
            });
        }
        let mut rng = stage_rng(seed, &format!("compressor/{}/init", method_id.slug()));
        let enc_input = Shape {
            channels: 1,
            length: input_length,
        };
        let encoder = Network::new(enc_input, &encoder_specs(input_length, code_length)?, &mut rng)?;
        let decoder = Network::new(Shape::flat(code_length), &decoder_specs(code_length, input_length), &mut rng)?;
        Ok(Self {
            method_id,
            encoder,
            decoder,
            input_length,
            code_length,
            seed,
            epochs: 0,
        })
    }

    pub fn method_id(&self) -> &MethodId {
        &self.method_id
    }

    pub fn input_length(&self) -> usize {
        self.input_length
    }

    pub fn code_length(&self) -> usize {
        self.code_length
    }

    pub fn encoder(&self) -> &Network<f32> {
        &self.encoder
    }

    pub fn decoder(&self) -> &Network<f32> {
        &self.decoder
    }

    /// Total epochs this model has been trained for.
    pub fn epochs(&self) -> usize {
        self.epochs
    }

    fn check_len(&self, found: usize, expected: usize) -> Result<(), CompressorError> {
        if found != expected {
            return Err(CompressorError::Length { expected, found });
        }
        Ok(())
    }

    pub fn encode(&self, t: &TransformedSequence) -> Result<Code, CompressorError> {
        if t.method_id != self.method_id {
            return Err(CompressorError::MethodMismatch {
                expected: self.method_id.clone(),
                found: t.method_id.clone(),
            });
        }
        Ok(Code {
            method_id: self.method_id.clone(),
            values: self.encode_values(&t.values)?,
        })
    }

    pub fn encode_values(&self, values: &[f32]) -> Result<Vec<f32>, CompressorError> {
        self.check_len(values.len(), self.input_length)?;
        Ok(self.encoder.forward_batch(values, 1))
    }

    /// Codes for a row-major `[batch × L']` buffer, `[batch × d]` out.
    pub fn encode_batch(&self, values: &[f32], batch: usize) -> Result<Vec<f32>, CompressorError> {
        self.check_len(values.len(), batch * self.input_length)?;
        Ok(self.encoder.forward_batch(values, batch))
    }

    pub fn decode(&self, code: &[f32]) -> Result<Vec<f32>, CompressorError> {
        self.check_len(code.len(), self.code_length)?;
        Ok(self.decoder.forward_batch(code, 1))
    }

    /// Mean reconstruction loss of `decode(encode(t))` over `data`.
    pub fn reconstruction_loss(&self, data: &[TransformedSequence]) -> Result<f64, CompressorError> {
        if data.is_empty() {
            return Err(CompressorError::EmptyDataset);
        }
        let mut total = 0.0;
        for t in data {
            let y = self.decode(&self.encode(t)?.values)?;
            total += mse_cosine(&y, &t.values).0;
        }
        Ok(total / data.len() as f64)
    }

    pub fn save(&self, dir: &Path) -> Result<(), CompressorError> {
        let meta = json!({
            "method_id": self.method_id,
            "input_length": self.input_length,
            "code_length": self.code_length,
        });
        checkpoint::save(
            dir,
            &stem(&self.method_id),
            "compressor",
            self.seed,
            self.epochs,
            meta,
            &[("encoder", &self.encoder), ("decoder", &self.decoder)],
        )?;
        Ok(())
    }

    pub fn load(dir: &Path, method_id: &MethodId) -> Result<Self, CompressorError> {
        let (manifest, mut nets) = checkpoint::load(dir, &stem(method_id))?;
        let bad = |m: &str| CompressorError::BadCheckpoint(m.to_string());
        if manifest.role != "compressor" {
            return Err(bad("role is not \"compressor\""));
        }
        let meta = &manifest.metadata;
        let stored: MethodId = serde_json::from_value(meta["method_id"].clone()).map_err(|_| bad("method_id"))?;
        if &stored != method_id {
            return Err(CompressorError::MethodMismatch {
                expected: method_id.clone(),
                found: stored,
            });
        }
        let as_len = |k: &str| meta[k].as_u64().map(|v| v as usize).ok_or_else(|| bad(k));
        let input_length = as_len("input_length")?;
        let code_length = as_len("code_length")?;
        let encoder = checkpoint::take_network(&mut nets, "encoder")?;
        let decoder = checkpoint::take_network(&mut nets, "decoder")?;
        if encoder.input_shape().features() != input_length
            || encoder.output_shape().features() != code_length
            || decoder.output_shape().features() != input_length
        {
            return Err(bad("network shapes disagree with the recorded lengths"));
        }
        Ok(Self {
            method_id: stored,
            encoder,
            decoder,
            input_length,
            code_length,
            seed: manifest.seed,
            epochs: manifest.epochs,
        })
    }
}

/// Trains on `data` in place and returns the mean loss of every epoch.
///
/// Sample order comes from `cfg.seed`, so identical seeds and data give
/// bitwise-identical parameters.
pub fn train_compressor(
    model: &mut CompressorModel,
    data: &[TransformedSequence],
    cfg: &TrainConfig,
) -> Result<Vec<f64>, CompressorError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(CompressorError::EmptyDataset);
    }
    for t in data {
        if t.method_id != model.method_id {
            return Err(CompressorError::MethodMismatch {
                expected: model.method_id.clone(),
                found: t.method_id.clone(),
            });
        }
        model.check_len(t.values.len(), model.input_length)?;
    }
    let width = model.input_length;
    let mut rng = stage_rng(cfg.seed, &format!("compressor/{}/order", model.method_id.slug()));
    let mut trainer = AutoencoderTrainer::new(&model.encoder, &model.decoder, cfg.learning_rate);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut buf = Vec::with_capacity(cfg.batch_size * width);
    for epoch in 0..cfg.epochs {
        let order = epoch_order(data.len(), &mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            buf.clear();
            for &i in chunk {
                buf.extend_from_slice(&data[i].values);
            }
            let loss = trainer.step(&mut model.encoder, &mut model.decoder, &buf, &buf, chunk.len());
            total += loss * chunk.len() as f64;
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() {
            return Err(CompressorError::Diverged { epoch: epoch + 1 });
        }
        history.push(mean);
        model.epochs += 1;
    }
    Ok(history)
}
