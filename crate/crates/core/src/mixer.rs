//! The masked denoising autoencoder over concatenated channel codes.
//!
//! During training every presentation of a concatenated code `V` is
//! corrupted afresh: 80% of the time a global mask zeroes exactly
//! `round(0.10 · n·d)` positions chosen uniformly without replacement, and
//! 20% of the time each channel is closed with probability ½ (a draw that
//! closes every channel is rejected and redrawn). The network learns to
//! reconstruct the clean `V`. At inference only the channel mask is applied
//! and the encoder output is the embedding.

use std::cell::Cell;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::json;
use thiserror::Error;

use crate::nn::checkpoint::{self, CheckpointError};
use crate::nn::{epoch_order, AutoencoderTrainer, LayerSpec, Network, NnError, Shape, TrainConfig};
use crate::rng::stage_rng;

/// Fraction of positions zeroed by the global mask.
pub const GLOBAL_MASK_FRACTION: f64 = 0.10;
/// Probability that a training presentation uses the global mask.
pub const GLOBAL_POLICY_PROBABILITY: f64 = 0.8;
/// Per-channel closing probability under the channel mask policy.
pub const CHANNEL_CLOSE_PROBABILITY: f64 = 0.5;
/// Hidden width multiplier: `n·d → 4·n·d → n·d`.
pub const EXPANSION: usize = 4;

#[derive(Debug, Error)]
pub enum MixerError {
    #[error("expected {expected} channel codes, found {found}")]
    ChannelCount { expected: usize, found: usize },
    #[error("code {index} has length {found}, expected {expected}")]
    CodeLength { index: usize, expected: usize, found: usize },
    #[error("a mask must open at least one channel")]
    EmptyMask,
    #[error("invalid mask string {0:?}: use one 'T' or 'F' per channel")]
    MaskSyntax(String),
    #[error("mask covers {found} channels, the model has {expected}")]
    MaskWidth { expected: usize, found: usize },
    #[error("expected a vector of length {expected}, found {found}")]
    Length { expected: usize, found: usize },
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("training diverged: non-finite loss in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("checkpoint does not describe a mixer: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// `V = v¹ ⊕ … ⊕ vⁿ`; channel `i` occupies `[i·d, (i+1)·d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcatCode {
    values: Vec<f32>,
    code_length: usize,
}

impl ConcatCode {
    pub fn new(values: Vec<f32>, channel_count: usize, code_length: usize) -> Result<Self, MixerError> {
        let expected = channel_count * code_length;
        if channel_count == 0 || code_length == 0 || values.len() != expected {
            return Err(MixerError::Length {
                expected,
                found: values.len(),
            });
        }
        Ok(Self { values, code_length })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn channel_count(&self) -> usize {
        self.values.len() / self.code_length
    }

    pub fn code_length(&self) -> usize {
        self.code_length
    }

    pub fn channel(&self, i: usize) -> &[f32] {
        &self.values[i * self.code_length..(i + 1) * self.code_length]
    }
}

/// Concatenates codes in the order given, which must be registry order.
pub fn concat_codes<C: AsRef<[f32]>>(codes: &[C]) -> Result<ConcatCode, MixerError> {
    let Some(first) = codes.first() else {
        return Err(MixerError::ChannelCount { expected: 1, found: 0 });
    };
    let d = first.as_ref().len();
    let mut values = Vec::with_capacity(codes.len() * d);
    for (index, c) in codes.iter().enumerate() {
        let c = c.as_ref();
        if c.len() != d || d == 0 {
            return Err(MixerError::CodeLength {
                index,
                expected: d,
                found: c.len(),
            });
        }
        values.extend_from_slice(c);
    }
    Ok(ConcatCode { values, code_length: d })
}

/// Which channels feed the Mixer. The string form has one `T` (open) or
/// `F` (closed) per channel, first registered channel first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MaskConfig {
    open: Vec<bool>,
}

impl MaskConfig {
    pub fn new(open: Vec<bool>) -> Result<Self, MixerError> {
        if !open.iter().any(|&o| o) {
            return Err(MixerError::EmptyMask);
        }
        Ok(Self { open })
    }

    pub fn all_open(n: usize) -> Self {
        assert!(n > 0, "a mask needs at least one channel");
        Self { open: vec![true; n] }
    }

    pub fn open(&self) -> &[bool] {
        &self.open
    }

    pub fn is_open(&self, channel: usize) -> bool {
        self.open[channel]
    }

    pub fn len(&self) -> usize {
        self.open.len()
    }

    pub fn is_empty(&self) -> bool {
        self.open.is_empty()
    }

    pub fn open_count(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }
}

impl fmt::Display for MaskConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &o in &self.open {
            f.write_str(if o { "T" } else { "F" })?;
        }
        Ok(())
    }
}

impl FromStr for MaskConfig {
    type Err = MixerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let open = s
            .chars()
            .map(|c| match c {
                'T' => Ok(true),
                'F' => Ok(false),
                _ => Err(MixerError::MaskSyntax(s.into())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if open.is_empty() {
            return Err(MixerError::MaskSyntax(s.into()));
        }
        Self::new(open)
    }
}

impl Serialize for MaskConfig {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MaskConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

thread_local! {
    static GLOBAL_MASK_CALLS: Cell<u64> = const { Cell::new(0) };
}

/// How many times [`apply_global_mask`] has run on this thread.
pub fn global_mask_invocations() -> u64 {
    GLOBAL_MASK_CALLS.with(Cell::get)
}

/// Number of positions the global mask zeroes in a vector of length `len`.
pub fn global_mask_count(len: usize) -> usize {
    (GLOBAL_MASK_FRACTION * len as f64).round() as usize
}

pub fn apply_global_mask<R: Rng + ?Sized>(v: &ConcatCode, rng: &mut R) -> Vec<f32> {
    GLOBAL_MASK_CALLS.with(|c| c.set(c.get() + 1));
    let mut out = v.values.clone();
    for i in rand::seq::index::sample(rng, out.len(), global_mask_count(out.len())) {
        out[i] = 0.0;
    }
    out
}

pub fn apply_channel_mask(v: &ConcatCode, mask: &MaskConfig) -> Result<Vec<f32>, MixerError> {
    if mask.len() != v.channel_count() {
        return Err(MixerError::MaskWidth {
            expected: v.channel_count(),
            found: mask.len(),
        });
    }
    let mut out = v.values.clone();
    mask_channels_in_place(&mut out, v.code_length, mask)?;
    Ok(out)
}

/// Zeroes closed channels in every `n·d` row of `values`.
fn mask_channels_in_place(values: &mut [f32], d: usize, mask: &MaskConfig) -> Result<(), MixerError> {
    let width = mask.len() * d;
    if width == 0 || !values.len().is_multiple_of(width) {
        return Err(MixerError::MaskWidth {
            expected: values.len() / d.max(1),
            found: mask.len(),
        });
    }
    for row in values.chunks_exact_mut(width) {
        for (chunk, &open) in row.chunks_exact_mut(d).zip(&mask.open) {
            if !open {
                chunk.fill(0.0);
            }
        }
    }
    Ok(())
}

/// Closes each of `n` channels with probability ½, redrawing if all close.
pub fn draw_channel_mask<R: Rng + ?Sized>(n: usize, rng: &mut R) -> MaskConfig {
    loop {
        let open: Vec<bool> = (0..n).map(|_| !rng.random_bool(CHANNEL_CLOSE_PROBABILITY)).collect();
        if let Ok(mask) = MaskConfig::new(open) {
            return mask;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MaskPolicy {
    Global,
    Channel(MaskConfig),
}

/// A corrupted training input and the policy that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedCode {
    pub values: Vec<f32>,
    pub policy: MaskPolicy,
}

pub fn sample_training_mask<R: Rng + ?Sized>(v: &ConcatCode, rng: &mut R) -> MaskedCode {
    if rng.random_bool(GLOBAL_POLICY_PROBABILITY) {
        MaskedCode {
            values: apply_global_mask(v, rng),
            policy: MaskPolicy::Global,
        }
    } else {
        let mask = draw_channel_mask(v.channel_count(), rng);
        let values = apply_channel_mask(v, &mask).expect("mask drawn for this width");
        MaskedCode {
            values,
            policy: MaskPolicy::Channel(mask),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixerModel {
    encoder: Network<f32>,
    decoder: Network<f32>,
    channel_count: usize,
    code_length: usize,
    seed: u64,
    epochs: usize,
}

/// `n·d → 4·n·d → n·d`; used for both halves.
pub fn half_specs(width: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Linear {
            inputs: width,
            outputs: EXPANSION * width,
        },
        LayerSpec::Relu,
        LayerSpec::Linear {
            inputs: EXPANSION * width,
            outputs: width,
        },
    ]
}

const STEM: &str = "mixer";

impl MixerModel {
    pub fn new(channel_count: usize, code_length: usize, seed: u64) -> Result<Self, MixerError> {
        let width = channel_count * code_length;
        if width == 0 {
            return Err(MixerError::ChannelCount {
                expected: 1,
                found: channel_count,
            });
        }
        let mut rng = stage_rng(seed, "mixer/init");
        let encoder = Network::new(Shape::flat(width), &half_specs(width), &mut rng)?;
        let decoder = Network::new(Shape::flat(width), &half_specs(width), &mut rng)?;
        Ok(Self {
            encoder,
            decoder,
            channel_count,
            code_length,
            seed,
            epochs: 0,
        })
    }

    pub fn channel_count(&self) -> usize {
        self.channel_count
    }

    pub fn code_length(&self) -> usize {
        self.code_length
    }

    /// `n·d`, the length of both inputs and embeddings.
    pub fn width(&self) -> usize {
        self.channel_count * self.code_length
    }

    pub fn encoder(&self) -> &Network<f32> {
        &self.encoder
    }

    pub fn decoder(&self) -> &Network<f32> {
        &self.decoder
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    fn check(&self, v: &ConcatCode) -> Result<(), MixerError> {
        if v.len() != self.width() || v.code_length != self.code_length {
            return Err(MixerError::Length {
                expected: self.width(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// `E = encoder(apply_channel_mask(V, mask))`.
    pub fn embed(&self, v: &ConcatCode, mask: &MaskConfig) -> Result<Vec<f32>, MixerError> {
        self.check(v)?;
        let masked = apply_channel_mask(v, mask)?;
        Ok(self.encoder.forward_batch(&masked, 1))
    }

    /// Embeddings for a row-major `[batch × n·d]` buffer of concatenated
    /// codes, all under the same mask.
    pub fn embed_batch(&self, values: &[f32], batch: usize, mask: &MaskConfig) -> Result<Vec<f32>, MixerError> {
        if mask.len() != self.channel_count {
            return Err(MixerError::MaskWidth {
                expected: self.channel_count,
                found: mask.len(),
            });
        }
        if values.len() != batch * self.width() {
            return Err(MixerError::Length {
                expected: batch * self.width(),
                found: values.len(),
            });
        }
        let mut masked = values.to_vec();
        mask_channels_in_place(&mut masked, self.code_length, mask)?;
        Ok(self.encoder.forward_batch(&masked, batch))
    }

    /// `decoder(encoder(x))` for an already-masked input.
    pub fn reconstruct(&self, masked: &[f32]) -> Result<Vec<f32>, MixerError> {
        if masked.len() != self.width() {
            return Err(MixerError::Length {
                expected: self.width(),
                found: masked.len(),
            });
        }
        let e = self.encoder.forward_batch(masked, 1);
        Ok(self.decoder.forward_batch(&e, 1))
    }

    pub fn save(&self, dir: &Path) -> Result<(), MixerError> {
        let meta = json!({
            "channel_count": self.channel_count,
            "code_length": self.code_length,
        });
        checkpoint::save(
            dir,
            STEM,
            "mixer",
            self.seed,
            self.epochs,
            meta,
            &[("encoder", &self.encoder), ("decoder", &self.decoder)],
        )?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, MixerError> {
        let (manifest, mut nets) = checkpoint::load(dir, STEM)?;
        let bad = |m: &str| MixerError::BadCheckpoint(m.to_string());
        if manifest.role != "mixer" {
            return Err(bad("role is not \"mixer\""));
        }
        let meta = &manifest.metadata;
        let as_len = |k: &str| meta[k].as_u64().map(|v| v as usize).ok_or_else(|| bad(k));
        let channel_count = as_len("channel_count")?;
        let code_length = as_len("code_length")?;
        let encoder = checkpoint::take_network(&mut nets, "encoder")?;
        let decoder = checkpoint::take_network(&mut nets, "decoder")?;
        let width = channel_count * code_length;
        if encoder.input_shape().features() != width
            || encoder.output_shape().features() != width
            || decoder.output_shape().features() != width
        {
            return Err(bad("network widths disagree with channel_count × code_length"));
        }
        Ok(Self {
            encoder,
            decoder,
            channel_count,
            code_length,
            seed: manifest.seed,
            epochs: manifest.epochs,
        })
    }
}

pub fn train_mixer(model: &mut MixerModel, data: &[ConcatCode], cfg: &TrainConfig) -> Result<Vec<f64>, MixerError> {
    train_mixer_with_observer(model, data, cfg, |_, _| {})
}

/// As [`train_mixer`], calling `observe(sample_index, masked)` for every
/// corrupted presentation in the order they are drawn.
pub fn train_mixer_with_observer<F>(
    model: &mut MixerModel,
    data: &[ConcatCode],
    cfg: &TrainConfig,
    mut observe: F,
) -> Result<Vec<f64>, MixerError>
where
    F: FnMut(usize, &MaskedCode),
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(MixerError::EmptyDataset);
    }
    for v in data {
        model.check(v)?;
    }
    let width = model.width();
    let mut order_rng = stage_rng(cfg.seed, "mixer/order");
    let mut mask_rng = stage_rng(cfg.seed, "mixer/mask");
    let mut trainer = AutoencoderTrainer::new(&model.encoder, &model.decoder, cfg.learning_rate);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut input = Vec::with_capacity(cfg.batch_size * width);
    let mut target = Vec::with_capacity(cfg.batch_size * width);
    for epoch in 0..cfg.epochs {
        let order = epoch_order(data.len(), &mut order_rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            input.clear();
            target.clear();
            for &i in chunk {
                let masked = sample_training_mask(&data[i], &mut mask_rng);
                observe(i, &masked);
                input.extend_from_slice(&masked.values);
                target.extend_from_slice(data[i].values());
            }
            let loss = trainer.step(&mut model.encoder, &mut model.decoder, &input, &target, chunk.len());
            total += loss * chunk.len() as f64;
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() {
            return Err(MixerError::Diverged { epoch: epoch + 1 });
        }
        history.push(mean);
        model.epochs += 1;
    }
    Ok(history)
}
