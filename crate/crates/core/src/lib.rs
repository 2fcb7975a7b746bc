//! Semi-generalist sensing model.
//!
//! A two-phase autoencoder scheme for building sensing pipelines out of
//! classical signal-processing methods:
//!
//! 1. [`signal`] turns raw sequences into method outputs (DFT, Haar DWT, raw,
//!    HHT, periodogram, mel bands, or an external embedding channel).
//! 2. [`compressor`] trains one undercomplete autoencoder per method so that
//!    every channel emits a code of the same length `d`.
//! 3. [`mixer`] concatenates the channel codes and trains a masked denoising
//!    autoencoder over them; its encoder output is the embedding.
//! 4. [`selection`] sweeps every channel mask on a labeled task and picks the
//!    best-performing method subset.
//!
//! [`pipeline`] wires the stages together and backs the `sgsm` command-line
//! tool. [`nn`] is the small differentiable layer everything trains on, and
//! [`tensor_file`] is the on-disk tensor format shared by all stages.

pub mod compressor;
pub mod mixer;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod selection;
pub mod signal;
pub mod tensor_file;

pub use compressor::{Code, CompressorModel};
pub use mixer::{ConcatCode, MaskConfig, MixerModel};
pub use nn::{Network, Tensor, TrainConfig};
pub use pipeline::{PipelineConfig, SgsmInstance};
pub use selection::{LabeledEmbeddingSet, SelectionResult, SubsetReport};
pub use signal::{MethodId, MethodSpec, SignalSequence, TransformedSequence};
