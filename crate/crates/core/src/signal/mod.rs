//! The handcrafted method bank.
//!
//! Every method maps a raw [`SignalSequence`] of length `L` to a
//! [`TransformedSequence`] of a fixed registered length `L'`. Natural output
//! lengths that differ from the registered one are truncated or zero-padded
//! at the tail, and the result is z-scored so that channels with very
//! different scales train on comparable targets.

mod dwt;
mod emd;
mod external;
mod hilbert;
mod mel;
mod spectral;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::tensor_file::TensorFileError;

pub use dwt::{dwt_haar, idwt_haar};
pub use emd::{emd, emd_with_limit, local_extrema, ImfSet, MAX_IMFS};
pub use external::{load_external_codes, save_external_codes};
pub use hilbert::{analytic_signal, hht_features, instantaneous_amplitude, HHT_IMFS};
pub use mel::{log_mel_spectrogram, mel_band_sequences, MelSettings, MEL_BANDS};
pub use spectral::{dft_magnitude, full_spectrum, periodogram};

/// Minimum raw sequence length.
pub const MIN_SIGNAL_LENGTH: usize = 8;
/// Sequences with a standard deviation at or below this normalise to zeros.
pub const CONSTANT_STDDEV: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("sequence length {found} does not match the method input length {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("{method} cannot take a sequence of length {length}: {reason}")]
    InvalidLength {
        method: String,
        length: usize,
        reason: &'static str,
    },
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
    #[error("unknown method id {0:?}")]
    UnknownMethod(String),
    #[error("mel band index {0} is outside 1..=4")]
    InvalidBand(u8),
    #[error("external channel {0:?} has no transform; supply precomputed vectors")]
    ExternalChannel(String),
    #[error("spectrogram has {n_mels} mel rows, which is not divisible by 4")]
    MelRows { n_mels: usize },
    #[error("sample rate must be positive and finite, got {0}")]
    SampleRate(f64),
    #[error("external codes: expected vectors of length {expected}, file holds shape {found:?}")]
    ExternalShape { expected: usize, found: Vec<usize> },
    #[error(transparent)]
    File(#[from] TensorFileError),
}

/// One raw 1-D sensor sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalSequence {
    values: Vec<f32>,
    sample_rate: Option<f64>,
}

impl SignalSequence {
    pub fn new(values: Vec<f32>, sample_rate: Option<f64>) -> Result<Self, SignalError> {
        if values.len() < MIN_SIGNAL_LENGTH {
            return Err(SignalError::InvalidLength {
                method: "signal".into(),
                length: values.len(),
                reason: "sequences need at least 8 samples",
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::NonFinite { index: i });
        }
        if let Some(sr) = sample_rate {
            if !(sr.is_finite() && sr > 0.0) {
                return Err(SignalError::SampleRate(sr));
            }
        }
        Ok(Self { values, sample_rate })
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

    pub fn sample_rate(&self) -> Option<f64> {
        self.sample_rate
    }

    fn as_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }
}

/// Identity of a channel in the method bank.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodId {
    Raw,
    Dft,
    Dwt,
    Hht,
    Periodogram,
    /// Quarter `1..=4` of the log-mel spectrogram, 1 = lowest frequencies.
    MelBand(u8),
    /// Precomputed vectors from another model, keyed by name.
    External(String),
}

impl MethodId {
    /// Filesystem-safe form used in checkpoint and dataset file names.
    pub fn slug(&self) -> String {
        match self {
            MethodId::External(name) => format!("external-{name}"),
            other => other.to_string(),
        }
    }

    pub fn is_external(&self) -> bool {
        matches!(self, MethodId::External(_))
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodId::Raw => f.write_str("raw"),
            MethodId::Dft => f.write_str("dft"),
            MethodId::Dwt => f.write_str("dwt"),
            MethodId::Hht => f.write_str("hht"),
            MethodId::Periodogram => f.write_str("periodogram"),
            MethodId::MelBand(b) => write!(f, "mel{b}"),
            MethodId::External(name) => write!(f, "external:{name}"),
        }
    }
}

impl FromStr for MethodId {
    type Err = SignalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let id = match s {
            "raw" => MethodId::Raw,
            "dft" => MethodId::Dft,
            "dwt" => MethodId::Dwt,
            "hht" => MethodId::Hht,
            "periodogram" => MethodId::Periodogram,
            _ => {
                if let Some(b) = s.strip_prefix("mel") {
                    let b: u8 = b.parse().map_err(|_| SignalError::UnknownMethod(s.into()))?;
                    if !(1..=MEL_BANDS as u8).contains(&b) {
                        return Err(SignalError::InvalidBand(b));
                    }
                    MethodId::MelBand(b)
                } else if let Some(name) = s.strip_prefix("external:") {
                    let ok = !name.is_empty()
                        && name
                            .chars()
                            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
                    if !ok {
                        return Err(SignalError::UnknownMethod(s.into()));
                    }
                    MethodId::External(name.into())
                } else {
                    return Err(SignalError::UnknownMethod(s.into()));
                }
            }
        };
        Ok(id)
    }
}

impl Serialize for MethodId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MethodId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A registered method: its identity and the input/output lengths it is
/// bound to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method_id: MethodId,
    pub input_length: usize,
    pub output_length: usize,
}

impl MethodSpec {
    pub fn new(method_id: MethodId, input_length: usize, output_length: usize) -> Result<Self, SignalError> {
        if output_length < 2 {
            return Err(SignalError::InvalidLength {
                method: method_id.to_string(),
                length: output_length,
                reason: "output length must be at least 2",
            });
        }
        if let MethodId::MelBand(b) = method_id {
            if !(1..=MEL_BANDS as u8).contains(&b) {
                return Err(SignalError::InvalidBand(b));
            }
        }
        Ok(Self {
            method_id,
            input_length,
            output_length,
        })
    }

    /// Registers a method at its natural output length for inputs of
    /// length `input_length`. External channels have no natural length.
    pub fn natural(method_id: MethodId, input_length: usize, mel: &MelSettings) -> Result<Self, SignalError> {
        let out = natural_length(&method_id, input_length, mel)?;
        Self::new(method_id, input_length, out)
    }
}

/// Output length of a method before any length adjustment.
pub fn natural_length(method: &MethodId, l: usize, mel: &MelSettings) -> Result<usize, SignalError> {
    let bad = |reason| SignalError::InvalidLength {
        method: method.to_string(),
        length: l,
        reason,
    };
    if l < MIN_SIGNAL_LENGTH {
        return Err(bad("sequences need at least 8 samples"));
    }
    match method {
        MethodId::Raw => Ok(l),
        MethodId::Dft | MethodId::Periodogram => {
            if !l.is_multiple_of(2) {
                return Err(bad("spectral methods need an even length"));
            }
            Ok(l / 2 + 1)
        }
        MethodId::Dwt => {
            if !l.is_power_of_two() {
                return Err(bad("the Haar DWT needs a power-of-two length"));
            }
            Ok(l)
        }
        MethodId::Hht => Ok(HHT_IMFS * hilbert::segment_length(l)),
        MethodId::MelBand(_) => mel.frames(l).ok_or_else(|| bad("shorter than one STFT frame")),
        MethodId::External(name) => Err(SignalError::ExternalChannel(name.clone())),
    }
}

/// `f_i(x)`: a method output at its registered length.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformedSequence {
    pub values: Vec<f32>,
    pub method_id: MethodId,
    /// `(mean, stddev)` of the length-adjusted output before z-scoring.
    pub normalization_stats: Option<(f64, f64)>,
}

impl TransformedSequence {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Truncates or zero-pads at the tail.
pub fn fit_length(mut v: Vec<f64>, len: usize) -> Vec<f64> {
    v.resize(len, 0.0);
    v
}

/// Per-sequence z-score. Sequences with stddev ≤ 1e-8 become all zeros.
pub fn zscore(v: &[f64]) -> (Vec<f64>, (f64, f64)) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd <= CONSTANT_STDDEV {
        return (vec![0.0; v.len()], (mean, sd));
    }
    (v.iter().map(|x| (x - mean) / sd).collect(), (mean, sd))
}

fn finish(method_id: MethodId, raw: Vec<f64>, len: usize) -> TransformedSequence {
    let (z, stats) = zscore(&fit_length(raw, len));
    TransformedSequence {
        values: z.into_iter().map(|v| v as f32).collect(),
        method_id,
        normalization_stats: Some(stats),
    }
}

/// Applies a registered method with the default mel settings.
pub fn apply_method(spec: &MethodSpec, x: &SignalSequence) -> Result<TransformedSequence, SignalError> {
    apply_method_with(spec, x, &MelSettings::default())
}

pub fn apply_method_with(
    spec: &MethodSpec,
    x: &SignalSequence,
    mel: &MelSettings,
) -> Result<TransformedSequence, SignalError> {
    if x.len() != spec.input_length {
        return Err(SignalError::LengthMismatch {
            expected: spec.input_length,
            found: x.len(),
        });
    }
    if let Some(i) = x.values().iter().position(|v| !v.is_finite()) {
        return Err(SignalError::NonFinite { index: i });
    }
    let l = x.len();
    let xs = x.as_f64();
    let raw = match &spec.method_id {
        MethodId::Raw => xs,
        MethodId::Dft => {
            natural_length(&spec.method_id, l, mel)?;
            dft_magnitude(&xs)
        }
        MethodId::Periodogram => {
            natural_length(&spec.method_id, l, mel)?;
            periodogram(&xs)
        }
        MethodId::Dwt => dwt_haar(&xs)?,
        MethodId::Hht => hht_features(&xs),
        MethodId::MelBand(b) => {
            let sr = x.sample_rate().unwrap_or(mel.sample_rate);
            let spec_rows = log_mel_spectrogram(&xs, sr, mel)?;
            let mut bands = mel_band_sequences(&spec_rows)?;
            std::mem::take(&mut bands[usize::from(*b) - 1])
        }
        MethodId::External(name) => return Err(SignalError::ExternalChannel(name.clone())),
    };
    Ok(finish(spec.method_id.clone(), raw, spec.output_length))
}

/// Length-adjusts and normalises a precomputed external vector so it can
/// feed the channel's compressor like any other method output.
pub fn adapt_external(spec: &MethodSpec, values: &[f32]) -> Result<TransformedSequence, SignalError> {
    if !spec.method_id.is_external() {
        return Err(SignalError::UnknownMethod(format!(
            "{} is not an external channel",
            spec.method_id
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(SignalError::NonFinite { index: i });
    }
    let raw = values.iter().map(|&v| f64::from(v)).collect();
    Ok(finish(spec.method_id.clone(), raw, spec.output_length))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: Vec<f32>) -> SignalSequence {
        SignalSequence::new(v, None).unwrap()
    }

    #[test]
    fn raw_is_zscored_identity() {
        let x: Vec<f32> = (0..16).map(|i| (i as f32 * 0.7).sin() * 3.0 + 1.0).collect();
        let spec = MethodSpec::natural(MethodId::Raw, 16, &MelSettings::default()).unwrap();
        let t = apply_method(&spec, &seq(x.clone())).unwrap();
        let (z, _) = zscore(&x.iter().map(|&v| f64::from(v)).collect::<Vec<_>>());
        for (a, b) in t.values.iter().zip(z) {
            assert!((f64::from(*a) - b).abs() < 1e-6);
        }
    }

    #[test]
    fn dft_of_constant_is_dc_only() {
        let spec = MethodSpec::natural(MethodId::Dft, 16, &MelSettings::default()).unwrap();
        let t = apply_method(&spec, &seq(vec![2.0; 16])).unwrap();
        // after z-scoring, bin 0 is the single positive outlier
        let (idx, _) = t
            .values
            .iter()
            .enumerate()
            .fold((0, f32::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        assert_eq!(idx, 0);
        assert!(t.values[1..].iter().all(|&v| (v - t.values[1]).abs() < 1e-6));
    }

    #[test]
    fn errors() {
        let spec = MethodSpec::natural(MethodId::Raw, 16, &MelSettings::default()).unwrap();
        assert!(matches!(
            apply_method(&spec, &seq(vec![0.0; 32])),
            Err(SignalError::LengthMismatch { .. })
        ));
        assert!(SignalSequence::new(vec![f32::NAN; 8], None).is_err());
        assert!(SignalSequence::new(vec![0.0; 7], None).is_err());
        assert!(matches!("fft".parse::<MethodId>(), Err(SignalError::UnknownMethod(_))));
        assert!(matches!("mel5".parse::<MethodId>(), Err(SignalError::InvalidBand(5))));
        let ext = MethodSpec::new(MethodId::External("autofi".into()), 16, 32).unwrap();
        assert!(matches!(
            apply_method(&ext, &seq(vec![0.0; 16])),
            Err(SignalError::ExternalChannel(_))
        ));
        assert!(MethodSpec::natural(MethodId::Dwt, 24, &MelSettings::default()).is_err());
    }

    #[test]
    fn method_ids_round_trip_through_strings() {
        for s in ["raw", "dft", "dwt", "hht", "periodogram", "mel1", "mel4", "external:autofi"] {
            let id: MethodId = s.parse().unwrap();
            assert_eq!(id.to_string(), s);
        }
        assert_eq!(MethodId::External("a".into()).slug(), "external-a");
    }

    #[test]
    fn fit_length_pads_and_truncates_at_tail() {
        assert_eq!(fit_length(vec![1.0, 2.0, 3.0], 2), vec![1.0, 2.0]);
        assert_eq!(fit_length(vec![1.0], 3), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn constant_sequences_normalise_to_zero() {
        let (z, (m, sd)) = zscore(&[4.0; 10]);
        assert!(z.iter().all(|&v| v == 0.0));
        assert_eq!(m, 4.0);
        assert!(sd <= CONSTANT_STDDEV);
    }

    #[test]
    fn external_vectors_are_adapted() {
        let spec = MethodSpec::new(MethodId::External("e".into()), 16, 6).unwrap();
        let t = adapt_external(&spec, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.values.len(), 6);
        assert!(adapt_external(&spec, &[f32::INFINITY]).is_err());
    }

    #[test]
    fn natural_lengths() {
        let mel = MelSettings::default();
        let n = |id: MethodId| natural_length(&id, 256, &mel).unwrap();
        assert_eq!(n(MethodId::Raw), 256);
        assert_eq!(n(MethodId::Dft), 129);
        assert_eq!(n(MethodId::Periodogram), 129);
        assert_eq!(n(MethodId::Dwt), 256);
        assert_eq!(n(MethodId::Hht), 384);
    }
}
