//! Log-mel spectrogram and its split into four frequency quarters, each
//! summed over its mel rows into one time sequence.

use serde::{Deserialize, Serialize};

use super::spectral::full_spectrum;
use super::SignalError;

/// Number of frequency quarters.
pub const MEL_BANDS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MelSettings {
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    /// Used when a sequence carries no sample rate of its own.
    pub sample_rate: f64,
}

impl Default for MelSettings {
    fn default() -> Self {
        Self {
            n_fft: 256,
            hop: 64,
            n_mels: 64,
            sample_rate: 16_000.0,
        }
    }
}

impl MelSettings {
    /// STFT frame count for `len` samples, if at least one frame fits.
    pub fn frames(&self, len: usize) -> Option<usize> {
        (len >= self.n_fft && self.hop > 0).then(|| 1 + (len - self.n_fft) / self.hop)
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters `[n_mels × (n_fft/2 + 1)]` spaced evenly on the mel
/// scale from 0 Hz to Nyquist.
fn filterbank(settings: &MelSettings, sample_rate: f64) -> Vec<Vec<f64>> {
    let bins = settings.n_fft / 2 + 1;
    let top = hz_to_mel(sample_rate / 2.0);
    let edges: Vec<f64> = (0..settings.n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (settings.n_mels + 1) as f64))
        .collect();
    let freq = |k: usize| k as f64 * sample_rate / settings.n_fft as f64;
    (0..settings.n_mels)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..bins)
                .map(|k| {
                    let f = freq(k);
                    let rise = (f - lo) / (mid - lo);
                    let fall = (hi - f) / (hi - mid);
                    rise.min(fall).max(0.0)
                })
                .collect()
        })
        .collect()
}

/// `log(1 + S)` of the Hann-windowed power mel spectrogram, `[n_mels × T]`.
pub fn log_mel_spectrogram(x: &[f64], sample_rate: f64, settings: &MelSettings) -> Result<Vec<Vec<f64>>, SignalError> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(SignalError::SampleRate(sample_rate));
    }
    let frames = settings.frames(x.len()).ok_or(SignalError::InvalidLength {
        method: "mel".into(),
        length: x.len(),
        reason: "shorter than one STFT frame",
    })?;
    let n = settings.n_fft;
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect();
    let bank = filterbank(settings, sample_rate);
    let mut out = vec![vec![0.0; frames]; settings.n_mels];
    for t in 0..frames {
        let start = t * settings.hop;
        let frame: Vec<f64> = x[start..start + n].iter().zip(&window).map(|(a, w)| a * w).collect();
        let power: Vec<f64> = full_spectrum(&frame)
            .iter()
            .take(n / 2 + 1)
            .map(|c| c.norm_sqr())
            .collect();
        for (row, filt) in out.iter_mut().zip(&bank) {
            let e: f64 = filt.iter().zip(&power).map(|(w, p)| w * p).sum();
            row[t] = e.ln_1p();
        }
    }
    Ok(out)
}

/// Splits `[n_mels × T]` rows into four equal quarters (quarter 1 = lowest
/// frequencies) and sums each quarter over its rows.
pub fn mel_band_sequences(spectrogram: &[Vec<f64>]) -> Result<[Vec<f64>; MEL_BANDS], SignalError> {
    let n_mels = spectrogram.len();
    if n_mels == 0 || !n_mels.is_multiple_of(MEL_BANDS) {
        return Err(SignalError::MelRows { n_mels });
    }
    let t = spectrogram[0].len();
    if spectrogram.iter().any(|r| r.len() != t) {
        return Err(SignalError::InvalidLength {
            method: "mel".into(),
            length: n_mels,
            reason: "spectrogram rows differ in length",
        });
    }
    let per = n_mels / MEL_BANDS;
    Ok(std::array::from_fn(|b| {
        let mut acc = vec![0.0; t];
        for row in &spectrogram[b * per..(b + 1) * per] {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        acc
    }))
}
