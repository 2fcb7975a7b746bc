//! Hilbert–Huang features: EMD followed by the instantaneous amplitude of
//! each leading IMF.

use rustfft::num_complex::Complex64;

use super::emd::emd;
use super::spectral::{full_spectrum, inverse_spectrum};

/// Number of leading IMFs that contribute amplitude tracks.
pub const HHT_IMFS: usize = 3;

/// Per-IMF feature length for a raw length `l`: pairs are averaged.
pub(crate) fn segment_length(l: usize) -> usize {
    l.div_ceil(2)
}

/// Analytic signal by the full-spectrum method: negative frequencies are
/// zeroed and strictly positive ones doubled.
pub fn analytic_signal(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    let mut s = full_spectrum(x);
    if n == 0 {
        return s;
    }
    let positive_end = n.div_ceil(2); // exclusive; excludes Nyquist for even n
    for (k, v) in s.iter_mut().enumerate() {
        if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
            continue;
        }
        if k < positive_end {
            *v *= 2.0;
        } else {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    inverse_spectrum(&mut s);
    s
}

pub fn instantaneous_amplitude(x: &[f64]) -> Vec<f64> {
    analytic_signal(x).iter().map(|c| c.norm()).collect()
}

fn pair_mean(v: &[f64]) -> Vec<f64> {
    v.chunks(2).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
}

/// Concatenated, pair-averaged amplitude tracks of the first three IMFs
/// (missing IMFs contribute zeros). Length `3·ceil(L/2)`.
pub fn hht_features(x: &[f64]) -> Vec<f64> {
    let seg = segment_length(x.len());
    let set = emd(x);
    let mut out = Vec::with_capacity(HHT_IMFS * seg);
    for k in 0..HHT_IMFS {
        match set.imfs.get(k) {
            Some(imf) => out.extend(pair_mean(&instantaneous_amplitude(imf))),
            None => out.extend(std::iter::repeat_n(0.0, seg)),
        }
    }
    out
}
