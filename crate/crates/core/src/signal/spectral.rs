use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Full complex spectrum `X[k] = Σ_n x[n]·exp(−2πi·kn/L)`, `k = 0..L`.
pub fn full_spectrum(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    if buf.is_empty() {
        return buf;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(&mut buf);
    buf
}

pub(crate) fn inverse_spectrum(x: &mut [Complex64]) {
    if x.is_empty() {
        return;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(x.len()));
    fft.process(x);
    let scale = 1.0 / x.len() as f64;
    for v in x.iter_mut() {
        *v *= scale;
    }
}

/// `|X[k]|` for `k = 0..=L/2`.
pub fn dft_magnitude(x: &[f64]) -> Vec<f64> {
    let half = x.len() / 2 + 1;
    full_spectrum(x).iter().take(half).map(|c| c.norm()).collect()
}

/// `P[k] = |X[k]|² / L` for `k = 0..=L/2`.
pub fn periodogram(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let half = x.len() / 2 + 1;
    full_spectrum(x)
        .iter()
        .take(half)
        .map(|c| c.norm_sqr() / n)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_signal() {
        let m = dft_magnitude(&[1.0; 8]);
        assert_eq!(m.len(), 5);
        assert!((m[0] - 8.0).abs() < 1e-12);
        assert!(m[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn zero_signal() {
        assert!(dft_magnitude(&[0.0; 16]).iter().all(|&v| v == 0.0));
        assert!(periodogram(&[0.0; 16]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_tone() {
        let x: Vec<f64> = (0..16).map(|n| (2.0 * PI * 2.0 * n as f64 / 16.0).cos()).collect();
        let m = dft_magnitude(&x);
        let argmax = (0..m.len()).max_by(|&a, &b| m[a].total_cmp(&m[b])).unwrap();
        assert_eq!(argmax, 2);
        assert!((m[2] - 8.0).abs() < 1e-9);
        let p = periodogram(&x);
        let argmax = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        assert_eq!(argmax, 2);
    }

    #[test]
    fn inverse_recovers_signal() {
        let x: Vec<f64> = (0..12).map(|n| (n as f64 * 1.3).sin()).collect();
        let mut s = full_spectrum(&x);
        inverse_spectrum(&mut s);
        for (a, b) in s.iter().zip(&x) {
            assert!((a.re - b).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
    }
}
