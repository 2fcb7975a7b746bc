use proptest::prelude::*;
use rustfft::num_complex::Complex64;

use sgsm::signal::{
    apply_method, dft_magnitude, dwt_haar, emd, fit_length, full_spectrum, idwt_haar, periodogram, zscore, MethodId,
    MethodSpec, SignalSequence,
};

fn brute_dft(x: &[f64]) -> Vec<Complex64> {
    let n = x.len() as f64;
    (0..x.len())
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(i, &v)| Complex64::from_polar(v, -2.0 * std::f64::consts::PI * (k * i) as f64 / n))
                .sum()
        })
        .collect()
}

/// Orthonormal Haar basis, row `r` of the matrix, in the transform's layout:
/// approximation first, then detail levels coarse to fine.
fn haar_matrix(l: usize) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![1.0 / (l as f64).sqrt(); l]];
    let mut width = l;
    let mut levels = Vec::new();
    while width >= 2 {
        let h = 1.0 / (width as f64).sqrt();
        let level: Vec<Vec<f64>> = (0..l / width)
            .map(|b| {
                (0..l)
                    .map(|i| match i.checked_sub(b * width) {
                        Some(j) if j < width / 2 => h,
                        Some(j) if j < width => -h,
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect();
        levels.push(level);
        width /= 2;
    }
    for level in levels {
        rows.extend(level);
    }
    rows
}

fn signal(lengths: &'static [usize]) -> impl Strategy<Value = Vec<f64>> {
    prop::sample::select(lengths).prop_flat_map(|l| prop::collection::vec(-5.0f64..5.0, l))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fft_agrees_with_direct_summation(x in signal(&[8, 12, 16, 30, 32, 64, 100])) {
        let brute = brute_dft(&x);
        for (a, b) in full_spectrum(&x).iter().zip(&brute) {
            prop_assert!((a - b).norm() < 1e-9);
        }
        for (m, b) in dft_magnitude(&x).iter().zip(&brute) {
            prop_assert!((m - b.norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn parseval(x in signal(&[8, 16, 33, 64])) {
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = full_spectrum(&x).iter().map(|c| c.norm_sqr()).sum::<f64>() / x.len() as f64;
        prop_assert!((time - freq).abs() < 1e-8 * time.max(1.0));
    }

    #[test]
    fn periodogram_is_scaled_power(x in signal(&[8, 16, 32, 64])) {
        let l = x.len() as f64;
        for (p, m) in periodogram(&x).iter().zip(dft_magnitude(&x)) {
            prop_assert!((p - m * m / l).abs() < 1e-9);
        }
    }

    #[test]
    fn haar_matches_the_explicit_basis(x in signal(&[8, 16, 32, 64])) {
        let basis = haar_matrix(x.len());
        let c = dwt_haar(&x).unwrap();
        for (row, ci) in basis.iter().zip(&c) {
            let dot: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
            prop_assert!((dot - ci).abs() < 1e-9);
        }
        let back = idwt_haar(&c).unwrap();
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn emd_is_complete(x in signal(&[16, 64, 128])) {
        let set = emd(&x);
        for (a, b) in set.reconstruct().iter().zip(&x) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn zscore_has_zero_mean_unit_variance(x in signal(&[8, 50, 64])) {
        let (z, (_, sd)) = zscore(&x);
        prop_assume!(sd > 1e-6);
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!((var - 1.0).abs() < 1e-9);
    }

    #[test]
    fn every_method_emits_its_declared_length(x in signal(&[64, 256]), out in 16usize..300) {
        let seq = SignalSequence::new(x.iter().map(|&v| v as f32).collect(), None).unwrap();
        for id in [MethodId::Raw, MethodId::Dft, MethodId::Dwt, MethodId::Hht, MethodId::Periodogram] {
            let spec = MethodSpec::new(id, x.len(), out).unwrap();
            let t = apply_method(&spec, &seq).unwrap();
            prop_assert_eq!(t.values.len(), out);
            prop_assert!(t.values.iter().all(|v| v.is_finite()));
        }
    }
}

#[test]
fn two_tone_first_imf_carries_the_fast_tone() {
    let l = 512;
    let x: Vec<f64> = (0..l)
        .map(|i| {
            let t = i as f64 / l as f64;
            (2.0 * std::f64::consts::PI * 40.0 * t).sin() + (2.0 * std::f64::consts::PI * 4.0 * t).sin()
        })
        .collect();
    let set = emd(&x);
    let spectrum = dft_magnitude(&set.imfs[0]);
    let peak = spectrum
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    assert_eq!(peak, 40);
}

#[test]
fn fit_length_keeps_the_head() {
    assert_eq!(fit_length(vec![1.0, 2.0, 3.0], 2), vec![1.0, 2.0]);
    assert_eq!(fit_length(vec![1.0], 3), vec![1.0, 0.0, 0.0]);
}
