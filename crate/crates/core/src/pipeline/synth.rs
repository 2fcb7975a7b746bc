//! Synthetic sensing tasks with a known best method.
//!
//! * `SpectralPeak`: class `c` is a sine at bin `8 + c` with a random phase,
//!   so the label lives only in the magnitude spectrum.
//! * `EnvelopeShape`: a carrier of random frequency under a Gaussian
//!   amplitude envelope whose centre depends on the class.
//! * `WaveletBurst`: a short alternating burst in one of several dyadic
//!   slots, over a slow random background.
//!
//! Every sample adds white Gaussian noise of the requested standard
//! deviation.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{stage_rng, StageRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    SpectralPeak,
    EnvelopeShape,
    WaveletBurst,
}

impl GeneratorKind {
    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::SpectralPeak => "spectral_peak",
            GeneratorKind::EnvelopeShape => "envelope_shape",
            GeneratorKind::WaveletBurst => "wavelet_burst",
        }
    }
}

/// A labeled synthetic task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticTaskSpec {
    pub kind: GeneratorKind,
    pub class_count: usize,
    pub samples_per_class: usize,
    pub noise_stddev: f64,
    pub seed: u64,
}

impl Default for SyntheticTaskSpec {
    fn default() -> Self {
        Self {
            kind: GeneratorKind::SpectralPeak,
            class_count: 6,
            samples_per_class: 100,
            noise_stddev: 0.3,
            seed: 1,
        }
    }
}

/// Raw sequences `[N × L]` with their (latent or real) class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSet {
    pub signals: Vec<Vec<f32>>,
    pub labels: Vec<usize>,
    pub class_count: usize,
}

/// Largest class count the generators keep distinct at length `l`.
pub fn max_classes(kind: GeneratorKind, l: usize) -> usize {
    match kind {
        // bins 8 + c must stay below Nyquist
        GeneratorKind::SpectralPeak => (l / 2).saturating_sub(8),
        GeneratorKind::EnvelopeShape => 12,
        GeneratorKind::WaveletBurst => l / BURST_WIDTH,
    }
}

const BURST_WIDTH: usize = 16;

/// One sample of class `class` out of `classes`.
pub fn generate(kind: GeneratorKind, class: usize, classes: usize, l: usize, noise: f64, rng: &mut StageRng) -> Vec<f32> {
    let n = l as f64;
    let mut x: Vec<f64> = match kind {
        GeneratorKind::SpectralPeak => {
            let k = (8 + class) as f64;
            let phase = rng.random_range(0.0..2.0 * PI);
            (0..l).map(|i| (2.0 * PI * k * i as f64 / n + phase).sin()).collect()
        }
        GeneratorKind::EnvelopeShape => {
            let centre = (class as f64 + 0.5) / classes as f64;
            let carrier = rng.random_range(20.0..40.0);
            let phase = rng.random_range(0.0..2.0 * PI);
            (0..l)
                .map(|i| {
                    let t = i as f64 / n;
                    let env = 0.2 + 1.5 * (-((t - centre) / 0.1).powi(2)).exp();
                    env * (2.0 * PI * carrier * t + phase).sin()
                })
                .collect()
        }
        GeneratorKind::WaveletBurst => {
            let slots = l / BURST_WIDTH;
            // spread the classes over the available slots
            let slot = if classes > 1 { class * (slots - 1) / (classes - 1) } else { 0 };
            let start = slot * BURST_WIDTH;
            let drift = rng.random_range(0.5..3.0);
            let phase = rng.random_range(0.0..2.0 * PI);
            (0..l)
                .map(|i| {
                    let background = 0.5 * (2.0 * PI * drift * i as f64 / n + phase).sin();
                    let burst = if (start..start + BURST_WIDTH).contains(&i) {
                        if i % 2 == 0 {
                            1.5
                        } else {
                            -1.5
                        }
                    } else {
                        0.0
                    };
                    background + burst
                })
                .collect()
        }
    };
    if noise > 0.0 {
        let dist = Normal::new(0.0, noise).expect("noise is finite and non-negative");
        for v in &mut x {
            *v += dist.sample(rng);
        }
    }
    x.into_iter().map(|v| v as f32).collect()
}

/// Class-balanced labeled task, samples ordered by class.
pub fn synth_task(spec: &SyntheticTaskSpec, l: usize) -> SyntheticSet {
    let classes = spec.class_count.min(max_classes(spec.kind, l)).max(2);
    let mut rng = stage_rng(spec.seed, &format!("synth/task/{}", spec.kind.name()));
    let mut signals = Vec::with_capacity(classes * spec.samples_per_class);
    let mut labels = Vec::with_capacity(signals.capacity());
    for c in 0..classes {
        for _ in 0..spec.samples_per_class {
            signals.push(generate(spec.kind, c, classes, l, spec.noise_stddev, &mut rng));
            labels.push(c);
        }
    }
    SyntheticSet {
        signals,
        labels,
        class_count: classes,
    }
}

/// Unlabeled pool drawn round-robin from `kinds`, each sample of a random
/// class. The latent classes are returned as labels so external vectors
/// can be generated consistently; pre-training never reads them.
pub fn synth_unlabeled(count: usize, kinds: &[GeneratorKind], classes: usize, l: usize, noise: f64, seed: u64) -> SyntheticSet {
    let mut rng = stage_rng(seed, "synth/unlabeled");
    let mut signals = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let kind = kinds[i % kinds.len()];
        let k = classes.min(max_classes(kind, l)).max(2);
        let c = rng.random_range(0..k);
        signals.push(generate(kind, c, k, l, noise, &mut rng));
        labels.push(c);
    }
    SyntheticSet {
        signals,
        labels,
        class_count: classes,
    }
}

/// Stand-in for an external model's embeddings: a fixed random prototype
/// per class plus Gaussian noise. Prototypes depend only on
/// `prototype_seed`, samples on `seed`.
pub fn external_vectors(labels: &[usize], length: usize, noise: f64, prototype_seed: u64, seed: u64) -> Vec<Vec<f32>> {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut proto_rng = stage_rng(prototype_seed, "synth/external/prototypes");
    let prototypes: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..length).map(|_| StandardNormal.sample(&mut proto_rng)).collect())
        .collect();
    let mut rng = stage_rng(seed, "synth/external/samples");
    let dist = Normal::new(0.0, noise.max(0.0)).expect("noise is finite");
    labels
        .iter()
        .map(|&c| prototypes[c].iter().map(|p| (p + dist.sample(&mut rng)) as f32).collect())
        .collect()
}
