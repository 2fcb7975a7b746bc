//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test -p sgsm --test acceptance` runs all eight; pass criterion
//! numbers after `--` to run a subset. Criteria 5, 7 and 8 reuse the
//! instance pre-trained by criterion 4.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rustfft::num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use sgsm::mixer::{apply_global_mask, draw_channel_mask, global_mask_count, sample_training_mask, ConcatCode, MaskPolicy};
use sgsm::nn::{gradcheck, mse_cosine_loss, LayerSpec, Network, Shape, Tensor};
use sgsm::pipeline::{
    pretrain, run_selection, synth, synth_datasets, GeneratorKind, LabeledDataset, PipelineConfig, PretrainLog,
    RawDataset, SyntheticTaskSpec,
};
use sgsm::rng::stage_rng;
use sgsm::selection::{enumerate_masks, SelectionResult};
use sgsm::signal::{dft_magnitude, dwt_haar, emd, idwt_haar, periodogram, MethodId, MethodSpec};
use sgsm::{MaskConfig, SgsmInstance};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed.as_secs_f64() < limit_s as f64
}

fn direct_dft(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(i, &v)| Complex64::from_polar(v, -2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64))
                .sum()
        })
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = stage_rng(1, "acceptance/dsp");
    let (mut dft, mut energy, mut inverse, mut psd, mut emd_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for l in [8usize, 16, 32, 64] {
        for _ in 0..100 {
            let x: Vec<f64> = (0..l).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let brute = direct_dft(&x);
            let half = &brute[..=l / 2];
            let mag: Vec<f64> = half.iter().map(|c| c.norm()).collect();
            dft = dft.max(max_abs_diff(&dft_magnitude(&x), &mag));
            let power: Vec<f64> = half.iter().map(|c| c.norm_sqr() / l as f64).collect();
            psd = psd.max(max_abs_diff(&periodogram(&x), &power));
            let c = dwt_haar(&x).expect("power-of-two length");
            let ex: f64 = x.iter().map(|v| v * v).sum();
            let ec: f64 = c.iter().map(|v| v * v).sum();
            energy = energy.max((ex - ec).abs());
            inverse = inverse.max(max_abs_diff(&idwt_haar(&c).expect("same length"), &x));
            emd_err = emd_err.max(max_abs_diff(&emd(&x).reconstruct(), &x));
        }
    }
    let t = start.elapsed();
    let pass = dft < 1e-6 && energy < 1e-6 && inverse < 1e-6 && psd < 1e-9 && emd_err < 1e-6 && within(t, 30);
    outcome(
        pass,
        format!(
            "DSP oracles over 400 inputs: dft {dft:.1e}, dwt energy {energy:.1e}, idwt {inverse:.1e}, \
             periodogram {psd:.1e}, emd completeness {emd_err:.1e} ({:.1}s)",
            t.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let v = |x: &[f64]| Tensor::new(vec![x.len()], x.to_vec()).unwrap();
    let cases: [(&[f64], &[f64], f64); 3] = [
        (&[0.3, -1.2, 2.0], &[0.3, -1.2, 2.0], 0.0),
        (&[-1.0, 0.0], &[1.0, 0.0], 4.0),
        (&[1.0, 1.0], &[1.0, 0.0], 0.5 + (1.0 - 1.0 / 2f64.sqrt())),
    ];
    let loss_err = cases
        .iter()
        .map(|(y, t, want)| (mse_cosine_loss(&v(y), &v(t)).unwrap().0 - want).abs())
        .fold(0.0, f64::max);
    let nets: [(Shape, Vec<LayerSpec>); 3] = [
        (
            Shape::flat(10),
            vec![
                LayerSpec::Linear { inputs: 10, outputs: 8 },
                LayerSpec::Relu,
                LayerSpec::Linear { inputs: 8, outputs: 10 },
            ],
        ),
        (
            Shape::flat(16),
            vec![
                LayerSpec::Conv1d { in_channels: 1, out_channels: 4, kernel: 4, stride: 2 },
                LayerSpec::Relu,
                LayerSpec::Linear { inputs: 28, outputs: 6 },
            ],
        ),
        (
            Shape::flat(12),
            vec![
                LayerSpec::Linear { inputs: 12, outputs: 9 },
                LayerSpec::Relu,
                LayerSpec::Linear { inputs: 9, outputs: 7 },
                LayerSpec::Relu,
                LayerSpec::Linear { inputs: 7, outputs: 5 },
            ],
        ),
    ];
    let mut worst = 0.0f64;
    for (k, (shape, specs)) in nets.iter().enumerate() {
        let mut rng = stage_rng(k as u64, "acceptance/gradcheck");
        let net = Network::<f64>::new(*shape, specs, &mut rng).unwrap();
        let x: Vec<f64> = (0..shape.features()).map(|_| rng.sample(StandardNormal)).collect();
        let out = net.output_shape().features();
        let t: Vec<f64> = (0..out).map(|_| rng.sample(StandardNormal)).collect();
        let err = gradcheck(&net, &Tensor::new(vec![x.len()], x).unwrap(), &Tensor::new(vec![out], t).unwrap()).unwrap();
        worst = worst.max(err);
    }
    let t = start.elapsed();
    outcome(
        loss_err < 1e-6 && worst < 1e-3 && within(t, 60),
        format!(
            "hand-computed losses max error {loss_err:.1e}; gradcheck max relative error {worst:.1e} on 3 nets ({:.1}s)",
            t.as_secs_f64()
        ),
    )
}

fn criterion_3() -> Outcome {
    const DRAWS: usize = 100_000;
    let start = Instant::now();
    let mut rng = stage_rng(3, "acceptance/masking");
    let mut ok = true;
    let mut notes = Vec::new();
    // n = 5, d = 128: the default shape
    let v = ConcatCode::new(vec![1.0; 640], 5, 128).unwrap();
    let expected = global_mask_count(640);
    let (mut global, mut exact, mut closed_hits) = (0usize, true, [0usize; 5]);
    let mut channel_draws = 0usize;
    for _ in 0..DRAWS {
        let m = sample_training_mask(&v, &mut rng);
        match m.policy {
            MaskPolicy::Global => {
                global += 1;
                exact &= m.values.iter().filter(|&&x| x == 0.0).count() == expected;
            }
            MaskPolicy::Channel(mask) => {
                channel_draws += 1;
                ok &= mask.open_count() > 0;
                for (i, hit) in closed_hits.iter_mut().enumerate() {
                    *hit += usize::from(!mask.is_open(i));
                }
            }
        }
    }
    let frac = global as f64 / DRAWS as f64;
    ok &= (frac - 0.8).abs() <= 0.01 && exact && expected == 64;
    let want5 = (0.5 - 0.5f64.powi(5)) / (1.0 - 0.5f64.powi(5));
    let dev5 = closed_hits
        .iter()
        .map(|&h| (h as f64 / channel_draws as f64 - want5).abs())
        .fold(0.0, f64::max);
    ok &= dev5 <= 0.02;
    notes.push(format!(
        "global fraction {frac:.4}, {expected} zeros per global draw: {exact}, n=5 closed marginal dev {dev5:.4}"
    ));
    // n = 2 under redraw semantics: TF, FT, TT each with probability 1/3
    let mut patterns: BTreeMap<String, usize> = BTreeMap::new();
    for _ in 0..DRAWS {
        *patterns.entry(draw_channel_mask(2, &mut rng).to_string()).or_default() += 1;
    }
    let dev2 = ["TT", "TF", "FT"]
        .iter()
        .map(|p| (patterns.get(*p).copied().unwrap_or(0) as f64 / DRAWS as f64 - 1.0 / 3.0).abs())
        .fold(0.0, f64::max);
    let never_closed = !patterns.contains_key("FF");
    ok &= dev2 <= 0.02 && never_closed;
    notes.push(format!("n=2 pattern dev {dev2:.4}, all-closed never drawn: {never_closed}"));
    // global masking picks positions uniformly
    let mut pos = vec![0usize; 640];
    for _ in 0..10_000 {
        for (p, &x) in pos.iter_mut().zip(&apply_global_mask(&v, &mut rng)) {
            *p += usize::from(x == 0.0);
        }
    }
    let pos_dev = pos.iter().map(|&c| (c as f64 / 1e4 - 0.1).abs()).fold(0.0, f64::max);
    ok &= pos_dev <= 0.01;
    notes.push(format!("per-position frequency dev {pos_dev:.4}"));
    let t = start.elapsed();
    outcome(ok && within(t, 30), format!("{} ({:.1}s)", notes.join("; "), t.as_secs_f64()))
}

struct Pretrained {
    instance: SgsmInstance,
    config: PipelineConfig,
    dir: tempfile::TempDir,
}

fn criterion_4() -> (Outcome, Option<Pretrained>) {
    let start = Instant::now();
    let config = PipelineConfig::default_five();
    let (unlabeled, _) = match synth_datasets(&config) {
        Ok(d) => d,
        Err(e) => return (outcome(false, format!("synthesis failed: {e}")), None),
    };
    let (instance, log) = match pretrain(&config, &unlabeled) {
        Ok(r) => r,
        Err(e) => return (outcome(false, format!("pre-training failed: {e}")), None),
    };
    let t = start.elapsed();
    let PretrainLog { compressors, mixer } = &log;
    let ratio = |h: &[f64], epoch: usize| h.get(epoch - 1).map_or(f64::NAN, |last| last / h[0]);
    let mut ok = compressors.len() == 5;
    let mut parts = Vec::new();
    for (id, h) in compressors {
        let r = ratio(h, 50);
        ok &= r < 0.5 && h.iter().all(|v| v.is_finite());
        parts.push(format!("{id} {r:.3}"));
    }
    let rm = ratio(mixer, 100);
    ok &= rm < 0.5 && mixer.iter().all(|v| v.is_finite());
    parts.push(format!("mixer {rm:.3}"));
    let dir = tempfile::tempdir().expect("temp dir");
    if let Err(e) = instance.save(dir.path()) {
        return (outcome(false, format!("saving the instance failed: {e}")), None);
    }
    (
        outcome(
            ok && within(t, 600),
            format!(
                "final/epoch-1 loss ratios: {}; all finite ({:.0}s)",
                parts.join(", "),
                t.as_secs_f64()
            ),
        ),
        Some(Pretrained { instance, config, dir }),
    )
}

fn task(config: &PipelineConfig, kind: GeneratorKind, seed: u64) -> LabeledDataset {
    let spec = SyntheticTaskSpec {
        kind,
        seed,
        ..SyntheticTaskSpec::default()
    };
    let set = synth::synth_task(&spec, config.input_length);
    let raw = RawDataset::from_rows(&set.signals, config.sample_rate).unwrap();
    LabeledDataset::new(raw, set.labels, set.class_count, format!("{}-seed{seed}", kind.name())).unwrap()
}

fn criterion_5(p: &Pretrained) -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (kind, method, need) in [
        (GeneratorKind::SpectralPeak, MethodId::Dft, 9),
        (GeneratorKind::WaveletBurst, MethodId::Dwt, 7),
    ] {
        let idx = p.config.method_index(&method).expect("registered");
        let (mut hits, mut ties, mut picks) = (0, 0, BTreeMap::<String, usize>::new());
        let mut lead = 0.0;
        for seed in 0..10u64 {
            let data = task(&p.config, kind, seed + 1);
            match run_selection(&p.instance, &data, None, seed, &p.config.classifier) {
                Ok(r) => {
                    hits += usize::from(r.best_mask.is_open(idx));
                    ties += usize::from(r.margin == 0.0);
                    let best = best_holdout(&r, idx, true);
                    lead += (best - best_holdout(&r, idx, false)) / 10.0;
                    *picks.entry(r.best_mask.to_string()).or_default() += 1;
                }
                Err(e) => return outcome(false, format!("{} selection failed: {e}", kind.name())),
            }
        }
        ok &= hits >= need;
        let picks: Vec<String> = picks.iter().map(|(m, c)| format!("{m}×{c}")).collect();
        parts.push(format!(
            "{}: F' opens {method} in {hits}/10 (need {need}); picks {}; {ties}/10 decided by tie-break; \
             mean lead of masks with {method} over masks without {lead:.3}",
            kind.name(),
            picks.join(" ")
        ));
    }
    let t = start.elapsed();
    outcome(ok, format!("{} ({:.0}s)", parts.join("; "), t.as_secs_f64()))
}

/// Reduced-scale six-channel registry with a class-informative external
/// channel in the last slot. The base task is noisy enough that the five
/// built-in channels do not saturate on their own.
const FUSION_TASK_NOISE: f64 = 2.0;

fn fusion_config(seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig::default_five();
    let external: MethodId = "external:prototype".parse().unwrap();
    cfg.methods.push(MethodSpec::new(external, cfg.input_length, 128).unwrap());
    cfg.code_length = 64;
    cfg.seed = seed;
    cfg.compressor.epochs = 20;
    cfg.mixer.epochs = 30;
    cfg.synth.unlabeled_samples = 600;
    cfg.synth.task = SyntheticTaskSpec {
        kind: GeneratorKind::EnvelopeShape,
        noise_stddev: FUSION_TASK_NOISE,
        seed: seed + 1,
        ..SyntheticTaskSpec::default()
    };
    cfg
}

fn best_holdout(r: &SelectionResult, channel: usize, open: bool) -> f64 {
    r.all_reports
        .iter()
        .filter(|s| s.mask.is_open(channel) == open)
        .map(|s| s.phi_holdout)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for seed in 0..5u64 {
        let cfg = fusion_config(seed);
        let run = || -> Result<SelectionResult, sgsm::pipeline::PipelineError> {
            let (unlabeled, labeled) = synth_datasets(&cfg)?;
            let (instance, _) = pretrain(&cfg, &unlabeled)?;
            run_selection(&instance, &labeled, None, seed, &cfg.classifier)
        };
        match run() {
            Ok(r) => {
                let with = best_holdout(&r, 5, true);
                let without = best_holdout(&r, 5, false);
                ok &= r.all_reports.len() == 63 && with >= without;
                parts.push(format!("seed {seed}: {with:.3} vs {without:.3} (F' {})", r.best_mask));
            }
            Err(e) => return outcome(false, format!("seed {seed} failed: {e}")),
        }
    }
    let t = start.elapsed();
    outcome(
        ok,
        format!(
            "best holdout with vs without the external channel, reduced scale: {} ({:.0}s)",
            parts.join("; "),
            t.as_secs_f64()
        ),
    )
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).expect("checkpoint dir") {
        let path = entry.expect("dir entry").path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        out.insert(name, fs::read(&path).expect("checkpoint bytes"));
    }
    out
}

fn criterion_7(p: &Pretrained) -> Outcome {
    let start = Instant::now();
    let before = snapshot(p.dir.path());
    let masks: Vec<MaskConfig> = ["TTTTT", "FFFTF", "TFFFF", "FTFFF"].iter().map(|m| m.parse().unwrap()).collect();
    let tasks = [
        task(&p.config, GeneratorKind::SpectralPeak, 101),
        task(&p.config, GeneratorKind::WaveletBurst, 102),
    ];
    let mut repeatable = true;
    for data in &tasks {
        let run = |instance: &SgsmInstance| {
            run_selection(instance, data, Some(&masks), 7, &p.config.classifier).map(|r| r.to_json())
        };
        let reloaded = match SgsmInstance::load(p.dir.path()) {
            Ok(i) => i,
            Err(e) => return outcome(false, format!("reloading the instance failed: {e}")),
        };
        match (run(&p.instance), run(&p.instance), run(&reloaded)) {
            (Ok(a), Ok(b), Ok(c)) => repeatable &= a == b && a == c,
            _ => return outcome(false, "selection failed"),
        }
    }
    let unchanged = snapshot(p.dir.path()) == before && SgsmInstance::load(p.dir.path()).ok().as_ref() == Some(&p.instance);
    let t = start.elapsed();
    outcome(
        unchanged && repeatable,
        format!(
            "{} checkpoint files byte-identical after two tasks: {unchanged}; reports repeatable (in memory and reloaded): {repeatable} ({:.0}s)",
            before.len(),
            t.as_secs_f64()
        ),
    )
}

fn criterion_8(p: &Pretrained) -> Outcome {
    let counts: Vec<usize> = (1..=6).map(|n| enumerate_masks(n).map_or(0, |m| m.len())).collect();
    let masks_ok = counts.iter().enumerate().all(|(i, &c)| c == (1 << (i + 1)) - 1);
    let d = p.instance.code_length();
    let codes_ok = d == 128 && p.instance.compressors().iter().all(|c| c.code_length() == 128);
    let data = task(&p.config, GeneratorKind::SpectralPeak, 5);
    let e = p.instance.embed(&data.raw, &MaskConfig::all_open(5));
    let shape = e.as_ref().map(|t| t.shape().to_vec()).unwrap_or_default();
    let embed_ok = shape == [data.raw.samples(), 5 * d] && p.instance.mixer().width() == 640;
    outcome(
        masks_ok && codes_ok && embed_ok,
        format!("d = {d}; embeddings {shape:?}; enumerate_masks(1..=6) = {counts:?}"),
    )
}

fn main() -> ExitCode {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |k: usize| wanted.is_empty() || wanted.contains(&k);
    let mut failed = 0;
    let mut report = |k: usize, o: Outcome| {
        failed += usize::from(!o.pass);
        println!("{} criterion {k}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    };
    for (k, f) in [(1, criterion_1 as fn() -> Outcome), (2, criterion_2), (3, criterion_3)] {
        if want(k) {
            report(k, f());
        }
    }
    if [4, 5, 7, 8].iter().any(|&k| want(k)) {
        let (o4, pre) = criterion_4();
        if want(4) {
            report(4, o4);
        }
        for (k, f) in [(5, criterion_5 as fn(&Pretrained) -> Outcome), (7, criterion_7), (8, criterion_8)] {
            if want(k) {
                let o = match &pre {
                    Some(p) => f(p),
                    None => outcome(false, "no pre-trained instance (criterion 4 errored)"),
                };
                report(k, o);
            }
        }
    }
    if want(6) {
        report(6, criterion_6());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
