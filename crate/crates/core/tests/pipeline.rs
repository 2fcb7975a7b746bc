use std::fs;
use std::path::Path;

use sgsm::pipeline::{
    embed_dataset, pretrain, run_selection, synth, synth_datasets, write_reports, GeneratorKind, LabeledDataset,
    PipelineConfig, RawDataset, SyntheticTaskSpec,
};
use sgsm::signal::{dft_magnitude, MethodSpec};
use sgsm::{MaskConfig, SgsmInstance};

fn small(methods: &[&str]) -> PipelineConfig {
    let mut cfg = PipelineConfig::with_methods(methods).unwrap();
    cfg.input_length = 64;
    cfg.code_length = 16;
    cfg.methods = cfg
        .methods
        .iter()
        .map(|m| MethodSpec::natural(m.method_id.clone(), 64, &cfg.mel).unwrap())
        .collect();
    cfg.compressor.epochs = 3;
    cfg.mixer.epochs = 3;
    cfg.classifier.epochs = 30;
    cfg.synth.unlabeled_samples = 60;
    cfg.synth.task.class_count = 3;
    cfg.synth.task.samples_per_class = 10;
    cfg
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn five_methods_give_five_compressors_and_one_mixer() {
    let cfg = small(&["dft", "dwt", "raw", "hht", "periodogram"]);
    let (unlabeled, task) = synth_datasets(&cfg).unwrap();
    let (instance, log) = pretrain(&cfg, &unlabeled).unwrap();
    assert_eq!(log.compressors.len(), 5);
    assert_eq!(log.mixer.len(), 3);
    assert_eq!(instance.mixer().width(), 5 * 16);

    let dir = tempfile::tempdir().unwrap();
    instance.save(dir.path()).unwrap();
    let names: Vec<String> = files(dir.path()).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names.iter().filter(|n| n.starts_with("compressor_") && n.ends_with(".json")).count(), 5);
    assert_eq!(names.iter().filter(|n| n.starts_with("mixer") && n.ends_with(".json")).count(), 1);

    let e = embed_dataset(&instance, &task, &MaskConfig::all_open(5)).unwrap();
    assert_eq!(e.embeddings().shape(), &[30, 80]);
    assert_eq!(e.labels(), task.labels.as_slice());
}

#[test]
fn same_seed_same_bytes() {
    let cfg = small(&["dft", "raw"]);
    let (unlabeled, _) = synth_datasets(&cfg).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pretrain(&cfg, &unlabeled).unwrap().0.save(a.path()).unwrap();
    pretrain(&cfg, &unlabeled).unwrap().0.save(b.path()).unwrap();
    assert_eq!(files(a.path()), files(b.path()));

    let mut other = cfg.clone();
    other.seed = 99;
    let c = tempfile::tempdir().unwrap();
    pretrain(&other, &unlabeled).unwrap().0.save(c.path()).unwrap();
    assert_ne!(files(a.path()), files(c.path()));
}

#[test]
fn embedding_leaves_checkpoints_alone_and_masks_matter() {
    let cfg = small(&["dft", "dwt", "raw"]);
    let (unlabeled, task) = synth_datasets(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    pretrain(&cfg, &unlabeled).unwrap().0.save(dir.path()).unwrap();
    let before = files(dir.path());
    let mtimes = |d: &Path| -> Vec<_> {
        fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().metadata().unwrap().modified().unwrap())
            .collect()
    };
    let t0 = mtimes(dir.path());

    let instance = SgsmInstance::load(dir.path()).unwrap();
    let open = embed_dataset(&instance, &task, &"TTT".parse().unwrap()).unwrap();
    let dft_only = embed_dataset(&instance, &task, &"TFF".parse().unwrap()).unwrap();
    assert_ne!(open.embeddings(), dft_only.embeddings());
    run_selection(&instance, &task, None, 0, &cfg.classifier).unwrap();

    assert_eq!(files(dir.path()), before);
    assert_eq!(mtimes(dir.path()), t0);
}

#[test]
fn sweeps_every_subset_or_the_requested_ones() {
    let cfg = small(&["dft", "dwt", "raw", "periodogram"]);
    let (unlabeled, task) = synth_datasets(&cfg).unwrap();
    let (instance, _) = pretrain(&cfg, &unlabeled).unwrap();

    let all = run_selection(&instance, &task, None, 3, &cfg.classifier).unwrap();
    assert_eq!(all.all_reports.len(), 15);
    let masks: Vec<MaskConfig> = ["TTTT", "FFTF"].iter().map(|m| m.parse().unwrap()).collect();
    let two = run_selection(&instance, &task, Some(&masks), 3, &cfg.classifier).unwrap();
    assert_eq!(two.all_reports.len(), 2);
    assert_eq!(two.all_reports[0].mask, masks[0]);

    let dir = tempfile::tempdir().unwrap();
    let (json, txt) = write_reports(dir.path(), "sweep", &all).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(doc["masks"].as_array().unwrap().len(), 15);
    for key in ["objective", "best_mask", "margin", "gap", "seed"] {
        assert!(doc.get(key).is_some(), "{key}");
    }
    assert_eq!(fs::read_to_string(txt).unwrap(), all.to_table());
    // identical inputs give identical reports
    assert_eq!(run_selection(&instance, &task, None, 3, &cfg.classifier).unwrap(), all);
}

#[test]
fn length_mismatch_is_a_data_error() {
    let cfg = small(&["dft"]);
    let (unlabeled, _) = synth_datasets(&cfg).unwrap();
    let (instance, _) = pretrain(&cfg, &unlabeled).unwrap();
    let raw = RawDataset::from_rows(&[vec![0.1; 32], vec![0.2; 32]], None).unwrap();
    let data = LabeledDataset::new(raw, vec![0, 1], 2, "short").unwrap();
    let err = embed_dataset(&instance, &data, &MaskConfig::all_open(1)).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

fn nearest_centroid_accuracy(features: &[Vec<f64>], labels: &[usize], classes: usize) -> f64 {
    // even samples fit the centroids, odd samples are scored
    let dim = features[0].len();
    let mut centroids = vec![vec![0.0; dim]; classes];
    let mut counts = vec![0.0; classes];
    for (i, (f, &c)) in features.iter().zip(labels).enumerate() {
        if i % 2 == 0 {
            counts[c] += 1.0;
            for (a, v) in centroids[c].iter_mut().zip(f) {
                *a += v;
            }
        }
    }
    for (c, n) in centroids.iter_mut().zip(&counts) {
        c.iter_mut().for_each(|v| *v /= n);
    }
    let (mut right, mut total) = (0, 0);
    for (i, (f, &c)) in features.iter().zip(labels).enumerate() {
        if i % 2 == 1 {
            let dist = |m: &Vec<f64>| m.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let guess = (0..classes).min_by(|&a, &b| dist(&centroids[a]).total_cmp(&dist(&centroids[b]))).unwrap();
            right += usize::from(guess == c);
            total += 1;
        }
    }
    right as f64 / total as f64
}

#[test]
fn spectral_peak_labels_live_in_the_spectrum() {
    let spec = SyntheticTaskSpec {
        kind: GeneratorKind::SpectralPeak,
        noise_stddev: 0.3,
        samples_per_class: 40,
        ..SyntheticTaskSpec::default()
    };
    let set = synth::synth_task(&spec, 256);
    let raw: Vec<Vec<f64>> = set
        .signals
        .iter()
        .map(|x| x.iter().map(|&v| f64::from(v)).collect())
        .collect();
    let spectra: Vec<Vec<f64>> = raw.iter().map(|x| dft_magnitude(x)).collect();
    let raw_acc = nearest_centroid_accuracy(&raw, &set.labels, set.class_count);
    let dft_acc = nearest_centroid_accuracy(&spectra, &set.labels, set.class_count);
    assert!(raw_acc < dft_acc, "raw {raw_acc} vs dft {dft_acc}");
    assert!(dft_acc > 0.95);
}
