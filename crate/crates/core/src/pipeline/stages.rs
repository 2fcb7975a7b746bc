//! The pipeline as separately runnable stages over a work directory, one
//! function per `sgsm` subcommand. Each stage reads what the previous one
//! wrote, so a run can stop and resume at any step.
//!
//! ```text
//! <work_dir>/data/           unlabeled.sgtf, task.sgtf, task.labels.json
//! <work_dir>/transformed/    <dataset>/<method>.sgtf
//! <work_dir>/checkpoints/    compressor_<method>.*, mixer.*, instance.json
//! <work_dir>/codes/          unlabeled.sgtf
//! <work_dir>/embeddings/     <objective>_<mask>.sgtf (+ .json sidecar)
//! <work_dir>/reports/        losses, <dataset>.selection.{json,txt}
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    concat_dataset, data_err, synth_datasets, train_mixer_stage, transform_method, write_embeddings,
    write_instance_manifest, write_losses, write_reports, LabeledDataset, PipelineConfig, PipelineError,
    RawDataset, SgsmInstance, WorkDir,
};
use crate::compressor::CompressorModel;
use crate::mixer::MaskConfig;
use crate::nn::Tensor;
use crate::selection::SelectionResult;
use crate::signal::{MethodId, TransformedSequence};
use crate::tensor_file;

/// Name of the unlabeled pre-training pool inside `data/`.
pub const UNLABELED: &str = "unlabeled";
/// Name of the default labeled task inside `data/`.
pub const TASK: &str = "task";

const COMPRESSOR_LOSSES: &str = "losses_compressors.json";
const MIXER_LOSSES: &str = "losses_mixer.json";

#[derive(Debug, Serialize, Deserialize)]
struct CompressorLoss {
    method: MethodId,
    losses: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MixerLoss {
    losses: Vec<f64>,
}

fn work(cfg: &PipelineConfig) -> WorkDir {
    WorkDir::new(&cfg.work_dir)
}

fn missing(path: &Path, hint: &str) -> PipelineError {
    data_err(format!("{} not found; {hint}", path.display()))
}

/// `synth`: writes the unlabeled pool and the labeled task.
pub fn synth(cfg: &PipelineConfig) -> Result<String, PipelineError> {
    let (unlabeled, task) = synth_datasets(cfg)?;
    let dir = work(cfg).data();
    unlabeled.save(&dir, UNLABELED)?;
    task.save(&dir, TASK)?;
    Ok(format!(
        "wrote {} unlabeled and {} labeled samples ({}) to {}",
        unlabeled.samples(),
        task.raw.samples(),
        task.objective,
        dir.display()
    ))
}

fn load_raw(cfg: &PipelineConfig, dataset: &str) -> Result<RawDataset, PipelineError> {
    let dir = work(cfg).data();
    let path = dir.join(format!("{dataset}.sgtf"));
    if !path.exists() {
        return Err(missing(&path, "run `sgsm synth` or place the dataset there"));
    }
    RawDataset::load(&dir, dataset, &cfg.methods, cfg.sample_rate)
}

fn load_labeled(cfg: &PipelineConfig, dataset: &str) -> Result<LabeledDataset, PipelineError> {
    let dir = work(cfg).data();
    let path = dir.join(format!("{dataset}.labels.json"));
    if !path.exists() {
        return Err(missing(&path, "a labeled dataset needs a labels file"));
    }
    LabeledDataset::load(&dir, dataset, &cfg.methods, cfg.sample_rate)
}

/// `transform`: applies every registered method to a dataset and writes one
/// `[N·S × L']` matrix per method.
pub fn transform(cfg: &PipelineConfig, dataset: &str) -> Result<String, PipelineError> {
    let data = load_raw(cfg, dataset)?;
    let dir = work(cfg).transformed().join(dataset);
    fs::create_dir_all(&dir).map_err(|e| PipelineError::stage("transform", format!("{}: {e}", dir.display())))?;
    for spec in &cfg.methods {
        let out = transform_method(cfg, spec, &data)?;
        let flat: Vec<f32> = out.iter().flat_map(|t| t.values.iter().copied()).collect();
        let t = Tensor::from_parts(vec![out.len(), spec.output_length], flat);
        tensor_file::save(dir.join(format!("{}.sgtf", spec.method_id.slug())), &t)
            .map_err(|e| PipelineError::stage("transform", e))?;
    }
    Ok(format!(
        "transformed {} sequences with {} methods into {}",
        data.sequence_count(),
        cfg.methods.len(),
        dir.display()
    ))
}

fn load_transformed(cfg: &PipelineConfig, dataset: &str) -> Result<Vec<Vec<TransformedSequence>>, PipelineError> {
    let dir = work(cfg).transformed().join(dataset);
    let mut rows = None;
    cfg.methods
        .iter()
        .map(|spec| {
            let path = dir.join(format!("{}.sgtf", spec.method_id.slug()));
            if !path.exists() {
                return Err(missing(&path, "run `sgsm transform` first"));
            }
            let t = tensor_file::load(&path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
            if t.shape().len() != 2 || t.shape()[1] != spec.output_length {
                return Err(data_err(format!(
                    "{} has shape {:?}, expected [M × {}]",
                    path.display(),
                    t.shape(),
                    spec.output_length
                )));
            }
            if *rows.get_or_insert(t.shape()[0]) != t.shape()[0] {
                return Err(data_err("transformed datasets disagree on the sample count"));
            }
            Ok((0..t.shape()[0])
                .map(|r| TransformedSequence {
                    values: t.row(r).to_vec(),
                    method_id: spec.method_id.clone(),
                    normalization_stats: None,
                })
                .collect())
        })
        .collect()
}

/// `train-compressors`: trains every compressor on the transformed
/// unlabeled pool, saves them and writes the concatenated codes.
pub fn train_compressors(cfg: &PipelineConfig) -> Result<String, PipelineError> {
    let transformed = load_transformed(cfg, UNLABELED)?;
    let (models, log) = super::train_compressors(cfg, &transformed)?;
    let w = work(cfg);
    for m in &models {
        m.save(&w.checkpoints()).map_err(|e| super::from_compressor(m.method_id(), e))?;
    }
    let codes = concat_dataset(&models, &transformed)?;
    let rows = transformed.first().map_or(0, Vec::len);
    let t = Tensor::from_parts(vec![rows, cfg.embedding_width()], codes);
    fs::create_dir_all(w.codes()).map_err(|e| PipelineError::stage("codes", e))?;
    tensor_file::save(w.codes().join(format!("{UNLABELED}.sgtf")), &t).map_err(|e| PipelineError::stage("codes", e))?;
    let doc: Vec<CompressorLoss> = log
        .into_iter()
        .map(|(method, losses)| CompressorLoss { method, losses })
        .collect();
    write_losses(&w.reports().join(COMPRESSOR_LOSSES), &doc)?;
    let mut msg = String::new();
    for l in &doc {
        let _ = writeln!(msg, "compressor {:<14} {}", l.method.to_string(), loss_span(&l.losses));
    }
    let _ = write!(msg, "codes [{rows} × {}] written to {}", cfg.embedding_width(), w.codes().display());
    Ok(msg)
}

fn loss_span(losses: &[f64]) -> String {
    match (losses.first(), losses.last()) {
        (Some(a), Some(b)) => format!("loss {a:.5} -> {b:.5} over {} epochs", losses.len()),
        _ => "no epochs".into(),
    }
}

/// `train-mixer`: trains the mixer on the stored codes and completes the
/// instance manifest.
pub fn train_mixer(cfg: &PipelineConfig) -> Result<String, PipelineError> {
    let w = work(cfg);
    let path = w.codes().join(format!("{UNLABELED}.sgtf"));
    if !path.exists() {
        return Err(missing(&path, "run `sgsm train-compressors` first"));
    }
    let codes = tensor_file::load(&path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    if codes.shape().len() != 2 || codes.shape()[1] != cfg.embedding_width() {
        return Err(data_err(format!(
            "{} has shape {:?}, expected [M × {}]",
            path.display(),
            codes.shape(),
            cfg.embedding_width()
        )));
    }
    let (mixer, losses) = train_mixer_stage(cfg, codes.data())?;
    mixer.save(&w.checkpoints()).map_err(super::from_mixer)?;
    write_instance_manifest(&w.checkpoints(), cfg)?;
    let msg = format!("mixer {}", loss_span(&losses));
    write_losses(&w.reports().join(MIXER_LOSSES), &MixerLoss { losses })?;
    Ok(msg)
}

fn load_instance(cfg: &PipelineConfig) -> Result<SgsmInstance, PipelineError> {
    let instance = SgsmInstance::load(&work(cfg).checkpoints())?;
    if instance.config().methods != cfg.methods || instance.code_length() != cfg.code_length {
        return Err(PipelineError::Config(
            "the trained instance was built with a different method registry".into(),
        ));
    }
    Ok(instance)
}

/// Loads the compressors alone, e.g. to inspect them before the mixer
/// exists.
pub fn load_compressors(cfg: &PipelineConfig) -> Result<Vec<CompressorModel>, PipelineError> {
    let dir = work(cfg).checkpoints();
    cfg.methods
        .iter()
        .map(|m| CompressorModel::load(&dir, &m.method_id).map_err(|e| super::from_compressor(&m.method_id, e)))
        .collect()
}

/// `embed`: embeds a labeled dataset under one mask.
pub fn embed(cfg: &PipelineConfig, dataset: &str, mask: &MaskConfig) -> Result<String, PipelineError> {
    let instance = load_instance(cfg)?;
    let data = load_labeled(cfg, dataset)?;
    let set = super::embed_dataset(&instance, &data, mask)?;
    let path = write_embeddings(&work(cfg).embeddings(), &instance, &set, mask)?;
    Ok(format!("embeddings [{} × {}] written to {}", set.len(), set.width(), path.display()))
}

/// `select`: sweeps the masks, writes the reports, then applies the
/// optional gates. Reports are written even when a gate fails.
pub fn select(
    cfg: &PipelineConfig,
    dataset: &str,
    masks: Option<&[MaskConfig]>,
    epsilon: Option<f64>,
    varsigma: Option<f64>,
) -> Result<SelectionResult, PipelineError> {
    let instance = load_instance(cfg)?;
    let data = load_labeled(cfg, dataset)?;
    let result = super::run_selection(&instance, &data, masks, cfg.seed, &cfg.classifier)?;
    write_reports(&work(cfg).reports(), &format!("{dataset}.selection"), &result)?;
    result.check_gates(epsilon, varsigma)?;
    Ok(result)
}

/// `report`: pre-training loss summary plus the stored selection table.
pub fn report(cfg: &PipelineConfig, dataset: &str) -> Result<String, PipelineError> {
    let reports = work(cfg).reports();
    let mut out = String::new();
    if let Ok(text) = fs::read_to_string(reports.join(COMPRESSOR_LOSSES)) {
        let doc: Vec<CompressorLoss> = serde_json::from_str(&text).map_err(data_err)?;
        for l in &doc {
            let _ = writeln!(out, "compressor {:<14} {}", l.method.to_string(), loss_span(&l.losses));
        }
    }
    if let Ok(text) = fs::read_to_string(reports.join(MIXER_LOSSES)) {
        let doc: MixerLoss = serde_json::from_str(&text).map_err(data_err)?;
        let _ = writeln!(out, "mixer {}", loss_span(&doc.losses));
    }
    let table = reports.join(format!("{dataset}.selection.txt"));
    match fs::read_to_string(&table) {
        Ok(text) => out.push_str(&text),
        Err(_) if !out.is_empty() => {
            let _ = writeln!(out, "no selection report for {dataset} yet");
        }
        Err(_) => return Err(missing(&table, "run `sgsm select` first")),
    }
    Ok(out)
}
