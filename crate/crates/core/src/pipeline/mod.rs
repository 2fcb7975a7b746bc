//! End-to-end orchestration: synthesise or load data, transform it with
//! every registered method, train the compressors and the mixer, embed
//! labeled tasks and run the subset sweep.
//!
//! All randomness derives from the configured root seed through named
//! stage streams, so a config, seed and dataset fix every output byte.

pub mod config;
pub mod stages;
pub mod synth;

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compressor::{train_compressor, CompressorError, CompressorModel};
use crate::mixer::{train_mixer, ConcatCode, MaskConfig, MixerError, MixerModel};
use crate::nn::Tensor;
use crate::selection::{
    enumerate_masks, select_best, ClassifierConfig, GateViolation, LabeledEmbeddingSet, MaskedEmbedder,
    SelectionError, SelectionResult,
};
use crate::signal::{adapt_external, apply_method_with, MethodId, MethodSpec, SignalSequence, TransformedSequence};
use crate::tensor_file;

pub use config::{ConfigFile, MethodEntry, PipelineConfig, StageTraining, SynthSettings};
pub use synth::{GeneratorKind, SyntheticSet, SyntheticTaskSpec};

/// Rows encoded per forward pass when computing codes.
const ENCODE_CHUNK: usize = 256;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{stage}: training diverged ({detail})")]
    Diverged { stage: String, detail: String },
    #[error("{stage}: {message}")]
    Stage { stage: String, message: String },
    #[error("selection gate failed: {0}")]
    Gate(#[from] GateViolation),
}

impl PipelineError {
    /// Process exit status: 2 config, 3 data, 4 divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data(_) => 3,
            PipelineError::Diverged { .. } => 4,
            PipelineError::Stage { .. } | PipelineError::Gate(_) => 1,
        }
    }

    fn stage(stage: impl Into<String>, e: impl Display) -> Self {
        PipelineError::Stage {
            stage: stage.into(),
            message: e.to_string(),
        }
    }
}

fn data_err(e: impl Display) -> PipelineError {
    PipelineError::Data(e.to_string())
}

fn from_compressor(id: &MethodId, e: CompressorError) -> PipelineError {
    let stage = format!("compressor {id}");
    match e {
        CompressorError::Diverged { epoch } => PipelineError::Diverged {
            stage,
            detail: format!("epoch {epoch}"),
        },
        other => PipelineError::stage(stage, other),
    }
}

fn from_mixer(e: MixerError) -> PipelineError {
    match e {
        MixerError::Diverged { epoch } => PipelineError::Diverged {
            stage: "mixer".into(),
            detail: format!("epoch {epoch}"),
        },
        other => PipelineError::stage("mixer", other),
    }
}

fn from_selection(e: SelectionError) -> PipelineError {
    match e {
        SelectionError::SmallClass { .. }
        | SelectionError::Label { .. }
        | SelectionError::TooFewSamples { .. }
        | SelectionError::RowCount { .. } => data_err(e),
        SelectionError::ChannelRange(_)
        | SelectionError::DuplicateMask(_)
        | SelectionError::MaskWidth { .. }
        | SelectionError::NoMasks => PipelineError::Config(e.to_string()),
        other => PipelineError::stage("selection", other),
    }
}

/// Raw sequences of one dataset, `[N × L]` or `[N × S × L]` for samples made
/// of `S` sequences, plus per-sample vectors for external channels.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    sequences: Tensor<f32>,
    sample_rate: Option<f64>,
    externals: BTreeMap<MethodId, Vec<Vec<f32>>>,
}

impl RawDataset {
    pub fn new(sequences: Tensor<f32>, sample_rate: Option<f64>) -> Result<Self, PipelineError> {
        if !(2..=3).contains(&sequences.shape().len()) {
            return Err(data_err(format!(
                "sequence tensors must be [N × L] or [N × S × L], found {:?}",
                sequences.shape()
            )));
        }
        if let Some(i) = sequences.data().iter().position(|v| !v.is_finite()) {
            return Err(data_err(format!("non-finite sample value at flat index {i}")));
        }
        Ok(Self {
            sequences,
            sample_rate,
            externals: BTreeMap::new(),
        })
    }

    pub fn from_rows(rows: &[Vec<f32>], sample_rate: Option<f64>) -> Result<Self, PipelineError> {
        let t = Tensor::from_rows(rows).map_err(data_err)?;
        Self::new(t, sample_rate)
    }

    /// Attaches one vector per sample for an external channel.
    pub fn with_external(mut self, id: MethodId, vectors: Vec<Vec<f32>>) -> Result<Self, PipelineError> {
        if !id.is_external() {
            return Err(data_err(format!("{id} is not an external channel")));
        }
        if vectors.len() != self.samples() {
            return Err(data_err(format!(
                "{id}: {} vectors for {} samples",
                vectors.len(),
                self.samples()
            )));
        }
        self.externals.insert(id, vectors);
        Ok(self)
    }

    pub fn samples(&self) -> usize {
        self.sequences.shape()[0]
    }

    pub fn sequences_per_sample(&self) -> usize {
        let s = self.sequences.shape();
        if s.len() == 3 {
            s[1]
        } else {
            1
        }
    }

    pub fn sequence_length(&self) -> usize {
        *self.sequences.shape().last().expect("rank checked")
    }

    /// Total sequences, `N·S`.
    pub fn sequence_count(&self) -> usize {
        self.samples() * self.sequences_per_sample()
    }

    /// Sequence `j` of the flattened `N·S` list.
    pub fn sequence(&self, j: usize) -> &[f32] {
        let l = self.sequence_length();
        &self.sequences.data()[j * l..(j + 1) * l]
    }

    pub fn sequences(&self) -> &Tensor<f32> {
        &self.sequences
    }

    pub fn sample_rate(&self) -> Option<f64> {
        self.sample_rate
    }

    pub fn external(&self, id: &MethodId) -> Option<&[Vec<f32>]> {
        self.externals.get(id).map(Vec::as_slice)
    }

    /// Writes `<name>.sgtf` and `<name>.<external-slug>.sgtf` under `dir`.
    pub fn save(&self, dir: &Path, name: &str) -> Result<(), PipelineError> {
        fs::create_dir_all(dir).map_err(|e| data_err(format!("{}: {e}", dir.display())))?;
        tensor_file::save(dir.join(format!("{name}.sgtf")), &self.sequences).map_err(data_err)?;
        for (id, vectors) in &self.externals {
            crate::signal::save_external_codes(dir.join(format!("{name}.{}.sgtf", id.slug())), vectors)
                .map_err(data_err)?;
        }
        Ok(())
    }

    /// Reads a dataset written by [`RawDataset::save`], loading external
    /// vectors for every external channel in `methods`.
    pub fn load(dir: &Path, name: &str, methods: &[MethodSpec], sample_rate: Option<f64>) -> Result<Self, PipelineError> {
        let path = dir.join(format!("{name}.sgtf"));
        let t = tensor_file::load(&path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        let mut data = Self::new(t, sample_rate)?;
        for m in methods.iter().filter(|m| m.method_id.is_external()) {
            let p = dir.join(format!("{name}.{}.sgtf", m.method_id.slug()));
            let v = crate::signal::load_external_codes(&p, m.output_length)
                .map_err(|e| data_err(format!("{}: {e}", p.display())))?;
            data = data.with_external(m.method_id.clone(), v)?;
        }
        Ok(data)
    }
}

/// A raw dataset with one label per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub raw: RawDataset,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub objective: String,
}

#[derive(Serialize, Deserialize)]
struct LabelFile {
    objective: String,
    class_count: usize,
    labels: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(raw: RawDataset, labels: Vec<usize>, class_count: usize, objective: impl Into<String>) -> Result<Self, PipelineError> {
        if labels.len() != raw.samples() {
            return Err(data_err(format!("{} labels for {} samples", labels.len(), raw.samples())));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= class_count) {
            return Err(data_err(format!("label {l} is not below the class count {class_count}")));
        }
        Ok(Self {
            raw,
            labels,
            class_count,
            objective: objective.into(),
        })
    }

    /// Writes the raw data plus `<name>.labels.json`.
    pub fn save(&self, dir: &Path, name: &str) -> Result<(), PipelineError> {
        self.raw.save(dir, name)?;
        let doc = LabelFile {
            objective: self.objective.clone(),
            class_count: self.class_count,
            labels: self.labels.clone(),
        };
        write_text(&dir.join(format!("{name}.labels.json")), &to_json(&doc)).map_err(data_err)
    }

    pub fn load(dir: &Path, name: &str, methods: &[MethodSpec], sample_rate: Option<f64>) -> Result<Self, PipelineError> {
        let raw = RawDataset::load(dir, name, methods, sample_rate)?;
        let path = dir.join(format!("{name}.labels.json"));
        let text = fs::read_to_string(&path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        let doc: LabelFile = serde_json::from_str(&text).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        Self::new(raw, doc.labels, doc.class_count, doc.objective)
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}

fn write_text(path: &Path, text: &str) -> Result<(), String> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| format!("{}: {e}", parent.display()))?;
    }
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Standard locations inside a work directory.
#[derive(Clone, Debug)]
pub struct WorkDir {
    root: PathBuf,
}

impl WorkDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn data(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn transformed(&self) -> PathBuf {
        self.root.join("transformed")
    }

    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }

    pub fn codes(&self) -> PathBuf {
        self.root.join("codes")
    }

    pub fn embeddings(&self) -> PathBuf {
        self.root.join("embeddings")
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }
}

/// Unlabeled pool and labeled task described by `cfg.synth`, with
/// synthetic vectors for every external channel.
pub fn synth_datasets(cfg: &PipelineConfig) -> Result<(RawDataset, LabeledDataset), PipelineError> {
    let s = &cfg.synth;
    let l = cfg.input_length;
    let pool = synth::synth_unlabeled(
        s.unlabeled_samples,
        &s.unlabeled_kinds,
        s.task.class_count,
        l,
        s.unlabeled_noise,
        cfg.seed,
    );
    let task = synth::synth_task(&s.task, l);
    let mut unlabeled = RawDataset::from_rows(&pool.signals, cfg.sample_rate)?;
    let mut labeled = RawDataset::from_rows(&task.signals, cfg.sample_rate)?;
    for m in cfg.external_methods() {
        let stage = format!("external/{}", m.method_id.slug());
        let seed_u = crate::rng::derive_seed(cfg.seed, &stage);
        let seed_t = crate::rng::derive_seed(s.task.seed, &stage);
        let ext = |labels: &[usize], seed| {
            synth::external_vectors(labels, m.output_length, s.external_noise, s.external_prototype_seed, seed)
        };
        unlabeled = unlabeled.with_external(m.method_id.clone(), ext(&pool.labels, seed_u))?;
        labeled = labeled.with_external(m.method_id.clone(), ext(&task.labels, seed_t))?;
    }
    let objective = format!("{}-{}class", s.task.kind.name(), task.class_count);
    let labeled = LabeledDataset::new(labeled, task.labels, task.class_count, objective)?;
    Ok((unlabeled, labeled))
}

/// Applies one registered method to every sequence of `data`.
pub fn transform_method(cfg: &PipelineConfig, spec: &MethodSpec, data: &RawDataset) -> Result<Vec<TransformedSequence>, PipelineError> {
    if data.sequence_length() != cfg.input_length {
        return Err(data_err(format!(
            "sequences have length {}, the config expects {}",
            data.sequence_length(),
            cfg.input_length
        )));
    }
    let s = data.sequences_per_sample();
    let stage = |e: crate::signal::SignalError| match e {
        crate::signal::SignalError::NonFinite { .. } | crate::signal::SignalError::LengthMismatch { .. } => data_err(e),
        other => PipelineError::stage(format!("transform {}", spec.method_id), other),
    };
    if spec.method_id.is_external() {
        let vectors = data
            .external(&spec.method_id)
            .ok_or_else(|| data_err(format!("no vectors supplied for {}", spec.method_id)))?;
        let mut out = Vec::with_capacity(data.sequence_count());
        for v in vectors {
            if v.len() != spec.output_length {
                return Err(data_err(format!(
                    "{} vectors have length {}, expected {}",
                    spec.method_id,
                    v.len(),
                    spec.output_length
                )));
            }
            let t = adapt_external(spec, v).map_err(stage)?;
            out.extend(std::iter::repeat_n(t, s));
        }
        return Ok(out);
    }
    (0..data.sequence_count())
        .map(|j| {
            let x = SignalSequence::new(data.sequence(j).to_vec(), data.sample_rate()).map_err(data_err)?;
            apply_method_with(spec, &x, &cfg.mel).map_err(stage)
        })
        .collect()
}

/// Every method's transformed dataset, in registry order.
pub fn transform_all(cfg: &PipelineConfig, data: &RawDataset) -> Result<Vec<Vec<TransformedSequence>>, PipelineError> {
    cfg.methods.iter().map(|m| transform_method(cfg, m, data)).collect()
}

/// Per-epoch mean losses of each compressor, in registry order.
pub type CompressorLosses = Vec<(MethodId, Vec<f64>)>;

/// Losses recorded while pre-training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainLog {
    pub compressors: CompressorLosses,
    pub mixer: Vec<f64>,
}

/// Trains one compressor per method on its transformed dataset.
pub fn train_compressors(
    cfg: &PipelineConfig,
    transformed: &[Vec<TransformedSequence>],
) -> Result<(Vec<CompressorModel>, CompressorLosses), PipelineError> {
    let mut models = Vec::with_capacity(cfg.methods.len());
    let mut log = Vec::with_capacity(cfg.methods.len());
    for (spec, data) in cfg.methods.iter().zip(transformed) {
        let id = &spec.method_id;
        let mut model = CompressorModel::new(id.clone(), spec.output_length, cfg.code_length, cfg.compressor_init_seed(id))
            .map_err(|e| from_compressor(id, e))?;
        let history = train_compressor(&mut model, data, &cfg.compressor_training(id)).map_err(|e| from_compressor(id, e))?;
        log.push((id.clone(), history));
        models.push(model);
    }
    Ok((models, log))
}

/// Concatenated codes `[M × n·d]` for per-method transformed datasets.
pub fn concat_dataset(compressors: &[CompressorModel], transformed: &[Vec<TransformedSequence>]) -> Result<Vec<f32>, PipelineError> {
    let rows = transformed.first().map_or(0, Vec::len);
    let d = compressors.first().map_or(0, CompressorModel::code_length);
    let width = compressors.len() * d;
    let mut out = vec![0.0f32; rows * width];
    for (c, (model, data)) in compressors.iter().zip(transformed).enumerate() {
        if data.len() != rows {
            return Err(data_err("methods produced different sample counts"));
        }
        let mut buf = Vec::with_capacity(ENCODE_CHUNK * model.input_length());
        for (k, chunk) in data.chunks(ENCODE_CHUNK).enumerate() {
            buf.clear();
            for t in chunk {
                if &t.method_id != model.method_id() {
                    return Err(from_compressor(
                        model.method_id(),
                        CompressorError::MethodMismatch {
                            expected: model.method_id().clone(),
                            found: t.method_id.clone(),
                        },
                    ));
                }
                buf.extend_from_slice(&t.values);
            }
            let codes = model
                .encode_batch(&buf, chunk.len())
                .map_err(|e| from_compressor(model.method_id(), e))?;
            for (r, code) in codes.chunks_exact(d).enumerate() {
                let row = k * ENCODE_CHUNK + r;
                out[row * width + c * d..row * width + (c + 1) * d].copy_from_slice(code);
            }
        }
    }
    Ok(out)
}

/// Splits a `[M × n·d]` buffer into [`ConcatCode`] rows.
pub fn concat_rows(codes: &[f32], channel_count: usize, code_length: usize) -> Vec<ConcatCode> {
    codes
        .chunks_exact(channel_count * code_length)
        .map(|r| ConcatCode::new(r.to_vec(), channel_count, code_length).expect("row width is n·d"))
        .collect()
}

pub fn train_mixer_stage(cfg: &PipelineConfig, codes: &[f32]) -> Result<(MixerModel, Vec<f64>), PipelineError> {
    let n = cfg.channel_count();
    let mut mixer = MixerModel::new(n, cfg.code_length, cfg.mixer_init_seed()).map_err(from_mixer)?;
    let rows = concat_rows(codes, n, cfg.code_length);
    let history = train_mixer(&mut mixer, &rows, &cfg.mixer_training()).map_err(from_mixer)?;
    Ok((mixer, history))
}

/// A pre-trained model: one compressor per registered method plus the
/// mixer. Frozen once trained; embedding never updates or rewrites it.
#[derive(Clone, Debug, PartialEq)]
pub struct SgsmInstance {
    config: PipelineConfig,
    compressors: Vec<CompressorModel>,
    mixer: MixerModel,
}

const INSTANCE_FILE: &str = "instance.json";

impl SgsmInstance {
    pub fn new(config: PipelineConfig, compressors: Vec<CompressorModel>, mixer: MixerModel) -> Result<Self, PipelineError> {
        if compressors.len() != config.methods.len()
            || compressors
                .iter()
                .zip(&config.methods)
                .any(|(c, m)| c.method_id() != &m.method_id || c.input_length() != m.output_length || c.code_length() != config.code_length)
        {
            return Err(PipelineError::Config("compressors do not match the method registry".into()));
        }
        if mixer.channel_count() != config.methods.len() || mixer.code_length() != config.code_length {
            return Err(PipelineError::Config("mixer width does not match n·d".into()));
        }
        Ok(Self {
            config,
            compressors,
            mixer,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn compressors(&self) -> &[CompressorModel] {
        &self.compressors
    }

    pub fn mixer(&self) -> &MixerModel {
        &self.mixer
    }

    pub fn channel_count(&self) -> usize {
        self.compressors.len()
    }

    pub fn code_length(&self) -> usize {
        self.config.code_length
    }

    /// Channel names in registry order.
    pub fn channels(&self) -> Vec<String> {
        self.config.methods.iter().map(|m| m.method_id.to_string()).collect()
    }

    /// Concatenated codes `[N·S × n·d]` for a raw dataset.
    pub fn codes(&self, data: &RawDataset) -> Result<Vec<f32>, PipelineError> {
        let transformed = transform_all(&self.config, data)?;
        concat_dataset(&self.compressors, &transformed)
    }

    /// Embeddings `[N × n·d]` under `mask`, averaged over the sequences of
    /// each sample.
    pub fn embed(&self, data: &RawDataset, mask: &MaskConfig) -> Result<Tensor<f32>, PipelineError> {
        let codes = self.codes(data)?;
        self.embed_codes(&codes, data.sequences_per_sample(), mask)
    }

    /// Embeddings from precomputed concatenated codes.
    pub fn embed_codes(&self, codes: &[f32], per_sample: usize, mask: &MaskConfig) -> Result<Tensor<f32>, PipelineError> {
        let width = self.mixer.width();
        let rows = codes.len() / width;
        let e = self.mixer.embed_batch(codes, rows, mask).map_err(|e| PipelineError::Config(e.to_string()))?;
        let samples = rows / per_sample;
        if per_sample == 1 {
            return Ok(Tensor::from_parts(vec![samples, width], e));
        }
        let mut out = Vec::with_capacity(samples * width);
        for group in e.chunks_exact(per_sample * width) {
            let mut acc = vec![0.0f64; width];
            for row in group.chunks_exact(width) {
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a += f64::from(v);
                }
            }
            out.extend(acc.into_iter().map(|a| (a / per_sample as f64) as f32));
        }
        Ok(Tensor::from_parts(vec![samples, width], out))
    }

    pub fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        fs::create_dir_all(dir).map_err(|e| PipelineError::stage("save", format!("{}: {e}", dir.display())))?;
        for c in &self.compressors {
            c.save(dir).map_err(|e| from_compressor(c.method_id(), e))?;
        }
        self.mixer.save(dir).map_err(from_mixer)?;
        write_instance_manifest(dir, &self.config)
    }

    /// Loads an instance saved by [`SgsmInstance::save`].
    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let path = dir.join(INSTANCE_FILE);
        let text = fs::read_to_string(&path)
            .map_err(|e| PipelineError::stage("load", format!("{} (has the model been trained?): {e}", path.display())))?;
        let config = PipelineConfig::from_json(&text)?;
        let compressors = config
            .methods
            .iter()
            .map(|m| CompressorModel::load(dir, &m.method_id).map_err(|e| from_compressor(&m.method_id, e)))
            .collect::<Result<Vec<_>, _>>()?;
        let mixer = MixerModel::load(dir).map_err(from_mixer)?;
        Self::new(config, compressors, mixer)
    }
}

/// Writes the `instance.json` manifest that [`SgsmInstance::load`] reads.
pub fn write_instance_manifest(dir: &Path, config: &PipelineConfig) -> Result<(), PipelineError> {
    write_text(&dir.join(INSTANCE_FILE), &config.to_json()).map_err(|e| PipelineError::stage("save", e))
}

/// Steps 1–4: transform the unlabeled set, train every compressor, build
/// the concatenation dataset and train the mixer. No labels are read.
pub fn pretrain(cfg: &PipelineConfig, unlabeled: &RawDataset) -> Result<(SgsmInstance, PretrainLog), PipelineError> {
    if unlabeled.samples() == 0 {
        return Err(data_err("the unlabeled dataset is empty"));
    }
    let transformed = transform_all(cfg, unlabeled)?;
    let (compressors, compressor_log) = train_compressors(cfg, &transformed)?;
    let codes = concat_dataset(&compressors, &transformed)?;
    let (mixer, mixer_log) = train_mixer_stage(cfg, &codes)?;
    let instance = SgsmInstance::new(cfg.clone(), compressors, mixer)?;
    Ok((
        instance,
        PretrainLog {
            compressors: compressor_log,
            mixer: mixer_log,
        },
    ))
}

/// A labeled task bound to a frozen instance. Codes are computed once;
/// each mask only reruns the mixer encoder.
pub struct TaskEmbedder<'a> {
    instance: &'a SgsmInstance,
    codes: Vec<f32>,
    per_sample: usize,
    labels: Vec<usize>,
    class_count: usize,
    objective: String,
}

impl<'a> TaskEmbedder<'a> {
    pub fn new(instance: &'a SgsmInstance, data: &LabeledDataset) -> Result<Self, PipelineError> {
        Ok(Self {
            instance,
            codes: instance.codes(&data.raw)?,
            per_sample: data.raw.sequences_per_sample(),
            labels: data.labels.clone(),
            class_count: data.class_count,
            objective: data.objective.clone(),
        })
    }
}

impl MaskedEmbedder for TaskEmbedder<'_> {
    fn channel_count(&self) -> usize {
        self.instance.channel_count()
    }

    fn embed_under(&self, mask: &MaskConfig) -> Result<LabeledEmbeddingSet, SelectionError> {
        let e = self
            .instance
            .embed_codes(&self.codes, self.per_sample, mask)
            .map_err(|e| SelectionError::Embedding(e.to_string()))?;
        LabeledEmbeddingSet::new(e, self.labels.clone(), self.class_count, self.objective.clone())
    }
}

/// Step 5 for one mask: embeddings of a labeled dataset.
pub fn embed_dataset(instance: &SgsmInstance, data: &LabeledDataset, mask: &MaskConfig) -> Result<LabeledEmbeddingSet, PipelineError> {
    if mask.len() != instance.channel_count() {
        return Err(PipelineError::Config(format!(
            "mask {mask} does not cover the {} registered channels",
            instance.channel_count()
        )));
    }
    TaskEmbedder::new(instance, data)?.embed_under(mask).map_err(from_selection)
}

/// Step 5 sweep: every requested mask (all `2ⁿ − 1` by default).
pub fn run_selection(
    instance: &SgsmInstance,
    data: &LabeledDataset,
    masks: Option<&[MaskConfig]>,
    seed: u64,
    classifier: &ClassifierConfig,
) -> Result<SelectionResult, PipelineError> {
    let all;
    let masks = match masks {
        Some(m) => m,
        None => {
            all = enumerate_masks(instance.channel_count()).map_err(from_selection)?;
            &all
        }
    };
    let embedder = TaskEmbedder::new(instance, data)?;
    select_best(&embedder, masks, seed, classifier).map_err(from_selection)
}

/// Writes `<stem>.json` and `<stem>.txt` into `dir`.
pub fn write_reports(dir: &Path, stem: &str, result: &SelectionResult) -> Result<(PathBuf, PathBuf), PipelineError> {
    let json = dir.join(format!("{stem}.json"));
    let txt = dir.join(format!("{stem}.txt"));
    write_text(&json, &result.to_json()).map_err(|e| PipelineError::stage("report", e))?;
    write_text(&txt, &result.to_table()).map_err(|e| PipelineError::stage("report", e))?;
    Ok((json, txt))
}

#[derive(Serialize)]
struct EmbeddingSidecar<'a> {
    mask: &'a MaskConfig,
    objective: &'a str,
    channels: Vec<String>,
    rows: usize,
    width: usize,
}

/// Writes an embedding matrix and its JSON sidecar recording the mask.
pub fn write_embeddings(
    dir: &Path,
    instance: &SgsmInstance,
    set: &LabeledEmbeddingSet,
    mask: &MaskConfig,
) -> Result<PathBuf, PipelineError> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::stage("embed", format!("{}: {e}", dir.display())))?;
    let stem = format!("{}_{mask}", set.objective());
    let path = dir.join(format!("{stem}.sgtf"));
    tensor_file::save(&path, set.embeddings()).map_err(|e| PipelineError::stage("embed", e))?;
    let sidecar = EmbeddingSidecar {
        mask,
        objective: set.objective(),
        channels: instance.channels(),
        rows: set.len(),
        width: set.width(),
    };
    write_text(&dir.join(format!("{stem}.sgtf.json")), &to_json(&sidecar)).map_err(|e| PipelineError::stage("embed", e))?;
    Ok(path)
}

/// Writes per-stage loss histories as JSON.
pub fn write_losses(path: &Path, losses: &impl Serialize) -> Result<(), PipelineError> {
    write_text(path, &to_json(losses)).map_err(|e| PipelineError::stage("report", e))
}
