//! Versioned JSON configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synth::{GeneratorKind, SyntheticTaskSpec};
use super::PipelineError;
use crate::compressor::DEFAULT_CODE_LENGTH;
use crate::nn::TrainConfig;
use crate::rng::derive_seed;
use crate::selection::ClassifierConfig;
use crate::signal::{MelSettings, MethodId, MethodSpec};

pub const SCHEMA_VERSION: u32 = 1;

/// A registered method: either its id string, which uses the natural output
/// length, or an object that sets the length explicitly. External channels
/// need the explicit form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MethodEntry {
    Id(MethodId),
    Sized { method: MethodId, output_length: usize },
}

impl MethodEntry {
    pub fn id(&self) -> &MethodId {
        match self {
            MethodEntry::Id(id) => id,
            MethodEntry::Sized { method, .. } => method,
        }
    }
}

/// Epochs, learning rate and batch size of one training stage. The seed is
/// derived from the pipeline seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTraining {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl StageTraining {
    pub fn with_seed(self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            seed,
        }
    }
}

impl From<TrainConfig> for StageTraining {
    fn from(c: TrainConfig) -> Self {
        Self {
            epochs: c.epochs,
            learning_rate: c.learning_rate,
            batch_size: c.batch_size,
        }
    }
}

/// Synthetic data settings used by the `synth` step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSettings {
    pub unlabeled_samples: usize,
    /// Generators mixed round-robin into the unlabeled set.
    pub unlabeled_kinds: Vec<GeneratorKind>,
    pub unlabeled_noise: f64,
    pub task: SyntheticTaskSpec,
    /// Fixes the class prototypes of synthetic external vectors, so every
    /// dataset sees the same external model.
    pub external_prototype_seed: u64,
    pub external_noise: f64,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self {
            unlabeled_samples: 2000,
            unlabeled_kinds: vec![
                GeneratorKind::SpectralPeak,
                GeneratorKind::EnvelopeShape,
                GeneratorKind::WaveletBurst,
            ],
            unlabeled_noise: 0.3,
            task: SyntheticTaskSpec::default(),
            external_prototype_seed: 0,
            external_noise: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    /// Relative paths resolve against the directory of the config file.
    pub work_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            work_dir: PathBuf::from("sgsm-work"),
        }
    }
}

/// On-disk form of [`PipelineConfig`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema: u32,
    pub methods: Vec<MethodEntry>,
    #[serde(default = "default_input_length")]
    pub input_length: usize,
    #[serde(default = "default_code_length")]
    pub code_length: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sample_rate: Option<f64>,
    #[serde(default)]
    pub mel: MelSettings,
    #[serde(default = "default_compressor")]
    pub compressor: StageTraining,
    #[serde(default = "default_mixer")]
    pub mixer: StageTraining,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub synth: SynthSettings,
    #[serde(default)]
    pub paths: Paths,
}

fn default_input_length() -> usize {
    256
}

fn default_code_length() -> usize {
    DEFAULT_CODE_LENGTH
}

fn default_compressor() -> StageTraining {
    TrainConfig::compressor_default().into()
}

fn default_mixer() -> StageTraining {
    TrainConfig::mixer_default().into()
}

/// The method set `F`, lengths, training settings and paths of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub methods: Vec<MethodSpec>,
    pub input_length: usize,
    pub code_length: usize,
    pub seed: u64,
    pub sample_rate: Option<f64>,
    pub mel: MelSettings,
    pub compressor: StageTraining,
    pub mixer: StageTraining,
    pub classifier: ClassifierConfig,
    pub synth: SynthSettings,
    pub work_dir: PathBuf,
}

fn config_err(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

impl PipelineConfig {
    /// Default settings for the given method ids, at `L = 256`, `d = 128`.
    pub fn with_methods(ids: &[&str]) -> Result<Self, PipelineError> {
        let methods = ids
            .iter()
            .map(|s| s.parse().map(MethodEntry::Id).map_err(|e| config_err(format!("{e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_file(ConfigFile {
            schema: SCHEMA_VERSION,
            methods,
            input_length: default_input_length(),
            code_length: default_code_length(),
            seed: 0,
            sample_rate: None,
            mel: MelSettings::default(),
            compressor: default_compressor(),
            mixer: default_mixer(),
            classifier: ClassifierConfig::default(),
            synth: SynthSettings::default(),
            paths: Paths::default(),
        })
    }

    /// The five-channel registry `dft, dwt, raw, hht, periodogram`.
    pub fn default_five() -> Self {
        Self::with_methods(&["dft", "dwt", "raw", "hht", "periodogram"]).expect("built-in registry is valid")
    }

    pub fn from_file(file: ConfigFile) -> Result<Self, PipelineError> {
        if file.schema != SCHEMA_VERSION {
            return Err(config_err(format!(
                "schema {} is not supported (expected {SCHEMA_VERSION})",
                file.schema
            )));
        }
        if file.methods.is_empty() {
            return Err(config_err("methods must not be empty"));
        }
        let mut methods = Vec::with_capacity(file.methods.len());
        for entry in &file.methods {
            if methods.iter().any(|m: &MethodSpec| &m.method_id == entry.id()) {
                return Err(config_err(format!("method {} is registered twice", entry.id())));
            }
            let spec = match entry {
                MethodEntry::Id(id) => MethodSpec::natural(id.clone(), file.input_length, &file.mel),
                MethodEntry::Sized { method, output_length } => {
                    MethodSpec::new(method.clone(), file.input_length, *output_length)
                }
            }
            .map_err(|e| config_err(format!("method {}: {e}", entry.id())))?;
            if spec.output_length <= file.code_length {
                return Err(config_err(format!(
                    "method {} outputs {} values; the code length {} must be smaller",
                    spec.method_id, spec.output_length, file.code_length
                )));
            }
            methods.push(spec);
        }
        if file.code_length == 0 {
            return Err(config_err("code_length must be positive"));
        }
        for (name, t) in [("compressor", file.compressor), ("mixer", file.mixer)] {
            t.with_seed(0)
                .validate()
                .map_err(|e| config_err(format!("{name}: {e}")))?;
        }
        if methods.len() > crate::selection::MAX_CHANNELS {
            return Err(config_err("at most 16 methods can be registered"));
        }
        let task = &file.synth.task;
        if task.class_count < 2 {
            return Err(config_err("synth.task.class_count must be at least 2"));
        }
        if !(task.noise_stddev >= 0.0 && file.synth.unlabeled_noise >= 0.0 && file.synth.external_noise >= 0.0) {
            return Err(config_err("noise levels must be non-negative"));
        }
        if file.synth.unlabeled_kinds.is_empty() {
            return Err(config_err("synth.unlabeled_kinds must not be empty"));
        }
        Ok(Self {
            methods,
            input_length: file.input_length,
            code_length: file.code_length,
            seed: file.seed,
            sample_rate: file.sample_rate,
            mel: file.mel,
            compressor: file.compressor,
            mixer: file.mixer,
            classifier: file.classifier,
            synth: file.synth,
            work_dir: file.paths.work_dir,
        })
    }

    pub fn to_file(&self) -> ConfigFile {
        ConfigFile {
            schema: SCHEMA_VERSION,
            methods: self
                .methods
                .iter()
                .map(|m| MethodEntry::Sized {
                    method: m.method_id.clone(),
                    output_length: m.output_length,
                })
                .collect(),
            input_length: self.input_length,
            code_length: self.code_length,
            seed: self.seed,
            sample_rate: self.sample_rate,
            mel: self.mel,
            compressor: self.compressor,
            mixer: self.mixer,
            classifier: self.classifier,
            synth: self.synth.clone(),
            paths: Paths {
                work_dir: self.work_dir.clone(),
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let file: ConfigFile = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        Self::from_file(file)
    }

    /// Reads a config file; a relative `work_dir` is anchored at the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if cfg.work_dir.is_relative() {
            if let Some(parent) = path.parent() {
                cfg.work_dir = parent.join(&cfg.work_dir);
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file()).expect("config serialises");
        s.push('\n');
        s
    }

    pub fn channel_count(&self) -> usize {
        self.methods.len()
    }

    /// `n·d`.
    pub fn embedding_width(&self) -> usize {
        self.methods.len() * self.code_length
    }

    pub fn external_methods(&self) -> impl Iterator<Item = &MethodSpec> {
        self.methods.iter().filter(|m| m.method_id.is_external())
    }

    pub fn method_index(&self, id: &MethodId) -> Option<usize> {
        self.methods.iter().position(|m| &m.method_id == id)
    }

    /// Training settings for one compressor, seeded from the pipeline seed.
    pub fn compressor_training(&self, id: &MethodId) -> TrainConfig {
        self.compressor
            .with_seed(derive_seed(self.seed, &format!("compressor/{}/train", id.slug())))
    }

    pub fn compressor_init_seed(&self, id: &MethodId) -> u64 {
        derive_seed(self.seed, &format!("compressor/{}/init", id.slug()))
    }

    pub fn mixer_training(&self) -> TrainConfig {
        self.mixer.with_seed(derive_seed(self.seed, "mixer/train"))
    }

    pub fn mixer_init_seed(&self) -> u64 {
        derive_seed(self.seed, "mixer/init")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = PipelineConfig::from_json(r#"{"schema": 1, "methods": ["dft", "raw"]}"#).unwrap();
        assert_eq!(c.input_length, 256);
        assert_eq!(c.code_length, 128);
        assert_eq!(c.methods[0].output_length, 129);
        assert_eq!(c.embedding_width(), 256);
        assert_eq!(c.compressor.epochs, 50);
        assert_eq!(c.mixer.batch_size, 128);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{"schema": 2, "methods": ["dft"]}"#,
            r#"{"schema": 1, "methods": []}"#,
            r#"{"schema": 1, "methods": ["fft"]}"#,
            r#"{"schema": 1, "methods": ["dft", "dft"]}"#,
            r#"{"schema": 1, "methods": ["external:a"]}"#,
            r#"{"schema": 1, "methods": ["dft"], "code_length": 129}"#,
            r#"{"schema": 1, "methods": ["dft"], "colour": 3}"#,
        ] {
            assert!(matches!(PipelineConfig::from_json(text), Err(PipelineError::Config(_))), "{text}");
        }
    }

    #[test]
    fn sized_entries_and_round_trip() {
        let c = PipelineConfig::from_json(
            r#"{"schema": 1, "methods": ["dft", {"method": "external:autofi", "output_length": 192}]}"#,
        )
        .unwrap();
        assert_eq!(c.methods[1].output_length, 192);
        assert_eq!(c.external_methods().count(), 1);
        let back = PipelineConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }
}
