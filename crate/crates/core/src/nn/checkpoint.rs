//! Checkpoints: one `<stem>.sgtf` file holding every parameter tensor in
//! order, plus a `<stem>.sgtf.json` manifest describing the networks.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{LayerSpec, Network, NnError, Shape, Tensor};
use crate::tensor_file::{self, TensorFileError};

pub const FORMAT: &str = "sgtf-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Tensor(#[from] TensorFileError),
    #[error("manifest {path}: {source}")]
    Manifest {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest {path} is malformed: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("manifest format {format:?} v{version} is not supported")]
    Format { format: String, version: u32 },
    #[error("checkpoint does not match its manifest: {0}")]
    Network(#[from] NnError),
    #[error("checkpoint has no network named {0:?}")]
    MissingNetwork(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkManifest {
    pub name: String,
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
    pub param_shapes: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub version: u32,
    pub role: String,
    pub seed: u64,
    pub epochs: usize,
    pub params_file: String,
    pub networks: Vec<NetworkManifest>,
    /// Role-specific fields (method id, code length, channel names, ...).
    pub metadata: serde_json::Value,
}

impl CheckpointManifest {
    pub fn network(&self, name: &str) -> Option<&NetworkManifest> {
        self.networks.iter().find(|n| n.name == name)
    }
}

pub fn params_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.sgtf"))
}

pub fn manifest_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.sgtf.json"))
}

/// Writes the parameter file and manifest for `nets`, in order.
pub fn save(
    dir: &Path,
    stem: &str,
    role: &str,
    seed: u64,
    epochs: usize,
    metadata: serde_json::Value,
    nets: &[(&str, &Network<f32>)],
) -> Result<CheckpointManifest, CheckpointError> {
    fs::create_dir_all(dir).map_err(|source| CheckpointError::Manifest {
        path: dir.display().to_string(),
        source,
    })?;
    let mut tensors = Vec::new();
    let mut networks = Vec::new();
    for (name, net) in nets {
        for (p, shape) in net.params().iter().zip(net.param_shapes()) {
            tensors.push(Tensor::from_parts(shape, p.to_vec()));
        }
        networks.push(NetworkManifest {
            name: (*name).to_string(),
            input: net.input_shape(),
            layers: net.specs(),
            param_shapes: net.param_shapes(),
        });
    }
    tensor_file::save_all(params_path(dir, stem), &tensors)?;
    let manifest = CheckpointManifest {
        format: FORMAT.into(),
        version: FORMAT_VERSION,
        role: role.into(),
        seed,
        epochs,
        params_file: format!("{stem}.sgtf"),
        networks,
        metadata,
    };
    let path = manifest_path(dir, stem);
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|source| CheckpointError::Json {
        path: path.display().to_string(),
        source,
    })?;
    text.push('\n');
    fs::write(&path, text).map_err(|source| CheckpointError::Manifest {
        path: path.display().to_string(),
        source,
    })?;
    Ok(manifest)
}

pub fn load_manifest(dir: &Path, stem: &str) -> Result<CheckpointManifest, CheckpointError> {
    let path = manifest_path(dir, stem);
    let text = fs::read_to_string(&path).map_err(|source| CheckpointError::Manifest {
        path: path.display().to_string(),
        source,
    })?;
    let m: CheckpointManifest = serde_json::from_str(&text).map_err(|source| CheckpointError::Json {
        path: path.display().to_string(),
        source,
    })?;
    if m.format != FORMAT || m.version != FORMAT_VERSION {
        return Err(CheckpointError::Format {
            format: m.format,
            version: m.version,
        });
    }
    Ok(m)
}

/// Networks of one checkpoint, by name, in saved order.
pub type NamedNetworks = Vec<(String, Network<f32>)>;

/// Loads a checkpoint, returning the manifest and its networks by name.
pub fn load(dir: &Path, stem: &str) -> Result<(CheckpointManifest, NamedNetworks), CheckpointError> {
    let manifest = load_manifest(dir, stem)?;
    let mut tensors = tensor_file::load_all(dir.join(&manifest.params_file))?.into_iter();
    let mut nets = Vec::new();
    for nm in &manifest.networks {
        let mut params = Vec::with_capacity(nm.param_shapes.len());
        for shape in &nm.param_shapes {
            let t = tensors.next().ok_or_else(|| {
                NnError::InvalidShape(format!("missing parameter tensor for {}", nm.name))
            })?;
            if t.shape() != shape.as_slice() {
                return Err(NnError::ShapeMismatch {
                    expected: format!("{shape:?}"),
                    found: format!("{:?}", t.shape()),
                }
                .into());
            }
            if t.data().iter().any(|v| !v.is_finite()) {
                return Err(NnError::NonFinite { index: 0 }.into());
            }
            params.push(t.into_data());
        }
        let net = Network::from_params(nm.input, &nm.layers, params)?;
        if net.param_shapes() != nm.param_shapes {
            return Err(NnError::InvalidShape(format!("{} parameter shapes", nm.name)).into());
        }
        nets.push((nm.name.clone(), net));
    }
    if tensors.next().is_some() {
        return Err(NnError::InvalidShape("extra tensors in parameter file".into()).into());
    }
    Ok((manifest, nets))
}

/// Removes and returns the network called `name`.
pub fn take_network(nets: &mut NamedNetworks, name: &str) -> Result<Network<f32>, CheckpointError> {
    let i = nets
        .iter()
        .position(|(n, _)| n == name)
        .ok_or_else(|| CheckpointError::MissingNetwork(name.into()))?;
    Ok(nets.remove(i).1)
}
