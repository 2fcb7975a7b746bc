use std::path::Path;

use super::SignalError;
use crate::nn::Tensor;
use crate::tensor_file;

/// Reads `[N × expected_length]` precomputed vectors from an SGTF file.
pub fn load_external_codes(path: impl AsRef<Path>, expected_length: usize) -> Result<Vec<Vec<f32>>, SignalError> {
    let t = tensor_file::load(path)?;
    if t.shape().len() != 2 || t.shape()[1] != expected_length {
        return Err(SignalError::ExternalShape {
            expected: expected_length,
            found: t.shape().to_vec(),
        });
    }
    if let Some(i) = t.data().iter().position(|v| !v.is_finite()) {
        return Err(SignalError::NonFinite { index: i });
    }
    Ok(t.iter_rows().map(<[f32]>::to_vec).collect())
}

pub fn save_external_codes(path: impl AsRef<Path>, vectors: &[Vec<f32>]) -> Result<(), SignalError> {
    let width = vectors.first().map_or(0, Vec::len);
    if vectors.iter().any(|v| v.len() != width) {
        return Err(SignalError::ExternalShape {
            expected: width,
            found: vec![vectors.len()],
        });
    }
    let t = Tensor::from_parts(vec![vectors.len(), width], vectors.concat());
    tensor_file::save(path, &t)?;
    Ok(())
}
