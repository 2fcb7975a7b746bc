//! The SGTF tensor file format.
//!
//! Layout (all integers little-endian):
//!
//! | bytes        | field                                  |
//! |--------------|----------------------------------------|
//! | 4            | magic `SGTF`                           |
//! | 1            | version, always `1`                    |
//! | 1            | dtype code, `1` = f32 little-endian    |
//! | 4            | `ndim` as u32                          |
//! | 8 × `ndim`   | dimensions as u64                      |
//! | 4 × product  | row-major payload                      |
//!
//! A file may hold several records back to back; checkpoints use this to
//! store one record per parameter tensor.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::nn::Tensor;

pub const MAGIC: &[u8; 4] = b"SGTF";
pub const VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 1;

#[derive(Debug, Error)]
pub enum TensorFileError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("i/o error: {0}")]
    Stream(#[from] std::io::Error),
    #[error("not an SGTF record (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported SGTF version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported SGTF dtype code {0}")]
    UnsupportedDtype(u8),
    #[error("SGTF record declares {0} elements, which does not fit in memory")]
    TooLarge(u128),
    #[error("file holds {found} records, expected {expected}")]
    RecordCount { expected: usize, found: usize },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TensorFileError + '_ {
    move |source| TensorFileError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_tensor<W: Write>(w: &mut W, t: &Tensor<f32>) -> Result<(), TensorFileError> {
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION, DTYPE_F32])?;
    w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
    for &d in t.shape() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(t.data().len() * 4);
    for v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads one record, or `None` at a clean end of stream.
pub fn read_tensor<R: Read>(r: &mut R) -> Result<Option<Tensor<f32>>, TensorFileError> {
    let mut magic = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        let n = r.read(&mut magic[got..])?;
        if n == 0 {
            if got == 0 {
                return Ok(None);
            }
            return Err(std::io::Error::from(std::io::ErrorKind::UnexpectedEof).into());
        }
        got += n;
    }
    if &magic != MAGIC {
        return Err(TensorFileError::BadMagic(magic));
    }
    let mut head = [0u8; 6];
    r.read_exact(&mut head)?;
    if head[0] != VERSION {
        return Err(TensorFileError::UnsupportedVersion(head[0]));
    }
    if head[1] != DTYPE_F32 {
        return Err(TensorFileError::UnsupportedDtype(head[1]));
    }
    let ndim = u32::from_le_bytes([head[2], head[3], head[4], head[5]]) as usize;
    let mut shape = Vec::with_capacity(ndim);
    let mut count: u128 = 1;
    for _ in 0..ndim {
        let mut d = [0u8; 8];
        r.read_exact(&mut d)?;
        let d = u64::from_le_bytes(d);
        count = count.saturating_mul(u128::from(d));
        shape.push(d as usize);
    }
    if count > (isize::MAX as u128) / 4 {
        return Err(TensorFileError::TooLarge(count));
    }
    let mut bytes = vec![0u8; count as usize * 4];
    r.read_exact(&mut bytes)?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Some(Tensor::from_parts(shape, data)))
}

pub fn save(path: impl AsRef<Path>, t: &Tensor<f32>) -> Result<(), TensorFileError> {
    save_all(path, std::slice::from_ref(t))
}

pub fn save_all(path: impl AsRef<Path>, tensors: &[Tensor<f32>]) -> Result<(), TensorFileError> {
    let path = path.as_ref();
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    for t in tensors {
        write_tensor(&mut w, t)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Loads a file that must contain exactly one record.
pub fn load(path: impl AsRef<Path>) -> Result<Tensor<f32>, TensorFileError> {
    let mut all = load_all(path)?;
    if all.len() != 1 {
        return Err(TensorFileError::RecordCount {
            expected: 1,
            found: all.len(),
        });
    }
    Ok(all.remove(0))
}

pub fn load_all(path: impl AsRef<Path>) -> Result<Vec<Tensor<f32>>, TensorFileError> {
    let path = path.as_ref();
    let f = File::open(path).map_err(io_err(path))?;
    let mut r = BufReader::new(f);
    let mut out = Vec::new();
    while let Some(t) = read_tensor(&mut r)? {
        out.push(t);
    }
    Ok(out)
}
