use super::{NnError, Scalar};

/// Dense row-major tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    /// Checked constructor: the shape must match the data and every value
    /// must be finite.
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self, NnError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(NnError::ShapeMismatch {
                expected: format!("{shape:?} ({expected} values)"),
                found: format!("{} values", data.len()),
            });
        }
        if shape.contains(&0) {
            return Err(NnError::InvalidShape(format!("{shape:?}")));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(NnError::NonFinite { index: i });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![T::zero(); n],
        }
    }

    /// Row-major matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, NnError> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(NnError::InvalidShape("ragged rows".into()));
        }
        Self::new(vec![rows.len(), width], rows.concat())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
        }
    }
}

impl<T> Tensor<T> {
    /// Unchecked constructor for internal use; panics if the shape and data
    /// disagree.
    pub fn from_parts(shape: Vec<usize>, data: Vec<T>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {shape:?} does not match {} values",
            data.len()
        );
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Number of rows along the leading axis.
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Values of row `i` along the leading axis.
    pub fn row(&self, i: usize) -> &[T] {
        let w = self.row_width();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn row_width(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        let w = self.row_width().max(1);
        self.data.chunks_exact(w)
    }
}
