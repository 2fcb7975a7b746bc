//! Reconstruction and classification losses.

use super::{NnError, Scalar, Tensor};

/// Floor on `‖y‖·‖t‖` in the cosine term.
pub const COSINE_EPS: f64 = 1e-8;

/// `(1/L)·Σ(y−t)² + 1 − cos(y, t)` for one sample, with its gradient in `y`.
///
/// The cosine denominator is clamped at [`COSINE_EPS`]; when the clamp is
/// active it is treated as a constant.
pub fn mse_cosine<T: Scalar>(y: &[T], t: &[T]) -> (f64, Vec<T>) {
    assert_eq!(y.len(), t.len());
    let n = y.len() as f64;
    let (mut sq, mut dot, mut yy, mut tt) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in y.iter().zip(t) {
        let (a, b) = (a.f64(), b.f64());
        sq += (a - b) * (a - b);
        dot += a * b;
        yy += a * a;
        tt += b * b;
    }
    let norms = yy.sqrt() * tt.sqrt();
    let clamped = norms < COSINE_EPS;
    let denom = if clamped { COSINE_EPS } else { norms };
    let cos = dot / denom;
    let loss = sq / n + 1.0 - cos;
    let grad = y
        .iter()
        .zip(t)
        .map(|(&a, &b)| {
            let (a, b) = (a.f64(), b.f64());
            let dcos = if clamped {
                b / denom
            } else {
                b / denom - cos * a / yy
            };
            T::of(2.0 * (a - b) / n - dcos)
        })
        .collect();
    (loss, grad)
}

/// Loss and `∂loss/∂y` for tensors of identical shape, each treated as one
/// flattened sample.
pub fn mse_cosine_loss<T: Scalar>(y: &Tensor<T>, t: &Tensor<T>) -> Result<(f64, Tensor<T>), NnError> {
    if y.shape() != t.shape() {
        return Err(NnError::ShapeMismatch {
            expected: format!("{:?}", t.shape()),
            found: format!("{:?}", y.shape()),
        });
    }
    let (loss, grad) = mse_cosine(y.data(), t.data());
    Ok((loss, Tensor::from_parts(y.shape().to_vec(), grad)))
}

/// Arithmetic mean of the per-sample loss over a `[batch × width]` buffer.
///
/// The returned gradient already carries the `1/batch` factor.
pub fn batch_mse_cosine<T: Scalar>(y: &[T], t: &[T], width: usize) -> (f64, Vec<T>) {
    assert_eq!(y.len(), t.len());
    let batch = y.len() / width;
    let scale = 1.0 / batch as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(y.len());
    for (yr, tr) in y.chunks_exact(width).zip(t.chunks_exact(width)) {
        let (l, g) = mse_cosine(yr, tr);
        total += l;
        grad.extend(g.into_iter().map(|v| T::of(v.f64() * scale)));
    }
    (total * scale, grad)
}

/// Mean softmax cross-entropy over `[batch × classes]` logits.
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], labels: &[usize], classes: usize) -> (f64, Vec<T>) {
    assert_eq!(logits.len(), labels.len() * classes);
    let scale = 1.0 / labels.len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (row, &label) in logits.chunks_exact(classes).zip(labels) {
        let max = row.iter().map(|v| v.f64()).fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v.f64() - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        total += z.ln() - (row[label].f64() - max);
        for (c, e) in exps.iter().enumerate() {
            let p = e / z;
            let target = if c == label { 1.0 } else { 0.0 };
            grad.push(T::of((p - target) * scale));
        }
    }
    (total * scale, grad)
}
