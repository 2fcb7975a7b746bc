use super::Scalar;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates for a list of parameter tensors.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(sizes: impl IntoIterator<Item = usize>) -> Self {
        let (first, second) = sizes
            .into_iter()
            .map(|n| (vec![T::zero(); n], vec![T::zero(); n]))
            .unzip();
        Self {
            step: 0,
            first,
            second,
        }
    }

    pub fn for_params(params: &[&[T]]) -> Self {
        Self::new(params.iter().map(|p| p.len()))
    }

    pub fn steps(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step<T: Scalar>(params: &mut [&mut [T]], grads: &[Vec<T>], state: &mut AdamState<T>, lr: f64) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.first.len());
    state.step += 1;
    let c1 = 1.0 - BETA1.powi(state.step as i32);
    let c2 = 1.0 - BETA2.powi(state.step as i32);
    let (b1, b2) = (T::of(BETA1), T::of(BETA2));
    let (one_b1, one_b2) = (T::of(1.0 - BETA1), T::of(1.0 - BETA2));
    let step_size = T::of(lr / c1);
    let inv_c2 = T::of(1.0 / c2);
    let eps = T::of(EPSILON);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        assert_eq!(p.len(), g.len());
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = b1 * m[i] + one_b1 * gi;
            v[i] = b2 * v[i] + one_b2 * gi * gi;
            p[i] = p[i] - step_size * m[i] / ((v[i] * inv_c2).sqrt() + eps);
        }
    }
}
