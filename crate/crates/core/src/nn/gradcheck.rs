//! Finite-difference verification of [`Network::backward_traced`].

use super::loss::batch_mse_cosine;
use super::{Network, NnError, Scalar, Tensor};

/// Central-difference step.
pub const STEP: f64 = 1e-4;
/// Gradients smaller than this are compared absolutely rather than relatively.
pub const REL_FLOOR: f64 = 1e-6;

fn batch_and_width(net: &Network<f64>, input: &Tensor<f64>, target: &Tensor<f64>) -> Result<usize, NnError> {
    let fin = net.input_shape().features();
    let fout = net.output_shape().features();
    if input.is_empty() || !input.len().is_multiple_of(fin) {
        return Err(NnError::ShapeMismatch {
            expected: format!("a multiple of {fin} input values"),
            found: format!("{:?}", input.shape()),
        });
    }
    let batch = input.len() / fin;
    if target.len() != batch * fout {
        return Err(NnError::ShapeMismatch {
            expected: format!("{} target values", batch * fout),
            found: format!("{:?}", target.shape()),
        });
    }
    Ok(batch)
}

fn loss_of(net: &Network<f64>, x: &[f64], batch: usize, target: &[f64]) -> f64 {
    let y = net.forward_batch(x, batch);
    batch_mse_cosine(&y, target, net.output_shape().features()).0
}

/// Backpropagated gradients of the mean MSE+cosine loss.
pub fn analytic_gradients(
    net: &Network<f64>,
    input: &Tensor<f64>,
    target: &Tensor<f64>,
) -> Result<Vec<Vec<f64>>, NnError> {
    let batch = batch_and_width(net, input, target)?;
    let trace = net.forward_traced(input.data(), batch);
    let (_, g) = batch_mse_cosine(trace.output(), target.data(), net.output_shape().features());
    Ok(net.backward_traced(&trace, &g, false).params)
}

/// Central finite differences of the same loss, one parameter at a time.
pub fn numeric_gradients(
    net: &Network<f64>,
    input: &Tensor<f64>,
    target: &Tensor<f64>,
) -> Result<Vec<Vec<f64>>, NnError> {
    let batch = batch_and_width(net, input, target)?;
    let mut probe = net.clone();
    let sizes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
    let mut out = Vec::with_capacity(sizes.len());
    for (pi, &n) in sizes.iter().enumerate() {
        let mut g = Vec::with_capacity(n);
        for j in 0..n {
            let orig = probe.params()[pi][j];
            probe.params_mut()[pi][j] = orig + STEP;
            let up = loss_of(&probe, input.data(), batch, target.data());
            probe.params_mut()[pi][j] = orig - STEP;
            let down = loss_of(&probe, input.data(), batch, target.data());
            probe.params_mut()[pi][j] = orig;
            g.push((up - down) / (2.0 * STEP));
        }
        out.push(g);
    }
    Ok(out)
}

/// `max |a − n| / max(|a|, |n|, REL_FLOOR)` over every entry.
pub fn max_relative_error(analytic: &[Vec<f64>], numeric: &[Vec<f64>]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .flatten()
        .zip(numeric.iter().flatten())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR))
        .fold(0.0, f64::max)
}

/// Compares backpropagation against finite differences over every
/// parameter. The network is promoted to `f64` first.
pub fn gradcheck<T: Scalar>(net: &Network<T>, input: &Tensor<T>, target: &Tensor<T>) -> Result<f64, NnError> {
    let net = net.cast::<f64>();
    let (x, t) = (input.cast::<f64>(), target.cast::<f64>());
    let a = analytic_gradients(&net, &x, &t)?;
    let n = numeric_gradients(&net, &x, &t)?;
    Ok(max_relative_error(&a, &n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LayerSpec, Shape};
    use crate::rng::stage_rng;
    use rand::Rng;

    fn small_net(seed: u64) -> (Network<f32>, Tensor<f32>, Tensor<f32>) {
        let mut rng = stage_rng(seed, "gradcheck");
        let net = Network::new(
            Shape::flat(12),
            &[
                LayerSpec::Conv1d { in_channels: 1, out_channels: 3, kernel: 3, stride: 2 },
                LayerSpec::Relu,
                LayerSpec::Linear { inputs: 15, outputs: 6 },
                LayerSpec::Relu,
                LayerSpec::Linear { inputs: 6, outputs: 4 },
            ],
            &mut rng,
        )
        .unwrap();
        let x: Vec<f32> = (0..3 * 12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t: Vec<f32> = (0..3 * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
        (net, Tensor::new(vec![3, 12], x).unwrap(), Tensor::new(vec![3, 4], t).unwrap())
    }

    #[test]
    fn backprop_matches_finite_differences() {
        for seed in 0..3 {
            let (net, x, t) = small_net(seed);
            let err = gradcheck(&net, &x, &t).unwrap();
            assert!(err < 1e-3, "seed {seed}: {err}");
        }
    }

    #[test]
    fn doubled_gradient_is_caught() {
        let (net, x, t) = small_net(7);
        let (net, x, t) = (net.cast::<f64>(), x.cast::<f64>(), t.cast::<f64>());
        let mut a = analytic_gradients(&net, &x, &t).unwrap();
        a.iter_mut().flatten().for_each(|v| *v *= 2.0);
        let n = numeric_gradients(&net, &x, &t).unwrap();
        assert!(max_relative_error(&a, &n) > 0.4);
    }

    #[test]
    fn degenerate_zero_case_stays_finite() {
        let (net, _, _) = small_net(1);
        let err = gradcheck(&net, &Tensor::zeros(vec![2, 12]), &Tensor::zeros(vec![2, 4])).unwrap();
        assert!(err.is_finite());
    }
}
