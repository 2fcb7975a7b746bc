//! Layer stacks with exact reverse-mode gradients.
//!
//! Activations travel as `[batch × features]` row-major buffers. A
//! convolutional activation with `C` channels of length `L` is laid out as
//! `C·L` features per row (channel-major), so flattening into a dense layer
//! is free.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NnError, Scalar, Tensor};

/// Channel/length view of one sample's features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub channels: usize,
    pub length: usize,
}

impl Shape {
    pub fn flat(length: usize) -> Self {
        Self {
            channels: 1,
            length,
        }
    }

    pub fn features(self) -> usize {
        self.channels * self.length
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Linear {
        inputs: usize,
        outputs: usize,
    },
    /// Valid (unpadded) 1-D convolution.
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    Relu,
}

impl LayerSpec {
    /// Output shape for a given input shape, or an error if they do not fit.
    pub fn output_shape(&self, input: Shape) -> Result<Shape, NnError> {
        match *self {
            LayerSpec::Linear { inputs, outputs } => {
                if inputs == 0 || outputs == 0 {
                    return Err(NnError::InvalidShape(format!("{self:?}")));
                }
                if input.features() != inputs {
                    return Err(NnError::ShapeMismatch {
                        expected: format!("{inputs} features"),
                        found: format!("{} features", input.features()),
                    });
                }
                Ok(Shape::flat(outputs))
            }
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => {
                if in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0 {
                    return Err(NnError::InvalidShape(format!("{self:?}")));
                }
                if input.channels != in_channels || input.length < kernel {
                    return Err(NnError::ShapeMismatch {
                        expected: format!("{in_channels} channels of length >= {kernel}"),
                        found: format!("{} channels of length {}", input.channels, input.length),
                    });
                }
                Ok(Shape {
                    channels: out_channels,
                    length: (input.length - kernel) / stride + 1,
                })
            }
            LayerSpec::Relu => Ok(input),
        }
    }

    /// Shapes of the weight and bias tensors, if the layer has parameters.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerSpec::Linear { inputs, outputs } => vec![vec![outputs, inputs], vec![outputs]],
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![vec![out_channels, in_channels, kernel], vec![out_channels]],
            LayerSpec::Relu => Vec::new(),
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Linear { inputs, .. } => inputs,
            LayerSpec::Conv1d {
                in_channels, kernel, ..
            } => in_channels * kernel,
            LayerSpec::Relu => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Layer<T> {
    spec: LayerSpec,
    input: Shape,
    output: Shape,
    weight: Vec<T>,
    bias: Vec<T>,
}

/// An ordered stack of layers with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T = f32> {
    input: Shape,
    layers: Vec<Layer<T>>,
}

/// Activations recorded by [`Network::forward_traced`] for a backward pass.
#[derive(Debug)]
pub struct Trace<T> {
    batch: usize,
    /// `inputs[i]` is the input of layer `i`; the final entry is the output.
    values: Vec<Vec<T>>,
    /// im2col buffers for convolution layers.
    columns: Vec<Option<Vec<T>>>,
}

impl<T> Trace<T> {
    pub fn output(&self) -> &[T] {
        self.values.last().expect("trace always holds the input")
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Parameter gradients in [`Network::params`] order, plus the gradient with
/// respect to the network input when it was requested.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    pub params: Vec<Vec<T>>,
    pub input: Option<Vec<T>>,
}

fn shapes_of(input: Shape, specs: &[LayerSpec]) -> Result<Vec<(Shape, Shape)>, NnError> {
    let mut cur = input;
    let mut out = Vec::with_capacity(specs.len());
    for s in specs {
        let next = s.output_shape(cur)?;
        out.push((cur, next));
        cur = next;
    }
    Ok(out)
}

impl<T: Scalar> Network<T> {
    /// Builds a network with uniform(−a, a) weights and biases,
    /// `a = sqrt(1 / fan_in)`.
    pub fn new<R: Rng + ?Sized>(
        input: Shape,
        specs: &[LayerSpec],
        rng: &mut R,
    ) -> Result<Self, NnError> {
        if input.features() == 0 {
            return Err(NnError::InvalidShape(format!("{input:?}")));
        }
        let shapes = shapes_of(input, specs)?;
        let layers = specs
            .iter()
            .zip(shapes)
            .map(|(spec, (i, o))| {
                let bound = (1.0 / spec.fan_in().max(1) as f64).sqrt();
                let mut draw = |n: usize| -> Vec<T> {
                    (0..n)
                        .map(|_| T::of(rng.random_range(-bound..bound)))
                        .collect()
                };
                let ps = spec.param_shapes();
                let (weight, bias) = if ps.is_empty() {
                    (Vec::new(), Vec::new())
                } else {
                    let w = draw(ps[0].iter().product());
                    let b = draw(ps[1].iter().product());
                    (w, b)
                };
                Layer {
                    spec: *spec,
                    input: i,
                    output: o,
                    weight,
                    bias,
                }
            })
            .collect();
        Ok(Self { input, layers })
    }

    /// Rebuilds a network from explicit parameter tensors (weight then bias
    /// for each parameterised layer).
    pub fn from_params(
        input: Shape,
        specs: &[LayerSpec],
        params: Vec<Vec<T>>,
    ) -> Result<Self, NnError> {
        let shapes = shapes_of(input, specs)?;
        let mut params = params.into_iter();
        let mut layers = Vec::with_capacity(specs.len());
        for (spec, (i, o)) in specs.iter().zip(shapes) {
            let ps = spec.param_shapes();
            let (weight, bias) = if ps.is_empty() {
                (Vec::new(), Vec::new())
            } else {
                let mut take = |shape: &Vec<usize>| -> Result<Vec<T>, NnError> {
                    let v = params.next().ok_or_else(|| NnError::ShapeMismatch {
                        expected: format!("parameter of shape {shape:?}"),
                        found: "no more parameters".into(),
                    })?;
                    let n: usize = shape.iter().product();
                    if v.len() != n {
                        return Err(NnError::ShapeMismatch {
                            expected: format!("{n} values for {shape:?}"),
                            found: format!("{} values", v.len()),
                        });
                    }
                    Ok(v)
                };
                let w = take(&ps[0])?;
                let b = take(&ps[1])?;
                (w, b)
            };
            layers.push(Layer {
                spec: *spec,
                input: i,
                output: o,
                weight,
                bias,
            });
        }
        if params.next().is_some() {
            return Err(NnError::ShapeMismatch {
                expected: "exactly the declared parameters".into(),
                found: "extra parameter tensors".into(),
            });
        }
        Ok(Self { input, layers })
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    /// Output shape, known without running any data.
    pub fn output_shape(&self) -> Shape {
        self.layers.last().map_or(self.input, |l| l.output)
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        self.layers.iter().flat_map(|l| l.spec.param_shapes()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Parameter slices, weight then bias per parameterised layer.
    pub fn params(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .filter(|l| !l.weight.is_empty())
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .filter(|l| !l.weight.is_empty())
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let conv = |v: &Vec<T>| v.iter().map(|x| U::of(x.f64())).collect();
        Network {
            input: self.input,
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    spec: l.spec,
                    input: l.input,
                    output: l.output,
                    weight: conv(&l.weight),
                    bias: conv(&l.bias),
                })
                .collect(),
        }
    }

    fn batch_of(&self, input: &Tensor<T>) -> Result<usize, NnError> {
        let features = self.input.features();
        let ok_rank = match input.shape() {
            [f] => *f == features,
            [_, f] => *f == features,
            [_, c, l] => *c == self.input.channels && *l == self.input.length,
            _ => false,
        };
        if !ok_rank {
            return Err(NnError::ShapeMismatch {
                expected: format!(
                    "[batch, {features}] or [batch, {}, {}]",
                    self.input.channels, self.input.length
                ),
                found: format!("{:?}", input.shape()),
            });
        }
        Ok(if input.shape().len() == 1 { 1 } else { input.shape()[0] })
    }

    fn wrap_output(&self, input_rank: usize, batch: usize, data: Vec<T>) -> Tensor<T> {
        let out = self.output_shape();
        let shape = if input_rank == 1 {
            vec![out.features()]
        } else if out.channels > 1 {
            vec![batch, out.channels, out.length]
        } else {
            vec![batch, out.length]
        };
        Tensor::from_parts(shape, data)
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let batch = self.batch_of(input)?;
        let out = self.forward_batch(input.data(), batch);
        Ok(self.wrap_output(input.shape().len(), batch, out))
    }

    /// Forward pass over a `[batch × features]` buffer.
    pub fn forward_batch(&self, x: &[T], batch: usize) -> Vec<T> {
        assert_eq!(x.len(), batch * self.input.features());
        let mut cur = x.to_vec();
        for layer in &self.layers {
            cur = layer.forward(&cur, batch, None);
        }
        cur
    }

    pub fn forward_traced(&self, x: &[T], batch: usize) -> Trace<T> {
        assert_eq!(x.len(), batch * self.input.features());
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        let mut columns = Vec::with_capacity(self.layers.len());
        values.push(x.to_vec());
        for layer in &self.layers {
            let mut cols = None;
            let next = layer.forward(values.last().unwrap(), batch, Some(&mut cols));
            columns.push(cols);
            values.push(next);
        }
        Trace {
            batch,
            values,
            columns,
        }
    }

    /// Reverse-mode pass from the gradient of the loss with respect to the
    /// network output.
    pub fn backward_traced(&self, trace: &Trace<T>, out_grad: &[T], want_input: bool) -> Gradients<T> {
        let batch = trace.batch;
        assert_eq!(out_grad.len(), batch * self.output_shape().features());
        let mut grads: Vec<Vec<T>> = Vec::new();
        let mut upstream = out_grad.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let need_input = want_input || i > 0;
            let (g, down) = layer.backward(
                &trace.values[i],
                &trace.values[i + 1],
                trace.columns[i].as_deref(),
                &upstream,
                batch,
                need_input,
            );
            // pushed in reverse; flipped once at the end
            if let Some((gw, gb)) = g {
                grads.push(gb);
                grads.push(gw);
            }
            match down {
                Some(d) => upstream = d,
                None => break,
            }
        }
        grads.reverse();
        Gradients {
            params: grads,
            input: if want_input { Some(upstream) } else { None },
        }
    }

    /// Parameter gradients for `input` given `∂loss/∂output`.
    pub fn backward(&self, input: &Tensor<T>, loss_grad: &Tensor<T>) -> Result<Vec<Vec<T>>, NnError> {
        let batch = self.batch_of(input)?;
        let want = batch * self.output_shape().features();
        if loss_grad.len() != want {
            return Err(NnError::ShapeMismatch {
                expected: format!("{want} output gradient values"),
                found: format!("{:?}", loss_grad.shape()),
            });
        }
        let trace = self.forward_traced(input.data(), batch);
        Ok(self.backward_traced(&trace, loss_grad.data(), false).params)
    }
}

impl<T: Scalar> Layer<T> {
    fn forward(&self, x: &[T], batch: usize, keep_cols: Option<&mut Option<Vec<T>>>) -> Vec<T> {
        match self.spec {
            LayerSpec::Relu => x.iter().map(|&v| v.max(T::zero())).collect(),
            LayerSpec::Linear { inputs, outputs } => {
                let mut y = Vec::with_capacity(batch * outputs);
                for _ in 0..batch {
                    y.extend_from_slice(&self.bias);
                }
                // y[b, o] += Σ_i x[b, i] · w[o, i]
                T::gemm(
                    batch,
                    inputs,
                    outputs,
                    (x, inputs, 1),
                    (&self.weight, 1, inputs),
                    T::one(),
                    (&mut y, outputs, 1),
                );
                y
            }
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => {
                let lin = self.input.length;
                let lout = self.output.length;
                let span = batch * lout;
                let rows = in_channels * kernel;
                let mut cols = vec![T::zero(); rows * span];
                for b in 0..batch {
                    let xb = &x[b * in_channels * lin..(b + 1) * in_channels * lin];
                    for ci in 0..in_channels {
                        for kk in 0..kernel {
                            let row = &mut cols[(ci * kernel + kk) * span + b * lout..][..lout];
                            for (l, dst) in row.iter_mut().enumerate() {
                                *dst = xb[ci * lin + l * stride + kk];
                            }
                        }
                    }
                }
                let mut tmp = vec![T::zero(); out_channels * span];
                T::gemm(
                    out_channels,
                    rows,
                    span,
                    (&self.weight, rows, 1),
                    (&cols, span, 1),
                    T::zero(),
                    (&mut tmp, span, 1),
                );
                let mut y = vec![T::zero(); batch * out_channels * lout];
                for co in 0..out_channels {
                    let bias = self.bias[co];
                    for b in 0..batch {
                        let src = &tmp[co * span + b * lout..][..lout];
                        let dst = &mut y[(b * out_channels + co) * lout..][..lout];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d = *s + bias;
                        }
                    }
                }
                if let Some(slot) = keep_cols {
                    *slot = Some(cols);
                }
                y
            }
        }
    }

    /// Returns `((weight_grad, bias_grad), input_grad)`.
    #[allow(clippy::type_complexity)]
    fn backward(
        &self,
        x: &[T],
        y: &[T],
        cols: Option<&[T]>,
        dy: &[T],
        batch: usize,
        need_input: bool,
    ) -> (Option<(Vec<T>, Vec<T>)>, Option<Vec<T>>) {
        match self.spec {
            LayerSpec::Relu => {
                let dx = need_input.then(|| {
                    y.iter()
                        .zip(dy)
                        .map(|(&yi, &g)| if yi > T::zero() { g } else { T::zero() })
                        .collect()
                });
                (None, dx)
            }
            LayerSpec::Linear { inputs, outputs } => {
                let mut gw = vec![T::zero(); outputs * inputs];
                T::gemm(
                    outputs,
                    batch,
                    inputs,
                    (dy, 1, outputs),
                    (x, inputs, 1),
                    T::zero(),
                    (&mut gw, inputs, 1),
                );
                let mut gb = vec![T::zero(); outputs];
                for row in dy.chunks_exact(outputs) {
                    for (g, &d) in gb.iter_mut().zip(row) {
                        *g = *g + d;
                    }
                }
                let dx = need_input.then(|| {
                    let mut dx = vec![T::zero(); batch * inputs];
                    T::gemm(
                        batch,
                        outputs,
                        inputs,
                        (dy, outputs, 1),
                        (&self.weight, inputs, 1),
                        T::zero(),
                        (&mut dx, inputs, 1),
                    );
                    dx
                });
                (Some((gw, gb)), dx)
            }
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => {
                let cols = cols.expect("traced conv keeps its columns");
                let lin = self.input.length;
                let lout = self.output.length;
                let span = batch * lout;
                let rows = in_channels * kernel;
                // dy [b, co, l] -> dt [co, b*lout + l]
                let mut dt = vec![T::zero(); out_channels * span];
                let mut gb = vec![T::zero(); out_channels];
                for b in 0..batch {
                    for co in 0..out_channels {
                        let src = &dy[(b * out_channels + co) * lout..][..lout];
                        dt[co * span + b * lout..][..lout].copy_from_slice(src);
                        gb[co] = src.iter().fold(gb[co], |a, &v| a + v);
                    }
                }
                let mut gw = vec![T::zero(); out_channels * rows];
                T::gemm(
                    out_channels,
                    span,
                    rows,
                    (&dt, span, 1),
                    (cols, 1, span),
                    T::zero(),
                    (&mut gw, rows, 1),
                );
                let dx = need_input.then(|| {
                    let mut dcols = vec![T::zero(); rows * span];
                    T::gemm(
                        rows,
                        out_channels,
                        span,
                        (&self.weight, 1, rows),
                        (&dt, span, 1),
                        T::zero(),
                        (&mut dcols, span, 1),
                    );
                    let mut dx = vec![T::zero(); batch * in_channels * lin];
                    for b in 0..batch {
                        let dxb = &mut dx[b * in_channels * lin..][..in_channels * lin];
                        for ci in 0..in_channels {
                            for kk in 0..kernel {
                                let row = &dcols[(ci * kernel + kk) * span + b * lout..][..lout];
                                for (l, &g) in row.iter().enumerate() {
                                    let p = ci * lin + l * stride + kk;
                                    dxb[p] = dxb[p] + g;
                                }
                            }
                        }
                    }
                    dx
                });
                (Some((gw, gb)), dx)
            }
        }
    }
}
