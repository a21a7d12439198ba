//! Layer kit with exact manual backpropagation.
//!
//! Every layer implements a forward pass that records what its backward pass
//! needs into a [`TraceStep`], and a backward pass that consumes the step
//! plus an upstream gradient and returns the analytic input gradient (and
//! parameter gradients where the layer has parameters). Gradients are checked
//! against central finite differences in the test suite.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

/// Zero-padding policy for convolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// No padding; output shrinks by `kernel_size - 1` at stride 1.
    Valid,
    /// Zero-padded so `len_out == ceil(len_in / stride)`.
    Same,
}

/// Elementwise nonlinearity. Softmax normalizes over the whole tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationFn {
    Relu,
    Tanh,
    Sigmoid,
    Softmax,
    Linear,
}

impl ActivationFn {
    pub fn apply(self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        match self {
            ActivationFn::Relu => out.extend(input.iter().map(|&x| x.max(0.0))),
            ActivationFn::Tanh => out.extend(input.iter().map(|&x| x.tanh())),
            ActivationFn::Sigmoid => out.extend(input.iter().map(|&x| sigmoid(x))),
            ActivationFn::Linear => out.extend_from_slice(input),
            ActivationFn::Softmax => {
                let max = input.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for &x in input {
                    let e = (x - max).exp();
                    sum += e;
                    out.push(e);
                }
                for v in out.iter_mut() {
                    *v /= sum;
                }
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Architecture description of one layer, without parameters.
///
/// Serialized into model files and configs; instantiated into a [`Layer`]
/// with seeded He-style initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv1d {
        in_channels: usize,
        filters: usize,
        kernel_size: usize,
        stride: usize,
        padding: Padding,
    },
    MaxPool1d {
        pool_size: usize,
    },
    Dense {
        in_dim: usize,
        units: usize,
    },
    Activation {
        function: ActivationFn,
    },
    Dropout {
        rate: f64,
    },
    Flatten,
    Upsample1d {
        factor: usize,
    },
    Reshape {
        channels: usize,
        length: usize,
    },
}

impl LayerSpec {
    /// Whether this spec could have been drawn from the architecture search
    /// space (fixed filter/kernel/pool/dropout/unit grids). Manually built
    /// specs may use arbitrary positive values instead.
    pub fn in_search_space(&self) -> bool {
        match *self {
            LayerSpec::Conv1d {
                filters,
                kernel_size,
                stride,
                ..
            } => {
                [16, 32, 64, 128].contains(&filters)
                    && [8, 16, 32].contains(&kernel_size)
                    && stride == 1
            }
            LayerSpec::MaxPool1d { pool_size } => pool_size == 2,
            LayerSpec::Dense { units, .. } => [32, 64, 128, 256].contains(&units),
            LayerSpec::Activation { function } => function != ActivationFn::Linear,
            LayerSpec::Dropout { rate } => [0.1, 0.2, 0.3, 0.4, 0.5].contains(&rate),
            LayerSpec::Flatten | LayerSpec::Upsample1d { factor: 2 } => true,
            LayerSpec::Upsample1d { .. } => false,
            LayerSpec::Reshape { .. } => true,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            LayerSpec::Conv1d {
                in_channels,
                filters,
                kernel_size,
                stride,
                ..
            } => {
                if in_channels == 0 || filters == 0 || kernel_size == 0 {
                    return Err(Error::Parameter(
                        "conv1d dimensions must be positive".into(),
                    ));
                }
                if stride == 0 {
                    return Err(Error::Parameter("conv1d stride must be >= 1".into()));
                }
            }
            LayerSpec::MaxPool1d { pool_size } => {
                if pool_size == 0 {
                    return Err(Error::Parameter("pool size must be >= 1".into()));
                }
            }
            LayerSpec::Dense { in_dim, units } => {
                if in_dim == 0 || units == 0 {
                    return Err(Error::Parameter("dense dimensions must be positive".into()));
                }
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return Err(Error::Parameter(format!(
                        "dropout rate must be in [0, 1), got {rate}"
                    )));
                }
            }
            LayerSpec::Upsample1d { factor } => {
                if factor == 0 {
                    return Err(Error::Parameter("upsample factor must be >= 1".into()));
                }
            }
            LayerSpec::Reshape { channels, length } => {
                if channels == 0 || length == 0 {
                    return Err(Error::Parameter(
                        "reshape dimensions must be positive".into(),
                    ));
                }
            }
            LayerSpec::Activation { .. } | LayerSpec::Flatten => {}
        }
        Ok(())
    }
}

/// 1D convolution: input `[in_channels, len]` -> output `[filters, len_out]`.
/// Weights are `[filters, in_channels, kernel]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: Padding,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1d {
    /// Output length and left padding for an input of length `len_in`.
    pub(crate) fn geometry(&self, len_in: usize) -> Result<(usize, isize)> {
        match self.padding {
            Padding::Valid => {
                if self.kernel_size > len_in {
                    return Err(Error::Dimension(format!(
                        "kernel {} exceeds input length {} with valid padding",
                        self.kernel_size, len_in
                    )));
                }
                Ok(((len_in - self.kernel_size) / self.stride + 1, 0))
            }
            Padding::Same => {
                let len_out = len_in.div_ceil(self.stride);
                let span = (len_out - 1) * self.stride + self.kernel_size;
                let pad_total = span.saturating_sub(len_in);
                Ok((len_out, (pad_total / 2) as isize))
            }
        }
    }

    pub(crate) fn weight_at(&self, co: usize, ci: usize, k: usize) -> f64 {
        self.weights[(co * self.in_channels + ci) * self.kernel_size + k]
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        if input.rank() != 2 || input.channels() != self.in_channels {
            return Err(Error::Dimension(format!(
                "conv1d expects [{}, len], got {:?}",
                self.in_channels,
                input.shape()
            )));
        }
        let len_in = input.length();
        let (len_out, pad_left) = self.geometry(len_in)?;
        let mut out = vec![0.0; self.out_channels * len_out];
        for co in 0..self.out_channels {
            let row = &mut out[co * len_out..(co + 1) * len_out];
            row.fill(self.bias[co]);
            for ci in 0..self.in_channels {
                let x = input.channel(ci);
                let w0 = (co * self.in_channels + ci) * self.kernel_size;
                let w = &self.weights[w0..w0 + self.kernel_size];
                for (t, acc) in row.iter_mut().enumerate() {
                    let start = (t * self.stride) as isize - pad_left;
                    let mut sum = 0.0;
                    for (k, &wk) in w.iter().enumerate() {
                        let p = start + k as isize;
                        if p >= 0 && (p as usize) < len_in {
                            sum += wk * x[p as usize];
                        }
                    }
                    *acc += sum;
                }
            }
        }
        Tensor::from_vec(vec![self.out_channels, len_out], out)
    }

    pub fn backward(&self, input: &Tensor, upstream: &Tensor) -> Result<(Tensor, ParamGrads)> {
        let len_in = input.length();
        let (len_out, pad_left) = self.geometry(len_in)?;
        upstream.expect_shape(&[self.out_channels, len_out], "conv1d upstream gradient")?;

        let mut d_input = vec![0.0; self.in_channels * len_in];
        let mut d_weights = vec![0.0; self.weights.len()];
        let mut d_bias = vec![0.0; self.out_channels];

        for co in 0..self.out_channels {
            let g = upstream.channel(co);
            d_bias[co] = g.iter().sum();
            for ci in 0..self.in_channels {
                let x = input.channel(ci);
                let w0 = (co * self.in_channels + ci) * self.kernel_size;
                let dx = &mut d_input[ci * len_in..(ci + 1) * len_in];
                for (t, &gt) in g.iter().enumerate() {
                    let start = (t * self.stride) as isize - pad_left;
                    for k in 0..self.kernel_size {
                        let p = start + k as isize;
                        if p >= 0 && (p as usize) < len_in {
                            let p = p as usize;
                            d_weights[w0 + k] += gt * x[p];
                            dx[p] += gt * self.weight_at(co, ci, k);
                        }
                    }
                }
            }
        }

        Ok((
            Tensor::from_vec(vec![self.in_channels, len_in], d_input)?,
            ParamGrads {
                weights: d_weights,
                bias: d_bias,
            },
        ))
    }
}

/// Dense affine map on a rank-1 input. Weights are `[units, in_dim]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        input.expect_shape(&[self.in_dim], "dense input")?;
        let x = input.data();
        let mut out = Vec::with_capacity(self.out_dim);
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let sum: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            out.push(sum + self.bias[o]);
        }
        Tensor::from_vec(vec![self.out_dim], out)
    }

    pub fn backward(&self, input: &Tensor, upstream: &Tensor) -> Result<(Tensor, ParamGrads)> {
        input.expect_shape(&[self.in_dim], "dense input")?;
        upstream.expect_shape(&[self.out_dim], "dense upstream gradient")?;
        let x = input.data();
        let g = upstream.data();
        let mut d_input = vec![0.0; self.in_dim];
        let mut d_weights = vec![0.0; self.weights.len()];
        for o in 0..self.out_dim {
            let go = g[o];
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let drow = &mut d_weights[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                drow[i] = go * x[i];
                d_input[i] += go * row[i];
            }
        }
        Ok((
            Tensor::from_vec(vec![self.in_dim], d_input)?,
            ParamGrads {
                weights: d_weights,
                bias: g.to_vec(),
            },
        ))
    }
}

/// Gradients for one parameterized layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Whether dropout is active and losses are being accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Per-layer state recorded by the forward pass for the backward walk.
#[derive(Debug, Clone, PartialEq)]
pub enum Aux {
    None,
    /// Flat input index of each pooled maximum.
    PoolArgmax(Vec<usize>),
    /// Multiplier applied per element (0 or 1/(1-rate)).
    DropoutMask(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct TraceStep {
    pub input: Tensor,
    pub output: Tensor,
    pub aux: Aux,
}

/// Record of one forward pass through a [`Network`].
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn output(&self) -> Result<&Tensor> {
        self.steps
            .last()
            .map(|s| &s.output)
            .ok_or_else(|| Error::State("empty forward trace".into()))
    }
}

/// One layer with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv1d(Conv1d),
    MaxPool1d { pool_size: usize },
    Dense(Dense),
    Activation(ActivationFn),
    Dropout { rate: f64 },
    Flatten,
    Upsample1d { factor: usize },
    Reshape { channels: usize, length: usize },
}

impl Layer {
    /// Instantiates a spec; parameterized layers get seeded uniform
    /// He-style initialization (limit sqrt(6 / fan_in)), zero bias.
    pub fn from_spec(spec: &LayerSpec, rng: &mut ChaCha8Rng) -> Result<Layer> {
        spec.validate()?;
        Ok(match *spec {
            LayerSpec::Conv1d {
                in_channels,
                filters,
                kernel_size,
                stride,
                padding,
            } => {
                let fan_in = (in_channels * kernel_size) as f64;
                let limit = (6.0 / fan_in).sqrt();
                let weights = (0..filters * in_channels * kernel_size)
                    .map(|_| rng.gen_range(-limit..limit))
                    .collect();
                Layer::Conv1d(Conv1d {
                    in_channels,
                    out_channels: filters,
                    kernel_size,
                    stride,
                    padding,
                    weights,
                    bias: vec![0.0; filters],
                })
            }
            LayerSpec::Dense { in_dim, units } => {
                let limit = (6.0 / in_dim as f64).sqrt();
                let weights = (0..units * in_dim)
                    .map(|_| rng.gen_range(-limit..limit))
                    .collect();
                Layer::Dense(Dense {
                    in_dim,
                    out_dim: units,
                    weights,
                    bias: vec![0.0; units],
                })
            }
            LayerSpec::MaxPool1d { pool_size } => Layer::MaxPool1d { pool_size },
            LayerSpec::Activation { function } => Layer::Activation(function),
            LayerSpec::Dropout { rate } => Layer::Dropout { rate },
            LayerSpec::Flatten => Layer::Flatten,
            LayerSpec::Upsample1d { factor } => Layer::Upsample1d { factor },
            LayerSpec::Reshape { channels, length } => Layer::Reshape { channels, length },
        })
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Conv1d(c) => LayerSpec::Conv1d {
                in_channels: c.in_channels,
                filters: c.out_channels,
                kernel_size: c.kernel_size,
                stride: c.stride,
                padding: c.padding,
            },
            Layer::Dense(d) => LayerSpec::Dense {
                in_dim: d.in_dim,
                units: d.out_dim,
            },
            Layer::MaxPool1d { pool_size } => LayerSpec::MaxPool1d {
                pool_size: *pool_size,
            },
            Layer::Activation(f) => LayerSpec::Activation { function: *f },
            Layer::Dropout { rate } => LayerSpec::Dropout { rate: *rate },
            Layer::Flatten => LayerSpec::Flatten,
            Layer::Upsample1d { factor } => LayerSpec::Upsample1d { factor: *factor },
            Layer::Reshape { channels, length } => LayerSpec::Reshape {
                channels: *channels,
                length: *length,
            },
        }
    }

    pub fn forward(
        &self,
        input: &Tensor,
        mode: Mode,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Tensor, Aux)> {
        match self {
            Layer::Conv1d(c) => Ok((c.forward(input)?, Aux::None)),
            Layer::Dense(d) => Ok((d.forward(input)?, Aux::None)),
            Layer::MaxPool1d { pool_size } => maxpool_forward(input, *pool_size),
            Layer::Activation(f) => {
                let mut out = Vec::new();
                f.apply(input.data(), &mut out);
                Ok((
                    Tensor::from_vec(input.shape().to_vec(), out)?,
                    Aux::None,
                ))
            }
            Layer::Dropout { rate } => match mode {
                Mode::Infer => Ok((input.clone(), Aux::None)),
                Mode::Train => {
                    let rng = rng.ok_or_else(|| {
                        Error::State("dropout in training mode needs an RNG".into())
                    })?;
                    let keep = 1.0 - rate;
                    let mask: Vec<f64> = (0..input.len())
                        .map(|_| {
                            if rng.gen::<f64>() < *rate {
                                0.0
                            } else {
                                1.0 / keep
                            }
                        })
                        .collect();
                    let data: Vec<f64> = input
                        .data()
                        .iter()
                        .zip(&mask)
                        .map(|(x, m)| x * m)
                        .collect();
                    Ok((
                        Tensor::from_vec(input.shape().to_vec(), data)?,
                        Aux::DropoutMask(mask),
                    ))
                }
            },
            Layer::Flatten => Ok((input.reshaped(vec![input.len()])?, Aux::None)),
            Layer::Upsample1d { factor } => {
                let c = input.channels();
                let l = input.length();
                let mut out = Vec::with_capacity(c * l * factor);
                for ci in 0..c {
                    for &v in input.channel(ci) {
                        for _ in 0..*factor {
                            out.push(v);
                        }
                    }
                }
                Ok((Tensor::from_vec(vec![c, l * factor], out)?, Aux::None))
            }
            Layer::Reshape { channels, length } => Ok((
                input.reshaped(vec![*channels, *length])?,
                Aux::None,
            )),
        }
    }

    /// Reruns the forward pass using the recorded step (dropout replays its
    /// stored mask), so a trace can be verified layer by layer.
    pub fn replay(&self, step: &TraceStep) -> Result<Tensor> {
        match (self, &step.aux) {
            (Layer::Dropout { .. }, Aux::DropoutMask(mask)) => {
                let data: Vec<f64> = step
                    .input
                    .data()
                    .iter()
                    .zip(mask)
                    .map(|(x, m)| x * m)
                    .collect();
                Tensor::from_vec(step.input.shape().to_vec(), data)
            }
            _ => self.forward(&step.input, Mode::Infer, None).map(|(t, _)| t),
        }
    }

    pub fn backward(
        &self,
        step: &TraceStep,
        upstream: &Tensor,
    ) -> Result<(Tensor, Option<ParamGrads>)> {
        upstream.expect_shape(step.output.shape(), "upstream gradient")?;
        match self {
            Layer::Conv1d(c) => {
                let (dx, grads) = c.backward(&step.input, upstream)?;
                Ok((dx, Some(grads)))
            }
            Layer::Dense(d) => {
                let (dx, grads) = d.backward(&step.input, upstream)?;
                Ok((dx, Some(grads)))
            }
            Layer::MaxPool1d { .. } => {
                let Aux::PoolArgmax(argmax) = &step.aux else {
                    return Err(Error::State("max-pool backward without argmax trace".into()));
                };
                let mut dx = vec![0.0; step.input.len()];
                for (g, &src) in upstream.data().iter().zip(argmax) {
                    dx[src] += g;
                }
                Ok((Tensor::from_vec(step.input.shape().to_vec(), dx)?, None))
            }
            Layer::Activation(f) => {
                let x = step.input.data();
                let y = step.output.data();
                let g = upstream.data();
                let dx: Vec<f64> = match f {
                    ActivationFn::Relu => x
                        .iter()
                        .zip(g)
                        .map(|(&xi, &gi)| if xi > 0.0 { gi } else { 0.0 })
                        .collect(),
                    ActivationFn::Tanh => y.iter().zip(g).map(|(&yi, &gi)| gi * (1.0 - yi * yi)).collect(),
                    ActivationFn::Sigmoid => {
                        y.iter().zip(g).map(|(&yi, &gi)| gi * yi * (1.0 - yi)).collect()
                    }
                    ActivationFn::Linear => g.to_vec(),
                    ActivationFn::Softmax => {
                        let dot: f64 = y.iter().zip(g).map(|(yi, gi)| yi * gi).sum();
                        y.iter().zip(g).map(|(&yi, &gi)| yi * (gi - dot)).collect()
                    }
                };
                Ok((Tensor::from_vec(step.input.shape().to_vec(), dx)?, None))
            }
            Layer::Dropout { .. } => match &step.aux {
                Aux::DropoutMask(mask) => {
                    let dx: Vec<f64> = upstream.data().iter().zip(mask).map(|(g, m)| g * m).collect();
                    Ok((Tensor::from_vec(step.input.shape().to_vec(), dx)?, None))
                }
                // Inference mode: identity.
                _ => Ok((upstream.clone(), None)),
            },
            Layer::Flatten | Layer::Reshape { .. } => Ok((
                upstream.reshaped(step.input.shape().to_vec())?,
                None,
            )),
            Layer::Upsample1d { factor } => {
                let c = step.input.channels();
                let l = step.input.length();
                let mut dx = vec![0.0; c * l];
                let g = upstream.data();
                for ci in 0..c {
                    for s in 0..l {
                        let mut sum = 0.0;
                        for r in 0..*factor {
                            sum += g[ci * l * factor + s * factor + r];
                        }
                        dx[ci * l + s] = sum;
                    }
                }
                Ok((Tensor::from_vec(step.input.shape().to_vec(), dx)?, None))
            }
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Conv1d(c) => c.weights.len() + c.bias.len(),
            Layer::Dense(d) => d.weights.len() + d.bias.len(),
            _ => 0,
        }
    }

    pub fn append_params(&self, out: &mut Vec<f64>) {
        match self {
            Layer::Conv1d(c) => {
                out.extend_from_slice(&c.weights);
                out.extend_from_slice(&c.bias);
            }
            Layer::Dense(d) => {
                out.extend_from_slice(&d.weights);
                out.extend_from_slice(&d.bias);
            }
            _ => {}
        }
    }

    pub fn load_params(&mut self, source: &[f64]) -> Result<usize> {
        let needed = self.param_count();
        if source.len() < needed {
            return Err(Error::Dimension(format!(
                "parameter blob too short: layer needs {needed}, {} left",
                source.len()
            )));
        }
        match self {
            Layer::Conv1d(c) => {
                let nw = c.weights.len();
                c.weights.copy_from_slice(&source[..nw]);
                c.bias.copy_from_slice(&source[nw..needed]);
            }
            Layer::Dense(d) => {
                let nw = d.weights.len();
                d.weights.copy_from_slice(&source[..nw]);
                d.bias.copy_from_slice(&source[nw..needed]);
            }
            _ => {}
        }
        Ok(needed)
    }
}

fn maxpool_forward(input: &Tensor, pool_size: usize) -> Result<(Tensor, Aux)> {
    if input.rank() != 2 {
        return Err(Error::Dimension(format!(
            "max-pool expects [channels, len], got {:?}",
            input.shape()
        )));
    }
    let c = input.channels();
    let l = input.length();
    if l < pool_size {
        return Err(Error::Dimension(format!(
            "max-pool window {pool_size} exceeds input length {l}"
        )));
    }
    let l_out = l / pool_size;
    let mut out = Vec::with_capacity(c * l_out);
    let mut argmax = Vec::with_capacity(c * l_out);
    for ci in 0..c {
        let x = input.channel(ci);
        for t in 0..l_out {
            let base = t * pool_size;
            let mut best = x[base];
            let mut best_idx = base;
            // Ties keep the lowest index: strict comparison.
            for k in 1..pool_size {
                if x[base + k] > best {
                    best = x[base + k];
                    best_idx = base + k;
                }
            }
            out.push(best);
            argmax.push(ci * l + best_idx);
        }
    }
    Ok((
        Tensor::from_vec(vec![c, l_out], out)?,
        Aux::PoolArgmax(argmax),
    ))
}

/// Ordered layer stack with trace-based forward and backward passes.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn from_specs(specs: &[LayerSpec], rng: &mut ChaCha8Rng) -> Result<Network> {
        let layers = specs
            .iter()
            .map(|s| Layer::from_spec(s, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Network { layers })
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    /// Forward pass recording a full trace.
    pub fn forward_trace(
        &self,
        input: &Tensor,
        mode: Mode,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Trace> {
        let mut steps = Vec::with_capacity(self.layers.len());
        let mut current = input.clone();
        for layer in &self.layers {
            let (output, aux) = layer.forward(&current, mode, rng.as_deref_mut())?;
            steps.push(TraceStep {
                input: current,
                output: output.clone(),
                aux,
            });
            current = output;
        }
        Ok(Trace { steps })
    }

    /// Inference forward pass returning only the output.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let mut current = input.clone();
        for layer in &self.layers {
            let (output, _) = layer.forward(&current, Mode::Infer, None)?;
            current = output;
        }
        Ok(current)
    }

    /// Full backward walk; returns the input gradient and per-layer
    /// parameter gradients (None for parameter-free layers).
    pub fn backward(
        &self,
        trace: &Trace,
        upstream: &Tensor,
    ) -> Result<(Tensor, Vec<Option<ParamGrads>>)> {
        if trace.steps.len() != self.layers.len() {
            return Err(Error::State(format!(
                "trace has {} steps for {} layers",
                trace.steps.len(),
                self.layers.len()
            )));
        }
        let mut grad = upstream.clone();
        let mut param_grads: Vec<Option<ParamGrads>> = vec![None; self.layers.len()];
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let (dx, pg) = layer.backward(&trace.steps[idx], &grad)?;
            param_grads[idx] = pg;
            grad = dx;
        }
        Ok((grad, param_grads))
    }

    /// Backward walk that stops early: returns the gradient with respect to
    /// the *output* of layer `stop_layer` (no parameter gradients).
    pub fn backward_to(
        &self,
        trace: &Trace,
        upstream: &Tensor,
        stop_layer: usize,
    ) -> Result<Tensor> {
        if stop_layer >= self.layers.len() {
            return Err(Error::Parameter(format!(
                "stop layer {stop_layer} out of range ({} layers)",
                self.layers.len()
            )));
        }
        let mut grad = upstream.clone();
        for idx in ((stop_layer + 1)..self.layers.len()).rev() {
            let (dx, _) = self.layers[idx].backward(&trace.steps[idx], &grad)?;
            grad = dx;
        }
        Ok(grad)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn export_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            layer.append_params(&mut out);
        }
        out
    }

    pub fn import_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            offset += layer.load_params(&params[offset..])?;
        }
        Ok(())
    }

    /// Flattens per-layer gradients in the same order as `export_params`.
    pub fn flatten_grads(&self, grads: &[Option<ParamGrads>]) -> Result<Vec<f64>> {
        if grads.len() != self.layers.len() {
            return Err(Error::Dimension("gradient list length mismatch".into()));
        }
        let mut out = Vec::with_capacity(self.param_count());
        for (layer, pg) in self.layers.iter().zip(grads) {
            match (layer.param_count(), pg) {
                (0, _) => {}
                (_, Some(pg)) => {
                    out.extend_from_slice(&pg.weights);
                    out.extend_from_slice(&pg.bias);
                }
                (n, None) => out.extend(std::iter::repeat(0.0).take(n)),
            }
        }
        Ok(out)
    }

    /// Index of the last convolutional layer, if any.
    pub fn last_conv_index(&self) -> Option<usize> {
        self.layers
            .iter()
            .rposition(|l| matches!(l, Layer::Conv1d(_)))
    }
}
