use rayon::prelude::*;

use super::layers::*;
use super::{Scalar, Tensor4};
use crate::rng::SplitMix64;
use crate::{Error, Result};

/// Width of the hidden dense layer of the head.
pub const HIDDEN_UNITS: usize = 1024;

/// Number of output classes.
pub const CLASSES: usize = 2;

/// Trainable parameters of the head on top of a `c_feat`-channel feature map:
/// `c_feat·1024 + 1024` for the hidden layer plus `1024·2 + 2` for the output.
pub fn head_param_count(c_feat: u64) -> u64 {
    let hidden = HIDDEN_UNITS as u64;
    let classes = CLASSES as u64;
    c_feat * hidden + hidden + hidden * classes + classes
}

/// Shape of the network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub input_height: usize,
    pub input_width: usize,
    /// Output channels of each conv block.
    pub conv_channels: Vec<usize>,
    pub hidden: usize,
}

impl Architecture {
    /// Three blocks of 16/32/64 channels and the 1024-unit head.
    pub fn compact(input_height: usize, input_width: usize) -> Self {
        Self {
            input_height,
            input_width,
            conv_channels: vec![16, 32, 64],
            hidden: HIDDEN_UNITS,
        }
    }

    pub const INPUT_CHANNELS: usize = 3;

    pub fn feature_channels(&self) -> usize {
        self.conv_channels.last().copied().unwrap_or(Self::INPUT_CHANNELS)
    }

    /// `(height, width, channels)` entering each conv block.
    fn block_inputs(&self) -> Vec<(usize, usize, usize)> {
        let (mut h, mut w, mut c) = (self.input_height, self.input_width, Self::INPUT_CHANNELS);
        let mut dims = Vec::with_capacity(self.conv_channels.len());
        for &co in &self.conv_channels {
            dims.push((h, w, c));
            h /= 2;
            w /= 2;
            c = co;
        }
        dims
    }

    fn validate(&self) -> Result<()> {
        let shrink = 1usize << self.conv_channels.len();
        if self.input_height < shrink || self.input_width < shrink {
            return Err(Error::InvalidArgument(format!(
                "{}x{} input is too small for {} pooling stages",
                self.input_height,
                self.input_width,
                self.conv_channels.len()
            )));
        }
        if self.hidden == 0 || self.conv_channels.contains(&0) {
            return Err(Error::InvalidArgument("zero-width layer".into()));
        }
        Ok(())
    }

    /// Names and shapes of every parameter tensor, in storage order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let mut c_in = Self::INPUT_CHANNELS;
        for (i, &c_out) in self.conv_channels.iter().enumerate() {
            out.push((format!("conv{}.weight", i + 1), vec![3, 3, c_in, c_out]));
            out.push((format!("conv{}.bias", i + 1), vec![c_out]));
            c_in = c_out;
        }
        out.push(("dense1.weight".into(), vec![c_in, self.hidden]));
        out.push(("dense1.bias".into(), vec![self.hidden]));
        out.push(("dense2.weight".into(), vec![self.hidden, CLASSES]));
        out.push(("dense2.bias".into(), vec![CLASSES]));
        out
    }
}

/// A named parameter (or gradient) tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamTensor<F> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<F>,
}

/// All trainable tensors of the network, in [`Architecture::layout`] order.
/// Gradients use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<F> {
    pub arch: Architecture,
    pub tensors: Vec<ParamTensor<F>>,
}

impl<F: Scalar> ModelParams<F> {
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let tensors = arch
            .layout()
            .into_iter()
            .map(|(name, shape)| ParamTensor {
                data: vec![F::zero(); shape.iter().product()],
                name,
                shape,
            })
            .collect();
        Ok(Self { arch, tensors })
    }

    /// He-uniform weights for layers followed by ReLU, Glorot-uniform for the
    /// softmax layer, zero biases.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(arch)?;
        let mut rng = SplitMix64::new(seed);
        let last = params.tensors.len() - 2;
        for (i, t) in params.tensors.iter_mut().enumerate() {
            if !t.name.ends_with(".weight") {
                continue;
            }
            let fan_out = *t.shape.last().unwrap();
            let fan_in = t.data.len() / fan_out;
            let limit = if i == last {
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            } else {
                (6.0 / fan_in as f64).sqrt()
            };
            t.data.iter_mut().for_each(|v| *v = F::of(rng.uniform(-limit, limit)));
        }
        Ok(params)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            arch: self.arch.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| ParamTensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: vec![F::zero(); t.data.len()],
                })
                .collect(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.arch == other.arch
            && self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|(a, b)| a.shape == b.shape && a.data.len() == b.data.len())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, &y) in a.data.iter_mut().zip(&b.data) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: F) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|v| *v = *v * factor);
        }
    }

    pub fn cast<G: Scalar>(&self) -> ModelParams<G> {
        ModelParams {
            arch: self.arch.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| ParamTensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: t.data.iter().map(|v| G::of(v.as_f64())).collect(),
                })
                .collect(),
        }
    }

    fn conv(&self, i: usize) -> (&[F], &[F]) {
        (&self.tensors[2 * i].data, &self.tensors[2 * i + 1].data)
    }

    fn dense(&self, i: usize) -> (&[F], &[F]) {
        let k = 2 * self.arch.conv_channels.len() + 2 * i;
        (&self.tensors[k].data, &self.tensors[k + 1].data)
    }
}

/// Activations of one sample kept for the backward pass.
#[derive(Clone, Debug)]
pub(crate) struct SampleCache<F> {
    /// Input of each conv block.
    block_inputs: Vec<Vec<F>>,
    /// Post-ReLU conv output of each block (the pooling input).
    block_relu: Vec<Vec<F>>,
    pool_argmax: Vec<Vec<u32>>,
    features: Vec<F>,
    hidden: Vec<F>,
}

/// Everything [`backward`] needs from a [`forward`] call.
#[derive(Clone, Debug)]
pub struct ForwardCache<F> {
    arch: Architecture,
    samples: Vec<SampleCache<F>>,
}

impl<F> ForwardCache<F> {
    pub fn batch(&self) -> usize {
        self.samples.len()
    }
}

impl<F: Scalar> ForwardCache<F> {
    /// True when both passes took the same piecewise-linear branch everywhere:
    /// identical ReLU on/off masks and identical max-pool winners.
    ///
    /// Between two parameter vectors with the same pattern the loss is smooth,
    /// so a central difference across them is a valid gradient estimate.
    pub fn same_activation_pattern(&self, other: &ForwardCache<F>) -> bool {
        let on = |a: &[F], b: &[F]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (*x > F::zero()) == (*y > F::zero()));
        self.arch == other.arch
            && self.samples.len() == other.samples.len()
            && self.samples.iter().zip(&other.samples).all(|(s, o)| {
                s.pool_argmax == o.pool_argmax
                    && on(&s.hidden, &o.hidden)
                    && s.block_relu.len() == o.block_relu.len()
                    && s.block_relu.iter().zip(&o.block_relu).all(|(a, b)| on(a, b))
            })
    }
}

pub(crate) fn forward_sample<F: Scalar>(params: &ModelParams<F>, input: &[F]) -> (Vec<F>, SampleCache<F>) {
    let arch = &params.arch;
    let mut x = input.to_vec();
    let mut cache = SampleCache {
        block_inputs: Vec::with_capacity(arch.conv_channels.len()),
        block_relu: Vec::with_capacity(arch.conv_channels.len()),
        pool_argmax: Vec::with_capacity(arch.conv_channels.len()),
        features: Vec::new(),
        hidden: Vec::new(),
    };
    let dims = arch.block_inputs();
    for (i, &(h, w, c)) in dims.iter().enumerate() {
        let (wt, b) = params.conv(i);
        let mut y = conv3x3_forward(&x, h, w, c, wt, b);
        y.iter_mut().for_each(|v| *v = v.max(F::zero()));
        let (pooled, arg) = maxpool2_forward(&y, h, w, b.len());
        cache.block_inputs.push(std::mem::replace(&mut x, pooled));
        cache.block_relu.push(y);
        cache.pool_argmax.push(arg);
    }
    let (h, w) = dims
        .last()
        .map(|&(h, w, _)| (h / 2, w / 2))
        .unwrap_or((arch.input_height, arch.input_width));
    let features = global_avg_pool(&x, h * w, arch.feature_channels());
    let (w1, b1) = params.dense(0);
    let mut hidden = dense_forward(&features, w1, b1);
    hidden.iter_mut().for_each(|v| *v = v.max(F::zero()));
    let (w2, b2) = params.dense(1);
    let probs = softmax(&dense_forward(&hidden, w2, b2));
    cache.features = features;
    cache.hidden = hidden;
    (probs, cache)
}

/// Adds the gradient of `−Σ labels·ln(probs)` for one sample into `grads`,
/// scaled by `weight` (1/batch for a mean loss).
pub(crate) fn backward_sample<F: Scalar>(
    params: &ModelParams<F>,
    cache: &SampleCache<F>,
    probs: &[F],
    labels: &[F],
    weight: F,
    grads: &mut ModelParams<F>,
) {
    let arch = &params.arch;
    let n_conv = arch.conv_channels.len();
    // Softmax followed by cross-entropy: dL/dlogits = p − y.
    let dlogits: Vec<F> = probs.iter().zip(labels).map(|(&p, &y)| (p - y) * weight).collect();

    let (w2, _) = params.dense(1);
    let k2 = 2 * n_conv + 2;
    let (gw_tensors, gb_tensors) = grads.tensors.split_at_mut(k2 + 1);
    let mut dhidden = dense_backward(&cache.hidden, w2, &dlogits, &mut gw_tensors[k2].data, &mut gb_tensors[0].data);
    for (d, &h) in dhidden.iter_mut().zip(&cache.hidden) {
        if h <= F::zero() {
            *d = F::zero();
        }
    }

    let (w1, _) = params.dense(0);
    let k1 = 2 * n_conv;
    let (gw_tensors, gb_tensors) = grads.tensors.split_at_mut(k1 + 1);
    let dfeatures = dense_backward(&cache.features, w1, &dhidden, &mut gw_tensors[k1].data, &mut gb_tensors[0].data);

    let dims = arch.block_inputs();
    // Spread the pooled-feature gradient evenly over the last pooled map.
    let (lh, lw) = dims
        .last()
        .map(|&(h, w, _)| (h / 2, w / 2))
        .unwrap_or((arch.input_height, arch.input_width));
    let scale = F::one() / F::of((lh * lw) as f64);
    let mut dx: Vec<F> = (0..lh * lw).flat_map(|_| dfeatures.iter().map(|&g| g * scale)).collect();

    for i in (0..n_conv).rev() {
        let (h, w, c_in) = dims[i];
        let relu = &cache.block_relu[i];
        let mut dy = maxpool2_backward(&dx, &cache.pool_argmax[i], relu.len());
        for (d, &a) in dy.iter_mut().zip(relu) {
            if a <= F::zero() {
                *d = F::zero();
            }
        }
        let (wt, _) = params.conv(i);
        let (gw_tensors, gb_tensors) = grads.tensors.split_at_mut(2 * i + 1);
        let din = conv3x3_backward(
            &cache.block_inputs[i],
            h,
            w,
            c_in,
            wt,
            &dy,
            &mut gw_tensors[2 * i].data,
            &mut gb_tensors[0].data,
            i > 0,
        );
        if let Some(din) = din {
            dx = din;
        }
    }
}

fn check_batch<F: Scalar>(params: &ModelParams<F>, batch: &Tensor4<F>) -> Result<()> {
    let [_, h, w, c] = batch.shape();
    let arch = &params.arch;
    if (h, w, c) != (arch.input_height, arch.input_width, Architecture::INPUT_CHANNELS) {
        return Err(Error::ShapeMismatch(format!(
            "batch samples are {h}x{w}x{c}, network expects {}x{}x{}",
            arch.input_height,
            arch.input_width,
            Architecture::INPUT_CHANNELS
        )));
    }
    Ok(())
}

/// Class probabilities for every sample of `batch`, plus the cache for
/// [`backward`]. Samples are processed in parallel; results keep batch order.
pub fn forward<F: Scalar>(params: &ModelParams<F>, batch: &Tensor4<F>) -> Result<(Vec<[F; 2]>, ForwardCache<F>)> {
    check_batch(params, batch)?;
    let (probs, samples): (Vec<_>, Vec<_>) = (0..batch.batch())
        .into_par_iter()
        .map(|i| {
            let (p, cache) = forward_sample(params, batch.sample(i));
            ([p[0], p[1]], cache)
        })
        .unzip();
    Ok((
        probs,
        ForwardCache {
            arch: params.arch.clone(),
            samples,
        },
    ))
}

/// Mean cross-entropy of one-hot `labels` under `probs`, with each
/// probability clamped to `[1e-12, 1]` before the logarithm.
pub fn bce_loss<F: Scalar>(probs: &[[F; 2]], labels: &[[F; 2]]) -> Result<f64> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} probability rows vs {} label rows",
            probs.len(),
            labels.len()
        )));
    }
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(p, y)| {
            p.iter()
                .zip(y)
                .map(|(&pk, &yk)| -yk.as_f64() * pk.as_f64().clamp(1e-12, 1.0).ln())
                .sum::<f64>()
        })
        .sum();
    Ok(total / probs.len() as f64)
}

/// Gradient of [`bce_loss`] ∘ [`forward`] with respect to every parameter.
pub fn backward<F: Scalar>(
    params: &ModelParams<F>,
    cache: &ForwardCache<F>,
    probs: &[[F; 2]],
    labels: &[[F; 2]],
) -> Result<ModelParams<F>> {
    if cache.arch != params.arch {
        return Err(Error::StaleCache(format!(
            "cache built for {:?}, parameters are {:?}",
            cache.arch, params.arch
        )));
    }
    let n = cache.samples.len();
    if probs.len() != n || labels.len() != n || n == 0 {
        return Err(Error::ShapeMismatch(format!(
            "cache holds {n} samples, got {} probability rows and {} label rows",
            probs.len(),
            labels.len()
        )));
    }
    let weight = F::one() / F::of(n as f64);
    let partials: Vec<ModelParams<F>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut g = params.zeros_like();
            backward_sample(params, &cache.samples[i], &probs[i], &labels[i], weight, &mut g);
            g
        })
        .collect();
    // Fixed-order reduction keeps the sum independent of thread scheduling.
    let mut total = params.zeros_like();
    for g in &partials {
        total.add_assign(g);
    }
    Ok(total)
}

/// Argmax with ties resolved to class 0 (authentic).
pub fn predicted_class<F: Scalar>(probs: &[F; 2]) -> usize {
    usize::from(probs[1] > probs[0])
}
