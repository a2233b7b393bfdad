//! Channel-major tensors and the layer primitives the model is built
//! from: strided 1D convolution (cross-correlation with zero padding that
//! preserves ceil(len/stride)), ReLU, nearest-neighbor upsampling and
//! global average pooling, each with its exact backward pass.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// A `[channels, len]` feature map stored channel-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<T> {
    pub channels: usize,
    pub len: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(channels: usize, len: usize) -> Self {
        Tensor {
            channels,
            len,
            data: vec![T::zero(); channels * len],
        }
    }

    /// Build from per-channel sample vectors; all channels must be equally
    /// long.
    pub fn from_channels(channels: &[Vec<T>]) -> Self {
        let len = channels.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(channels.len() * len);
        for ch in channels {
            assert_eq!(ch.len(), len, "ragged channels");
            data.extend_from_slice(ch);
        }
        Tensor {
            channels: channels.len(),
            len,
            data,
        }
    }

    #[inline]
    pub fn get(&self, c: usize, i: usize) -> T {
        self.data[c * self.len + i]
    }

    #[inline]
    pub fn set(&mut self, c: usize, i: usize, v: T) {
        self.data[c * self.len + i] = v;
    }

    pub fn channel(&self, c: usize) -> &[T] {
        &self.data[c * self.len..(c + 1) * self.len]
    }

    /// First `len` samples of every channel.
    pub fn crop(&self, len: usize) -> Tensor<T> {
        assert!(len <= self.len);
        let mut out = Tensor::zeros(self.channels, len);
        for c in 0..self.channels {
            let src = &self.data[c * self.len..c * self.len + len];
            out.data[c * len..(c + 1) * len].copy_from_slice(src);
        }
        out
    }

    /// Zero-extend every channel to `len` samples.
    pub fn pad_to(&self, len: usize) -> Tensor<T> {
        assert!(len >= self.len);
        let mut out = Tensor::zeros(self.channels, len);
        for c in 0..self.channels {
            out.data[c * len..c * len + self.len]
                .copy_from_slice(&self.data[c * self.len..(c + 1) * self.len]);
        }
        out
    }
}

/// Strided 1D convolution parameters. Weights are `[out][in][kernel]`
/// flattened, applied as cross-correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Conv1d<T> {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        Conv1d {
            in_channels,
            out_channels,
            kernel,
            stride,
            weight: vec![T::zero(); out_channels * in_channels * kernel],
            bias: vec![T::zero(); out_channels],
        }
    }

    /// Uniform init over plus/minus the reciprocal square root of the
    /// fan-in, zero bias.
    pub fn init<R: rand::Rng>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        rng: &mut R,
    ) -> Self {
        let mut layer = Conv1d::zeros(in_channels, out_channels, kernel, stride);
        let bound = 1.0 / ((in_channels * kernel) as f64).sqrt();
        for w in layer.weight.iter_mut() {
            *w = T::cast(rng.random_range(-bound..bound));
        }
        layer
    }

    pub fn out_len(&self, in_len: usize) -> usize {
        in_len.div_ceil(self.stride)
    }

    fn pad_left(&self, in_len: usize) -> usize {
        let out_len = self.out_len(in_len);
        let total = ((out_len - 1) * self.stride + self.kernel).saturating_sub(in_len);
        total / 2
    }

    pub fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        assert_eq!(x.channels, self.in_channels, "input channel mismatch");
        let out_len = self.out_len(x.len);
        let pad_left = self.pad_left(x.len);
        let mut y = Tensor::zeros(self.out_channels, out_len);
        for o in 0..self.out_channels {
            for t in 0..out_len {
                let mut acc = self.bias[o];
                let base = t * self.stride;
                for i in 0..self.in_channels {
                    let w0 = (o * self.in_channels + i) * self.kernel;
                    let x0 = i * x.len;
                    for j in 0..self.kernel {
                        let p = base + j;
                        if p >= pad_left && p - pad_left < x.len {
                            acc += self.weight[w0 + j] * x.data[x0 + p - pad_left];
                        }
                    }
                }
                y.data[o * out_len + t] = acc;
            }
        }
        y
    }

    /// Accumulate weight and bias gradients into `grad` and return the
    /// gradient with respect to the input.
    pub fn backward(&self, x: &Tensor<T>, dy: &Tensor<T>, grad: &mut Conv1d<T>) -> Tensor<T> {
        assert_eq!(dy.channels, self.out_channels);
        assert_eq!(dy.len, self.out_len(x.len));
        let pad_left = self.pad_left(x.len);
        let mut dx = Tensor::zeros(self.in_channels, x.len);
        for o in 0..self.out_channels {
            for t in 0..dy.len {
                let g = dy.data[o * dy.len + t];
                if g == T::zero() {
                    continue;
                }
                grad.bias[o] += g;
                let base = t * self.stride;
                for i in 0..self.in_channels {
                    let w0 = (o * self.in_channels + i) * self.kernel;
                    let x0 = i * x.len;
                    for j in 0..self.kernel {
                        let p = base + j;
                        if p >= pad_left && p - pad_left < x.len {
                            let xi = x0 + p - pad_left;
                            grad.weight[w0 + j] += g * x.data[xi];
                            dx.data[xi] += g * self.weight[w0 + j];
                        }
                    }
                }
            }
        }
        dx
    }
}

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let mut y = x.clone();
    for v in y.data.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    y
}

/// Gradient passes only where the pre-activation was strictly positive.
pub fn relu_backward<T: Real>(pre: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    assert_eq!(pre.data.len(), dy.data.len());
    let mut dx = dy.clone();
    for (d, &p) in dx.data.iter_mut().zip(&pre.data) {
        if p <= T::zero() {
            *d = T::zero();
        }
    }
    dx
}

/// Nearest-neighbor doubling along time.
pub fn upsample2<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let mut y = Tensor::zeros(x.channels, x.len * 2);
    for c in 0..x.channels {
        for i in 0..x.len {
            let v = x.get(c, i);
            y.set(c, 2 * i, v);
            y.set(c, 2 * i + 1, v);
        }
    }
    y
}

pub fn upsample2_backward<T: Real>(dy: &Tensor<T>) -> Tensor<T> {
    debug_assert_eq!(dy.len % 2, 0);
    let mut dx = Tensor::zeros(dy.channels, dy.len / 2);
    for c in 0..dy.channels {
        for i in 0..dx.len {
            let v = dy.get(c, 2 * i) + dy.get(c, 2 * i + 1);
            dx.set(c, i, v);
        }
    }
    dx
}

/// Mean over time per channel.
pub fn gap<T: Real>(x: &Tensor<T>) -> Vec<T> {
    let n = T::cast(x.len as f64);
    (0..x.channels)
        .map(|c| x.channel(c).iter().copied().sum::<T>() / n)
        .collect()
}

pub fn gap_backward<T: Real>(dg: &[T], channels: usize, len: usize) -> Tensor<T> {
    assert_eq!(dg.len(), channels);
    let n = T::cast(len as f64);
    let mut dx = Tensor::zeros(channels, len);
    for (c, &g) in dg.iter().enumerate() {
        let v = g / n;
        for i in 0..len {
            dx.set(c, i, v);
        }
    }
    dx
}
