//! The model: a three-layer strided conv encoder, a mirrored
//! upsample-conv decoder for reconstruction, and a small conv + pooling
//! head for event probability.
//!
//! Layer dims are fixed: 4-16-32-64 channels down (kernels 7, 5, 3, all
//! stride 2), the mirror image up, and a 64-to-32 kernel-3 head followed
//! by global average pooling and one affine unit. The decoder output is
//! cropped to the input length, so any input of at least
//! [`MIN_INPUT_LEN`] samples round-trips shape-exactly.

use serde::{Deserialize, Serialize};

use super::conv::{
    gap, gap_backward, relu, relu_backward, upsample2, upsample2_backward, Conv1d, Tensor,
};
use super::NnError;
use crate::scalar::Real;
use crate::seed;

pub const INPUT_CHANNELS: usize = 4;
pub const ENCODER_CHANNELS: [usize; 4] = [4, 16, 32, 64];
pub const ENCODER_KERNELS: [usize; 3] = [7, 5, 3];
pub const HEAD_CHANNELS: usize = 32;
pub const HEAD_KERNEL: usize = 3;
pub const MIN_INPUT_LEN: usize = 32;

/// Complete parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    pub encoder: [Conv1d<T>; 3],
    pub decoder: [Conv1d<T>; 3],
    pub head_conv: Conv1d<T>,
    pub head_w: Vec<T>,
    pub head_b: T,
}

impl<T: Real> ModelParams<T> {
    /// Fresh parameters: uniform fan-in weights, zero biases. The draw
    /// order is fixed (encoder, decoder, head), so a seed pins every bit.
    pub fn init(seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let encoder = std::array::from_fn(|l| {
            Conv1d::init(
                ENCODER_CHANNELS[l],
                ENCODER_CHANNELS[l + 1],
                ENCODER_KERNELS[l],
                2,
                &mut rng,
            )
        });
        let decoder = std::array::from_fn(|l| {
            Conv1d::init(
                ENCODER_CHANNELS[3 - l],
                ENCODER_CHANNELS[2 - l],
                ENCODER_KERNELS[2 - l],
                1,
                &mut rng,
            )
        });
        let head_conv = Conv1d::init(ENCODER_CHANNELS[3], HEAD_CHANNELS, HEAD_KERNEL, 1, &mut rng);
        let bound = 1.0 / (HEAD_CHANNELS as f64).sqrt();
        let head_w = (0..HEAD_CHANNELS)
            .map(|_| T::cast(rand::Rng::random_range(&mut rng, -bound..bound)))
            .collect();
        ModelParams {
            encoder,
            decoder,
            head_conv,
            head_w,
            head_b: T::zero(),
        }
    }

    /// Same shapes, all zeros; the gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let conv_zero = |c: &Conv1d<T>| Conv1d::zeros(c.in_channels, c.out_channels, c.kernel, c.stride);
        ModelParams {
            encoder: std::array::from_fn(|l| conv_zero(&self.encoder[l])),
            decoder: std::array::from_fn(|l| conv_zero(&self.decoder[l])),
            head_conv: conv_zero(&self.head_conv),
            head_w: vec![T::zero(); self.head_w.len()],
            head_b: T::zero(),
        }
    }

    /// Compact layer-by-layer shape signature.
    pub fn architecture(&self) -> String {
        let conv = |c: &Conv1d<T>| format!("c{}-{}k{}s{}", c.in_channels, c.out_channels, c.kernel, c.stride);
        let enc: Vec<String> = self.encoder.iter().map(conv).collect();
        let dec: Vec<String> = self.decoder.iter().map(|c| format!("u2{}", conv(c))).collect();
        format!(
            "enc[{}] dec[{}] head[{} fc{}-1]",
            enc.join(","),
            dec.join(","),
            conv(&self.head_conv),
            self.head_w.len()
        )
    }

    /// FNV-1a hash of the architecture signature, hex.
    pub fn arch_hash(&self) -> String {
        format!("{:016x}", seed::fnv1a64(self.architecture().as_bytes()))
    }

    /// Check that every parameter vector matches its declared shape.
    pub fn validate(&self) -> Result<(), NnError> {
        let check = |c: &Conv1d<T>, name: &str| {
            if c.weight.len() != c.out_channels * c.in_channels * c.kernel {
                return Err(NnError::ShapeMismatch(format!(
                    "{name} weight holds {} values for {}x{}x{}",
                    c.weight.len(),
                    c.out_channels,
                    c.in_channels,
                    c.kernel
                )));
            }
            if c.bias.len() != c.out_channels {
                return Err(NnError::ShapeMismatch(format!(
                    "{name} bias holds {} values for {} channels",
                    c.bias.len(),
                    c.out_channels
                )));
            }
            if c.stride == 0 || c.kernel == 0 {
                return Err(NnError::ShapeMismatch(format!(
                    "{name} has a zero kernel or stride"
                )));
            }
            Ok(())
        };
        for (l, c) in self.encoder.iter().enumerate() {
            check(c, &format!("encoder {l}"))?;
        }
        for (l, c) in self.decoder.iter().enumerate() {
            check(c, &format!("decoder {l}"))?;
        }
        check(&self.head_conv, "head conv")?;
        if self.head_conv.out_channels != self.head_w.len() {
            return Err(NnError::ShapeMismatch(format!(
                "head weights hold {} values for {} channels",
                self.head_w.len(),
                self.head_conv.out_channels
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.flat().count()
    }

    /// Every parameter in a fixed traversal order (encoder, decoder, head
    /// conv, head affine). The optimizer and the serializer rely on this
    /// order being stable.
    pub fn flat(&self) -> impl Iterator<Item = &T> {
        self.encoder
            .iter()
            .chain(self.decoder.iter())
            .chain(std::iter::once(&self.head_conv))
            .flat_map(|c| c.weight.iter().chain(c.bias.iter()))
            .chain(self.head_w.iter())
            .chain(std::iter::once(&self.head_b))
    }

    pub fn flat_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .chain(std::iter::once(&mut self.head_conv))
            .flat_map(|c| c.weight.iter_mut().chain(c.bias.iter_mut()))
            .chain(self.head_w.iter_mut())
            .chain(std::iter::once(&mut self.head_b))
    }

    pub fn get_flat(&self, index: usize) -> T {
        *self.flat().nth(index).expect("parameter index in range")
    }

    pub fn set_flat(&mut self, index: usize, value: T) {
        *self.flat_mut().nth(index).expect("parameter index in range") = value;
    }

    /// Number of parameters inside the encoder, the prefix of the flat
    /// order; freezing skips exactly these.
    pub fn encoder_param_count(&self) -> usize {
        self.encoder
            .iter()
            .map(|c| c.weight.len() + c.bias.len())
            .sum()
    }
}

fn check_input<T: Real>(p: &ModelParams<T>, x: &Tensor<T>) -> Result<(), NnError> {
    if x.channels != p.encoder[0].in_channels {
        return Err(NnError::ChannelMismatch {
            expected: p.encoder[0].in_channels,
            found: x.channels,
        });
    }
    if x.len < MIN_INPUT_LEN {
        return Err(NnError::InputTooShort { len: x.len });
    }
    Ok(())
}

/// Intermediate activations of one autoencoder pass.
pub struct AeTape<T> {
    enc_in: [Tensor<T>; 3],
    enc_pre: [Tensor<T>; 3],
    dec_in: [Tensor<T>; 3],
    dec_pre: [Tensor<T>; 3],
    input_len: usize,
}

pub fn autoencoder_forward<T: Real>(
    p: &ModelParams<T>,
    x: &Tensor<T>,
) -> Result<(Tensor<T>, AeTape<T>), NnError> {
    check_input(p, x)?;
    let mut a = x.clone();
    let mut enc_in: Vec<Tensor<T>> = Vec::with_capacity(3);
    let mut enc_pre: Vec<Tensor<T>> = Vec::with_capacity(3);
    for layer in &p.encoder {
        let pre = layer.forward(&a);
        enc_in.push(a);
        a = relu(&pre);
        enc_pre.push(pre);
    }
    let mut dec_in: Vec<Tensor<T>> = Vec::with_capacity(3);
    let mut dec_pre: Vec<Tensor<T>> = Vec::with_capacity(3);
    for (l, layer) in p.decoder.iter().enumerate() {
        let up = upsample2(&a);
        let pre = layer.forward(&up);
        a = if l < 2 { relu(&pre) } else { pre.clone() };
        dec_in.push(up);
        dec_pre.push(pre);
    }
    let recon = a.crop(x.len);
    let tape = AeTape {
        enc_in: enc_in.try_into().expect("three encoder layers"),
        enc_pre: enc_pre.try_into().expect("three encoder layers"),
        dec_in: dec_in.try_into().expect("three decoder layers"),
        dec_pre: dec_pre.try_into().expect("three decoder layers"),
        input_len: x.len,
    };
    Ok((recon, tape))
}

/// Accumulate gradients of a scalar loss into `grads`, given the loss
/// gradient with respect to the (cropped) reconstruction.
pub fn autoencoder_backward<T: Real>(
    p: &ModelParams<T>,
    tape: &AeTape<T>,
    d_recon: &Tensor<T>,
    grads: &mut ModelParams<T>,
) {
    debug_assert_eq!(d_recon.len, tape.input_len);
    let mut g = d_recon.pad_to(tape.dec_pre[2].len);
    for l in (0..3).rev() {
        if l < 2 {
            g = relu_backward(&tape.dec_pre[l], &g);
        }
        let d_up = p.decoder[l].backward(&tape.dec_in[l], &g, &mut grads.decoder[l]);
        g = upsample2_backward(&d_up);
    }
    for l in (0..3).rev() {
        g = relu_backward(&tape.enc_pre[l], &g);
        g = p.encoder[l].backward(&tape.enc_in[l], &g, &mut grads.encoder[l]);
    }
}

/// Intermediate activations of one classifier pass.
pub struct ClassifierTape<T> {
    enc_in: [Tensor<T>; 3],
    enc_pre: [Tensor<T>; 3],
    head_in: Tensor<T>,
    head_pre: Tensor<T>,
    gap_vec: Vec<T>,
    /// Sigmoid output, unclamped.
    pub probability: T,
}

pub fn classifier_forward<T: Real>(
    p: &ModelParams<T>,
    x: &Tensor<T>,
) -> Result<ClassifierTape<T>, NnError> {
    check_input(p, x)?;
    let mut a = x.clone();
    let mut enc_in: Vec<Tensor<T>> = Vec::with_capacity(3);
    let mut enc_pre: Vec<Tensor<T>> = Vec::with_capacity(3);
    for layer in &p.encoder {
        let pre = layer.forward(&a);
        enc_in.push(a);
        a = relu(&pre);
        enc_pre.push(pre);
    }
    let head_pre = p.head_conv.forward(&a);
    let head_act = relu(&head_pre);
    let gap_vec = gap(&head_act);
    let z = gap_vec
        .iter()
        .zip(&p.head_w)
        .map(|(&g, &w)| g * w)
        .sum::<T>()
        + p.head_b;
    let probability = T::one() / (T::one() + (-z).exp());
    Ok(ClassifierTape {
        enc_in: enc_in.try_into().expect("three encoder layers"),
        enc_pre: enc_pre.try_into().expect("three encoder layers"),
        head_in: a,
        head_pre,
        gap_vec,
        probability,
    })
}

/// Accumulate gradients given the loss gradient with respect to the
/// pre-sigmoid logit. With `freeze_encoder` the encoder layers get neither
/// gradients nor a backward sweep.
pub fn classifier_backward<T: Real>(
    p: &ModelParams<T>,
    tape: &ClassifierTape<T>,
    d_logit: T,
    freeze_encoder: bool,
    grads: &mut ModelParams<T>,
) {
    let channels = tape.gap_vec.len();
    let mut d_gap = vec![T::zero(); channels];
    for c in 0..channels {
        d_gap[c] = p.head_w[c] * d_logit;
        grads.head_w[c] += tape.gap_vec[c] * d_logit;
    }
    grads.head_b += d_logit;
    let d_act = gap_backward(&d_gap, channels, tape.head_pre.len);
    let d_pre = relu_backward(&tape.head_pre, &d_act);
    let mut g = p
        .head_conv
        .backward(&tape.head_in, &d_pre, &mut grads.head_conv);
    if freeze_encoder {
        return;
    }
    for l in (0..3).rev() {
        g = relu_backward(&tape.enc_pre[l], &g);
        g = p.encoder[l].backward(&tape.enc_in[l], &g, &mut grads.encoder[l]);
    }
}

/// Event probability for one window.
pub fn predict<T: Real>(p: &ModelParams<T>, x: &Tensor<T>) -> Result<f64, NnError> {
    Ok(classifier_forward(p, x)?.probability.to_f64_lossy())
}

pub fn predict_scores<T: Real>(
    p: &ModelParams<T>,
    inputs: &[Tensor<T>],
) -> Result<Vec<f64>, NnError> {
    inputs.iter().map(|x| predict(p, x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_input(seed: u64, channels: usize, len: usize) -> Tensor<f64> {
        let mut rng = seed::rng(seed);
        let mut t = Tensor::zeros(channels, len);
        for v in t.data.iter_mut() {
            *v = rand::Rng::random_range(&mut rng, -1.0..1.0);
        }
        t
    }

    #[test]
    fn init_is_deterministic_and_biases_are_zero() {
        let a = ModelParams::<f64>::init(7);
        let b = ModelParams::<f64>::init(7);
        let c = ModelParams::<f64>::init(8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.encoder.iter().all(|l| l.bias.iter().all(|&v| v == 0.0)));
        assert_eq!(a.head_b, 0.0);
        // Fan-in bound on the first layer: 1/sqrt(4*7).
        let bound = 1.0 / (28.0f64).sqrt();
        assert!(a.encoder[0].weight.iter().all(|w| w.abs() < bound));
    }

    #[test]
    fn parameter_count_matches_the_layer_arithmetic() {
        let p = ModelParams::<f64>::init(0);
        let conv = |i: usize, o: usize, k: usize| i * o * k + o;
        let expected = conv(4, 16, 7)
            + conv(16, 32, 5)
            + conv(32, 64, 3)
            + conv(64, 32, 3)
            + conv(32, 16, 5)
            + conv(16, 4, 7)
            + conv(64, 32, 3)
            + 32
            + 1;
        assert_eq!(p.param_count(), expected);
        assert_eq!(
            p.encoder_param_count(),
            conv(4, 16, 7) + conv(16, 32, 5) + conv(32, 64, 3)
        );
    }

    #[test]
    fn flat_roundtrip_preserves_every_parameter() {
        let mut p = ModelParams::<f64>::init(3);
        let n = p.param_count();
        let last = n - 1;
        p.set_flat(last, 42.0);
        assert_eq!(p.head_b, 42.0);
        assert_eq!(p.get_flat(last), 42.0);
        p.set_flat(0, -1.5);
        assert_eq!(p.encoder[0].weight[0], -1.5);
    }

    #[test]
    fn architecture_hash_is_stable_and_shape_sensitive() {
        let p = ModelParams::<f64>::init(0);
        let q = ModelParams::<f64>::init(99);
        assert_eq!(p.arch_hash(), q.arch_hash());
        assert_eq!(
            p.architecture(),
            "enc[c4-16k7s2,c16-32k5s2,c32-64k3s2] \
             dec[u2c64-32k3s1,u2c32-16k5s1,u2c16-4k7s1] \
             head[c64-32k3s1 fc32-1]"
        );
        let mut other = ModelParams::<f64>::init(0);
        other.head_w.push(0.0);
        assert_ne!(p.arch_hash(), other.arch_hash());
    }

    #[test]
    fn reconstruction_has_the_input_shape() {
        let p = ModelParams::<f64>::init(1);
        for len in [32, 33, 240, 250, 1200] {
            let x = random_input(len as u64, 4, len);
            let (recon, _) = autoencoder_forward(&p, &x).unwrap();
            assert_eq!(recon.channels, 4);
            assert_eq!(recon.len, len);
        }
    }

    #[test]
    fn probability_is_in_the_open_interval() {
        let p = ModelParams::<f64>::init(2);
        let x = random_input(5, 4, 64);
        let prob = predict(&p, &x).unwrap();
        assert!(prob > 0.0 && prob < 1.0);
    }

    #[test]
    fn short_or_misshaped_inputs_are_rejected() {
        let p = ModelParams::<f64>::init(0);
        let short = random_input(1, 4, 16);
        assert!(matches!(
            predict(&p, &short),
            Err(NnError::InputTooShort { len: 16 })
        ));
        let narrow = random_input(1, 3, 64);
        assert!(matches!(
            autoencoder_forward(&p, &narrow),
            Err(NnError::ChannelMismatch {
                expected: 4,
                found: 3
            })
        ));
    }

    #[test]
    fn validate_catches_tampered_shapes() {
        let mut p = ModelParams::<f64>::init(0);
        p.validate().unwrap();
        p.encoder[1].weight.pop();
        assert!(matches!(p.validate(), Err(NnError::ShapeMismatch(_))));
    }
}
