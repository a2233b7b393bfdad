//! Adam, the two loss functions, and the epoch loops.
//!
//! Both trainers shuffle with the caller's RNG, step after every batch,
//! and when a validation set is present keep the parameters of the best
//! validation epoch, stopping after `patience` epochs without improvement.
//! With no validation set they run every epoch and keep the final state.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::conv::Tensor;
use super::model::{
    autoencoder_backward, autoencoder_forward, classifier_backward, classifier_forward,
    ModelParams,
};
use super::NnError;
use crate::scalar::Real;

/// Probabilities are clamped to `[BCE_EPS, 1 - BCE_EPS]` inside the loss.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Consecutive epochs without validation improvement before stopping.
    pub patience: usize,
    /// Train only the head, leaving encoder weights untouched.
    pub freeze_encoder: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            patience: 10,
            freeze_encoder: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub best_val_loss: f64,
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
}

/// Adam over the model's flat parameter order.
pub struct Adam<T> {
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    step: u64,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> Adam<T> {
    pub fn new(learning_rate: f64, n_params: usize) -> Self {
        Adam {
            lr: T::cast(learning_rate),
            beta1: T::cast(0.9),
            beta2: T::cast(0.999),
            eps: T::cast(1e-8),
            step: 0,
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
        }
    }

    pub fn update(&mut self, params: &mut ModelParams<T>, grads: &ModelParams<T>) {
        self.step += 1;
        let one = T::one();
        let bias1 = one - self.beta1.powi(self.step as i32);
        let bias2 = one - self.beta2.powi(self.step as i32);
        let (lr, b1, b2, eps) = (self.lr, self.beta1, self.beta2, self.eps);
        let moments = self.m.iter_mut().zip(self.v.iter_mut());
        for ((p, &g), (m, v)) in params.flat_mut().zip(grads.flat()).zip(moments) {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

pub fn bce_loss(probability: f64, label: bool) -> f64 {
    let p = probability.clamp(BCE_EPS, 1.0 - BCE_EPS);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// d loss / d logit. Inside the clamp range the sigmoid and the loss
/// derivative collapse to `p - y`; a clamped probability contributes no
/// gradient at all.
fn bce_dlogit<T: Real>(probability: T, label: bool) -> T {
    let eps = T::cast(BCE_EPS);
    if probability < eps || probability > T::one() - eps {
        return T::zero();
    }
    probability - if label { T::one() } else { T::zero() }
}

/// Mean reconstruction error over a dataset.
pub fn autoencoder_loss<T: Real>(
    params: &ModelParams<T>,
    data: &[Tensor<T>],
) -> Result<f64, NnError> {
    let mut total = 0.0;
    for x in data {
        let (recon, _) = autoencoder_forward(params, x)?;
        total += mse(&recon, x);
    }
    Ok(total / data.len() as f64)
}

/// Mean cross-entropy over a labeled dataset.
pub fn classifier_loss<T: Real>(
    params: &ModelParams<T>,
    data: &[(Tensor<T>, bool)],
) -> Result<f64, NnError> {
    let mut total = 0.0;
    for (x, y) in data {
        let tape = classifier_forward(params, x)?;
        total += bce_loss(tape.probability.to_f64_lossy(), *y);
    }
    Ok(total / data.len() as f64)
}

fn mse<T: Real>(recon: &Tensor<T>, x: &Tensor<T>) -> f64 {
    let mut loss = T::zero();
    for (&a, &b) in recon.data.iter().zip(&x.data) {
        let d = a - b;
        loss += d * d;
    }
    (loss / T::cast(x.data.len() as f64)).to_f64_lossy()
}

pub fn train_autoencoder<T: Real, R: Rng>(
    params: &mut ModelParams<T>,
    train: &[Tensor<T>],
    val: &[Tensor<T>],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<TrainReport, NnError> {
    run_epochs(
        params,
        train.len(),
        cfg,
        rng,
        |params, grads, batch, scale| {
            let mut loss = 0.0;
            for &i in batch {
                let x = &train[i];
                let (recon, tape) = autoencoder_forward(params, x)?;
                loss += mse(&recon, x);
                let n = T::cast(x.data.len() as f64);
                let two = T::cast(2.0);
                let mut d = Tensor::zeros(x.channels, x.len);
                for k in 0..x.data.len() {
                    d.data[k] = two * (recon.data[k] - x.data[k]) / n * scale;
                }
                autoencoder_backward(params, &tape, &d, grads);
            }
            Ok(loss)
        },
        |params| {
            if val.is_empty() {
                Ok(None)
            } else {
                autoencoder_loss(params, val).map(Some)
            }
        },
    )
}

pub fn train_classifier<T: Real, R: Rng>(
    params: &mut ModelParams<T>,
    train: &[(Tensor<T>, bool)],
    val: &[(Tensor<T>, bool)],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<TrainReport, NnError> {
    run_epochs(
        params,
        train.len(),
        cfg,
        rng,
        |params, grads, batch, scale| {
            let mut loss = 0.0;
            for &i in batch {
                let (x, y) = &train[i];
                let tape = classifier_forward(params, x)?;
                loss += bce_loss(tape.probability.to_f64_lossy(), *y);
                let d_logit = bce_dlogit(tape.probability, *y) * scale;
                classifier_backward(params, &tape, d_logit, cfg.freeze_encoder, grads);
            }
            Ok(loss)
        },
        |params| {
            if val.is_empty() {
                Ok(None)
            } else {
                classifier_loss(params, val).map(Some)
            }
        },
    )
}

/// Shared epoch loop. `batch_pass` accumulates gradients and returns the
/// summed (not averaged) loss of the batch; `validate` returns the
/// validation loss, or None to disable early stopping.
fn run_epochs<T, R, B, V>(
    params: &mut ModelParams<T>,
    n_train: usize,
    cfg: &TrainConfig,
    rng: &mut R,
    mut batch_pass: B,
    mut validate: V,
) -> Result<TrainReport, NnError>
where
    T: Real,
    R: Rng,
    B: FnMut(&ModelParams<T>, &mut ModelParams<T>, &[usize], T) -> Result<f64, NnError>,
    V: FnMut(&ModelParams<T>) -> Result<Option<f64>, NnError>,
{
    if n_train == 0 {
        return Err(NnError::EmptyBatch);
    }
    let mut adam = Adam::new(cfg.learning_rate, params.param_count());
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut report = TrainReport::default();
    let mut best: Option<(f64, ModelParams<T>)> = None;
    let mut since_best = 0usize;

    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let mut grads = params.zeros_like();
            let scale = T::cast(1.0 / batch.len() as f64);
            let batch_loss = batch_pass(params, &mut grads, batch, scale)?;
            if !batch_loss.is_finite() {
                return Err(NnError::Diverged {
                    epoch,
                    loss: batch_loss,
                });
            }
            adam.update(params, &grads);
            epoch_loss += batch_loss;
        }
        let train_loss = epoch_loss / n_train as f64;
        report.train_losses.push(train_loss);
        report.epochs_run = epoch + 1;

        let Some(val_loss) = validate(params)? else {
            report.val_losses.push(train_loss);
            continue;
        };
        if !val_loss.is_finite() {
            return Err(NnError::Diverged {
                epoch,
                loss: val_loss,
            });
        }
        report.val_losses.push(val_loss);
        match &best {
            Some((b, _)) if val_loss >= *b => {
                since_best += 1;
                if since_best >= cfg.patience {
                    report.stopped_early = true;
                    break;
                }
            }
            _ => {
                best = Some((val_loss, params.clone()));
                since_best = 0;
            }
        }
    }

    match best {
        Some((loss, p)) => {
            *params = p;
            report.best_val_loss = loss;
        }
        None => {
            report.best_val_loss = *report.val_losses.last().expect("at least one epoch");
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn random_input(seed: u64, len: usize) -> Tensor<f64> {
        let mut rng = seed::rng(seed);
        let mut t = Tensor::zeros(4, len);
        for v in t.data.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        t
    }

    #[test]
    fn first_adam_step_moves_by_the_learning_rate() {
        let mut params = ModelParams::<f64>::init(1);
        let before = params.head_b;
        let mut grads = params.zeros_like();
        grads.head_b = 1.0;
        let mut adam = Adam::new(1e-3, params.param_count());
        adam.update(&mut params, &grads);
        // First step: m_hat = g, v_hat = g*g, so the move is lr * sign(g)
        // up to epsilon.
        assert!((before - params.head_b - 1e-3).abs() < 1e-9);
        // Zero-gradient parameters stay put exactly.
        assert_eq!(params.encoder[0].weight[0], ModelParams::<f64>::init(1).encoder[0].weight[0]);
    }

    #[test]
    fn bce_matches_hand_values_and_clamps() {
        assert!((bce_loss(0.5, true) - 0.5f64.ln().abs()).abs() < 1e-12);
        assert!((bce_loss(0.9, false) - (-(0.1f64.ln()))).abs() < 1e-9);
        let at_zero = bce_loss(0.0, true);
        assert!((at_zero - (-(BCE_EPS.ln()))).abs() < 1e-9);
        assert!(at_zero.is_finite());
        assert_eq!(bce_dlogit(0.0f64, true), 0.0);
        assert!((bce_dlogit(0.3f64, true) + 0.7).abs() < 1e-12);
        assert!((bce_dlogit(0.3f64, false) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn a_duplicated_example_changes_nothing_about_the_step() {
        let x = random_input(3, 48);
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 2,
            ..TrainConfig::default()
        };
        let mut single = ModelParams::<f64>::init(5);
        let mut doubled = single.clone();
        let r1 = train_autoencoder(
            &mut single,
            &[x.clone()],
            &[],
            &TrainConfig {
                batch_size: 1,
                ..cfg
            },
            &mut seed::rng(0),
        )
        .unwrap();
        let r2 = train_autoencoder(
            &mut doubled,
            &[x.clone(), x],
            &[],
            &cfg,
            &mut seed::rng(0),
        )
        .unwrap();
        // Halving each contribution reorders the gradient accumulation, so
        // allow rounding noise but nothing more.
        for (a, b) in single.flat().zip(doubled.flat()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!((r1.train_losses[0] - r2.train_losses[0]).abs() < 1e-15);
    }

    #[test]
    fn classifier_overfits_two_windows() {
        let a = random_input(10, 40);
        let b = random_input(11, 40);
        let data = vec![(a.clone(), true), (b.clone(), false)];
        let mut params = ModelParams::<f64>::init(2);
        let cfg = TrainConfig {
            epochs: 150,
            ..TrainConfig::default()
        };
        train_classifier(&mut params, &data, &[], &cfg, &mut seed::rng(1)).unwrap();
        let p_a = super::super::predict(&params, &a).unwrap();
        let p_b = super::super::predict(&params, &b).unwrap();
        assert!(p_a > 0.9, "positive window scored {p_a}");
        assert!(p_b < 0.1, "negative window scored {p_b}");
    }

    #[test]
    fn training_is_bitwise_reproducible() {
        let data: Vec<(Tensor<f64>, bool)> = (0..6)
            .map(|i| (random_input(i, 40), i % 2 == 0))
            .collect();
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let mut p1 = ModelParams::<f64>::init(9);
        let mut p2 = ModelParams::<f64>::init(9);
        let r1 = train_classifier(&mut p1, &data, &data, &cfg, &mut seed::rng(4)).unwrap();
        let r2 = train_classifier(&mut p2, &data, &data, &cfg, &mut seed::rng(4)).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(r1.val_losses, r2.val_losses);
    }

    #[test]
    fn freezing_keeps_the_encoder_bit_identical() {
        let data: Vec<(Tensor<f64>, bool)> = (0..4)
            .map(|i| (random_input(100 + i, 40), i % 2 == 0))
            .collect();
        let mut params = ModelParams::<f64>::init(3);
        let frozen_encoder = params.encoder.clone();
        let head_before = params.head_w.clone();
        let cfg = TrainConfig {
            epochs: 3,
            freeze_encoder: true,
            ..TrainConfig::default()
        };
        train_classifier(&mut params, &data, &[], &cfg, &mut seed::rng(2)).unwrap();
        assert_eq!(params.encoder, frozen_encoder);
        assert_ne!(params.head_w, head_before);
        // Decoder is untouched by classifier training either way.
        assert_eq!(params.decoder, ModelParams::<f64>::init(3).decoder);
    }

    #[test]
    fn early_stopping_restores_the_best_epoch() {
        let train: Vec<Tensor<f64>> = (0..8).map(|i| random_input(i, 40)).collect();
        let val: Vec<Tensor<f64>> = (0..4).map(|i| random_input(50 + i, 40)).collect();
        let cfg = TrainConfig {
            epochs: 60,
            batch_size: 4,
            patience: 3,
            ..TrainConfig::default()
        };
        let mut params = ModelParams::<f64>::init(6);
        let report = train_autoencoder(&mut params, &train, &val, &cfg, &mut seed::rng(8)).unwrap();
        let min = report
            .val_losses
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert_eq!(report.best_val_loss, min);
        // The kept parameters reproduce the reported best loss.
        let loss_now = autoencoder_loss(&params, &val).unwrap();
        assert!((loss_now - report.best_val_loss).abs() < 1e-12);
        if report.stopped_early {
            assert!(report.epochs_run < cfg.epochs);
        }
    }

    #[test]
    fn exploding_training_reports_divergence() {
        let train: Vec<Tensor<f64>> = (0..2).map(|i| random_input(i, 40)).collect();
        let cfg = TrainConfig {
            epochs: 200,
            learning_rate: 1e60,
            ..TrainConfig::default()
        };
        let mut params = ModelParams::<f64>::init(0);
        let result = train_autoencoder(&mut params, &train, &[], &cfg, &mut seed::rng(0));
        assert!(matches!(result, Err(NnError::Diverged { .. })));
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let mut params = ModelParams::<f64>::init(0);
        assert!(matches!(
            train_autoencoder(&mut params, &[], &[], &TrainConfig::default(), &mut seed::rng(0)),
            Err(NnError::EmptyBatch)
        ));
    }
}
