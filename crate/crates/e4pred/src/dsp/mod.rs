//! Signal conditioning: filter design and application, resampling, and the
//! per-channel preprocessing plan that turns a raw session into aligned
//! model-rate channels.

mod design;
mod resample;

pub use design::{butterworth_bandpass, butterworth_lowpass};
pub use resample::{resample_fourier, resample_linear};

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::e4::{BaselineInterval, ChannelKind, Session};
use crate::scalar::Real;

#[derive(Debug, thiserror::Error)]
pub enum DspError {
    #[error("filter order {order} out of range")]
    InvalidOrder { order: usize },
    #[error("cutoff {cutoff_hz} Hz invalid at {sample_rate_hz} Hz sampling")]
    InvalidCutoff { cutoff_hz: f64, sample_rate_hz: f64 },
    #[error("band {low_hz}..{high_hz} Hz invalid at {sample_rate_hz} Hz sampling")]
    InvalidBand {
        low_hz: f64,
        high_hz: f64,
        sample_rate_hz: f64,
    },
    #[error("sample rate {rate_hz} Hz is not positive and finite")]
    InvalidSampleRate { rate_hz: f64 },
    #[error("empty input signal")]
    EmptyInput,
    #[error("resampling {n_in} samples from {rate_in} to {rate_out} Hz yields no output")]
    DegenerateOutput {
        n_in: usize,
        rate_in: f64,
        rate_out: f64,
    },
    #[error("root {re}+{im}i has no conjugate partner")]
    UnpairedRoot { re: f64, im: f64 },
    #[error("cannot pair {numerators} numerators with {denominators} denominators")]
    SectionMismatch {
        numerators: usize,
        denominators: usize,
    },
    #[error("session is missing channel {kind}")]
    MissingChannel { kind: ChannelKind },
    #[error("channels share no common time span")]
    EmptySpan,
    #[error("plan leaves {channel} at {reached_hz} Hz, target {target_hz} Hz")]
    PlanMissesTargetRate {
        channel: SignalChannel,
        reached_hz: f64,
        target_hz: f64,
    },
}

/// One second-order section, denominator normalized (`a0 = 1`):
/// `y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad<T> {
    pub b0: T,
    pub b1: T,
    pub b2: T,
    pub a1: T,
    pub a2: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FilterKind {
    Lowpass {
        order: usize,
        cutoff_hz: f64,
    },
    Bandpass {
        order_per_edge: usize,
        low_hz: f64,
        high_hz: f64,
    },
}

/// Designed digital filter: a cascade of second-order sections plus the
/// sample rate it was designed for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec<T> {
    pub kind: FilterKind,
    pub sample_rate_hz: f64,
    pub sections: Vec<Biquad<T>>,
}

impl<T: Real> FilterSpec<T> {
    /// Every section's poles strictly inside the unit circle.
    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(|s| {
            let a1 = s.a1.to_f64_lossy();
            let a2 = s.a2.to_f64_lossy();
            a2.abs() < 1.0 && a1.abs() < 1.0 + a2
        })
    }
}

/// Run the cascade over a signal in one causal pass, zero initial state,
/// direct form II transposed.
pub fn apply_filter<T: Real>(spec: &FilterSpec<T>, x: &[T]) -> Vec<T> {
    let mut y: Vec<T> = x.to_vec();
    for s in &spec.sections {
        let mut s1 = T::zero();
        let mut s2 = T::zero();
        for v in y.iter_mut() {
            let xn = *v;
            let yn = s.b0 * xn + s1;
            s1 = s.b1 * xn - s.a1 * yn + s2;
            s2 = s.b2 * xn - s.a2 * yn;
            *v = yn;
        }
    }
    y
}

/// Magnitude of the cascade's frequency response at `f_hz`, evaluated
/// analytically from the coefficients.
pub fn magnitude_response<T: Real>(spec: &FilterSpec<T>, f_hz: f64) -> f64 {
    let theta = TAU * f_hz / spec.sample_rate_hz;
    let z1 = num_complex::Complex64::new(0.0, -theta).exp();
    let z2 = z1 * z1;
    spec.sections
        .iter()
        .map(|s| {
            let num = num_complex::Complex64::new(s.b0.to_f64_lossy(), 0.0)
                + z1 * s.b1.to_f64_lossy()
                + z2 * s.b2.to_f64_lossy();
            let den = num_complex::Complex64::new(1.0, 0.0)
                + z1 * s.a1.to_f64_lossy()
                + z2 * s.a2.to_f64_lossy();
            num.norm() / den.norm()
        })
        .product()
}

// ---------------------------------------------------------------------------
// Preprocessing plan and execution
// ---------------------------------------------------------------------------

/// The four signal channels fed to the model, in row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignalChannel {
    Bvp,
    Eda,
    Hr,
    Temp,
}

impl SignalChannel {
    pub const ALL: [SignalChannel; 4] = [
        SignalChannel::Bvp,
        SignalChannel::Eda,
        SignalChannel::Hr,
        SignalChannel::Temp,
    ];

    pub fn index(self) -> usize {
        match self {
            SignalChannel::Bvp => 0,
            SignalChannel::Eda => 1,
            SignalChannel::Hr => 2,
            SignalChannel::Temp => 3,
        }
    }

    pub fn channel_kind(self) -> ChannelKind {
        match self {
            SignalChannel::Bvp => ChannelKind::Bvp,
            SignalChannel::Eda => ChannelKind::Eda,
            SignalChannel::Hr => ChannelKind::Hr,
            SignalChannel::Temp => ChannelKind::Temp,
        }
    }
}

impl std::fmt::Display for SignalChannel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            SignalChannel::Bvp => "BVP",
            SignalChannel::Eda => "EDA",
            SignalChannel::Hr => "HR",
            SignalChannel::Temp => "TEMP",
        };
        f.write_str(name)
    }
}

/// One step of a channel's conditioning chain. Filters are designed at the
/// rate the signal has when the stage runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Stage {
    Lowpass {
        order: usize,
        cutoff_hz: f64,
    },
    Bandpass {
        order_per_edge: usize,
        low_hz: f64,
        high_hz: f64,
    },
    ResampleFourier,
    ResampleLinear,
}

impl Stage {
    pub fn is_filter(&self) -> bool {
        matches!(self, Stage::Lowpass { .. } | Stage::Bandpass { .. })
    }
}

/// Per-channel conditioning chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessPlan {
    pub bvp: Vec<Stage>,
    pub eda: Vec<Stage>,
    pub hr: Vec<Stage>,
    pub temp: Vec<Stage>,
}

impl PreprocessPlan {
    /// The shipped routing: 2nd-order-per-edge 2-12 Hz bandpass on BVP,
    /// 6th-order 1 Hz lowpass on EDA and TEMP, HR untouched; BVP and EDA
    /// are moved to the target rate in the Fourier domain, HR and TEMP by
    /// linear interpolation.
    pub fn standard() -> Self {
        PreprocessPlan {
            bvp: vec![
                Stage::Bandpass {
                    order_per_edge: 2,
                    low_hz: 2.0,
                    high_hz: 12.0,
                },
                Stage::ResampleFourier,
            ],
            eda: vec![
                Stage::Lowpass {
                    order: 6,
                    cutoff_hz: 1.0,
                },
                Stage::ResampleFourier,
            ],
            hr: vec![Stage::ResampleLinear],
            temp: vec![
                Stage::Lowpass {
                    order: 6,
                    cutoff_hz: 1.0,
                },
                Stage::ResampleLinear,
            ],
        }
    }

    pub fn stages(&self, channel: SignalChannel) -> &[Stage] {
        match channel {
            SignalChannel::Bvp => &self.bvp,
            SignalChannel::Eda => &self.eda,
            SignalChannel::Hr => &self.hr,
            SignalChannel::Temp => &self.temp,
        }
    }
}

/// A session after preprocessing: the four signal channels aligned at the
/// target rate and truncated to a common length, raw accelerometer kept at
/// its native rate for activity features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessedSession<T> {
    pub subject_id: String,
    pub week_index: u32,
    /// Unix seconds of sample 0 (common to all channels).
    pub start_time: f64,
    pub rate_hz: f64,
    /// Indexed by [`SignalChannel::index`].
    pub signal: [Vec<T>; 4],
    pub acc: [Vec<T>; 3],
    pub acc_rate_hz: f64,
    pub tags: Vec<f64>,
    pub baseline_intervals: Option<Vec<BaselineInterval>>,
}

impl<T: Real> PreprocessedSession<T> {
    /// Samples per signal channel.
    pub fn len(&self) -> usize {
        self.signal[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.rate_hz
    }
}

/// Execute `plan` on every signal channel of `session`, aligning all
/// channels to the common time span and `target_rate_hz`.
pub fn preprocess_session<T: Real>(
    session: &Session<T>,
    plan: &PreprocessPlan,
    target_rate_hz: f64,
) -> Result<PreprocessedSession<T>, DspError> {
    if !target_rate_hz.is_finite() || target_rate_hz <= 0.0 {
        return Err(DspError::InvalidSampleRate {
            rate_hz: target_rate_hz,
        });
    }
    let (start, end) = session.common_span().ok_or(DspError::EmptySpan)?;
    if end <= start {
        return Err(DspError::EmptySpan);
    }

    let mut signal: [Vec<T>; 4] = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for ch in SignalChannel::ALL {
        let rec = session
            .channels
            .get(&ch.channel_kind())
            .ok_or(DspError::MissingChannel {
                kind: ch.channel_kind(),
            })?;
        let mut data = crop(rec.start_time, rec.sample_rate_hz, &rec.samples, start, end);
        let mut rate = rec.sample_rate_hz;
        for stage in plan.stages(ch) {
            match *stage {
                Stage::Lowpass { order, cutoff_hz } => {
                    let spec = butterworth_lowpass::<T>(order, cutoff_hz, rate)?;
                    data = apply_filter(&spec, &data);
                }
                Stage::Bandpass {
                    order_per_edge,
                    low_hz,
                    high_hz,
                } => {
                    let spec = butterworth_bandpass::<T>(order_per_edge, low_hz, high_hz, rate)?;
                    data = apply_filter(&spec, &data);
                }
                Stage::ResampleFourier => {
                    data = resample_fourier(&data, rate, target_rate_hz)?;
                    rate = target_rate_hz;
                }
                Stage::ResampleLinear => {
                    data = resample_linear(&data, rate, target_rate_hz)?;
                    rate = target_rate_hz;
                }
            }
        }
        if (rate - target_rate_hz).abs() > 1e-9 {
            return Err(DspError::PlanMissesTargetRate {
                channel: ch,
                reached_hz: rate,
                target_hz: target_rate_hz,
            });
        }
        signal[ch.index()] = data;
    }

    // Rounding can leave channels a sample apart; cut to the common length.
    let len = signal.iter().map(Vec::len).min().unwrap_or(0);
    for ch in &mut signal {
        ch.truncate(len);
    }

    let mut acc: [Vec<T>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (i, kind) in [ChannelKind::AccX, ChannelKind::AccY, ChannelKind::AccZ]
        .into_iter()
        .enumerate()
    {
        let rec = session
            .channels
            .get(&kind)
            .ok_or(DspError::MissingChannel { kind })?;
        acc[i] = crop(rec.start_time, rec.sample_rate_hz, &rec.samples, start, end);
    }
    let acc_len = acc.iter().map(Vec::len).min().unwrap_or(0);
    for axis in &mut acc {
        axis.truncate(acc_len);
    }

    Ok(PreprocessedSession {
        subject_id: session.subject_id.clone(),
        week_index: session.week_index,
        start_time: start,
        rate_hz: target_rate_hz,
        signal,
        acc,
        acc_rate_hz: ChannelKind::AccX.canonical_rate_hz(),
        tags: session.tags.clone(),
        baseline_intervals: session.baseline_intervals.clone(),
    })
}

/// Slice a recording to `[start, end)` using nearest-sample index
/// arithmetic.
fn crop<T: Real>(rec_start: f64, rate: f64, samples: &[T], start: f64, end: f64) -> Vec<T> {
    let i0 = ((start - rec_start) * rate).round().max(0.0) as usize;
    let i1 = (((end - rec_start) * rate).round() as usize).min(samples.len());
    if i0 >= i1 {
        return Vec::new();
    }
    samples[i0..i1].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::num_complex::Complex;
    use rustfft::FftPlanner;

    fn lowpass() -> FilterSpec<f64> {
        butterworth_lowpass(6, 1.0, 4.0).unwrap()
    }

    #[test]
    fn filtering_is_linear() {
        let spec = lowpass();
        let x: Vec<f64> = (0..256).map(|i| ((i * 37) % 17) as f64 - 8.0).collect();
        let z: Vec<f64> = (0..256).map(|i| ((i * 101) % 23) as f64 - 11.0).collect();
        let (a, b) = (1.7, -0.6);
        let combined: Vec<f64> = x.iter().zip(&z).map(|(xv, zv)| a * xv + b * zv).collect();
        let lhs = apply_filter(&spec, &combined);
        let fx = apply_filter(&spec, &x);
        let fz = apply_filter(&spec, &z);
        for i in 0..256 {
            assert!((lhs[i] - (a * fx[i] + b * fz[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn filtering_is_time_invariant() {
        let spec = lowpass();
        let x: Vec<f64> = (0..128).map(|i| (i as f64 * 0.37).sin()).collect();
        let shift = 13;
        let mut shifted = vec![0.0; shift];
        shifted.extend_from_slice(&x);
        let y = apply_filter(&spec, &x);
        let y_shifted = apply_filter(&spec, &shifted);
        for i in 0..x.len() {
            assert_eq!(y[i], y_shifted[i + shift]);
        }
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let spec = lowpass();
        let y = apply_filter(&spec, &[0.0f64; 64]);
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_length_matches_input() {
        let spec = lowpass();
        assert_eq!(apply_filter(&spec, &[1.0f64; 77]).len(), 77);
    }

    #[test]
    fn impulse_spectrum_matches_analytic_response() {
        // Dual route: FFT of the realized impulse response against the
        // closed-form evaluation from the coefficients.
        for spec in [
            butterworth_lowpass::<f64>(6, 1.0, 4.0).unwrap(),
            butterworth_bandpass::<f64>(2, 2.0, 12.0, 64.0).unwrap(),
        ] {
            let n = 4096;
            let mut impulse = vec![0.0f64; n];
            impulse[0] = 1.0;
            let h = apply_filter(&spec, &impulse);
            assert!(h[n - 1].abs() < 1e-9, "impulse response has not decayed");
            let mut buf: Vec<Complex<f64>> =
                h.iter().map(|&v| Complex::new(v, 0.0)).collect();
            FftPlanner::new().plan_fft_forward(n).process(&mut buf);
            for k in 0..n / 2 {
                let f = k as f64 * spec.sample_rate_hz / n as f64;
                let expected = magnitude_response(&spec, f);
                assert!(
                    (buf[k].norm() - expected).abs() < 1e-3,
                    "bin {k}: {} vs {}",
                    buf[k].norm(),
                    expected
                );
            }
        }
    }

    #[test]
    fn standard_plan_routes_channels_as_documented() {
        let plan = PreprocessPlan::standard();
        assert!(plan.hr.iter().all(|s| !s.is_filter()));
        assert!(matches!(
            plan.bvp[0],
            Stage::Bandpass {
                order_per_edge: 2,
                low_hz,
                high_hz
            } if low_hz == 2.0 && high_hz == 12.0
        ));
        for stages in [&plan.eda, &plan.temp] {
            assert!(matches!(
                stages[0],
                Stage::Lowpass { order: 6, cutoff_hz } if cutoff_hz == 1.0
            ));
        }
        assert_eq!(*plan.bvp.last().unwrap(), Stage::ResampleFourier);
        assert_eq!(*plan.eda.last().unwrap(), Stage::ResampleFourier);
        assert_eq!(*plan.hr.last().unwrap(), Stage::ResampleLinear);
        assert_eq!(*plan.temp.last().unwrap(), Stage::ResampleLinear);
    }
}
