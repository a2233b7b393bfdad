//! Sample-rate conversion.
//!
//! Two converters with deliberately different semantics:
//!   * [`resample_fourier`]: FFT-domain truncation / zero-padding. Assumes
//!     the window is one period of a periodic signal; exact on bandlimited
//!     periodic content.
//!   * [`resample_linear`]: linear interpolation between neighbouring
//!     samples, clamped past the final sample.
//!
//! Both produce `round(n * rate_out / rate_in)` samples.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::DspError;
use crate::scalar::Real;

fn output_len(n_in: usize, rate_in: f64, rate_out: f64) -> Result<usize, DspError> {
    if !rate_in.is_finite() || rate_in <= 0.0 || !rate_out.is_finite() || rate_out <= 0.0 {
        return Err(DspError::InvalidSampleRate {
            rate_hz: if rate_in <= 0.0 { rate_in } else { rate_out },
        });
    }
    if n_in == 0 {
        return Err(DspError::EmptyInput);
    }
    let n_out = (n_in as f64 * rate_out / rate_in).round() as usize;
    if n_out == 0 {
        return Err(DspError::DegenerateOutput { n_in, rate_in, rate_out });
    }
    Ok(n_out)
}

/// Fourier-domain resampling: forward FFT, spectrum truncated (down) or
/// zero-padded (up) with the Nyquist bin of even lengths folded (down) or
/// halved and mirrored (up), inverse FFT scaled by `n_out / n_in`, real
/// part kept.
pub fn resample_fourier<T: Real>(
    x: &[T],
    rate_in: f64,
    rate_out: f64,
) -> Result<Vec<T>, DspError> {
    let n_in = x.len();
    let n_out = output_len(n_in, rate_in, rate_out)?;
    if n_out == n_in {
        return Ok(x.to_vec());
    }

    let mut planner = FftPlanner::<T>::new();
    let mut spectrum: Vec<Complex<T>> =
        x.iter().map(|&v| Complex::new(v, T::zero())).collect();
    planner.plan_fft_forward(n_in).process(&mut spectrum);

    let zero = Complex::new(T::zero(), T::zero());
    let mut out = vec![zero; n_out];
    let n_min = n_in.min(n_out);
    let nyq = n_min / 2 + 1;
    out[..nyq].copy_from_slice(&spectrum[..nyq]);
    if n_min > 2 {
        let tail = n_min - nyq;
        out[n_out - tail..].copy_from_slice(&spectrum[n_in - tail..]);
    }
    if n_min % 2 == 0 {
        let h = n_min / 2;
        if n_out < n_in {
            // Fold the conjugate partner into the output's Nyquist bin.
            out[h] = out[h] + spectrum[n_in - h];
        } else {
            // The old Nyquist bin becomes an interior bin: split it across
            // the positive copy and its new conjugate mirror.
            let half = out[h] * T::cast(0.5);
            out[h] = half;
            out[n_out - h] = half.conj();
        }
    }

    planner.plan_fft_inverse(n_out).process(&mut out);
    // Unnormalized transforms: dividing by n_in yields the n_out/n_in
    // amplitude convention.
    let scale = T::one() / T::from_usize(n_in).unwrap();
    Ok(out.into_iter().map(|c| c.re * scale).collect())
}

/// Linear-interpolation resampling. Output sample `i` reads the input at
/// position `i * rate_in / rate_out`; positions at or past the last input
/// sample clamp to it.
pub fn resample_linear<T: Real>(x: &[T], rate_in: f64, rate_out: f64) -> Result<Vec<T>, DspError> {
    let n_in = x.len();
    let n_out = output_len(n_in, rate_in, rate_out)?;
    if rate_in == rate_out {
        return Ok(x.to_vec());
    }
    let step = rate_in / rate_out;
    let mut out = Vec::with_capacity(n_out);
    for i in 0..n_out {
        let t = i as f64 * step;
        let idx = t.floor() as usize;
        if idx + 1 >= n_in {
            out.push(x[n_in - 1]);
        } else {
            let frac = T::cast(t - idx as f64);
            out.push(x[idx] * (T::one() - frac) + x[idx + 1] * frac);
        }
    }
    Ok(out)
}
