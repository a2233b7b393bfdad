//! Butterworth filter design.
//!
//! Classic pole/zero flow: analog prototype, frequency prewarp, band
//! transform, bilinear transform, then conjugate pairing into second-order
//! sections. All design arithmetic runs in `f64` regardless of the target
//! scalar; only the final coefficients are narrowed.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::{Biquad, DspError, FilterKind, FilterSpec};
use crate::scalar::Real;

/// Lowpass Butterworth of the given order, cutoff and sample rate.
pub fn butterworth_lowpass<T: Real>(
    order: usize,
    cutoff_hz: f64,
    sample_rate_hz: f64,
) -> Result<FilterSpec<T>, DspError> {
    check_order(order)?;
    check_rate(sample_rate_hz)?;
    if !cutoff_hz.is_finite() || cutoff_hz <= 0.0 || cutoff_hz >= sample_rate_hz / 2.0 {
        return Err(DspError::InvalidCutoff {
            cutoff_hz,
            sample_rate_hz,
        });
    }

    let warped = prewarp(cutoff_hz, sample_rate_hz);
    let mut poles = prototype_poles(order);
    for p in &mut poles {
        *p *= warped;
    }
    let gain = warped.powi(order as i32);
    let (zeros, poles, gain) = bilinear(&[], &poles, gain);

    let sections = to_biquads(&zeros, &poles, gain, GainMode::UnityDc)?;
    Ok(FilterSpec {
        kind: FilterKind::Lowpass {
            order,
            cutoff_hz,
        },
        sample_rate_hz,
        sections: narrow(&sections),
    })
}

/// Bandpass Butterworth with `order_per_edge` poles rolling off at each
/// band edge (total order `2 * order_per_edge`).
pub fn butterworth_bandpass<T: Real>(
    order_per_edge: usize,
    low_hz: f64,
    high_hz: f64,
    sample_rate_hz: f64,
) -> Result<FilterSpec<T>, DspError> {
    check_order(order_per_edge)?;
    check_rate(sample_rate_hz)?;
    let valid = low_hz.is_finite()
        && high_hz.is_finite()
        && low_hz > 0.0
        && low_hz < high_hz
        && high_hz < sample_rate_hz / 2.0;
    if !valid {
        return Err(DspError::InvalidBand {
            low_hz,
            high_hz,
            sample_rate_hz,
        });
    }

    let w1 = prewarp(low_hz, sample_rate_hz);
    let w2 = prewarp(high_hz, sample_rate_hz);
    let bw = w2 - w1;
    let wo = (w1 * w2).sqrt();

    let prototype = prototype_poles(order_per_edge);
    let mut poles = Vec::with_capacity(2 * order_per_edge);
    for p in &prototype {
        let scaled = p * (bw / 2.0);
        let shift = (scaled * scaled - Complex64::new(wo * wo, 0.0)).sqrt();
        poles.push(scaled + shift);
        poles.push(scaled - shift);
    }
    let zeros = vec![Complex64::new(0.0, 0.0); order_per_edge];
    let gain = bw.powi(order_per_edge as i32);
    let (zeros, poles, gain) = bilinear(&zeros, &poles, gain);

    let sections = to_biquads(&zeros, &poles, gain, GainMode::DistributeEvenly)?;
    Ok(FilterSpec {
        kind: FilterKind::Bandpass {
            order_per_edge,
            low_hz,
            high_hz,
        },
        sample_rate_hz,
        sections: narrow(&sections),
    })
}

/// Analog Butterworth prototype: unit-radius poles in the left half plane.
fn prototype_poles(order: usize) -> Vec<Complex64> {
    let n = order as i64;
    let mut poles = Vec::with_capacity(order);
    let mut m = -n + 1;
    while m < n {
        let theta = PI * m as f64 / (2.0 * n as f64);
        poles.push(-Complex64::new(0.0, theta).exp());
        m += 2;
    }
    poles
}

/// Map a digital corner to the analog frequency the bilinear transform
/// lands back on it (internal sampling convention fs = 2).
fn prewarp(f_hz: f64, sample_rate_hz: f64) -> f64 {
    4.0 * (PI * f_hz / sample_rate_hz).tan()
}

/// Bilinear transform of an analog zero/pole/gain triple. Missing zeros
/// (relative degree) land at z = -1.
fn bilinear(
    zeros: &[Complex64],
    poles: &[Complex64],
    gain: f64,
) -> (Vec<Complex64>, Vec<Complex64>, f64) {
    const FS2: f64 = 4.0;
    let map = |s: &Complex64| (FS2 + s) / (FS2 - s);
    let mut z_d: Vec<Complex64> = zeros.iter().map(map).collect();
    let p_d: Vec<Complex64> = poles.iter().map(map).collect();
    z_d.resize(poles.len(), Complex64::new(-1.0, 0.0));

    let num: Complex64 = zeros
        .iter()
        .map(|z| FS2 - z)
        .fold(Complex64::new(1.0, 0.0), |acc, v| acc * v);
    let den: Complex64 = poles
        .iter()
        .map(|p| FS2 - p)
        .fold(Complex64::new(1.0, 0.0), |acc, v| acc * v);
    (z_d, p_d, gain * (num / den).re)
}

enum GainMode {
    /// Scale each section so its own DC gain is exactly one (lowpass).
    UnityDc,
    /// Spread the overall gain geometrically across sections (bandpass,
    /// where DC gain is zero by construction).
    DistributeEvenly,
}

/// Group conjugate roots into quadratic factors; leftover real roots are
/// paired two at a time, with at most one first-order remainder.
fn quadratic_factors(roots: &[Complex64]) -> Result<Vec<(f64, f64, f64)>, DspError> {
    let tol = 1e-8;
    let mut complex: Vec<Complex64> = roots.iter().copied().filter(|r| r.im > tol).collect();
    let mut conjugates: Vec<Complex64> = roots.iter().copied().filter(|r| r.im < -tol).collect();
    let mut reals: Vec<f64> = roots
        .iter()
        .filter(|r| r.im.abs() <= tol)
        .map(|r| r.re)
        .collect();
    reals.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut factors = Vec::new();
    for z in complex.drain(..) {
        let at = conjugates
            .iter()
            .position(|c| (c.conj() - z).norm() <= tol * (1.0 + z.norm()))
            .ok_or(DspError::UnpairedRoot {
                re: z.re,
                im: z.im,
            })?;
        conjugates.swap_remove(at);
        // (1 - z q^-1)(1 - z* q^-1) = 1 - 2 Re(z) q^-1 + |z|^2 q^-2
        factors.push((1.0, -2.0 * z.re, z.norm_sqr()));
    }
    if !conjugates.is_empty() {
        let z = conjugates[0];
        return Err(DspError::UnpairedRoot { re: z.re, im: z.im });
    }
    while reals.len() >= 2 {
        let r2 = reals.pop().unwrap();
        let r1 = reals.remove(0);
        factors.push((1.0, -(r1 + r2), r1 * r2));
    }
    if let Some(r) = reals.pop() {
        factors.push((1.0, -r, 0.0));
    }
    Ok(factors)
}

/// Zero ordering that pairs one positive with one negative real zero per
/// section when both kinds are present (bandpass numerators 1 - q^-2).
fn order_zeros_for_pairing(zeros: &[Complex64]) -> Vec<Complex64> {
    let tol = 1e-8;
    let all_real = zeros.iter().all(|z| z.im.abs() <= tol);
    if !all_real {
        return zeros.to_vec();
    }
    let pos: Vec<Complex64> = zeros.iter().copied().filter(|z| z.re > 0.0).collect();
    let neg: Vec<Complex64> = zeros.iter().copied().filter(|z| z.re <= 0.0).collect();
    if pos.is_empty() || neg.is_empty() {
        return zeros.to_vec();
    }
    let mut out = Vec::with_capacity(zeros.len());
    let mut pi = pos.into_iter();
    let mut ni = neg.into_iter();
    loop {
        match (pi.next(), ni.next()) {
            (None, None) => break,
            (p, n) => {
                out.extend(p);
                out.extend(n);
            }
        }
    }
    out
}

fn to_biquads(
    zeros: &[Complex64],
    poles: &[Complex64],
    gain: f64,
    mode: GainMode,
) -> Result<Vec<Biquad<f64>>, DspError> {
    let ordered_zeros = order_zeros_for_pairing(zeros);
    // Pair adjacent zeros so the interleaved +1/-1 ordering survives.
    let mut nums = Vec::new();
    let mut i = 0;
    let tol = 1e-8;
    while i < ordered_zeros.len() {
        if i + 1 < ordered_zeros.len() {
            let (a, b) = (ordered_zeros[i], ordered_zeros[i + 1]);
            if (a.conj() - b).norm() <= tol * (1.0 + a.norm()) || (a.im.abs() <= tol && b.im.abs() <= tol) {
                nums.push((1.0, -(a.re + b.re), (a * b).re));
                i += 2;
                continue;
            }
        }
        let a = ordered_zeros[i];
        nums.push((1.0, -a.re, 0.0));
        i += 1;
    }
    let dens = quadratic_factors(poles)?;
    // Every design here has as many zeros as poles after the bilinear
    // transform, so sections line up one to one.
    if nums.len() != dens.len() {
        return Err(DspError::SectionMismatch {
            numerators: nums.len(),
            denominators: dens.len(),
        });
    }

    let n_sections = dens.len();
    let mut sections = Vec::with_capacity(n_sections);
    for (idx, (num, den)) in nums.iter().zip(dens.iter()).enumerate() {
        let g = match mode {
            GainMode::UnityDc => {
                let num_dc = num.0 + num.1 + num.2;
                let den_dc = den.0 + den.1 + den.2;
                den_dc / num_dc
            }
            GainMode::DistributeEvenly => {
                if gain > 0.0 {
                    gain.powf(1.0 / n_sections as f64)
                } else if idx == 0 {
                    gain
                } else {
                    1.0
                }
            }
        };
        sections.push(Biquad {
            b0: g * num.0,
            b1: g * num.1,
            b2: g * num.2,
            a1: den.1,
            a2: den.2,
        });
    }
    Ok(sections)
}

fn narrow<T: Real>(sections: &[Biquad<f64>]) -> Vec<Biquad<T>> {
    sections
        .iter()
        .map(|s| Biquad {
            b0: T::cast(s.b0),
            b1: T::cast(s.b1),
            b2: T::cast(s.b2),
            a1: T::cast(s.a1),
            a2: T::cast(s.a2),
        })
        .collect()
}

fn check_order(order: usize) -> Result<(), DspError> {
    if order == 0 || order > 16 {
        return Err(DspError::InvalidOrder { order });
    }
    Ok(())
}

fn check_rate(sample_rate_hz: f64) -> Result<(), DspError> {
    if !sample_rate_hz.is_finite() || sample_rate_hz <= 0.0 {
        return Err(DspError::InvalidSampleRate {
            rate_hz: sample_rate_hz,
        });
    }
    Ok(())
}
