//! Synthetic session generator.
//!
//! Produces sessions with a learnable pre-event signature: in the five
//! minutes before each tag, EDA and HR ramp up, skin temperature ramps
//! down, and BVP amplitude grows, each linearly from zero to the
//! configured effect size at the tag itself. Subject-level traits (resting
//! HR, baseline temperature, pulse frequency) are stable across weeks so
//! personalization has something to exploit.
//!
//! Determinism contract: one RNG stream per subject (traits) and one per
//! subject-week (everything else), with a fixed draw order of phases,
//! motion phases, tag jitters, then channel samples in [`ChannelKind::ALL`]
//! order. Same seed, same output, bit for bit.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{
    BaselineInterval, BaselineLabel, ChannelKind, ChannelRecording, E4Error, Session,
    SyntheticConfig, TAG_FUTURE_S, TAG_HISTORY_S,
};
use crate::scalar::Real;
use crate::seed;

/// Epoch of the synthetic study, unix seconds.
const STUDY_START: f64 = 1_600_000_000.0;
const WEEK_S: f64 = 604_800.0;
const DAY_S: f64 = 86_400.0;

/// Ramp-up time of every pre-event effect.
const EFFECT_RAMP_S: f64 = 300.0;

/// Motion injected during high-activity segments, raw 1/64 g units.
const MOTION_AMPLITUDE: f64 = 22.0;
const MOTION_FREQ_HZ: f64 = 2.2;

/// Week-one calibration blocks, seconds from session start. Both are long
/// enough to tile 300 s activity windows.
const DANCE_SPAN: (f64, f64) = (120.0, 480.0);
const RELAX_SPAN: (f64, f64) = (540.0, 900.0);

/// Subject directory name for a zero-based subject index.
pub fn subject_label(subject_index: u32) -> String {
    format!("s{:02}", subject_index + 1)
}

/// Generate every session of the configured study, subject-major.
pub fn generate_corpus<T: Real>(cfg: &SyntheticConfig) -> Result<Vec<Session<T>>, E4Error> {
    let mut sessions = Vec::new();
    for subject in 0..cfg.n_subjects {
        for week in 1..=cfg.weeks_per_subject {
            sessions.push(generate_session(cfg, subject, week)?);
        }
    }
    Ok(sessions)
}

/// Generate one subject-week. `subject_index` is zero-based, `week_index`
/// one-based.
pub fn generate_session<T: Real>(
    cfg: &SyntheticConfig,
    subject_index: u32,
    week_index: u32,
) -> Result<Session<T>, E4Error> {
    cfg.validate()?;
    if subject_index >= cfg.n_subjects {
        return Err(E4Error::InvalidConfig(format!(
            "subject index {subject_index} outside 0..{}",
            cfg.n_subjects
        )));
    }
    if week_index == 0 || week_index > cfg.weeks_per_subject {
        return Err(E4Error::InvalidConfig(format!(
            "week index {week_index} outside 1..={}",
            cfg.weeks_per_subject
        )));
    }

    let subject_id = subject_label(subject_index);
    let duration = cfg.session_duration_s;
    let start_time =
        STUDY_START + (week_index - 1) as f64 * WEEK_S + subject_index as f64 * DAY_S;

    // Subject traits, stable across weeks.
    let mut traits_rng = seed::rng(seed::substream_keyed(cfg.seed, "subject", &subject_id));
    let u_f0: f64 = traits_rng.random();
    let u_eda: f64 = traits_rng.random();
    let u_temp: f64 = traits_rng.random();
    let u_hr: f64 = traits_rng.random();

    let key = format!("{subject_id}/w{week_index}");
    let mut rng = seed::rng(seed::substream_keyed(cfg.seed, "session", &key));

    let phase = |rng: &mut ChaCha8Rng| rng.random::<f64>() * TAU;
    let p_bvp = [phase(&mut rng), phase(&mut rng), phase(&mut rng)];
    let p_eda = phase(&mut rng);
    let p_temp = phase(&mut rng);
    let p_hr = phase(&mut rng);
    let p_motion = [phase(&mut rng), phase(&mut rng), phase(&mut rng)];

    // Tags sit evenly over the span that leaves a full history margin
    // before and a buffer after, with a jitter small enough to keep them
    // strictly increasing.
    let lo = TAG_HISTORY_S;
    let hi = duration - TAG_FUTURE_S;
    let n_events = cfg.events_per_session as usize;
    let spacing = (hi - lo) / (n_events as f64 + 1.0);
    let jitter_max = (spacing / 4.0).min(30.0);
    let mut tags_rel = Vec::with_capacity(n_events);
    for i in 0..n_events {
        let center = lo + spacing * (i as f64 + 1.0);
        let jitter: f64 = rng.random_range(-1.0..=1.0) * jitter_max;
        tags_rel.push(center + jitter);
    }

    let mut motion_segments = cfg.activity_segments.clone();
    if week_index == 1 {
        motion_segments.push(DANCE_SPAN);
    }
    let in_motion = |t: f64| motion_segments.iter().any(|&(s, e)| t >= s && t < e);

    // Total effect ramp at session-relative time t, clamped to one so
    // overlapping events do not stack beyond full strength.
    let ramp = |t: f64| -> f64 {
        let mut r = 0.0;
        for &tag in &tags_rel {
            let dt = tag - t;
            if (0.0..=EFFECT_RAMP_S).contains(&dt) {
                r += 1.0 - dt / EFFECT_RAMP_S;
            }
        }
        r.min(1.0)
    };

    let noise = cfg.noise_scale;
    let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
    let fx = &cfg.event_effect;
    let mut channels = BTreeMap::new();

    let f0 = 1.05 + 0.2 * u_f0;
    let rate = ChannelKind::Bvp.canonical_rate_hz();
    let mut samples = Vec::with_capacity((duration * rate) as usize);
    for i in 0..(duration * rate).round() as usize {
        let t = i as f64 / rate;
        let carrier = 0.55 * (TAU * f0 * t + p_bvp[0]).sin()
            + 0.28 * (2.0 * TAU * f0 * t + p_bvp[1]).sin()
            + 0.14 * (3.0 * TAU * f0 * t + p_bvp[2]).sin();
        let amp = 1.0 + fx.bvp_amp * ramp(t);
        samples.push(50.0 * amp * carrier + 4.0 * noise * normal(&mut rng));
    }
    channels.insert(
        ChannelKind::Bvp,
        recording(ChannelKind::Bvp, start_time, samples),
    );

    let eda_base = 0.6 + 0.6 * u_eda;
    let rate = ChannelKind::Eda.canonical_rate_hz();
    let mut samples = Vec::with_capacity((duration * rate) as usize);
    for i in 0..(duration * rate).round() as usize {
        let t = i as f64 / rate;
        let v = eda_base
            + 0.25 * (TAU * t / 600.0 + p_eda).sin()
            + fx.eda_rise * ramp(t)
            + 0.03 * noise * normal(&mut rng);
        samples.push(v);
    }
    channels.insert(
        ChannelKind::Eda,
        recording(ChannelKind::Eda, start_time, samples),
    );

    let temp_base = 33.0 + u_temp;
    let rate = ChannelKind::Temp.canonical_rate_hz();
    let mut samples = Vec::with_capacity((duration * rate) as usize);
    for i in 0..(duration * rate).round() as usize {
        let t = i as f64 / rate;
        let v = temp_base + 0.4 * (TAU * t / 900.0 + p_temp).sin() - fx.temp_drop * ramp(t)
            + 0.03 * noise * normal(&mut rng);
        samples.push(v);
    }
    channels.insert(
        ChannelKind::Temp,
        recording(ChannelKind::Temp, start_time, samples),
    );

    let hr_base = 75.0 + 10.0 * u_hr;
    let rate = ChannelKind::Hr.canonical_rate_hz();
    let mut samples = Vec::with_capacity((duration * rate) as usize);
    for i in 0..(duration * rate).round() as usize {
        let t = i as f64 / rate;
        let v = hr_base
            + 4.0 * (TAU * t / 300.0 + p_hr).sin()
            + fx.hr_rise * ramp(t)
            + 1.2 * noise * normal(&mut rng);
        samples.push(v);
    }
    channels.insert(
        ChannelKind::Hr,
        recording(ChannelKind::Hr, start_time, samples),
    );

    // Accelerometer: gravity on z, noise floor everywhere, and a strong
    // oscillation inside motion segments. Raw units are 1/64 g.
    let rate = ChannelKind::AccX.canonical_rate_hz();
    for (axis, kind) in [ChannelKind::AccX, ChannelKind::AccY, ChannelKind::AccZ]
        .into_iter()
        .enumerate()
    {
        let mut samples = Vec::with_capacity((duration * rate) as usize);
        for i in 0..(duration * rate).round() as usize {
            let t = i as f64 / rate;
            let mut v = if kind == ChannelKind::AccZ { 64.0 } else { 0.0 };
            v += 1.2 * noise * normal(&mut rng);
            if in_motion(t) {
                v += MOTION_AMPLITUDE * (TAU * MOTION_FREQ_HZ * t + p_motion[axis]).sin()
                    + 6.0 * noise * normal(&mut rng);
            }
            samples.push(v);
        }
        channels.insert(kind, recording(kind, start_time, samples));
    }

    let baseline_intervals = (week_index == 1).then(|| {
        vec![
            BaselineInterval {
                start: start_time + DANCE_SPAN.0,
                end: start_time + DANCE_SPAN.1,
                label: BaselineLabel::Dance,
            },
            BaselineInterval {
                start: start_time + RELAX_SPAN.0,
                end: start_time + RELAX_SPAN.1,
                label: BaselineLabel::Relax,
            },
        ]
    });

    let session = Session {
        subject_id,
        week_index,
        channels,
        tags: tags_rel.iter().map(|t| start_time + t).collect(),
        baseline_intervals,
    };
    session.validate()?;
    Ok(session)
}

fn recording<T: Real>(kind: ChannelKind, start_time: f64, samples: Vec<f64>) -> ChannelRecording<T> {
    ChannelRecording {
        kind,
        start_time,
        sample_rate_hz: kind.canonical_rate_hz(),
        samples: samples.into_iter().map(T::cast).collect(),
    }
}
