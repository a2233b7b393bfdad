//! Example extraction and dataset assembly.
//!
//! An example is a fixed-length multichannel window cut from a
//! preprocessed session. Event windows end `lead_s` seconds before a tag;
//! non-event windows tile the recording from its start, skipping anything
//! near a tag. Downstream code standardizes each window, rebalances with
//! undersampling, and splits into train/val/test either randomly or per
//! held-out subject.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::PreprocessedSession;
use crate::scalar::Real;

/// Quiet time required after a tag before non-event windows may resume.
pub const POST_TAG_BUFFER_S: f64 = 300.0;

/// Longest lead supported by the experiment grid.
pub const MAX_LEAD_S: u32 = 300;

const MAX_RESHUFFLES: usize = 100;
const BALANCE_TOLERANCE: f64 = 0.05;
const DEGENERATE_STD: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum WindowError {
    #[error("window length {0} s not supported (expected 60 or 300)")]
    InvalidWindowLen(u32),
    #[error("lead {0} s not supported (expected a multiple of 60 up to 300)")]
    InvalidLead(u32),
    #[error("rate {0} Hz not supported (expected 4 or 64)")]
    InvalidRate(f64),
    #[error("session is at {session_hz} Hz but the window config wants {config_hz} Hz")]
    RateMismatch { session_hz: f64, config_hz: f64 },
    #[error("dataset of {len} examples is too small to split")]
    DatasetTooSmall { len: usize },
    #[error("no examples for held-out subject {subject:?}")]
    UnknownSubject { subject: String },
    #[error("no examples from other subjects to train on")]
    NoOtherSubjects,
    #[error("subject {subject:?} has no weeks after the first")]
    NoLaterWeeks { subject: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Event,
    NonEvent,
}

impl Label {
    pub fn is_event(self) -> bool {
        self == Label::Event
    }
}

/// Raw accelerometer slice aligned with an example's time span.
#[derive(Debug, Clone, PartialEq)]
pub struct AccWindow<T> {
    pub axes: [Vec<T>; 3],
    pub rate_hz: f64,
}

/// One training or evaluation window.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<T> {
    /// Channel-major, indexed by [`crate::dsp::SignalChannel::index`].
    pub signal: [Vec<T>; 4],
    pub rate_hz: f64,
    pub label: Label,
    pub subject_id: String,
    pub week_index: u32,
    /// Unix seconds of the window's first sample.
    pub window_start: f64,
    pub window_len_s: u32,
    /// Present when the source session covers the span at the ACC rate.
    pub acc: Option<AccWindow<T>>,
    /// Filled in by the activity classifier, when one is applied.
    pub activity: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_len_s: u32,
    /// Gap between the window's end and the tag it predicts.
    pub lead_s: u32,
    pub rate_hz: f64,
}

impl WindowConfig {
    pub fn validate(&self) -> Result<(), WindowError> {
        if !matches!(self.window_len_s, 60 | 300) {
            return Err(WindowError::InvalidWindowLen(self.window_len_s));
        }
        if self.lead_s % 60 != 0 || self.lead_s > MAX_LEAD_S {
            return Err(WindowError::InvalidLead(self.lead_s));
        }
        if self.rate_hz != 4.0 && self.rate_hz != 64.0 {
            return Err(WindowError::InvalidRate(self.rate_hz));
        }
        Ok(())
    }

    pub fn window_samples(&self) -> usize {
        (self.window_len_s as f64 * self.rate_hz).round() as usize
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExtractReport {
    /// Tags whose window would start before the recording or end after it.
    pub skipped_out_of_range: usize,
    /// Windows that overlapped another tag's post-event buffer.
    pub skipped_buffer_overlap: usize,
}

/// Cut one window per tag, ending `lead_s` seconds before it.
pub fn extract_event_windows<T: Real>(
    session: &PreprocessedSession<T>,
    cfg: &WindowConfig,
) -> Result<(Vec<Example<T>>, ExtractReport), WindowError> {
    cfg.validate()?;
    check_rate(session, cfg)?;
    let w = cfg.window_samples() as i64;
    let lead = (cfg.lead_s as f64 * session.rate_hz).round() as i64;
    let mut out = Vec::new();
    let mut report = ExtractReport::default();
    for &tag in &session.tags {
        let tag_idx = ((tag - session.start_time) * session.rate_hz).round() as i64;
        let end = tag_idx - lead;
        let start = end - w;
        if start < 0 || end > session.len() as i64 {
            report.skipped_out_of_range += 1;
            continue;
        }
        let t0 = session.start_time + start as f64 / session.rate_hz;
        let t1 = t0 + cfg.window_len_s as f64;
        let contaminated = session
            .tags
            .iter()
            .any(|&other| other != tag && t0 <= other + POST_TAG_BUFFER_S && t1 > other);
        if contaminated {
            report.skipped_buffer_overlap += 1;
            continue;
        }
        out.push(make_example(session, start as usize, cfg, Label::Event));
    }
    Ok((out, report))
}

/// Tile non-event windows from the recording start, excluding any window
/// that touches a tag's event span or its post-event buffer.
pub fn extract_nonevent_windows<T: Real>(
    session: &PreprocessedSession<T>,
    cfg: &WindowConfig,
) -> Result<Vec<Example<T>>, WindowError> {
    cfg.validate()?;
    check_rate(session, cfg)?;
    let w = cfg.window_samples();
    let mut out = Vec::new();
    let mut start = 0usize;
    while start + w <= session.len() {
        let t0 = session.start_time + start as f64 / session.rate_hz;
        let t1 = t0 + cfg.window_len_s as f64;
        let excluded = session.tags.iter().any(|&tag| {
            let zone_start = tag - (cfg.lead_s + cfg.window_len_s) as f64;
            let zone_end = tag + POST_TAG_BUFFER_S;
            t0 <= zone_end && t1 > zone_start
        });
        if !excluded {
            out.push(make_example(session, start, cfg, Label::NonEvent));
        }
        start += w;
    }
    Ok(out)
}

fn check_rate<T: Real>(
    session: &PreprocessedSession<T>,
    cfg: &WindowConfig,
) -> Result<(), WindowError> {
    if (session.rate_hz - cfg.rate_hz).abs() > 1e-9 {
        return Err(WindowError::RateMismatch {
            session_hz: session.rate_hz,
            config_hz: cfg.rate_hz,
        });
    }
    Ok(())
}

fn make_example<T: Real>(
    session: &PreprocessedSession<T>,
    start: usize,
    cfg: &WindowConfig,
    label: Label,
) -> Example<T> {
    let w = cfg.window_samples();
    let signal = std::array::from_fn(|c| session.signal[c][start..start + w].to_vec());
    let t0 = session.start_time + start as f64 / session.rate_hz;
    Example {
        signal,
        rate_hz: session.rate_hz,
        label,
        subject_id: session.subject_id.clone(),
        week_index: session.week_index,
        window_start: t0,
        window_len_s: cfg.window_len_s,
        acc: acc_window(session, t0, cfg.window_len_s),
        activity: None,
    }
}

fn acc_window<T: Real>(
    session: &PreprocessedSession<T>,
    t0: f64,
    len_s: u32,
) -> Option<AccWindow<T>> {
    let n = (len_s as f64 * session.acc_rate_hz).round() as usize;
    let start = ((t0 - session.start_time) * session.acc_rate_hz).round() as i64;
    if n == 0 || start < 0 || start as usize + n > session.acc[0].len() {
        return None;
    }
    let start = start as usize;
    Some(AccWindow {
        axes: std::array::from_fn(|a| session.acc[a][start..start + n].to_vec()),
        rate_hz: session.acc_rate_hz,
    })
}

/// Z-score every signal channel of every example in place. A channel whose
/// population standard deviation is below 1e-8 becomes all zeros.
pub fn standardize<T: Real>(examples: &mut [Example<T>]) {
    for ex in examples {
        standardize_example(ex);
    }
}

pub fn standardize_example<T: Real>(ex: &mut Example<T>) {
    for ch in ex.signal.iter_mut() {
        if ch.is_empty() {
            continue;
        }
        let n = T::cast(ch.len() as f64);
        let mean = ch.iter().copied().sum::<T>() / n;
        let var = ch.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let std = var.sqrt();
        if std < T::cast(DEGENERATE_STD) {
            ch.iter_mut().for_each(|v| *v = T::zero());
        } else {
            ch.iter_mut().for_each(|v| *v = (*v - mean) / std);
        }
    }
}

pub fn event_fraction<T>(examples: &[Example<T>]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let events = examples.iter().filter(|e| e.label.is_event()).count();
    events as f64 / examples.len() as f64
}

#[derive(Debug)]
pub struct UndersampleOutcome<T> {
    /// All events followed by the sampled non-events.
    pub dataset: Vec<Example<T>>,
    /// Non-events that were not drawn, available for later top-ups.
    pub leftover_nonevents: Vec<Example<T>>,
    /// How many non-events were missing to reach twice the event count.
    pub shortage: usize,
}

/// Keep every event and a random draw of twice as many non-events, so
/// events make up one third of the dataset.
pub fn undersample<T: Real, R: Rng>(
    events: Vec<Example<T>>,
    mut nonevents: Vec<Example<T>>,
    rng: &mut R,
) -> UndersampleOutcome<T> {
    let target = 2 * events.len();
    nonevents.shuffle(rng);
    let shortage = target.saturating_sub(nonevents.len());
    let leftover_nonevents = nonevents.split_off(target.min(nonevents.len()));
    let mut dataset = events;
    dataset.append(&mut nonevents);
    UndersampleOutcome {
        dataset,
        leftover_nonevents,
        shortage,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitDescriptor {
    Random,
    PersonalizedStage { held_out_subject: String },
}

#[derive(Debug)]
pub struct DatasetSplit<T> {
    pub train: Vec<Example<T>>,
    pub val: Vec<Example<T>>,
    pub test: Vec<Example<T>>,
    pub descriptor: SplitDescriptor,
}

/// The two training stages of a held-out-subject evaluation.
#[derive(Debug)]
pub struct PersonalizedSplit<T> {
    /// Every other subject's examples, 80/20 train/val, no test part.
    pub others: DatasetSplit<T>,
    /// The held-out subject: first recorded week 80/20 train/val, all
    /// later weeks as test.
    pub personal: DatasetSplit<T>,
}

/// 80/10/10 split with both holdout sizes floored to tenths. Reshuffles
/// until every part's event fraction is within five percentage points of
/// the whole dataset's, keeping the best arrangement seen if no attempt
/// satisfies that within 100 tries.
pub fn split_random<T: Real, R: Rng>(
    dataset: Vec<Example<T>>,
    rng: &mut R,
) -> Result<DatasetSplit<T>, WindowError> {
    let n = dataset.len();
    let n_test = n / 10;
    let n_val = n / 10;
    if n_test == 0 || n_val == 0 || n - n_test - n_val == 0 {
        return Err(WindowError::DatasetTooSmall { len: n });
    }
    let labels: Vec<bool> = dataset.iter().map(|e| e.label.is_event()).collect();
    let order = balanced_permutation(&labels, &[n_test, n_val], rng);
    let mut parts = take_parts(dataset, &order, &[n_test, n_val]);
    let train = parts.pop().expect("remainder");
    let val = parts.pop().expect("val part");
    let test = parts.pop().expect("test part");
    Ok(DatasetSplit {
        train,
        val,
        test,
        descriptor: SplitDescriptor::Random,
    })
}

/// Build both stages of a held-out-subject fold.
pub fn split_personalized<T: Real, R: Rng>(
    dataset: Vec<Example<T>>,
    held_out_subject: &str,
    rng: &mut R,
) -> Result<PersonalizedSplit<T>, WindowError> {
    let (held, others): (Vec<_>, Vec<_>) = dataset
        .into_iter()
        .partition(|e| e.subject_id == held_out_subject);
    if held.is_empty() {
        return Err(WindowError::UnknownSubject {
            subject: held_out_subject.into(),
        });
    }
    if others.is_empty() {
        return Err(WindowError::NoOtherSubjects);
    }

    let first_week = held.iter().map(|e| e.week_index).min().expect("non-empty");
    let (first, later): (Vec<_>, Vec<_>) =
        held.into_iter().partition(|e| e.week_index == first_week);
    if later.is_empty() {
        return Err(WindowError::NoLaterWeeks {
            subject: held_out_subject.into(),
        });
    }

    let descriptor = SplitDescriptor::PersonalizedStage {
        held_out_subject: held_out_subject.into(),
    };
    let (others_train, others_val) = split_two_way(others, rng)?;
    let (personal_train, personal_val) = split_two_way(first, rng)?;
    Ok(PersonalizedSplit {
        others: DatasetSplit {
            train: others_train,
            val: others_val,
            test: Vec::new(),
            descriptor: descriptor.clone(),
        },
        personal: DatasetSplit {
            train: personal_train,
            val: personal_val,
            test: later,
            descriptor,
        },
    })
}

/// 80/20 split, val floored to a fifth, with the same balance retries as
/// [`split_random`].
fn split_two_way<T: Real, R: Rng>(
    pool: Vec<Example<T>>,
    rng: &mut R,
) -> Result<(Vec<Example<T>>, Vec<Example<T>>), WindowError> {
    let n = pool.len();
    let n_val = n / 5;
    if n_val == 0 || n - n_val == 0 {
        return Err(WindowError::DatasetTooSmall { len: n });
    }
    let labels: Vec<bool> = pool.iter().map(|e| e.label.is_event()).collect();
    let order = balanced_permutation(&labels, &[n_val], rng);
    let mut parts = take_parts(pool, &order, &[n_val]);
    let train = parts.pop().expect("remainder");
    let val = parts.pop().expect("val part");
    Ok((train, val))
}

/// Shuffle until the leading parts (and the remainder) all have an event
/// fraction within [`BALANCE_TOLERANCE`] of the whole; return the best
/// permutation seen.
fn balanced_permutation<R: Rng>(
    labels: &[bool],
    part_sizes: &[usize],
    rng: &mut R,
) -> Vec<usize> {
    let n = labels.len();
    let overall = labels.iter().filter(|&&l| l).count() as f64 / n as f64;
    let mut order: Vec<usize> = (0..n).collect();
    let mut best = (f64::INFINITY, order.clone());
    for _ in 0..MAX_RESHUFFLES {
        order.shuffle(rng);
        let mut worst: f64 = 0.0;
        let mut offset = 0;
        let remainder = n - part_sizes.iter().sum::<usize>();
        for &size in part_sizes.iter().chain(std::iter::once(&remainder)) {
            let events = order[offset..offset + size]
                .iter()
                .filter(|&&i| labels[i])
                .count();
            worst = worst.max((events as f64 / size as f64 - overall).abs());
            offset += size;
        }
        if worst < best.0 {
            best = (worst, order.clone());
        }
        if worst <= BALANCE_TOLERANCE {
            break;
        }
    }
    best.1
}

/// Move examples out of `dataset` following `order`: one Vec per leading
/// part size, then the remainder appended last.
fn take_parts<T>(
    dataset: Vec<Example<T>>,
    order: &[usize],
    part_sizes: &[usize],
) -> Vec<Vec<Example<T>>> {
    let mut slots: Vec<Option<Example<T>>> = dataset.into_iter().map(Some).collect();
    let mut parts = Vec::with_capacity(part_sizes.len() + 1);
    let mut offset = 0;
    let remainder = slots.len() - part_sizes.iter().sum::<usize>();
    for &size in part_sizes.iter().chain(std::iter::once(&remainder)) {
        let part: Vec<Example<T>> = order[offset..offset + size]
            .iter()
            .map(|&i| slots[i].take().expect("each index used once"))
            .collect();
        parts.push(part);
        offset += size;
    }
    parts
}

/// Sorted unique subject ids.
pub fn subjects<T>(examples: &[Example<T>]) -> Vec<String> {
    let mut ids: Vec<String> = examples.iter().map(|e| e.subject_id.clone()).collect();
    ids.sort();
    ids.dedup();
    ids
}
