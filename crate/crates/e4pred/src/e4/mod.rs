//! Sessions in the Empatica E4 export layout.
//!
//! A session directory holds one CSV per channel (`BVP.csv`, `EDA.csv`,
//! `TEMP.csv`, `HR.csv`, `ACC.csv`), a `tags.csv` of event timestamps, and
//! optionally `baseline.csv` with labeled calm/active calibration
//! intervals. Channel files start with two header lines (unix start time,
//! sample rate) followed by one sample per line; `ACC.csv` carries three
//! comma-separated columns. Accelerometer samples are raw 1/64 g units.

mod io;
pub mod synth;

pub use io::{read_session, write_session};
pub use synth::{generate_corpus, generate_session};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::scalar::Real;

/// Margins a tag needs inside the recording: the longest window plus the
/// longest lead before it, the post-event buffer after it.
pub const TAG_HISTORY_S: f64 = 600.0;
pub const TAG_FUTURE_S: f64 = 300.0;
/// Sessions must fit windows, leads and buffers twice over.
pub const MIN_SESSION_DURATION_S: f64 = 2.0 * (300.0 + 300.0 + 300.0);

#[derive(Debug, thiserror::Error)]
pub enum E4Error {
    #[error("missing file {path}")]
    MissingFile { path: PathBuf },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed number {text:?}")]
    MalformedNumber {
        path: PathBuf,
        line: usize,
        text: String,
    },
    #[error("{path}:{line}: expected {expected} columns, found {found}")]
    ColumnCount {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}:{line}: header columns disagree")]
    HeaderDisagrees { path: PathBuf, line: usize },
    #[error("{path}: file has no {what}")]
    TruncatedHeader { path: PathBuf, what: &'static str },
    #[error("{kind}: sample rate {found} Hz, canonical {expected} Hz")]
    RateMismatch {
        kind: ChannelKind,
        expected: f64,
        found: f64,
    },
    #[error("channel {kind} is missing")]
    MissingChannel { kind: ChannelKind },
    #[error("channel {kind} is empty")]
    EmptyChannel { kind: ChannelKind },
    #[error("channel {kind}: sample {index} is not finite")]
    NonFiniteSample { kind: ChannelKind, index: usize },
    #[error("tag {tag} outside the common recorded span [{start}, {end}]")]
    TagOutsideSpan { tag: f64, start: f64, end: f64 },
    #[error("tags not strictly increasing at index {index}")]
    TagsUnsorted { index: usize },
    #[error("baseline interval [{start}, {end}] is not a valid interval")]
    BadBaselineInterval { start: f64, end: f64 },
    #[error("{path}:{line}: unknown baseline label {text:?}")]
    UnknownBaselineLabel {
        path: PathBuf,
        line: usize,
        text: String,
    },
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
}

/// The seven recorded channels of a session.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum ChannelKind {
    Bvp,
    Eda,
    Temp,
    Hr,
    AccX,
    AccY,
    AccZ,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 7] = [
        ChannelKind::Bvp,
        ChannelKind::Eda,
        ChannelKind::Temp,
        ChannelKind::Hr,
        ChannelKind::AccX,
        ChannelKind::AccY,
        ChannelKind::AccZ,
    ];

    /// Device-native sampling rate.
    pub fn canonical_rate_hz(self) -> f64 {
        match self {
            ChannelKind::Bvp => 64.0,
            ChannelKind::Eda | ChannelKind::Temp => 4.0,
            ChannelKind::Hr => 1.0,
            ChannelKind::AccX | ChannelKind::AccY | ChannelKind::AccZ => 32.0,
        }
    }
}

impl std::fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ChannelKind::Bvp => "BVP",
            ChannelKind::Eda => "EDA",
            ChannelKind::Temp => "TEMP",
            ChannelKind::Hr => "HR",
            ChannelKind::AccX => "ACC.x",
            ChannelKind::AccY => "ACC.y",
            ChannelKind::AccZ => "ACC.z",
        };
        f.write_str(name)
    }
}

/// One channel's samples plus its time base.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRecording<T> {
    pub kind: ChannelKind,
    /// Unix seconds of the first sample.
    pub start_time: f64,
    pub sample_rate_hz: f64,
    pub samples: Vec<T>,
}

impl<T: Real> ChannelRecording<T> {
    pub fn end_time(&self) -> f64 {
        self.start_time + self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn validate(&self) -> Result<(), E4Error> {
        let expected = self.kind.canonical_rate_hz();
        if (self.sample_rate_hz - expected).abs() > 1e-6 {
            return Err(E4Error::RateMismatch {
                kind: self.kind,
                expected,
                found: self.sample_rate_hz,
            });
        }
        if self.samples.is_empty() {
            return Err(E4Error::EmptyChannel { kind: self.kind });
        }
        if let Some(index) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(E4Error::NonFiniteSample {
                kind: self.kind,
                index,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineLabel {
    /// High-motion calibration block.
    Dance,
    /// Still calibration block.
    Relax,
}

impl std::fmt::Display for BaselineLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BaselineLabel::Dance => "dance",
            BaselineLabel::Relax => "relax",
        })
    }
}

/// Labeled calibration interval, unix seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineInterval {
    pub start: f64,
    pub end: f64,
    pub label: BaselineLabel,
}

/// A full recording session of one subject-week.
#[derive(Debug, Clone, PartialEq)]
pub struct Session<T> {
    pub subject_id: String,
    /// 1-based week of the study.
    pub week_index: u32,
    pub channels: BTreeMap<ChannelKind, ChannelRecording<T>>,
    /// Event timestamps, unix seconds, strictly increasing.
    pub tags: Vec<f64>,
    /// Calibration intervals from the in-clinic visit, when present.
    pub baseline_intervals: Option<Vec<BaselineInterval>>,
}

impl<T: Real> Session<T> {
    /// Intersection of all channels' recorded spans.
    pub fn common_span(&self) -> Option<(f64, f64)> {
        let mut start = f64::NEG_INFINITY;
        let mut end = f64::INFINITY;
        if self.channels.is_empty() {
            return None;
        }
        for rec in self.channels.values() {
            start = start.max(rec.start_time);
            end = end.min(rec.end_time());
        }
        Some((start, end))
    }

    pub fn validate(&self) -> Result<(), E4Error> {
        for kind in ChannelKind::ALL {
            let rec = self
                .channels
                .get(&kind)
                .ok_or(E4Error::MissingChannel { kind })?;
            rec.validate()?;
        }
        let (start, end) = self.common_span().expect("channels checked above");
        for w in self.tags.windows(2) {
            if w[1] <= w[0] {
                let index = self.tags.iter().position(|&t| t == w[1]).unwrap_or(0);
                return Err(E4Error::TagsUnsorted { index });
            }
        }
        for &tag in &self.tags {
            if !(start..=end).contains(&tag) {
                return Err(E4Error::TagOutsideSpan { tag, start, end });
            }
        }
        if let Some(intervals) = &self.baseline_intervals {
            for iv in intervals {
                if !(iv.start.is_finite() && iv.end.is_finite() && iv.start < iv.end) {
                    return Err(E4Error::BadBaselineInterval {
                        start: iv.start,
                        end: iv.end,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Per-channel pre-event response magnitudes. Each effect ramps linearly
/// from zero five minutes before a tag to full strength at the tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventEffect {
    /// Additive EDA rise, microsiemens.
    pub eda_rise: f64,
    /// Additive heart-rate rise, beats per minute.
    pub hr_rise: f64,
    /// Subtractive skin-temperature drop, degrees Celsius.
    pub temp_drop: f64,
    /// Relative BVP amplitude gain (0.5 = plus fifty percent).
    pub bvp_amp: f64,
}

impl Default for EventEffect {
    fn default() -> Self {
        EventEffect {
            eda_rise: 1.5,
            hr_rise: 15.0,
            temp_drop: 0.8,
            bvp_amp: 0.6,
        }
    }
}

/// Parameters of the synthetic data generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_subjects: u32,
    pub weeks_per_subject: u32,
    pub session_duration_s: f64,
    pub events_per_session: u32,
    pub event_effect: EventEffect,
    /// High-motion intervals, seconds relative to session start.
    pub activity_segments: Vec<(f64, f64)>,
    /// Scales every channel's noise; 0 gives noise-free signals.
    pub noise_scale: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 42,
            n_subjects: 9,
            weeks_per_subject: 8,
            session_duration_s: 3600.0,
            events_per_session: 2,
            event_effect: EventEffect::default(),
            activity_segments: vec![(1260.0, 1500.0)],
            noise_scale: 1.0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), E4Error> {
        if self.n_subjects == 0 {
            return Err(E4Error::InvalidConfig("n_subjects must be at least 1".into()));
        }
        if self.weeks_per_subject == 0 {
            return Err(E4Error::InvalidConfig(
                "weeks_per_subject must be at least 1".into(),
            ));
        }
        if self.events_per_session == 0 {
            return Err(E4Error::InvalidConfig(
                "events_per_session must be at least 1".into(),
            ));
        }
        if !self.session_duration_s.is_finite()
            || self.session_duration_s < MIN_SESSION_DURATION_S
        {
            return Err(E4Error::InvalidConfig(format!(
                "session_duration_s must be at least {MIN_SESSION_DURATION_S}"
            )));
        }
        if !self.noise_scale.is_finite() || self.noise_scale < 0.0 {
            return Err(E4Error::InvalidConfig(
                "noise_scale must be non-negative".into(),
            ));
        }
        for &(s, e) in &self.activity_segments {
            if !(s.is_finite() && e.is_finite() && 0.0 <= s && s < e) {
                return Err(E4Error::InvalidConfig(format!(
                    "activity segment [{s}, {e}] is not a valid interval"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_recording(kind: ChannelKind, n: usize) -> ChannelRecording<f64> {
        ChannelRecording {
            kind,
            start_time: 1000.0,
            sample_rate_hz: kind.canonical_rate_hz(),
            samples: vec![1.0; n],
        }
    }

    fn minimal_session() -> Session<f64> {
        let mut channels = BTreeMap::new();
        for kind in ChannelKind::ALL {
            let n = (10.0 * kind.canonical_rate_hz()) as usize;
            channels.insert(kind, constant_recording(kind, n));
        }
        Session {
            subject_id: "s01".into(),
            week_index: 1,
            channels,
            tags: vec![1002.0, 1005.0],
            baseline_intervals: None,
        }
    }

    #[test]
    fn canonical_rates() {
        assert_eq!(ChannelKind::Bvp.canonical_rate_hz(), 64.0);
        assert_eq!(ChannelKind::Eda.canonical_rate_hz(), 4.0);
        assert_eq!(ChannelKind::Temp.canonical_rate_hz(), 4.0);
        assert_eq!(ChannelKind::Hr.canonical_rate_hz(), 1.0);
        assert_eq!(ChannelKind::AccX.canonical_rate_hz(), 32.0);
    }

    #[test]
    fn valid_session_passes() {
        minimal_session().validate().unwrap();
    }

    #[test]
    fn missing_channel_is_rejected() {
        let mut s = minimal_session();
        s.channels.remove(&ChannelKind::Hr);
        assert!(matches!(
            s.validate(),
            Err(E4Error::MissingChannel {
                kind: ChannelKind::Hr
            })
        ));
    }

    #[test]
    fn tag_outside_span_is_rejected() {
        let mut s = minimal_session();
        s.tags = vec![2000.0];
        assert!(matches!(s.validate(), Err(E4Error::TagOutsideSpan { .. })));
    }

    #[test]
    fn unsorted_tags_are_rejected() {
        let mut s = minimal_session();
        s.tags = vec![1005.0, 1002.0];
        assert!(matches!(s.validate(), Err(E4Error::TagsUnsorted { .. })));
    }

    #[test]
    fn wrong_rate_is_rejected() {
        let mut s = minimal_session();
        s.channels.get_mut(&ChannelKind::Eda).unwrap().sample_rate_hz = 8.0;
        assert!(matches!(s.validate(), Err(E4Error::RateMismatch { .. })));
    }

    #[test]
    fn non_finite_sample_is_rejected() {
        let mut s = minimal_session();
        s.channels.get_mut(&ChannelKind::Bvp).unwrap().samples[3] = f64::NAN;
        assert!(matches!(
            s.validate(),
            Err(E4Error::NonFiniteSample {
                kind: ChannelKind::Bvp,
                index: 3
            })
        ));
    }

    #[test]
    fn common_span_is_the_intersection() {
        let mut s = minimal_session();
        let eda = s.channels.get_mut(&ChannelKind::Eda).unwrap();
        eda.start_time = 1002.0;
        let (start, end) = s.common_span().unwrap();
        assert_eq!(start, 1002.0);
        assert_eq!(end, 1010.0);
    }

    #[test]
    fn config_validation_bounds() {
        let mut cfg = SyntheticConfig::default();
        cfg.validate().unwrap();
        cfg.session_duration_s = 900.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SyntheticConfig::default();
        cfg.n_subjects = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = SyntheticConfig::default();
        cfg.activity_segments = vec![(100.0, 50.0)];
        assert!(cfg.validate().is_err());
    }
}
