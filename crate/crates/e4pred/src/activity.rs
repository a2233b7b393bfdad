//! Accelerometer-based activity detection.
//!
//! A window is summarized by one scalar feature of its acceleration
//! magnitude, either the standard deviation or the dominant non-DC
//! frequency. Tuning sweeps candidate thresholds (midpoints between
//! consecutive distinct feature values) on labeled calibration windows and
//! keeps whatever maximizes balanced accuracy. The resulting model gates
//! training datasets: windows classified active are dropped, and when that
//! removes a quarter or more of the dataset the one-third event ratio is
//! restored from the unused non-event pool.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::PreprocessedSession;
use crate::scalar::Real;
use crate::windowing::{AccWindow, Example};

/// Raw accelerometer units per g.
pub const ACC_UNITS_PER_G: f64 = 64.0;

/// Removing at least this fraction of a dataset triggers rebalancing.
pub const RESAMPLE_THRESHOLD: f64 = 0.25;

#[derive(Debug, thiserror::Error)]
pub enum ActivityError {
    #[error("no calibration windows to tune on")]
    NoTrainingData,
    #[error("calibration windows must contain both classes")]
    SingleClass,
    #[error("accelerometer window is empty")]
    EmptyWindow,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMethod {
    StdDev,
    DominantFreq,
}

/// A tuned activity classifier: one feature, one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityModel {
    pub method: FeatureMethod,
    pub threshold: f64,
    pub window_len_s: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub balanced_accuracy: f64,
    pub std_balanced_accuracy: f64,
    pub freq_balanced_accuracy: f64,
}

/// Acceleration magnitude in g for each sample of a raw-unit window.
pub fn acc_magnitude<T: Real>(axes: &[Vec<T>; 3]) -> Vec<f64> {
    let n = axes[0].len().min(axes[1].len()).min(axes[2].len());
    (0..n)
        .map(|i| {
            let x = axes[0][i].to_f64_lossy();
            let y = axes[1][i].to_f64_lossy();
            let z = axes[2][i].to_f64_lossy();
            (x * x + y * y + z * z).sqrt() / ACC_UNITS_PER_G
        })
        .collect()
}

/// Population standard deviation of the magnitude, g.
pub fn feature_std(magnitude: &[f64]) -> f64 {
    if magnitude.is_empty() {
        return 0.0;
    }
    let n = magnitude.len() as f64;
    let mean = magnitude.iter().sum::<f64>() / n;
    (magnitude.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Frequency of the strongest non-DC spectral bin, Hz. A flat window
/// (no energy off DC) reports zero.
pub fn feature_dominant_freq(magnitude: &[f64], rate_hz: f64) -> f64 {
    let n = magnitude.len();
    if n < 2 {
        return 0.0;
    }
    let mut buf: Vec<Complex<f64>> = magnitude.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut best_bin = 0;
    let mut best_norm = 0.0;
    for (k, v) in buf.iter().enumerate().take(n / 2 + 1).skip(1) {
        let norm = v.norm();
        if norm > best_norm {
            best_norm = norm;
            best_bin = k;
        }
    }
    if best_norm < 1e-12 {
        return 0.0;
    }
    best_bin as f64 * rate_hz / n as f64
}

fn feature<T: Real>(method: FeatureMethod, window: &AccWindow<T>) -> f64 {
    let magnitude = acc_magnitude(&window.axes);
    match method {
        FeatureMethod::StdDev => feature_std(&magnitude),
        FeatureMethod::DominantFreq => feature_dominant_freq(&magnitude, window.rate_hz),
    }
}

/// Pick the feature and threshold with the best balanced accuracy on
/// labeled calibration windows (`true` = active). Ties prefer the
/// standard-deviation feature and the lowest threshold.
pub fn tune<T: Real>(
    windows: &[(AccWindow<T>, bool)],
    window_len_s: u32,
) -> Result<(ActivityModel, TuneReport), ActivityError> {
    if windows.is_empty() {
        return Err(ActivityError::NoTrainingData);
    }
    if windows.iter().any(|(w, _)| w.axes[0].is_empty()) {
        return Err(ActivityError::EmptyWindow);
    }
    let labels: Vec<bool> = windows.iter().map(|&(_, l)| l).collect();
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(ActivityError::SingleClass);
    }

    let sweep = |method: FeatureMethod| {
        let features: Vec<f64> = windows.iter().map(|(w, _)| feature(method, w)).collect();
        best_threshold(&features, &labels)
    };
    let (std_thr, std_acc) = sweep(FeatureMethod::StdDev);
    let (freq_thr, freq_acc) = sweep(FeatureMethod::DominantFreq);

    let (method, threshold, balanced_accuracy) = if freq_acc > std_acc {
        (FeatureMethod::DominantFreq, freq_thr, freq_acc)
    } else {
        (FeatureMethod::StdDev, std_thr, std_acc)
    };
    Ok((
        ActivityModel {
            method,
            threshold,
            window_len_s,
        },
        TuneReport {
            balanced_accuracy,
            std_balanced_accuracy: std_acc,
            freq_balanced_accuracy: freq_acc,
        },
    ))
}

/// Sweep midpoints between consecutive distinct feature values; return the
/// lowest threshold maximizing balanced accuracy.
fn best_threshold(features: &[f64], labels: &[bool]) -> (f64, f64) {
    let mut distinct: Vec<f64> = features.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let candidates: Vec<f64> = if distinct.len() < 2 {
        vec![distinct[0]]
    } else {
        distinct.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect()
    };

    let actives = labels.iter().filter(|&&l| l).count() as f64;
    let calms = labels.len() as f64 - actives;
    let mut best = (candidates[0], -1.0);
    for &t in &candidates {
        let mut tp = 0.0;
        let mut tn = 0.0;
        for (&f, &l) in features.iter().zip(labels) {
            match (f > t, l) {
                (true, true) => tp += 1.0,
                (false, false) => tn += 1.0,
                _ => {}
            }
        }
        let balanced = (tp / actives + tn / calms) / 2.0;
        if balanced > best.1 {
            best = (t, balanced);
        }
    }
    best
}

/// Strictly above the threshold means active.
pub fn classify<T: Real>(model: &ActivityModel, window: &AccWindow<T>) -> bool {
    feature(model.method, window) > model.threshold
}

/// Fill each example's activity flag. Examples without accelerometer data
/// stay unflagged.
pub fn flag_activity<T: Real>(model: &ActivityModel, examples: &mut [Example<T>]) {
    for ex in examples {
        ex.activity = ex.acc.as_ref().map(|acc| classify(model, acc));
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GateReport {
    pub removed_events: usize,
    pub removed_nonevents: usize,
    /// Fraction of the incoming dataset classified active.
    pub removed_fraction: f64,
    /// Whether removal crossed [`RESAMPLE_THRESHOLD`] and the one-third
    /// event ratio was restored.
    pub resampled: bool,
    /// Non-events drawn back from the leftover pool.
    pub topped_up: usize,
    /// Surviving non-events dropped to restore the ratio.
    pub trimmed: usize,
    /// Non-events still missing after the pool ran dry.
    pub shortage: usize,
}

/// Drop active windows from a dataset. When that removes
/// [`RESAMPLE_THRESHOLD`] or more of it, restore non-events to twice the
/// surviving event count, drawing inactive windows from
/// `leftover_nonevents` or trimming the survivors.
pub fn gate_dataset<T: Real, R: Rng>(
    model: &ActivityModel,
    mut dataset: Vec<Example<T>>,
    leftover_nonevents: Vec<Example<T>>,
    rng: &mut R,
) -> (Vec<Example<T>>, GateReport) {
    let original = dataset.len();
    flag_activity(model, &mut dataset);
    let mut report = GateReport::default();
    let (kept, removed): (Vec<_>, Vec<_>) = dataset
        .into_iter()
        .partition(|e| e.activity != Some(true));
    report.removed_events = removed.iter().filter(|e| e.label.is_event()).count();
    report.removed_nonevents = removed.len() - report.removed_events;
    report.removed_fraction = if original == 0 {
        0.0
    } else {
        removed.len() as f64 / original as f64
    };
    if report.removed_fraction < RESAMPLE_THRESHOLD {
        return (kept, report);
    }
    report.resampled = true;

    let events = kept.iter().filter(|e| e.label.is_event()).count();
    let nonevents = kept.len() - events;
    let target = 2 * events;
    let mut kept = kept;
    if nonevents < target {
        let mut pool: Vec<Example<T>> = leftover_nonevents
            .into_iter()
            .filter_map(|mut e| {
                e.activity = e.acc.as_ref().map(|acc| classify(model, acc));
                (e.activity != Some(true)).then_some(e)
            })
            .collect();
        pool.shuffle(rng);
        let need = target - nonevents;
        report.topped_up = need.min(pool.len());
        report.shortage = need - report.topped_up;
        kept.extend(pool.into_iter().take(report.topped_up));
    } else if nonevents > target {
        // Choose survivors at random but keep the original order.
        let non_idx: Vec<usize> = kept
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.label.is_event())
            .map(|(i, _)| i)
            .collect();
        let mut drop_idx = non_idx;
        drop_idx.shuffle(rng);
        drop_idx.truncate(nonevents - target);
        report.trimmed = drop_idx.len();
        let drop: std::collections::HashSet<usize> = drop_idx.into_iter().collect();
        kept = kept
            .into_iter()
            .enumerate()
            .filter_map(|(i, e)| (!drop.contains(&i)).then_some(e))
            .collect();
    }
    (kept, report)
}

/// Labeled calibration windows tiled from every session's baseline
/// intervals, `true` for the high-motion block.
pub fn baseline_windows_from_sessions<T: Real>(
    sessions: &[PreprocessedSession<T>],
    window_len_s: u32,
) -> Vec<(AccWindow<T>, bool)> {
    let mut out = Vec::new();
    for session in sessions {
        let Some(intervals) = &session.baseline_intervals else {
            continue;
        };
        let rate = session.acc_rate_hz;
        let n = (window_len_s as f64 * rate).round() as usize;
        if n == 0 {
            continue;
        }
        for interval in intervals {
            let label = interval.label == crate::e4::BaselineLabel::Dance;
            let mut start =
                ((interval.start - session.start_time) * rate).round().max(0.0) as usize;
            let end_limit = (((interval.end - session.start_time) * rate).round() as usize)
                .min(session.acc[0].len());
            while start + n <= end_limit {
                out.push((
                    AccWindow {
                        axes: std::array::from_fn(|a| session.acc[a][start..start + n].to_vec()),
                        rate_hz: rate,
                    },
                    label,
                ));
                start += n;
            }
        }
    }
    out
}

pub fn save_model(model: &ActivityModel, path: &Path) -> Result<(), ActivityError> {
    let text = serde_json::to_string_pretty(model).map_err(|source| ActivityError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(|source| ActivityError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<ActivityModel, ActivityError> {
    let text = std::fs::read_to_string(path).map_err(|source| ActivityError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ActivityError::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use crate::windowing::Label;
    use std::f64::consts::TAU;

    fn window_from_magnitude(values: &[f64], rate_hz: f64) -> AccWindow<f64> {
        // x carries the signal scaled back to raw units, y and z are zero.
        AccWindow {
            axes: [
                values.iter().map(|v| v * ACC_UNITS_PER_G).collect(),
                vec![0.0; values.len()],
                vec![0.0; values.len()],
            ],
            rate_hz,
        }
    }

    fn sine_window(amp: f64, freq: f64, rate: f64, n: usize) -> AccWindow<f64> {
        let values: Vec<f64> = (0..n)
            .map(|i| 1.0 + amp * (TAU * freq * i as f64 / rate).sin())
            .collect();
        window_from_magnitude(&values, rate)
    }

    #[test]
    fn magnitude_is_euclidean_and_scaled_to_g() {
        let axes = [vec![3.0, 0.0], vec![4.0, 0.0], vec![0.0, 64.0]];
        let m = acc_magnitude(&axes);
        assert!((m[0] - 5.0 / 64.0).abs() < 1e-12);
        assert!((m[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn std_feature_matches_hand_computation() {
        let v = feature_std(&[1.0, 1.0, 1.0, 3.0]);
        assert!((v - 0.75f64.sqrt()).abs() < 1e-12);
        assert_eq!(feature_std(&[]), 0.0);
    }

    #[test]
    fn dominant_freq_finds_a_pure_tone() {
        let n = 1920;
        let rate = 32.0;
        let magnitude: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * (TAU * 2.0 * i as f64 / rate).sin())
            .collect();
        let f = feature_dominant_freq(&magnitude, rate);
        assert!((f - 2.0).abs() < 0.125, "got {f}");
    }

    #[test]
    fn flat_window_has_no_dominant_frequency() {
        assert_eq!(feature_dominant_freq(&[1.0; 64], 32.0), 0.0);
        assert_eq!(feature_dominant_freq(&[1.0], 32.0), 0.0);
    }

    #[test]
    fn threshold_lands_between_the_classes() {
        let (t, acc) = best_threshold(&[0.1, 0.5], &[false, true]);
        assert!((t - 0.3).abs() < 1e-12);
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn threshold_tie_takes_the_lowest_midpoint() {
        // Interleaved classes: midpoints 0.5 and 2.5 both score 0.75.
        let features = [0.0, 1.0, 2.0, 3.0];
        let labels = [false, true, false, true];
        let (t, acc) = best_threshold(&features, &labels);
        assert!((acc - 0.75).abs() < 1e-12);
        assert!((t - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tune_separates_motion_from_stillness() {
        let mut windows = Vec::new();
        for i in 0..6 {
            let amp = 0.3 + 0.01 * i as f64;
            windows.push((sine_window(amp, 2.0, 32.0, 640), true));
            windows.push((sine_window(0.01 + 0.001 * i as f64, 2.0, 32.0, 640), false));
        }
        let (model, report) = tune(&windows, 60).unwrap();
        assert_eq!(model.method, FeatureMethod::StdDev);
        assert_eq!(model.window_len_s, 60);
        assert_eq!(report.balanced_accuracy, 1.0);
        assert!(report.freq_balanced_accuracy < 1.0);
        assert!(classify(&model, &sine_window(0.3, 2.0, 32.0, 640)));
        assert!(!classify(&model, &sine_window(0.01, 2.0, 32.0, 640)));
    }

    #[test]
    fn method_tie_prefers_std_dev() {
        // Active windows are big fast sines, calm ones small slow sines:
        // both features separate perfectly.
        let windows = vec![
            (sine_window(0.5, 4.0, 32.0, 640), true),
            (sine_window(0.45, 4.0, 32.0, 640), true),
            (sine_window(0.02, 1.0, 32.0, 640), false),
            (sine_window(0.01, 1.0, 32.0, 640), false),
        ];
        let (model, report) = tune(&windows, 60).unwrap();
        assert_eq!(report.std_balanced_accuracy, 1.0);
        assert_eq!(report.freq_balanced_accuracy, 1.0);
        assert_eq!(model.method, FeatureMethod::StdDev);
    }

    #[test]
    fn tune_rejects_degenerate_inputs() {
        assert!(matches!(
            tune::<f64>(&[], 60),
            Err(ActivityError::NoTrainingData)
        ));
        let one_class = vec![
            (sine_window(0.5, 2.0, 32.0, 64), true),
            (sine_window(0.4, 2.0, 32.0, 64), true),
        ];
        assert!(matches!(
            tune(&one_class, 60),
            Err(ActivityError::SingleClass)
        ));
    }

    #[test]
    fn classification_is_strict() {
        let model = ActivityModel {
            method: FeatureMethod::StdDev,
            threshold: 0.75f64.sqrt(),
            window_len_s: 60,
        };
        // Feature equals the threshold exactly: not active.
        let window = window_from_magnitude(&[1.0, 1.0, 1.0, 3.0], 32.0);
        assert!(!classify(&model, &window));
    }

    fn gated_example(label: Label, active: bool, marker: f64) -> Example<f64> {
        let acc = if active {
            sine_window(0.4, 2.0, 32.0, 64)
        } else {
            sine_window(0.005, 2.0, 32.0, 64)
        };
        Example {
            signal: [vec![0.0; 8], vec![0.0; 8], vec![0.0; 8], vec![0.0; 8]],
            rate_hz: 4.0,
            label,
            subject_id: "s01".into(),
            week_index: 1,
            window_start: marker,
            window_len_s: 60,
            acc: Some(acc),
            activity: None,
        }
    }

    fn std_model() -> ActivityModel {
        ActivityModel {
            method: FeatureMethod::StdDev,
            threshold: 0.1,
            window_len_s: 60,
        }
    }

    #[test]
    fn small_removal_leaves_the_dataset_alone() {
        let mut dataset = vec![gated_example(Label::NonEvent, true, 0.0)];
        for i in 1..10 {
            let label = if i < 4 { Label::Event } else { Label::NonEvent };
            dataset.push(gated_example(label, false, i as f64));
        }
        let (gated, report) = gate_dataset(&std_model(), dataset, Vec::new(), &mut seed::rng(1));
        assert_eq!(gated.len(), 9);
        assert_eq!(report.removed_nonevents, 1);
        assert!((report.removed_fraction - 0.1).abs() < 1e-12);
        assert!(!report.resampled);
        assert!(gated.iter().all(|e| e.activity == Some(false)));
    }

    #[test]
    fn heavy_removal_tops_up_from_the_leftover_pool() {
        // 4 events (1 active) + 8 non-events (5 active): 6/12 removed.
        let mut dataset = Vec::new();
        dataset.push(gated_example(Label::Event, true, 0.0));
        for i in 0..3 {
            dataset.push(gated_example(Label::Event, false, 1.0 + i as f64));
        }
        for i in 0..5 {
            dataset.push(gated_example(Label::NonEvent, true, 10.0 + i as f64));
        }
        for i in 0..3 {
            dataset.push(gated_example(Label::NonEvent, false, 20.0 + i as f64));
        }
        // Leftovers: 4 inactive plus 2 active that must never re-enter.
        let mut leftovers = Vec::new();
        for i in 0..4 {
            leftovers.push(gated_example(Label::NonEvent, false, 30.0 + i as f64));
        }
        for i in 0..2 {
            leftovers.push(gated_example(Label::NonEvent, true, 40.0 + i as f64));
        }

        let (gated, report) =
            gate_dataset(&std_model(), dataset, leftovers, &mut seed::rng(2));
        assert!((report.removed_fraction - 0.5).abs() < 1e-12);
        assert!(report.resampled);
        assert_eq!(report.removed_events, 1);
        assert_eq!(report.removed_nonevents, 5);
        assert_eq!(report.topped_up, 3);
        assert_eq!(report.shortage, 0);
        let events = gated.iter().filter(|e| e.label.is_event()).count();
        assert_eq!(events, 3);
        assert_eq!(gated.len(), 9);
        assert!(gated.iter().all(|e| e.activity == Some(false)));
        assert!(gated.iter().all(|e| e.window_start < 40.0));
    }

    #[test]
    fn shortage_is_reported_when_the_pool_runs_dry() {
        let mut dataset = Vec::new();
        for i in 0..2 {
            dataset.push(gated_example(Label::Event, false, i as f64));
        }
        for i in 0..6 {
            dataset.push(gated_example(Label::NonEvent, i < 4, 10.0 + i as f64));
        }
        let (gated, report) =
            gate_dataset(&std_model(), dataset, Vec::new(), &mut seed::rng(3));
        assert!(report.resampled);
        assert_eq!(report.topped_up, 0);
        assert_eq!(report.shortage, 2);
        assert_eq!(gated.len(), 4);
    }

    #[test]
    fn surplus_nonevents_are_trimmed_back_to_the_ratio() {
        // Removing 4 of 13 events crosses the threshold while leaving the
        // non-events over target.
        let mut dataset = Vec::new();
        for i in 0..4 {
            dataset.push(gated_example(Label::Event, true, i as f64));
        }
        dataset.push(gated_example(Label::Event, false, 4.0));
        for i in 0..8 {
            dataset.push(gated_example(Label::NonEvent, false, 10.0 + i as f64));
        }
        let (gated, report) =
            gate_dataset(&std_model(), dataset, Vec::new(), &mut seed::rng(4));
        assert!(report.resampled);
        assert_eq!(report.trimmed, 6);
        assert_eq!(gated.len(), 3);
        let events = gated.iter().filter(|e| e.label.is_event()).count();
        assert_eq!(events, 1);
    }

    #[test]
    fn baseline_windows_tile_both_intervals() {
        use crate::e4::{BaselineInterval, BaselineLabel};
        let n_acc = 32 * 900;
        let session = PreprocessedSession::<f64> {
            subject_id: "s01".into(),
            week_index: 1,
            start_time: 1000.0,
            rate_hz: 4.0,
            signal: [vec![0.0; 3600], vec![0.0; 3600], vec![0.0; 3600], vec![0.0; 3600]],
            acc: [vec![0.0; n_acc], vec![1.0; n_acc], vec![2.0; n_acc]],
            acc_rate_hz: 32.0,
            tags: Vec::new(),
            baseline_intervals: Some(vec![
                BaselineInterval {
                    start: 1120.0,
                    end: 1480.0,
                    label: BaselineLabel::Dance,
                },
                BaselineInterval {
                    start: 1540.0,
                    end: 1900.0,
                    label: BaselineLabel::Relax,
                },
            ]),
        };
        let w60 = baseline_windows_from_sessions(std::slice::from_ref(&session), 60);
        // 360 s intervals hold six 60 s windows each.
        assert_eq!(w60.len(), 12);
        assert_eq!(w60.iter().filter(|&&(_, l)| l).count(), 6);
        assert!(w60.iter().all(|(w, _)| w.axes[0].len() == 1920));

        let w300 = baseline_windows_from_sessions(std::slice::from_ref(&session), 300);
        assert_eq!(w300.len(), 2);

        let none = PreprocessedSession {
            baseline_intervals: None,
            ..session
        };
        assert!(baseline_windows_from_sessions(&[none], 60).is_empty());
    }

    #[test]
    fn model_roundtrips_through_json() {
        let model = ActivityModel {
            method: FeatureMethod::DominantFreq,
            threshold: 1.25,
            window_len_s: 300,
        };
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("activity_model_w300.json");
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("dominant_freq"));
    }
}
