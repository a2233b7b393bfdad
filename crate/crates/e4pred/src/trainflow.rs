//! End-to-end runs: dataset assembly, the five application modes, corpus
//! pretraining, and multi-seed aggregation.
//!
//! Every source of randomness is a named substream of the run seed
//! ("undersample", "gate", "split", "init", "train", ...), keyed by purpose
//! rather than by mode. Two modes that differ only in where their starting
//! parameters come from therefore produce identical results when handed
//! identical parameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::activity::{gate_dataset, ActivityModel};
use crate::dsp::PreprocessedSession;
use crate::e4::{EventEffect, SyntheticConfig};
use crate::metrics::{self, MetricsError, MetricsReport, SeedMetrics};
use crate::nn::{
    predict_scores, train_autoencoder, train_classifier, ModelParams, NnError, Tensor,
    TrainConfig, TrainReport,
};
use crate::scalar::Real;
use crate::seed;
use crate::windowing::{
    extract_event_windows, extract_nonevent_windows, split_personalized, split_random,
    standardize, subjects, undersample, Example, WindowConfig, WindowError,
};
use rand::seq::SliceRandom;

/// Seeds per aggregated run, unless configured otherwise.
pub const DEFAULT_SEED_COUNT: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum TrainflowError {
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("mode {mode} needs pretrained parameters")]
    MissingPretrained { mode: ApplicationMode },
    #[error("mode {mode} starts from scratch but pretrained parameters were given")]
    UnexpectedPretrained { mode: ApplicationMode },
    #[error("activity model was tuned for {model_s} s windows, run uses {run_s} s")]
    GateWindowMismatch { model_s: u32, run_s: u32 },
    #[error("no usable examples after windowing")]
    EmptyDataset,
    #[error("no subject could be evaluated as a personalization fold")]
    NoUsableFolds,
    #[error("unknown application mode {0:?}")]
    UnknownMode(String),
    #[error("pretraining needs at least one corpus with windows")]
    EmptyPretrainCorpus,
}

/// How a model is initialized and adapted to the target recordings.
/// The order here is the row order of result tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApplicationMode {
    /// Pretrained network applied as-is, no training on the target data.
    PretrainedDirect,
    /// Pretrained network fine-tuned on a random split.
    PretrainedRandomFT,
    /// Pretrained network fine-tuned on the other subjects, then on the
    /// held-out subject's first week.
    PretrainedPersonalizedFT,
    /// Fresh network trained on a random split.
    UninitRandom,
    /// Fresh network trained subject-wise like the personalized fine-tune.
    UninitPersonalized,
}

impl ApplicationMode {
    pub const ALL: [ApplicationMode; 5] = [
        ApplicationMode::PretrainedDirect,
        ApplicationMode::PretrainedRandomFT,
        ApplicationMode::PretrainedPersonalizedFT,
        ApplicationMode::UninitRandom,
        ApplicationMode::UninitPersonalized,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ApplicationMode::PretrainedDirect => "pretrained_direct",
            ApplicationMode::PretrainedRandomFT => "pretrained_random_ft",
            ApplicationMode::PretrainedPersonalizedFT => "pretrained_personalized_ft",
            ApplicationMode::UninitRandom => "uninit_random",
            ApplicationMode::UninitPersonalized => "uninit_personalized",
        }
    }

    pub fn uses_pretrained(self) -> bool {
        matches!(
            self,
            ApplicationMode::PretrainedDirect
                | ApplicationMode::PretrainedRandomFT
                | ApplicationMode::PretrainedPersonalizedFT
        )
    }

    pub fn is_personalized(self) -> bool {
        matches!(
            self,
            ApplicationMode::PretrainedPersonalizedFT | ApplicationMode::UninitPersonalized
        )
    }
}

impl fmt::Display for ApplicationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ApplicationMode {
    type Err = TrainflowError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ApplicationMode::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| TrainflowError::UnknownMode(s.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub window: WindowConfig,
    /// Motion gate to apply to the dataset, if any.
    pub gate: Option<ActivityModel>,
    pub seed: u64,
    /// Decision threshold on the classifier's probability.
    pub threshold: f64,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            window: WindowConfig {
                window_len_s: 300,
                lead_s: 0,
                rate_hz: 4.0,
            },
            gate: None,
            seed: 42,
            threshold: 0.5,
            train: TrainConfig::default(),
        }
    }
}

/// Counters from one dataset assembly, kept for run manifests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_examples: usize,
    pub n_events: usize,
    pub skipped_out_of_range: usize,
    pub skipped_buffer_overlap: usize,
    pub undersample_shortage: usize,
    /// Windows removed by the motion gate.
    pub gated_active: usize,
    pub gate_resampled: bool,
    pub gate_shortage: usize,
}

/// One held-out subject's evaluation inside a personalized run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub subject: String,
    pub n_test: usize,
    pub accuracy: f64,
    pub f1: f64,
}

/// A single seeded run of one mode. Personalized modes report per-fold
/// outcomes and pool every fold's test predictions for the seed metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub mode: ApplicationMode,
    pub metrics: SeedMetrics,
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
    pub n_train: usize,
    pub n_test: usize,
    pub folds: Vec<FoldOutcome>,
    /// Subjects that could not form a fold (too few windows, single week).
    pub skipped_subjects: Vec<String>,
    pub dataset: DatasetSummary,
}

/// Windows from every session, standardized, undersampled to one third
/// events, and optionally motion-gated.
pub fn build_dataset<T: Real>(
    sessions: &[PreprocessedSession<T>],
    window: &WindowConfig,
    gate: Option<&ActivityModel>,
    seed: u64,
) -> Result<(Vec<Example<T>>, DatasetSummary), TrainflowError> {
    let mut events = Vec::new();
    let mut nonevents = Vec::new();
    let mut summary = DatasetSummary::default();
    for session in sessions {
        let (mut ev, report) = extract_event_windows(session, window)?;
        summary.skipped_out_of_range += report.skipped_out_of_range;
        summary.skipped_buffer_overlap += report.skipped_buffer_overlap;
        events.append(&mut ev);
        nonevents.append(&mut extract_nonevent_windows(session, window)?);
    }
    standardize(&mut events);
    standardize(&mut nonevents);

    let mut rng = seed::rng(seed::substream(seed, "undersample"));
    let outcome = undersample(events, nonevents, &mut rng);
    summary.undersample_shortage = outcome.shortage;
    let mut dataset = outcome.dataset;

    if let Some(model) = gate {
        if model.window_len_s != window.window_len_s {
            return Err(TrainflowError::GateWindowMismatch {
                model_s: model.window_len_s,
                run_s: window.window_len_s,
            });
        }
        let mut gate_rng = seed::rng(seed::substream(seed, "gate"));
        let (gated, report) =
            gate_dataset(model, dataset, outcome.leftover_nonevents, &mut gate_rng);
        dataset = gated;
        summary.gated_active = report.removed_events + report.removed_nonevents;
        summary.gate_resampled = report.resampled;
        summary.gate_shortage = report.shortage;
    }

    if dataset.is_empty() {
        return Err(TrainflowError::EmptyDataset);
    }
    summary.n_examples = dataset.len();
    summary.n_events = dataset.iter().filter(|e| e.label.is_event()).count();
    Ok((dataset, summary))
}

pub fn tensors<T: Real>(examples: &[Example<T>]) -> Vec<Tensor<T>> {
    examples
        .iter()
        .map(|e| Tensor::from_channels(&e.signal))
        .collect()
}

pub fn tensors_labeled<T: Real>(examples: &[Example<T>]) -> Vec<(Tensor<T>, bool)> {
    examples
        .iter()
        .map(|e| (Tensor::from_channels(&e.signal), e.label.is_event()))
        .collect()
}

fn labels<T>(examples: &[Example<T>]) -> Vec<bool> {
    examples.iter().map(|e| e.label.is_event()).collect()
}

/// Execute one mode at one seed over a single corpus of sessions.
pub fn run_mode<T: Real>(
    mode: ApplicationMode,
    sessions: &[PreprocessedSession<T>],
    pretrained: Option<&ModelParams<T>>,
    cfg: &RunConfig,
) -> Result<RunResult, TrainflowError> {
    match (mode.uses_pretrained(), pretrained.is_some()) {
        (true, false) => return Err(TrainflowError::MissingPretrained { mode }),
        (false, true) => return Err(TrainflowError::UnexpectedPretrained { mode }),
        _ => {}
    }
    let (dataset, summary) = build_dataset(sessions, &cfg.window, cfg.gate.as_ref(), cfg.seed)?;
    let base = match pretrained {
        Some(p) => p.clone(),
        None => ModelParams::init(seed::substream(cfg.seed, "init")),
    };

    let mut folds = Vec::new();
    let mut skipped_subjects = Vec::new();
    let (scores, labels, n_train) = match mode {
        ApplicationMode::PretrainedDirect => {
            let scores = predict_scores(&base, &tensors(&dataset))?;
            (scores, labels(&dataset), 0)
        }
        ApplicationMode::PretrainedRandomFT | ApplicationMode::UninitRandom => {
            let mut split_rng = seed::rng(seed::substream(cfg.seed, "split"));
            let split = split_random(dataset, &mut split_rng)?;
            let mut params = base;
            let mut train_rng = seed::rng(seed::substream(cfg.seed, "train"));
            train_classifier(
                &mut params,
                &tensors_labeled(&split.train),
                &tensors_labeled(&split.val),
                &cfg.train,
                &mut train_rng,
            )?;
            let scores = predict_scores(&params, &tensors(&split.test))?;
            (scores, labels(&split.test), split.train.len())
        }
        ApplicationMode::PretrainedPersonalizedFT | ApplicationMode::UninitPersonalized => {
            let mut all_scores = Vec::new();
            let mut all_labels = Vec::new();
            let mut n_train = 0;
            for subject in subjects(&dataset) {
                let mut split_rng =
                    seed::rng(seed::substream_keyed(cfg.seed, "split", &subject));
                let split = match split_personalized(dataset.clone(), &subject, &mut split_rng) {
                    Ok(split) => split,
                    Err(
                        WindowError::NoLaterWeeks { .. }
                        | WindowError::DatasetTooSmall { .. }
                        | WindowError::NoOtherSubjects,
                    ) => {
                        skipped_subjects.push(subject);
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                };
                let mut params = base.clone();
                let mut others_rng =
                    seed::rng(seed::substream_keyed(cfg.seed, "train-others", &subject));
                train_classifier(
                    &mut params,
                    &tensors_labeled(&split.others.train),
                    &tensors_labeled(&split.others.val),
                    &cfg.train,
                    &mut others_rng,
                )?;
                let mut personal_rng =
                    seed::rng(seed::substream_keyed(cfg.seed, "train-personal", &subject));
                train_classifier(
                    &mut params,
                    &tensors_labeled(&split.personal.train),
                    &tensors_labeled(&split.personal.val),
                    &cfg.train,
                    &mut personal_rng,
                )?;
                let scores = predict_scores(&params, &tensors(&split.personal.test))?;
                let fold_labels = labels(&split.personal.test);
                let c = metrics::confusion(&scores, &fold_labels, cfg.threshold)?;
                folds.push(FoldOutcome {
                    subject,
                    n_test: fold_labels.len(),
                    accuracy: metrics::accuracy(&c),
                    f1: metrics::f1(&c),
                });
                n_train += split.others.train.len() + split.personal.train.len();
                all_scores.extend(scores);
                all_labels.extend(fold_labels);
            }
            if folds.is_empty() {
                return Err(TrainflowError::NoUsableFolds);
            }
            (all_scores, all_labels, n_train)
        }
    };

    let metrics = MetricsReport::single_seed(cfg.seed, &scores, &labels, cfg.threshold)?;
    Ok(RunResult {
        mode,
        metrics,
        n_test: scores.len(),
        scores,
        labels,
        n_train,
        folds,
        skipped_subjects,
        dataset: summary,
    })
}

/// Derive the per-repetition seeds of an aggregated run.
pub fn seeds_for(root: u64, n: usize) -> Vec<u64> {
    (0..n).map(|i| seed::substream_n(root, "seed", i as u64)).collect()
}

/// Run one mode once per seed and aggregate. The pooled ROC over all
/// seeds' test scores is kept for plotting; it is empty when the pooled
/// labels are single-class.
pub fn run_seeds<T: Real>(
    mode: ApplicationMode,
    sessions: &[PreprocessedSession<T>],
    pretrained: Option<&ModelParams<T>>,
    cfg: &RunConfig,
    seeds: &[u64],
) -> Result<(MetricsReport, Vec<RunResult>), TrainflowError> {
    let mut runs = Vec::with_capacity(seeds.len());
    let mut pooled_scores = Vec::new();
    let mut pooled_labels = Vec::new();
    for &seed in seeds {
        let cfg = RunConfig {
            seed,
            ..cfg.clone()
        };
        let run = run_mode(mode, sessions, pretrained, &cfg)?;
        pooled_scores.extend_from_slice(&run.scores);
        pooled_labels.extend_from_slice(&run.labels);
        runs.push(run);
    }
    let roc = match metrics::roc_curve(&pooled_scores, &pooled_labels) {
        Ok(points) => points,
        Err(MetricsError::SingleClass) => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let per_seed = runs.iter().map(|r| r.metrics.clone()).collect();
    let report = MetricsReport::from_seed_runs(per_seed, roc)?;
    Ok((report, runs))
}

/// The four pretraining corpus flavors. Each mimics a different labeling
/// style: scripted task phases, a stress protocol, continuous affect
/// ratings, and in-the-wild self-tagging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusStyle {
    TaskPhases,
    StressTest,
    ContinuousRating,
    SelfTagged,
}

impl CorpusStyle {
    pub const ALL: [CorpusStyle; 4] = [
        CorpusStyle::TaskPhases,
        CorpusStyle::StressTest,
        CorpusStyle::ContinuousRating,
        CorpusStyle::SelfTagged,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CorpusStyle::TaskPhases => "task_phases",
            CorpusStyle::StressTest => "stress_test",
            CorpusStyle::ContinuousRating => "continuous_rating",
            CorpusStyle::SelfTagged => "self_tagged",
        }
    }

    /// Generator settings for this corpus, seeded from the root seed.
    pub fn config(self, root_seed: u64) -> SyntheticConfig {
        let base = SyntheticConfig {
            seed: seed::substream_keyed(root_seed, "corpus", self.label()),
            ..SyntheticConfig::default()
        };
        match self {
            CorpusStyle::TaskPhases => SyntheticConfig {
                n_subjects: 4,
                weeks_per_subject: 1,
                events_per_session: 3,
                event_effect: EventEffect {
                    eda_rise: 2.0,
                    hr_rise: 18.0,
                    temp_drop: 1.0,
                    bvp_amp: 0.8,
                },
                noise_scale: 0.8,
                ..base
            },
            CorpusStyle::StressTest => SyntheticConfig {
                n_subjects: 5,
                weeks_per_subject: 1,
                event_effect: EventEffect {
                    eda_rise: 1.8,
                    hr_rise: 22.0,
                    temp_drop: 0.6,
                    bvp_amp: 0.7,
                },
                ..base
            },
            CorpusStyle::ContinuousRating => SyntheticConfig {
                n_subjects: 4,
                weeks_per_subject: 2,
                event_effect: EventEffect {
                    eda_rise: 1.0,
                    hr_rise: 10.0,
                    temp_drop: 0.5,
                    bvp_amp: 0.4,
                },
                noise_scale: 1.3,
                ..base
            },
            CorpusStyle::SelfTagged => SyntheticConfig {
                n_subjects: 3,
                weeks_per_subject: 2,
                ..base
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub window: WindowConfig,
    /// Reconstruction training settings.
    pub ae: TrainConfig,
    /// Head training settings; the encoder is always frozen here.
    pub head: TrainConfig,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            window: WindowConfig {
                window_len_s: 300,
                lead_s: 0,
                rate_hz: 4.0,
            },
            ae: TrainConfig::default(),
            head: TrainConfig::default(),
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub epochs_run: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl From<&TrainReport> for TrainSummary {
    fn from(r: &TrainReport) -> Self {
        TrainSummary {
            epochs_run: r.epochs_run,
            best_val_loss: r.best_val_loss,
            stopped_early: r.stopped_early,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PretrainReport {
    pub n_windows: usize,
    pub ae: TrainSummary,
    pub head: TrainSummary,
    /// Leave-one-corpus-out F1 of the head, one entry per corpus.
    pub holdout_f1: Vec<(String, f64)>,
}

/// Train the reconstruction network on every corpus pooled, then the
/// classification head (encoder frozen): once per left-out corpus for the
/// holdout report, and finally on all corpora together.
pub fn pretrain<T: Real>(
    corpora: &[(String, Vec<PreprocessedSession<T>>)],
    cfg: &PretrainConfig,
) -> Result<(ModelParams<T>, PretrainReport), TrainflowError> {
    if corpora.is_empty() {
        return Err(TrainflowError::EmptyPretrainCorpus);
    }
    let mut per_corpus: Vec<(String, Vec<(Tensor<T>, bool)>)> = Vec::new();
    for (name, sessions) in corpora {
        let mut rng = seed::rng(seed::substream_keyed(cfg.seed, "undersample", name));
        let mut events = Vec::new();
        let mut nonevents = Vec::new();
        for session in sessions {
            let (mut ev, _) = extract_event_windows(session, &cfg.window)?;
            events.append(&mut ev);
            nonevents.append(&mut extract_nonevent_windows(session, &cfg.window)?);
        }
        standardize(&mut events);
        standardize(&mut nonevents);
        let outcome = undersample(events, nonevents, &mut rng);
        if outcome.dataset.is_empty() {
            return Err(TrainflowError::EmptyPretrainCorpus);
        }
        per_corpus.push((name.clone(), tensors_labeled(&outcome.dataset)));
    }

    let mut pool: Vec<Tensor<T>> = per_corpus
        .iter()
        .flat_map(|(_, set)| set.iter().map(|(t, _)| t.clone()))
        .collect();
    let n_windows = pool.len();
    pool.shuffle(&mut seed::rng(seed::substream(cfg.seed, "holdout")));
    let val = pool.split_off(pool.len() - pool.len() / 10);

    let mut params = ModelParams::init(seed::substream(cfg.seed, "init"));
    let ae_report = train_autoencoder(
        &mut params,
        &pool,
        &val,
        &cfg.ae,
        &mut seed::rng(seed::substream(cfg.seed, "train-ae")),
    )?;

    let head_cfg = TrainConfig {
        freeze_encoder: true,
        ..cfg.head
    };
    let mut holdout_f1 = Vec::new();
    for held_out in 0..per_corpus.len() {
        let train_set: Vec<(Tensor<T>, bool)> = per_corpus
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != held_out)
            .flat_map(|(_, (_, set))| set.iter().cloned())
            .collect();
        if train_set.is_empty() {
            continue;
        }
        let (name, eval_set) = &per_corpus[held_out];
        let mut fold_params = params.clone();
        train_classifier(
            &mut fold_params,
            &train_set,
            &[],
            &head_cfg,
            &mut seed::rng(seed::substream_keyed(cfg.seed, "train-head", name)),
        )?;
        let scores: Vec<f64> = eval_set
            .iter()
            .map(|(t, _)| crate::nn::predict(&fold_params, t))
            .collect::<Result<_, _>>()?;
        let eval_labels: Vec<bool> = eval_set.iter().map(|&(_, y)| y).collect();
        let c = metrics::confusion(&scores, &eval_labels, 0.5)?;
        holdout_f1.push((name.clone(), metrics::f1(&c)));
    }

    let all_labeled: Vec<(Tensor<T>, bool)> = per_corpus
        .iter()
        .flat_map(|(_, set)| set.iter().cloned())
        .collect();
    let head_report = train_classifier(
        &mut params,
        &all_labeled,
        &[],
        &head_cfg,
        &mut seed::rng(seed::substream(cfg.seed, "train-head-final")),
    )?;

    let report = PretrainReport {
        n_windows,
        ae: TrainSummary::from(&ae_report),
        head: TrainSummary::from(&head_report),
        holdout_f1,
    };
    Ok((params, report))
}
