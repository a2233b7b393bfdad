//! Run configuration: one JSON file controls study size, preprocessing
//! rate and training budget, so scaled-down runs use the same binary.

use std::path::Path;

use serde::{Deserialize, Serialize};

use e4pred::e4::{SyntheticConfig, MIN_SESSION_DURATION_S};
use e4pred::nn::TrainConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Root seed; every random decision derives from it by purpose.
    pub seed: u64,
    pub subjects: u32,
    pub weeks: u32,
    pub session_duration_s: f64,
    pub events_per_session: u32,
    /// Scales the generator's noise; 0 gives clean signals.
    pub noise_scale: f64,
    /// Common channel rate after preprocessing.
    pub rate_hz: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    /// Reconstruction and head epochs during pretraining.
    pub pretrain_epochs: usize,
    /// Seeded repetitions aggregated per cell.
    pub seeds_per_cell: usize,
    /// Decision threshold on the classifier probability.
    pub threshold: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 42,
            subjects: 9,
            weeks: 8,
            session_duration_s: 3600.0,
            events_per_session: 2,
            noise_scale: 1.0,
            rate_hz: 4.0,
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            patience: 10,
            pretrain_epochs: 200,
            seeds_per_cell: 10,
            threshold: 0.5,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: shown.clone(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: shown,
            source,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.subjects == 0 {
            return fail("subjects must be at least 1".into());
        }
        if self.weeks == 0 {
            return fail("weeks must be at least 1".into());
        }
        if self.session_duration_s < MIN_SESSION_DURATION_S {
            return fail(format!(
                "session_duration_s {} is below the minimum {}",
                self.session_duration_s, MIN_SESSION_DURATION_S
            ));
        }
        if self.rate_hz != 4.0 && self.rate_hz != 64.0 {
            return fail(format!("rate_hz {} is not 4 or 64", self.rate_hz));
        }
        if self.epochs == 0 || self.pretrain_epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail(format!("learning_rate {} is not positive", self.learning_rate));
        }
        if self.seeds_per_cell == 0 {
            return fail("seeds_per_cell must be at least 1".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return fail(format!("threshold {} is not inside (0, 1)", self.threshold));
        }
        Ok(())
    }

    pub fn synthetic(&self) -> SyntheticConfig {
        SyntheticConfig {
            seed: self.seed,
            n_subjects: self.subjects,
            weeks_per_subject: self.weeks,
            session_duration_s: self.session_duration_s,
            events_per_session: self.events_per_session,
            noise_scale: self.noise_scale,
            ..SyntheticConfig::default()
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            patience: self.patience,
            freeze_encoder: false,
        }
    }
}
