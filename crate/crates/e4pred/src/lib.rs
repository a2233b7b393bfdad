//! Event prediction from wrist-wearable physiology.
//!
//! The crate implements the full path from raw per-channel CSV recordings
//! (Empatica E4 export layout) to aggregated experiment tables:
//!
//! ```text
//!   e4          read / write / synthesize sessions (BVP, EDA, TEMP, HR, ACC, tags)
//!   dsp         Butterworth filters, Fourier + linear resampling, channel routing
//!   windowing   example extraction, standardization, undersampling, splits
//!   activity    accelerometer features, threshold tuning, activity gate
//!   nn          1D conv autoencoder + classifier head, exact-gradient training
//!   trainflow   pretraining, the five application modes, seeded repetitions
//!   metrics     confusion counts, F1, ROC / AUC, aggregation
//!   grid        the 120-cell experiment grid and its batch scheduler
//! ```
//!
//! All numeric code is generic over [`scalar::Real`]; the aliases below fix
//! the default precision used by the CLI and by every on-disk format.

pub mod activity;
pub mod dsp;
pub mod e4;
pub mod grid;
pub mod metrics;
pub mod nn;
pub mod scalar;
pub mod seed;
pub mod trainflow;
pub mod windowing;

pub use scalar::Real;

/// Default scalar: all shipped tools run in double precision.
pub type Scalar = f64;

pub type Session = e4::Session<Scalar>;
pub type ChannelRecording = e4::ChannelRecording<Scalar>;
pub type PreprocessedSession = dsp::PreprocessedSession<Scalar>;
pub type Example = windowing::Example<Scalar>;
pub type DatasetSplit = windowing::DatasetSplit<Scalar>;
pub type ModelParams = nn::ModelParams<Scalar>;
pub use metrics::MetricsReport;
pub use trainflow::RunResult;
