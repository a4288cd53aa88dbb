//! Interest labels from duration-biased, noisy watch-time logs.
//!
//! The crate is organised the way a correction experiment runs:
//!
//! * [`data`]: interaction records, CSV ingest, statistics and splits.
//! * [`synth`]: a generator for logs with known interest probabilities and
//!   known bias/noise curves.
//! * [`estimator`]: per-duration two-component Gaussian mixtures and the
//!   frequency-weighted moving average over durations.
//! * [`correction`]: watch-time-to-label transforms (play-complete rate,
//!   per-duration z-score, duration quantiles, affine and exponential
//!   debias/denoise corrections) plus their sensitivity diagnostics.
//! * [`trainer`]: a factorization machine trained with soft-label BCE.
//! * [`eval`]: GAUC, nDCG@k, duration-range breakdowns, rank correlation.

pub mod correction;
pub mod data;
pub mod error;
pub mod estimator;
pub mod eval;
pub mod math;
pub mod synth;
pub mod trainer;

pub use correction::{apply_method, CorrectedDataset, CorrectionParams, Method};
pub use data::{Dataset, DatasetStats, FeatureSchema, Interaction};
pub use error::{Error, Result};
pub use estimator::{BiasNoiseCurves, GmmOptions, GroupEstimate, GroupFits};
pub use eval::EvalReport;
pub use synth::{CurveFamily, GroundTruthRecord, SynthConfig};
pub use trainer::{FmModel, TrainConfig, Vocabulary};
