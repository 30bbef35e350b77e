//! Frequency-domain fingerprints of peer-to-peer network-size series.
//!
//! The pipeline runs in stages:
//!
//! 1. [`ingest`]: crawl snapshots are geolocated, counted per country and
//!    resampled into uniform seven-day [`ingest::EvolutionWindow`]s.
//! 2. [`spectrum`]: each window becomes a unit-norm FFT amplitude vector.
//! 3. [`reduction`]: the fingerprint matrix is factored by SVD and projected
//!    onto its leading left singular vectors.
//! 4. [`similarity`]: reduced features are compared by Euclidean distance,
//!    grouped, and exported as scatter coordinates.
//! 5. [`anomaly`]: per-entity baselines flag windows whose reduced feature
//!    drifts too far from the running mean.
//!
//! [`synth`] generates weekly-periodic signals with injected anomalies for
//! testing and evaluation.

pub mod anomaly;
mod error;
pub mod format;
pub mod ingest;
pub mod pipeline;
pub mod reduction;
pub mod similarity;
pub mod spectrum;
pub mod synth;

pub use error::{Error, IpRange, Result};

/// Length of one evolution window in seconds.
pub const WEEK_SECONDS: i64 = 7 * 24 * 3600;
