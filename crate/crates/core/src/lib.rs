//! Streaming anomaly scoring for multivariate sensor data.
//!
//! An ensemble of small probabilistic convolutional regressors watches a
//! stream of sensor samples. Each model predicts one signal from a window of
//! other signals and reports both a mean and a confidence; the squared
//! prediction error standardised by the predicted variance (SED) measures how
//! surprising the newest sample is. Averaging SED across the ensemble gives a
//! per-tick anomaly score (MSED), and a bounded priority store keeps the most
//! anomalous windows seen so far so that a bandwidth-limited host can forward
//! only the interesting parts of the stream.
//!
//! The crate is `no_std` (with `alloc`) so the same scoring core can run on
//! embedded collectors; everything that needs files, clocks or threads lives
//! in the companion `sentinel` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod datasets;
pub mod evaluation;
pub mod math;
pub mod network;
pub mod runtime;
pub mod training;

pub use datasets::ScalingPair;
pub use evaluation::{mae, mann_whitney, MsedSeries, UTestResult};
pub use network::{forward, ModelParams, ModelSpec, Prediction, Window, WindowOrigin};
pub use runtime::{
    sed, Engine, EngineConfig, ModelId, ModelRegistration, PriorityStore, RunRecord, ScoredWindow,
    TickReport, Telemetry,
};
pub use training::{train, TrainConfig, TrainReport};
