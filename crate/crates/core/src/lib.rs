//! Non-steady-state locomotor activity recognition.
//!
//! The pipeline turns 100 Hz, 36-channel segment kinematics recorded over a
//! terrain-park circuit into 500 ms analysis windows, classifies each window
//! into one of five locomotor modes (ramp ascent/descent, stair
//! ascent/descent, level walking) with either a linear discriminant on
//! time-domain features or an LSTM on the raw window, and scores the result
//! under three training paradigms with per-category F1 and confusion counts.
//!
//! Modules:
//! - [`corpus`]: trial data model, CSV ingestion, source selection,
//!   normalization and windowing.
//! - [`features`]: six time-domain statistics per channel.
//! - [`lda`]: pooled-covariance linear discriminant with shrinkage.
//! - [`lstm`]: single-layer LSTM, BPTT, Adam, minibatch training.
//! - [`eval`]: confusion matrices, F1, paradigm harness and reports.
//! - [`synthgen`]: deterministic synthetic cohort generator.
//! - [`config`]: experiment configuration file parsing.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod lda;
pub mod lstm;
pub mod matrix;
pub mod seed;
pub mod synthgen;

pub use corpus::{
    Cohort, CircuitOrder, Dataset, LabeledWindow, Leg, Normalizer, ReportCategory, SignalSource,
    SubLabel, TaskCategory, Trial, TrialMeta,
};
pub use features::FeatureVector;
pub use lda::LdaModel;
pub use lstm::{LstmModel, TrainConfig};
pub use matrix::Matrix;
