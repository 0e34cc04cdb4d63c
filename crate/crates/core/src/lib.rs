//! Persistence-gated mixture of experts for ordinal time-series prediction.
//!
//! A logistic gate decides, per input window, how much to trust the
//! persistence forecast (the current label) versus a proportional-odds
//! neural network. Everything needed to reproduce the experimental pipeline
//! lives here:
//!
//! - [`ordinal`], [`window`]: class scales, discretization, sliding windows
//! - [`nnpom`], [`mixture`]: the ordinal expert, the gated mixture, losses and gradients
//! - [`optimizer`]: the iRprop+ optimizer
//! - [`training`]: Persist / POM / NNPOM / ITME / STME / STMEIC, cross-validation, experiments
//! - [`metrics`]: Acc, AMAE, MMAE, GMS
//! - [`datagen`]: synthetic persistent ordinal series with known Bayes accuracy
//! - [`dataio`]: CSV, JSON and TOML formats
//! - [`gradcheck`]: finite-difference verification of the analytic gradients

pub mod datagen;
pub mod dataio;
pub mod error;
pub mod gradcheck;
pub mod math;
pub mod metrics;
pub mod mixture;
pub mod nnpom;
pub mod optimizer;
pub mod ordinal;
pub mod training;
pub mod window;

pub use datagen::{generate, oracle_bayes_accuracy, GenConfig};
pub use error::{Error, Result};
pub use metrics::{ConfusionMatrix, EvalReport};
pub use mixture::{LossConfig, MixtureParams};
pub use nnpom::{NnpomConfig, NnpomParams, Projection};
pub use optimizer::{minimize, Minimized, RpropConfig, RpropState};
pub use ordinal::{discretize, OrdinalLabel, OrdinalScale};
pub use training::{fit, train, ExperimentReport, FittedModel, Grid, Hyperparams, Method, SelectionMetric, TrainSpec};
pub use window::{
    build_windows, build_windows_with, class_distribution, persistence_rate, Standardization, TimeSeriesRecord,
    WindowedDataset, WindowedPattern,
};
