//! Hourly load forecasting with cyclic temporal encodings.
//!
//! The crate is organised as a pipeline:
//!
//! - [`dataset`]: CSV ingestion, a seeded synthetic generator and temporal splits.
//! - [`encoding`]: ordinal, one-hot and sine/cosine encodings of calendar phases.
//! - [`features`]: rolling statistics, lags, exponentially weighted means and the
//!   design-matrix builder with named ablation groups.
//! - [`gbtree`]: gradient-boosted regression trees with an L2/leaf-count penalty,
//!   GOSS row sampling and patience-based early stopping.
//! - [`evaluation`]: metrics, expanding-window cross-validation, per-period
//!   breakdowns and residual moments.
//! - [`tuner`]: Gaussian-process Bayesian optimisation with expected improvement.
//! - [`report`]: serialisable experiment reports and their text rendering.

// range checks are written as negated comparisons so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod encoding;
pub mod evaluation;
pub mod features;
pub mod gbtree;
pub mod report;
pub mod tuner;

mod error;

pub use error::{Error, Result};

pub use dataset::{CsvSchema, SyntheticConfig, TimeSeriesFrame};
pub use encoding::{CyclicFeature, EncodingStrategy};
pub use evaluation::{Metrics, ResidualStats};
pub use features::{FeatureGroup, FeatureMatrix, FeatureSpec};
pub use gbtree::{GbtModel, HyperParams, TrainLog};
pub use tuner::{ParamSpace, Trial};
