//! Bias-aware evaluation of dyadic regression models.
//!
//! A dyadic regressor predicts a real value for a `(user, item)` pair. Global
//! error metrics such as RMSE and MAE do not reveal whether a model simply
//! gravitates toward the average value each entity has shown in the past. This
//! crate measures that tendency:
//!
//! * [`metrics::eauc`] integrates absolute error over the *eccentricity* of each
//!   test example (distance of the label from the dyad's mean value), giving a
//!   score in `[0, 1]` where `0` is perfect and `0.5` matches a predictor that
//!   always outputs the dyadic mean.
//! * [`difficulty::dataset_ks`] scores how far each entity's observed values
//!   are from uniform, a proxy for how strongly a dataset invites that bias.
//!
//! The crate also ships reference models ([`baselines`], [`mf`]) with
//! post-training [`corrections`]. [`synthetic`] generates data whose
//! per-entity spread is under control.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod config;
pub mod corrections;
pub mod data;
pub mod difficulty;
pub mod error;
pub mod metrics;
pub mod mf;
pub mod report;
pub mod stats;
pub mod synthetic;

mod binio;
mod rng;
pub mod svg;

pub use data::{BoundsSource, Dataset, EntityId, Interaction, ValueBounds};
pub use difficulty::DifficultyReport;
pub use error::{Error, ErrorKind, Result};
pub use metrics::{EccErrorCurve, PredictionRecord, PredictionSet};
pub use report::EvaluationReport;
pub use stats::EntityStats;
