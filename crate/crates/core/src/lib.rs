//! Survival ensembles for right-censored and competing-risk data.
//!
//! * [`dataset`]: records, CSV ingestion, cause derivation, splitting
//! * [`estimators`]: Kaplan-Meier, Nelson-Aalen, Aalen-Johansen
//! * [`split`]: log-rank and log-rank score split search
//! * [`tree`] / [`forest`]: random (RSF) and extra (ESF) survival forests
//! * [`boost`]: AdaBoost over survival forests (ADA-RSF, ADA-ESF, ADA-MIX)
//! * [`competing`]: cause-specific fits and curves
//! * [`bench`]: RMSE and running-time reports

pub mod bench;
pub mod boost;
pub mod competing;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod forest;
pub mod model;
pub mod seed;
pub mod split;
pub mod tree;

pub use error::{Error, Result};
