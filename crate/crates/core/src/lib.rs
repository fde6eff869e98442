//! Upper bounds on the success probability of adversarial examples against
//! Gaussian-process binary classifiers, plus the harness that checks them
//! empirically.
//!
//! A GP regressor trained on `+1` / `-1` targets is turned into a classifier by
//! thresholding a sample of the predictive distribution at zero. For a point
//! `x_plus` and its closest opposite-label point `x_minus`, [`bounds`] computes
//! the maximum success probability of any perturbation whose kernel value to
//! `x_plus` equals `r`; [`attack`] crafts perturbations toward the nearest
//! enemy and compares the fitted classifier's error probability with that
//! bound.

pub mod attack;
pub mod bounds;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod io;
pub mod kernel;
pub mod normal;

pub use dataset::{Label, LabeledDataset};
pub use error::{Error, Result};
pub use gp::{GpModel, PredictiveDistribution};
pub use kernel::KernelSpec;
