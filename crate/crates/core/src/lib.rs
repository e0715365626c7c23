//! Maximum marginal likelihood (ABIC) estimation of the two hyperparameters
//! of general linear Bayesian models and separable Gibbs models, with a
//! Monte Carlo harness for checking the estimator's asymptotic behaviour.

pub mod crossentropy;
pub mod error;
pub mod gibbs1d;
pub mod harness;
pub mod linmodel;
pub mod marginal;
pub mod mmle;
pub mod optimize;
pub mod problem;
pub mod sampler;

pub use error::{Error, Result};
pub use linmodel::{build_model, build_model_with, GeneralLinearModel, HyperPoint, LambdaOperators};
