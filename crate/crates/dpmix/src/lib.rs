//! Bayesian nonparametric clustering with Dirichlet process mixture models.
//!
//! The crate fits joint response-covariate cluster models (profile
//! regression) by blocked MCMC with three interchangeable samplers
//! (truncated, dependent slice, independent slice), optional variable
//! selection, and ships the postprocessing used to summarise the posterior
//! partition: similarity matrix, least-squares and PAM/silhouette optimal
//! partitions, cluster profiles with credible intervals, and predictions.

pub mod adapt;
pub mod covariate;
pub mod diag;
pub mod dist;
pub mod data;
pub mod error;
pub mod hyper;
pub mod response;
pub mod rng;
pub mod sampler;
pub mod state;
pub mod util;

pub use error::{Error, Result};
pub use rng::RngStream;
