//! Bayesian estimation of sparse stationary precision matrices for causal
//! vector autoregressions.

pub mod edgediff;
pub mod error;
pub mod likelihood;
pub mod linalg;
pub mod panel;
pub mod priors;
pub mod sampler;
pub mod simgen;
pub mod study;
pub mod varcore;

pub use edgediff::{edge_diff, EdgeDiffReport};
pub use error::{Error, Result};
pub use likelihood::Sample;
pub use sampler::{run_mcmc, ChainOutput, McmcConfig};
pub use study::{run_study, StudyConfig};
pub use varcore::{DerivedState, ReducedRankVarParams, VarModel};
