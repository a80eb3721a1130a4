//! Parameterization of causal VAR processes and the deterministic maps
//! between free parameters, autocovariances and classical VAR form.

mod companion;
mod forward;
mod params;
mod rankfac;

pub use companion::{companion_matrix, companion_spectral_radius, solve_stationary_covariance};
pub use forward::{block_toeplitz, forward_map, DerivedState, VarModel};
#[allow(unused_imports)]
pub(crate) use forward::{forward_core, var_model, ForwardOptions};
pub use params::{build_precision, modified_cholesky, stationary_covariance_from_factors, ReducedRankVarParams};
pub use rankfac::rank_factorize;
