//! Synthetic ground truth, the ridge VAR(1) baseline and evaluation metrics.

mod baseline;
mod graph;
mod metrics;
mod precision;
mod simulate;

pub use baseline::{fit_var1_baseline, implied_precision, naive_precision, BaselineFit};
pub use graph::{block_sizes, small_world_blocks, watts_strogatz, Graph};
pub use metrics::{mse_precision, roc_points, Roc};
pub use precision::{gen_sparse_precision, PrecisionSpec, SparsePrecision};
pub use simulate::simulate_var;
