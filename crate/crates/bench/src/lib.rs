//! Shared fixtures for the likelihood benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rrvar::{ReducedRankVarParams, Sample};

/// Random rank-`r` model of size `(d, p)` and a length-`t` sample drawn from it.
/// `E1` is scaled by `d^{-1/2}` so the precision stays well conditioned.
pub fn fixture(d: usize, p: usize, r: usize, t: usize, seed: u64) -> (ReducedRankVarParams, Sample) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ReducedRankVarParams::random(d, p, r, &mut rng);
    params.e1 /= (d as f64).sqrt();
    let sample = rrvar::simgen::simulate_var(&params, t, &mut rng).expect("random parameters are causal");
    (params, sample)
}
