use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::graph::{small_world_blocks, Graph};
use crate::error::{Error, Result};
use crate::linalg::{sym_eigenvalues, symmetrize};

/// Smallest eigenvalue enforced on generated precisions.
const MIN_EIG: f64 = 0.1;
const DYKSTRA_ITERS: usize = 100;
const BAND: f64 = 0.05;

/// Settings for a sparse ground-truth precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrecisionSpec {
    pub d: usize,
    /// Target fraction of nonzero off-diagonal pairs.
    pub sparsity_target: f64,
    /// Small-world neighbourhood size within each block.
    pub nei: usize,
    /// Cross-block link probability; tuned by bisection when unset.
    pub q: Option<f64>,
    pub rewire: f64,
    pub gwishart_scale: f64,
    /// Off-diagonal entries below this magnitude are zeroed.
    pub entry_floor: f64,
    pub seed: u64,
}

impl Default for PrecisionSpec {
    fn default() -> Self {
        Self {
            d: 30,
            sparsity_target: 0.15,
            nei: 5,
            q: None,
            rewire: 0.05,
            gwishart_scale: 6.0,
            entry_floor: 1.0,
            seed: 1,
        }
    }
}

/// A generated precision and its support.
#[derive(Debug, Clone)]
pub struct SparsePrecision {
    pub omega: DMatrix<f64>,
    pub adjacency: Graph,
    /// Density of the nonzero off-diagonal pattern of `omega`.
    pub achieved: f64,
    pub q: f64,
    pub nei: usize,
}

fn wishart<R: Rng + ?Sized>(d: usize, df: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let z = DMatrix::from_fn(df, d, |_, _| rng.sample::<f64, _>(StandardNormal) * (scale / df as f64).sqrt());
    z.transpose() * z
}

fn clip_spectrum(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    let mut out = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    symmetrize(&mut out);
    out
}

fn mask(m: &DMatrix<f64>, g: &Graph) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| if i == j || g.has_edge(i, j) { m[(i, j)] } else { 0.0 })
}

/// Projects `w` onto {support ⊆ graph} ∩ {λ_min ≥ MIN_EIG} by Dykstra's algorithm.
fn project(w: &DMatrix<f64>, g: &Graph) -> DMatrix<f64> {
    let d = w.nrows();
    let mut x = mask(w, g);
    let mut p = DMatrix::zeros(d, d);
    let mut q = DMatrix::zeros(d, d);
    for _ in 0..DYKSTRA_ITERS {
        let y = clip_spectrum(&(&x + &p), MIN_EIG);
        p = &x + &p - &y;
        let nx = mask(&(&y + &q), g);
        q = &y + &q - &nx;
        x = nx;
    }
    x
}

fn support(omega: &DMatrix<f64>) -> Graph {
    let d = omega.nrows();
    let mut g = Graph::empty(d);
    for i in 0..d {
        for j in i + 1..d {
            if omega[(i, j)] != 0.0 {
                g.add_edge(i, j);
            }
        }
    }
    g
}

/// One draw for fixed `(nei, q)`; the two seeds give common random numbers.
fn generate(spec: &PrecisionSpec, nei: usize, q: f64, graph_seed: u64, wishart_seed: u64) -> SparsePrecision {
    let d = spec.d;
    let graph = small_world_blocks(d, nei, q, spec.rewire, &mut ChaCha8Rng::seed_from_u64(graph_seed));
    let w = wishart(d, d + 2, spec.gwishart_scale, &mut ChaCha8Rng::seed_from_u64(wishart_seed));
    let mut omega = project(&w, &graph);
    for i in 0..d {
        for j in 0..d {
            if i != j && (omega[(i, j)].abs() < spec.entry_floor || !graph.has_edge(i, j)) {
                omega[(i, j)] = 0.0;
            }
        }
    }
    symmetrize(&mut omega);
    let lo = sym_eigenvalues(&omega)[0];
    if lo < MIN_EIG {
        for i in 0..d {
            omega[(i, i)] += MIN_EIG - lo;
        }
    }
    let adjacency = support(&omega);
    let achieved = adjacency.density();
    SparsePrecision { omega, adjacency, achieved, q, nei }
}

/// Sparse SPD precision on a three-block small-world graph.
///
/// A Wishart draw with mean `gwishart_scale · I` is projected onto the graph
/// support and the SPD cone, small off-diagonals are floored to zero, and the
/// diagonal is lifted if needed. Unless `q` is fixed, the cross-block
/// probability is bisected (and `nei` lowered if even `q = 0` is too dense)
/// until the nonzero fraction is within 0.05 of the target.
pub fn gen_sparse_precision(spec: &PrecisionSpec) -> Result<SparsePrecision> {
    if spec.d == 0 || !(spec.gwishart_scale > 0.0) || !(spec.entry_floor >= 0.0) {
        return Err(Error::Contract("precision spec needs d > 0, positive scale and nonnegative floor".into()));
    }
    let (gs, ws) = (spec.seed, spec.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    if let Some(q) = spec.q {
        return Ok(generate(spec, spec.nei, q, gs, ws));
    }
    if !(spec.sparsity_target > 0.0 && spec.sparsity_target < 1.0) {
        return Err(Error::Contract(format!("sparsity target {} must lie in (0, 1)", spec.sparsity_target)));
    }
    let target = spec.sparsity_target;
    let in_band = |s: &SparsePrecision| (s.achieved - target).abs() <= BAND;
    let mut last = None;
    for nei in (0..=spec.nei).rev() {
        let low = generate(spec, nei, 0.0, gs, ws);
        if in_band(&low) {
            return Ok(low);
        }
        if low.achieved > target {
            last = Some(low);
            continue;
        }
        let high = generate(spec, nei, 1.0, gs, ws);
        if in_band(&high) {
            return Ok(high);
        }
        if high.achieved < target {
            return Err(Error::Generation(format!(
                "densest graph reaches only {:.3} nonzero off-diagonals (target {target})",
                high.achieved
            )));
        }
        let (mut a, mut b) = (0.0, 1.0);
        for _ in 0..50 {
            let mid = 0.5 * (a + b);
            let s = generate(spec, nei, mid, gs, ws);
            if in_band(&s) {
                return Ok(s);
            }
            if s.achieved < target {
                a = mid;
            } else {
                b = mid;
            }
            last = Some(s);
        }
        break;
    }
    let achieved = last.map_or(f64::NAN, |s| s.achieved);
    Err(Error::Generation(format!("could not reach sparsity {target} ± {BAND}; last achieved {achieved:.3}")))
}
