use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::likelihood::Sample;
use crate::linalg::cholesky_jittered;
use crate::varcore::{forward_map, ReducedRankVarParams};

fn normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

fn lower_factor(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    cholesky_jittered(m)
        .map(|(c, _)| c.l())
        .ok_or_else(|| Error::Conditioning { lag: 0, detail: format!("{what} is not positive definite") })
}

/// Draws `X_1..X_T` from the stationary causal VAR defined by `params`.
///
/// The first `p` values come jointly from the stationary law; later values
/// follow `X_t = Σ_k A_k X_{t−k} + Z_t` with `Z_t ~ N(0, Σ)`.
pub fn simulate_var<R: Rng + ?Sized>(params: &ReducedRankVarParams, t: usize, rng: &mut R) -> Result<Sample> {
    if t == 0 {
        return Err(Error::Contract("sample length must be positive".into()));
    }
    let (st, model) = forward_map(params)?;
    let d = params.dim();
    let p = model.order();
    let mut x = DMatrix::zeros(t, d);

    let start = p.clamp(1, t);
    let ups = st.upsilon(start - 1);
    let z = lower_factor(&ups, "stationary covariance")? * normal_vec(d * start, rng);
    // the stacked draw is (X_start, X_start−1, …, X_1)
    for s in 0..start {
        let row = z.rows(s * d, d).transpose();
        x.set_row(start - 1 - s, &row);
    }

    let chol_sigma = lower_factor(&model.sigma, "innovation covariance")?;
    for row in start..t {
        let mut next = &chol_sigma * normal_vec(d, rng);
        for (k, a) in model.a.iter().enumerate() {
            next.gemv(1.0, a, &x.row(row - k - 1).transpose(), 1.0);
        }
        x.set_row(row, &next.transpose());
    }
    Sample::new(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_seed_same_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = ReducedRankVarParams::random(3, 2, 1, &mut rng);
        let a = simulate_var(&p, 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = simulate_var(&p, 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn short_sample_shorter_than_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = ReducedRankVarParams::random(2, 3, 1, &mut rng);
        assert_eq!(simulate_var(&p, 2, &mut rng).unwrap().len(), 2);
    }
}
