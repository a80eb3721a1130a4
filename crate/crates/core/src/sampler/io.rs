//! Draw files.
//!
//! Binary layout (little endian): the magic `RRVD`, a `u32` version (1), then
//! `u64` values `d`, `p`, `r`, `n_keep`, followed by `n_keep` blocks of
//! `(1 + p + 1)·d²` `f64` values: `Ω`, `A_1 … A_p`, `Σ`, each row-major.
//! Draws of lower order than `p` are padded with zero coefficient matrices.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::ChainOutput;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"RRVD";
const VERSION: u32 = 1;

/// Retained draws as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawSet {
    pub rank: usize,
    pub omega: Vec<DMatrix<f64>>,
    pub a: Vec<Vec<DMatrix<f64>>>,
    pub sigma: Vec<DMatrix<f64>>,
}

fn write_row_major<W: Write>(w: &mut W, m: &DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_row_major<R: Read>(r: &mut R, d: usize) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(d, d);
    let mut buf = [0u8; 8];
    for i in 0..d {
        for j in 0..d {
            r.read_exact(&mut buf)?;
            m[(i, j)] = f64::from_le_bytes(buf);
        }
    }
    Ok(m)
}

pub fn write_chain_binary(path: &Path, chain: &ChainOutput) -> Result<()> {
    let d = chain.dim();
    let p = chain.a_draws.iter().map(Vec::len).max().unwrap_or(0);
    let r = chain.pruned_order.ranks.iter().copied().max().unwrap_or(0);
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for v in [d, p, r, chain.len()] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    let zero = DMatrix::zeros(d, d);
    for s in 0..chain.len() {
        write_row_major(&mut w, &chain.omega_draws[s])?;
        for k in 0..p {
            write_row_major(&mut w, chain.a_draws[s].get(k).unwrap_or(&zero))?;
        }
        write_row_major(&mut w, &chain.sigma_draws[s])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_chain_binary(path: &Path) -> Result<DrawSet> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Input(format!("{} is not a draw file", path.display())));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != VERSION {
        return Err(Error::Input(format!("unsupported draw file version {}", u32::from_le_bytes(b4))));
    }
    let mut header = [0usize; 4];
    let mut b8 = [0u8; 8];
    for h in header.iter_mut() {
        r.read_exact(&mut b8)?;
        *h = usize::try_from(u64::from_le_bytes(b8)).map_err(|_| Error::Input("header overflow".into()))?;
    }
    let [d, p, rank, n] = header;
    let mut out =
        DrawSet { rank, omega: Vec::with_capacity(n), a: Vec::with_capacity(n), sigma: Vec::with_capacity(n) };
    for _ in 0..n {
        out.omega.push(read_row_major(&mut r, d)?);
        out.a.push((0..p).map(|_| read_row_major(&mut r, d)).collect::<Result<_>>()?);
        out.sigma.push(read_row_major(&mut r, d)?);
    }
    Ok(out)
}

/// Long-format CSV with columns `draw,matrix,lag,row,col,value`.
///
/// `matrix` is `omega`, `A` or `sigma`; `lag` is 0 except for `A`. Indices are 1-based.
pub fn write_chain_csv(path: &Path, chain: &ChainOutput) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["draw", "matrix", "lag", "row", "col", "value"])?;
    let mut emit = |s: usize, name: &str, lag: usize, m: &DMatrix<f64>| -> Result<()> {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                w.write_record(&[
                    (s + 1).to_string(),
                    name.to_string(),
                    lag.to_string(),
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    m[(i, j)].to_string(),
                ])?;
            }
        }
        Ok(())
    };
    for s in 0..chain.len() {
        emit(s, "omega", 0, &chain.omega_draws[s])?;
        for (k, a) in chain.a_draws[s].iter().enumerate() {
            emit(s, "A", k + 1, a)?;
        }
        emit(s, "sigma", 0, &chain.sigma_draws[s])?;
    }
    w.flush()?;
    Ok(())
}
