//! Lossy public matrices: `Ã = B·C + F` with a low-rank carrier `B·C`
//! (inner dimension `l`) plus small noise `F`.
//!
//! A lossy matrix carries at most `l` dimensions of information about a
//! secret, which is the degenerate mode the hardness argument walks keys
//! into. At width 0 the noise vanishes and the rank bound is exact.

use rand::Rng;

use crate::error::LatticeError;
use crate::lattice::gauss::GaussDensity;
use crate::lattice::zq::ZqMatrix;

/// The factors of a lossy sample, kept for inspection.
#[derive(Debug, Clone)]
pub struct LossySample {
    /// The lossy matrix `B·C + F`, `m x n`.
    pub matrix: ZqMatrix,
    /// Uniform left factor, `m x l`.
    pub b: ZqMatrix,
    /// Uniform right factor, `l x n`.
    pub c: ZqMatrix,
    /// Noise, `m x n`, i.i.d. width-`B_L` Gaussian entries.
    pub f: ZqMatrix,
}

/// Samples a lossy matrix together with its factors.
pub fn lossy_sample_parts<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    l: usize,
    q: u64,
    b_l: u64,
    rng: &mut R,
) -> Result<LossySample, LatticeError> {
    if l < 1 || l > n {
        return Err(LatticeError::InvalidParams(format!(
            "lossy inner dimension l = {l} must satisfy 1 <= l <= n = {n}"
        )));
    }
    let b = ZqMatrix::uniform(q, m, l, rng);
    let c = ZqMatrix::uniform(q, l, n, rng);
    let gauss = GaussDensity::new(q, b_l)?;
    let mut f = ZqMatrix::zeros(q, m, n);
    for r in 0..m {
        for col in 0..n {
            f.set(r, col, gauss.sample(rng));
        }
    }
    let matrix = b.mul_mat(&c)?.add(&f)?;
    Ok(LossySample { matrix, b, c, f })
}

/// Samples a lossy matrix `Ã = B·C + F`.
pub fn lossy_sample<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    l: usize,
    q: u64,
    b_l: u64,
    rng: &mut R,
) -> Result<ZqMatrix, LatticeError> {
    Ok(lossy_sample_parts(n, m, l, q, b_l, rng)?.matrix)
}
