//! Distance functionals: total variation and squared Hellinger for
//! classical distributions, trace distance for operators.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::QuantumError;
use crate::quantum::density_op::DensityOp;

/// Total variation distance `½ Σ |p_i − q_i|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64, QuantumError> {
    if p.len() != q.len() {
        return Err(QuantumError::Dimension(format!(
            "distributions of lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0)
}

/// Squared Hellinger distance `1 − Σ √(p_i q_i)`.
pub fn hellinger2(p: &[f64], q: &[f64]) -> Result<f64, QuantumError> {
    if p.len() != q.len() {
        return Err(QuantumError::Dimension(format!(
            "distributions of lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    let bc: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum();
    Ok((1.0 - bc).max(0.0))
}

/// Trace distance `½ Σ |λ_i|` over the eigenvalues of the (hermitian)
/// difference.
pub fn trace_distance_matrices(
    a: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
) -> Result<f64, QuantumError> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(QuantumError::Dimension(format!(
            "{}x{} vs {}x{} operators",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let diff = a - b;
    let eigen = SymmetricEigen::new(diff);
    Ok(eigen.eigenvalues.iter().map(|l| l.abs()).sum::<f64>() / 2.0)
}

/// Trace distance between two density operators.
pub fn trace_distance(a: &DensityOp, b: &DensityOp) -> Result<f64, QuantumError> {
    trace_distance_matrices(a.matrix(), b.matrix())
}
