//! Density operators, CPTP maps, and the Z-twirl equivalence check.
//!
//! The twirl check is the operational heart of the measurement protocol's
//! soundness argument: conjugating an arbitrary channel's first-qubit
//! action by a uniformly random `Z^r` before a Hadamard-basis measurement
//! collapses the channel to an X-diagonal form. Both channel families are
//! built explicitly from the Pauli block decomposition of each Kraus
//! operator and compared on random inputs.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::QuantumError;
use crate::quantum::state::{MeasBasis, QState, RegisterLayout};

/// Tolerance for hermiticity / trace-preservation checks.
pub const OP_TOL: f64 = 1e-10;

/// A (possibly unnormalized) operator over a register layout.
///
/// Proper states are hermitian with unit trace; hybrid bookkeeping terms
/// (diagonal/cross decompositions) may be neither, and are flagged.
#[derive(Clone, Debug)]
pub struct DensityOp {
    layout: RegisterLayout,
    matrix: DMatrix<Complex64>,
    hermitian: bool,
    trace: Complex64,
}

fn is_hermitian(m: &DMatrix<Complex64>, tol: f64) -> bool {
    let n = m.nrows();
    for i in 0..n {
        for j in i..n {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > tol {
                return false;
            }
        }
    }
    true
}

impl DensityOp {
    /// Builds a proper density operator: hermitian, unit trace.
    pub fn new(layout: RegisterLayout, matrix: DMatrix<Complex64>) -> Result<Self, QuantumError> {
        let d = layout.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(QuantumError::Dimension(format!(
                "{}x{} matrix over total dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !is_hermitian(&matrix, OP_TOL) {
            return Err(QuantumError::NotDensity("matrix is not hermitian".into()));
        }
        let trace = matrix.trace();
        if (trace - Complex64::ONE).norm() > OP_TOL {
            return Err(QuantumError::NotDensity(format!("trace {trace} is not 1")));
        }
        Ok(DensityOp { layout, matrix, hermitian: true, trace })
    }

    /// Wraps an arbitrary operator without the state invariants; hermiticity
    /// is measured and recorded, not required. For hybrid terms.
    pub fn new_unnormalized(
        layout: RegisterLayout,
        matrix: DMatrix<Complex64>,
    ) -> Result<Self, QuantumError> {
        let d = layout.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(QuantumError::Dimension(format!(
                "{}x{} matrix over total dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let hermitian = is_hermitian(&matrix, OP_TOL);
        let trace = matrix.trace();
        Ok(DensityOp { layout, matrix, hermitian, trace })
    }

    /// The projector |ψ⟩⟨ψ| of a pure state.
    pub fn from_state(state: &QState) -> Self {
        let amps = state.amps();
        let d = amps.len();
        let matrix = DMatrix::from_fn(d, d, |i, j| amps[i] * amps[j].conj());
        DensityOp {
            layout: state.layout().clone(),
            matrix,
            hermitian: true,
            trace: Complex64::new(state.norm2(), 0.0),
        }
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn trace(&self) -> Complex64 {
        self.trace
    }

    /// Traces out every register not named in `keep` (order preserved from
    /// the original layout).
    pub fn partial_trace(&self, keep: &[&str]) -> Result<Self, QuantumError> {
        let mut keep_idx = Vec::with_capacity(keep.len());
        for name in keep {
            keep_idx.push(self.layout.index_of(name)?);
        }
        keep_idx.sort_unstable();
        keep_idx.dedup();

        let n_regs = self.layout.num_registers();
        let traced: Vec<usize> = (0..n_regs).filter(|r| !keep_idx.contains(r)).collect();
        let kept_dims: Vec<(&str, usize)> = keep_idx
            .iter()
            .map(|&r| (self.layout.name(r), self.layout.dim(r)))
            .collect();
        let new_layout = RegisterLayout::new(&kept_dims)?;
        let dk = new_layout.total_dim();
        let dt: usize = traced.iter().map(|&r| self.layout.dim(r)).product();

        // Flat index of the original layout from (kept indices, traced
        // indices).
        let compose = |k: usize, t: usize| -> usize {
            let mut idx = vec![0usize; n_regs];
            let mut kk = k;
            for &r in keep_idx.iter().rev() {
                idx[r] = kk % self.layout.dim(r);
                kk /= self.layout.dim(r);
            }
            let mut tt = t;
            for &r in traced.iter().rev() {
                idx[r] = tt % self.layout.dim(r);
                tt /= self.layout.dim(r);
            }
            self.layout.flat_index(&idx).expect("indices in range by construction")
        };

        let mut out = DMatrix::from_element(dk, dk, Complex64::ZERO);
        for i in 0..dk {
            for j in 0..dk {
                let mut acc = Complex64::ZERO;
                for t in 0..dt {
                    acc += self.matrix[(compose(i, t), compose(j, t))];
                }
                out[(i, j)] = acc;
            }
        }
        let trace = out.trace();
        Ok(DensityOp { layout: new_layout, matrix: out, hermitian: self.hermitian, trace })
    }

    /// Conjugates one register by a `d x d` unitary: `ρ → (I⊗U⊗I) ρ (…)†`.
    pub fn conjugate_register(
        &self,
        reg: usize,
        u: &DMatrix<Complex64>,
    ) -> Result<Self, QuantumError> {
        let full = embed_register_op(&self.layout, reg, u)?;
        let matrix = &full * &self.matrix * full.adjoint();
        let trace = matrix.trace();
        Ok(DensityOp { layout: self.layout.clone(), matrix, hermitian: self.hermitian, trace })
    }

    /// Exact outcome distribution over selected registers, each measured in
    /// its chosen basis.
    pub fn measurement_distribution(
        &self,
        regs: &[(usize, MeasBasis)],
    ) -> Result<Vec<f64>, QuantumError> {
        let mut rho = self.clone();
        for &(r, basis) in regs {
            if basis == MeasBasis::Hadamard {
                let dim = self.layout.dim(r);
                rho = rho.conjugate_register(r, &walsh_matrix(dim)?)?;
            }
        }
        let sel_dim: usize = regs.iter().map(|&(r, _)| self.layout.dim(r)).product();
        let mut probs = vec![0.0; sel_dim];
        for flat in 0..self.layout.total_dim() {
            let indices = self.layout.unflatten(flat);
            let mut key = 0;
            for &(r, _) in regs {
                key = key * self.layout.dim(r) + indices[r];
            }
            probs[key] += rho.matrix[(flat, flat)].re;
        }
        Ok(probs)
    }
}

/// `H^{⊗log2(dim)}` as a dense matrix.
pub fn walsh_matrix(dim: usize) -> Result<DMatrix<Complex64>, QuantumError> {
    if !dim.is_power_of_two() {
        return Err(QuantumError::BadAxis(format!(
            "Walsh-Hadamard needs a power-of-two dimension, got {dim}"
        )));
    }
    let scale = 1.0 / (dim as f64).sqrt();
    Ok(DMatrix::from_fn(dim, dim, |r, c| {
        let sign = if (r & c).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        Complex64::new(sign * scale, 0.0)
    }))
}

/// Embeds a single-register operator into the full space: `I ⊗ u ⊗ I` with
/// identity factors on every other register.
pub fn embed_register_op(
    layout: &RegisterLayout,
    reg: usize,
    u: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>, QuantumError> {
    if reg >= layout.num_registers() {
        return Err(QuantumError::BadAxis(format!("register index {reg} out of range")));
    }
    let dim = layout.dim(reg);
    if u.nrows() != dim || u.ncols() != dim {
        return Err(QuantumError::Dimension(format!(
            "{}x{} operator on register of dim {dim}",
            u.nrows(),
            u.ncols()
        )));
    }
    let outer: usize = (0..reg).map(|r| layout.dim(r)).product();
    let inner: usize = (reg + 1..layout.num_registers()).map(|r| layout.dim(r)).product();
    let total = layout.total_dim();
    let mut full = DMatrix::from_element(total, total, Complex64::ZERO);
    for o in 0..outer {
        for a in 0..dim {
            for b in 0..dim {
                let v = u[(a, b)];
                if v == Complex64::ZERO {
                    continue;
                }
                for i in 0..inner {
                    full[((o * dim + a) * inner + i, (o * dim + b) * inner + i)] = v;
                }
            }
        }
    }
    Ok(full)
}

/// A channel given by its Kraus operators.
#[derive(Clone, Debug)]
pub struct CPTPMap {
    kraus: Vec<DMatrix<Complex64>>,
    dim: usize,
}

impl CPTPMap {
    /// Builds a map, verifying trace preservation `Σ K†K = I`.
    pub fn new(kraus: Vec<DMatrix<Complex64>>) -> Result<Self, QuantumError> {
        if kraus.is_empty() {
            return Err(QuantumError::Dimension("no Kraus operators".into()));
        }
        let dim = kraus[0].ncols();
        for k in &kraus {
            if k.nrows() != dim || k.ncols() != dim {
                return Err(QuantumError::Dimension(format!(
                    "Kraus operator {}x{} in a dim-{dim} map",
                    k.nrows(),
                    k.ncols()
                )));
            }
        }
        let map = CPTPMap { kraus, dim };
        let deviation = map.trace_preservation_deviation();
        if deviation > OP_TOL {
            return Err(QuantumError::NotTracePreserving { deviation });
        }
        Ok(map)
    }

    pub fn kraus(&self) -> &[DMatrix<Complex64>] {
        &self.kraus
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Max-entry deviation of `Σ K†K` from the identity.
    pub fn trace_preservation_deviation(&self) -> f64 {
        let mut sum = DMatrix::from_element(self.dim, self.dim, Complex64::ZERO);
        for k in &self.kraus {
            sum += k.adjoint() * k;
        }
        let mut dev = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let expect = if i == j { Complex64::ONE } else { Complex64::ZERO };
                dev = dev.max((sum[(i, j)] - expect).norm());
            }
        }
        dev
    }

    /// Applies the channel: `Σ K ρ K†`.
    pub fn apply_matrix(&self, rho: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>, QuantumError> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(QuantumError::Dimension(format!(
                "{}x{} input to a dim-{} map",
                rho.nrows(),
                rho.ncols(),
                self.dim
            )));
        }
        let mut out = DMatrix::from_element(self.dim, self.dim, Complex64::ZERO);
        for k in &self.kraus {
            out += k * rho * k.adjoint();
        }
        Ok(out)
    }

    pub fn apply(&self, rho: &DensityOp) -> Result<DensityOp, QuantumError> {
        let matrix = self.apply_matrix(rho.matrix())?;
        let trace = matrix.trace();
        Ok(DensityOp {
            layout: rho.layout().clone(),
            matrix,
            hermitian: rho.is_hermitian(),
            trace,
        })
    }

    /// A random channel with `n_kraus` operators: the column-orthonormal
    /// factor of a random tall matrix, cut into square blocks.
    pub fn random<R: Rng + ?Sized>(dim: usize, n_kraus: usize, rng: &mut R) -> Self {
        let tall = DMatrix::from_fn(dim * n_kraus, dim, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let q = tall.qr().q();
        let kraus = (0..n_kraus).map(|t| q.rows(t * dim, dim).into_owned()).collect();
        CPTPMap { kraus, dim }
    }
}

/// A random density matrix `GG†/Tr(GG†)`.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    rho / tr
}

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);
const CM1: Complex64 = Complex64::new(-1.0, 0.0);

/// Single-qubit Paulis and friends (row-major 2x2).
pub fn pauli_x() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[C0, C1, C1, C0])
}

pub fn pauli_z() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[C1, C0, C0, CM1])
}

/// The product `X·Z` (not Y: no phase).
pub fn pauli_xz() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[C0, CM1, C1, C0])
}

/// Pauli block decomposition of an operator on qubit ⊗ rest:
/// `K = I⊗B_I + X⊗B_X + Z⊗B_Z + XZ⊗B_XZ`, returned as
/// `[B_I, B_Z, B_X, B_XZ]` (indexed by `(x, z)` bits as `x·2 + z`).
pub fn pauli_block_decompose(
    k: &DMatrix<Complex64>,
) -> Result<[DMatrix<Complex64>; 4], QuantumError> {
    let d = k.nrows();
    if k.ncols() != d || d % 2 != 0 || d == 0 {
        return Err(QuantumError::Dimension(format!(
            "{}x{} operator cannot split off a leading qubit",
            d,
            k.ncols()
        )));
    }
    let half = d / 2;
    let k00 = k.view((0, 0), (half, half));
    let k01 = k.view((0, half), (half, half));
    let k10 = k.view((half, 0), (half, half));
    let k11 = k.view((half, half), (half, half));
    let two = Complex64::new(2.0, 0.0);
    let b_i = (k00 + k11) / two;
    let b_z = (k00 - k11) / two;
    let b_x = (k01 + k10) / two;
    let b_xz = (k10 - k01) / two;
    Ok([b_i, b_z, b_x, b_xz])
}

/// Rebuilds the operator from its Pauli blocks (inverse of
/// [`pauli_block_decompose`]).
pub fn pauli_block_reconstruct(blocks: &[DMatrix<Complex64>; 4]) -> DMatrix<Complex64> {
    let half = blocks[0].nrows();
    let d = 2 * half;
    let mut out = DMatrix::from_element(d, d, Complex64::ZERO);
    // I⊗B_I + Z⊗B_Z on the diagonal blocks; X⊗B_X + XZ⊗B_XZ off-diagonal.
    let k00 = &blocks[0] + &blocks[1];
    let k11 = &blocks[0] - &blocks[1];
    let k01 = &blocks[2] - &blocks[3];
    let k10 = &blocks[2] + &blocks[3];
    out.view_mut((0, 0), (half, half)).copy_from(&k00);
    out.view_mut((half, half), (half, half)).copy_from(&k11);
    out.view_mut((0, half), (half, half)).copy_from(&k01);
    out.view_mut((half, 0), (half, half)).copy_from(&k10);
    out
}

fn kron_qubit_op(left: &DMatrix<Complex64>, rest_dim: usize) -> DMatrix<Complex64> {
    left.kronecker(&DMatrix::identity(rest_dim, rest_dim))
}

/// The two Kraus families whose equality the Z-twirl asserts, built from
/// the blocks of each Kraus operator:
///
/// * twirled: `(1/√2)·(Z^r ⊗ I)·K_τ·(Z^r ⊗ I)` over `r ∈ {0,1}`, τ;
/// * diagonal: `(X^x ⊗ I)·B'_{x,τ}` with `B'_{x,τ} = Σ_z Z^z ⊗ B_{xzτ}`.
pub fn z_twirl_families(
    map: &CPTPMap,
) -> Result<(Vec<DMatrix<Complex64>>, Vec<DMatrix<Complex64>>), QuantumError> {
    let rest_dim = map.dim() / 2;
    let z_full = kron_qubit_op(&pauli_z(), rest_dim);
    let x_full = kron_qubit_op(&pauli_x(), rest_dim);
    let inv_sqrt2 = Complex64::new(1.0 / (2.0f64).sqrt(), 0.0);

    let mut twirled = Vec::with_capacity(2 * map.kraus().len());
    for k in map.kraus() {
        twirled.push(k * inv_sqrt2);
        twirled.push(&z_full * k * &z_full * inv_sqrt2);
    }

    let mut diagonal = Vec::with_capacity(2 * map.kraus().len());
    for k in map.kraus() {
        let blocks = pauli_block_decompose(k)?;
        // B'_{0,τ} = I⊗B_I + Z⊗B_Z, B'_{1,τ} = I⊗B_X + Z⊗B_XZ.
        for x in 0..2usize {
            let b0 = &blocks[2 * x];
            let b1 = &blocks[2 * x + 1];
            let half = rest_dim;
            let mut bp = DMatrix::from_element(map.dim(), map.dim(), Complex64::ZERO);
            bp.view_mut((0, 0), (half, half)).copy_from(&(b0 + b1));
            bp.view_mut((half, half), (half, half)).copy_from(&(b0 - b1));
            let op = if x == 0 { bp } else { &x_full * bp };
            diagonal.push(op);
        }
    }
    Ok((twirled, diagonal))
}

/// Appends the Hadamard-basis measurement of the first qubit to a Kraus
/// family: each operator spawns `(|b⟩⟨b|H ⊗ I)·K` for `b ∈ {0,1}`.
pub fn with_hadamard_measurement(
    family: &[DMatrix<Complex64>],
    rest_dim: usize,
) -> Vec<DMatrix<Complex64>> {
    let h = walsh_matrix(2).expect("dim 2 is a power of two");
    let mut out = Vec::with_capacity(2 * family.len());
    for b in 0..2usize {
        let mut proj = DMatrix::from_element(2, 2, Complex64::ZERO);
        proj[(b, b)] = Complex64::ONE;
        let meas = kron_qubit_op(&(proj * &h), rest_dim);
        for k in family {
            out.push(&meas * k);
        }
    }
    out
}

/// Verifies the Z-twirl equivalence on random inputs: builds both Kraus
/// families (and both measured variants), applies all four channels to
/// `trials` random densities, and returns the largest trace distance
/// between corresponding outputs.
pub fn z_twirl_check<R: Rng + ?Sized>(
    map: &CPTPMap,
    trials: usize,
    rng: &mut R,
) -> Result<f64, QuantumError> {
    if map.dim() % 2 != 0 {
        return Err(QuantumError::Dimension(format!(
            "map dimension {} has no leading qubit",
            map.dim()
        )));
    }
    let (twirled, diagonal) = z_twirl_families(map)?;
    let rest_dim = map.dim() / 2;
    let meas_twirled = with_hadamard_measurement(&twirled, rest_dim);
    let meas_diagonal = with_hadamard_measurement(&diagonal, rest_dim);

    let apply = |family: &[DMatrix<Complex64>], rho: &DMatrix<Complex64>| {
        let mut out = DMatrix::from_element(map.dim(), map.dim(), Complex64::ZERO);
        for k in family {
            out += k * rho * k.adjoint();
        }
        out
    };

    let mut max_dev = 0.0f64;
    for _ in 0..trials {
        let rho = random_density(map.dim(), rng);
        let lemma =
            crate::quantum::distance::trace_distance_matrices(&apply(&twirled, &rho), &apply(&diagonal, &rho))?;
        let corollary = crate::quantum::distance::trace_distance_matrices(
            &apply(&meas_twirled, &rho),
            &apply(&meas_diagonal, &rho),
        )?;
        max_dev = max_dev.max(lemma).max(corollary);
    }
    Ok(max_dev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::distance::trace_distance;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn qubit_layout(n: usize) -> RegisterLayout {
        let names: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
        let pairs: Vec<(&str, usize)> = names.iter().map(|n| (n.as_str(), 2)).collect();
        RegisterLayout::new(&pairs).unwrap()
    }

    #[test]
    fn density_invariants_are_enforced() {
        let l = qubit_layout(1);
        let not_herm = DMatrix::from_row_slice(2, 2, &[C1, C1, C0, C0]);
        assert!(matches!(
            DensityOp::new(l.clone(), not_herm.clone()),
            Err(QuantumError::NotDensity(_))
        ));
        let not_unit = DMatrix::from_row_slice(2, 2, &[C1, C0, C0, C1]);
        assert!(matches!(DensityOp::new(l.clone(), not_unit), Err(QuantumError::NotDensity(_))));
        // The unnormalized wrapper records what it sees instead.
        let wrapped = DensityOp::new_unnormalized(l, not_herm).unwrap();
        assert!(!wrapped.is_hermitian());
        assert_relative_eq!(wrapped.trace().re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cptp_maps_must_preserve_trace() {
        let x = pauli_x();
        let map = CPTPMap::new(vec![x.clone()]).unwrap();
        assert!(map.trace_preservation_deviation() <= 1e-12);
        let err = CPTPMap::new(vec![x * Complex64::new(0.5, 0.0)]).unwrap_err();
        assert!(matches!(err, QuantumError::NotTracePreserving { deviation } if deviation > 0.5));
    }

    #[test]
    fn random_maps_are_trace_preserving() {
        let mut rng = ChaCha20Rng::seed_from_u64(80);
        for _ in 0..10 {
            let map = CPTPMap::random(4, 4, &mut rng);
            assert!(map.trace_preservation_deviation() <= 1e-10);
        }
    }

    #[test]
    fn partial_trace_examples() {
        let mut rng = ChaCha20Rng::seed_from_u64(81);
        // Keeping everything is the identity operation.
        let l = qubit_layout(2);
        let rho = DensityOp::new(l.clone(), random_density(4, &mut rng)).unwrap();
        let same = rho.partial_trace(&["q0", "q1"]).unwrap();
        assert_relative_eq!((same.matrix() - rho.matrix()).norm(), 0.0, epsilon = 1e-12);
        // Bell pair reduces to the maximally mixed qubit.
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let bell = QState::from_amps(
            l.clone(),
            vec![
                Complex64::new(r, 0.0),
                Complex64::ZERO,
                Complex64::ZERO,
                Complex64::new(r, 0.0),
            ],
        )
        .unwrap();
        let reduced = DensityOp::from_state(&bell).partial_trace(&["q1"]).unwrap();
        let mixed = DMatrix::identity(2, 2) * Complex64::new(0.5, 0.0);
        let l1 = qubit_layout(1);
        let mixed_op = DensityOp::new(
            RegisterLayout::new(&[("q1", 2)]).unwrap(),
            mixed.clone(),
        )
        .unwrap();
        assert!(trace_distance(&reduced, &mixed_op).unwrap() <= 1e-12);
        // Product state: tracing the second factor recovers the first.
        let rho_a = random_density(2, &mut rng);
        let rho_b = random_density(2, &mut rng);
        let prod = DensityOp::new(l, rho_a.kronecker(&rho_b)).unwrap();
        let back = prod.partial_trace(&["q0"]).unwrap();
        let target = DensityOp::new(l1, rho_a).unwrap();
        assert!(trace_distance(&back, &target).unwrap() <= 1e-12);
        // Unknown names are rejected.
        assert!(matches!(prod.partial_trace(&["nope"]), Err(QuantumError::BadAxis(_))));
    }

    #[test]
    fn partial_trace_preserves_trace_and_hermiticity() {
        let mut rng = ChaCha20Rng::seed_from_u64(82);
        let l = RegisterLayout::new(&[("a", 2), ("b", 3), ("c", 2)]).unwrap();
        let rho = DensityOp::new(l, random_density(12, &mut rng)).unwrap();
        let reduced = rho.partial_trace(&["b"]).unwrap();
        assert_relative_eq!(reduced.trace().re, 1.0, epsilon = 1e-10);
        assert!(is_hermitian(reduced.matrix(), 1e-10));
        assert_eq!(reduced.layout().total_dim(), 3);
    }

    #[test]
    fn measurement_distribution_matches_pure_state_path() {
        let mut rng = ChaCha20Rng::seed_from_u64(83);
        let l = qubit_layout(2);
        let amps: Vec<Complex64> = (0..4)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let state = QState::from_amps_normalized(l, amps).unwrap();
        let rho = DensityOp::from_state(&state);
        for bases in [
            [MeasBasis::Standard, MeasBasis::Standard],
            [MeasBasis::Standard, MeasBasis::Hadamard],
            [MeasBasis::Hadamard, MeasBasis::Hadamard],
        ] {
            let sel = [(0, bases[0]), (1, bases[1])];
            let from_state = state.measurement_distribution(&sel).unwrap();
            let from_rho = rho.measurement_distribution(&sel).unwrap();
            for (a, b) in from_state.iter().zip(&from_rho) {
                assert_relative_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn pauli_blocks_reconstruct_the_operator() {
        let mut rng = ChaCha20Rng::seed_from_u64(84);
        for _ in 0..20 {
            let k = DMatrix::from_fn(8, 8, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let blocks = pauli_block_decompose(&k).unwrap();
            let back = pauli_block_reconstruct(&blocks);
            assert!((&back - &k).norm() <= 1e-12);
            // Cross-check against explicit Pauli kroneckers.
            let rebuilt = DMatrix::<Complex64>::identity(2, 2).kronecker(&blocks[0])
                + pauli_z().kronecker(&blocks[1])
                + pauli_x().kronecker(&blocks[2])
                + pauli_xz().kronecker(&blocks[3]);
            assert!((&rebuilt - &k).norm() <= 1e-12);
        }
    }

    #[test]
    fn twirl_families_stay_trace_preserving() {
        let mut rng = ChaCha20Rng::seed_from_u64(85);
        let map = CPTPMap::random(4, 4, &mut rng);
        let (twirled, diagonal) = z_twirl_families(&map).unwrap();
        for family in [twirled, diagonal] {
            let rebuilt = CPTPMap::new(family).unwrap();
            assert!(rebuilt.trace_preservation_deviation() <= 1e-10);
        }
    }

    #[test]
    fn twirl_is_exact_for_identity_and_x() {
        let mut rng = ChaCha20Rng::seed_from_u64(86);
        let eye = CPTPMap::new(vec![DMatrix::identity(4, 4)]).unwrap();
        assert!(z_twirl_check(&eye, 5, &mut rng).unwrap() <= 1e-12);
        let x_i = CPTPMap::new(vec![pauli_x().kronecker(&DMatrix::identity(2, 2))]).unwrap();
        assert!(z_twirl_check(&x_i, 5, &mut rng).unwrap() <= 1e-12);
    }

    #[test]
    fn twirl_holds_for_random_two_qubit_maps() {
        let mut rng = ChaCha20Rng::seed_from_u64(87);
        let mut max_dev = 0.0f64;
        for _ in 0..20 {
            let map = CPTPMap::random(4, 4, &mut rng);
            max_dev = max_dev.max(z_twirl_check(&map, 3, &mut rng).unwrap());
        }
        assert!(max_dev <= 1e-9, "max deviation {max_dev}");
    }
}
