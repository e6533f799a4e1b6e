//! The prover's commitment subroutine and round measurements.
//!
//! `samp_commit` runs the committing unitary exactly: starting from a
//! one-qubit input `α_0|0⟩ + α_1|1⟩`, it forms the joint state
//!
//! ```text
//! (1/√|X|) · Σ_{b,x,y} α_b · √(f'_{k,b}(x)(y)) · |b⟩|x⟩|y⟩
//! ```
//!
//! and measures the commitment register `y`. The `y` register (dimension
//! `q^m`) is never materialized: its coordinates are sampled sequentially
//! from exact conditionals over the `2·q^n` surviving `(b, x)` weights,
//! which reproduces the joint marginal exactly (chain rule). The committing
//! circuit reads only the public key, so claw-free and injective keys flow
//! through the identical code path; the character of the post-measurement
//! state (two-term superposition vs. collapsed product) is decided entirely
//! by whether the branch supports overlap.

use num_complex::Complex64;
use rand::Rng;

use crate::error::QuantumError;
use crate::lattice::{GaussDensity, Params, ZqVector};
use crate::quantum::state::{sample_index, MeasBasis, QState, RegisterLayout, AMP_BUDGET};
use crate::tcf::{j_map, PublicKey};

/// Register name for the committed qubit.
pub const REG_COMMITTED: &str = "committed";
/// Register name for the preimage register (dim `q^n`, or `2^w` after the
/// bit relabeling).
pub const REG_PREIMAGE: &str = "preimage";

/// Flat index of a preimage vector: coordinate 0 is the least significant
/// base-`q` digit.
pub fn x_index(x: &ZqVector) -> usize {
    let mut idx = 0usize;
    for i in (0..x.len()).rev() {
        idx = idx * x.q() as usize + x.get(i) as usize;
    }
    idx
}

/// Inverse of [`x_index`].
pub fn x_from_index(mut idx: usize, q: u64, n: usize) -> ZqVector {
    let mut vals = Vec::with_capacity(n);
    for _ in 0..n {
        vals.push((idx % q as usize) as u64);
        idx /= q as usize;
    }
    ZqVector::new(q, vals)
}

fn lat_err(e: crate::error::LatticeError) -> QuantumError {
    QuantumError::Dimension(e.to_string())
}

fn tcf_err(e: crate::error::TcfError) -> QuantumError {
    QuantumError::BadAxis(e.to_string())
}

/// Checks the `2·q^n` amplitude budget and returns `q^n` as a usize.
fn preimage_dim(params: &Params) -> Result<usize, QuantumError> {
    let qn = (params.q as u128)
        .checked_pow(params.n as u32)
        .unwrap_or(u128::MAX);
    let requested = qn.saturating_mul(2);
    if requested > AMP_BUDGET {
        return Err(QuantumError::BudgetExceeded { requested, budget: AMP_BUDGET });
    }
    Ok(qn as usize)
}

/// Published-density centers `A·x + b·shift` for all `(b, x)`, indexed by
/// `b * q^n + x_index(x)`.
fn branch_centers(params: &Params, key: &PublicKey) -> Result<Vec<ZqVector>, QuantumError> {
    let qn = preimage_dim(params)?;
    let mut centers = Vec::with_capacity(2 * qn);
    for b in 0..2u64 {
        for idx in 0..qn {
            let x = x_from_index(idx, params.q, params.n);
            let ax = key.a.mul_vec(&x).map_err(lat_err)?;
            let c = if b == 0 { ax } else { ax.add(&key.shift).map_err(lat_err)? };
            centers.push(c);
        }
    }
    Ok(centers)
}

fn committed_alphas(input: &QState) -> Result<(Complex64, Complex64), QuantumError> {
    if input.layout().num_registers() != 1 || input.layout().dim(0) != 2 {
        return Err(QuantumError::Dimension(format!(
            "commit input must be a single qubit, got dims {:?}",
            input.layout().dims()
        )));
    }
    Ok((input.amps()[0], input.amps()[1]))
}

/// Runs the commitment: entangles the input qubit with a uniform preimage
/// superposition under the published densities, measures the commitment
/// string `y`, and returns the collapsed `(committed, preimage)` state
/// together with `y`.
pub fn samp_commit<R: Rng + ?Sized>(
    params: &Params,
    key: &PublicKey,
    input: &QState,
    rng: &mut R,
) -> Result<(QState, ZqVector), QuantumError> {
    let (a0, a1) = committed_alphas(input)?;
    let qn = preimage_dim(params)?;
    let centers = branch_centers(params, key)?;
    let dens = GaussDensity::new(params.q, params.b_p).map_err(lat_err)?;
    let q = params.q;

    // Weight of each (b, x): |α_b|² / q^n times the density mass consistent
    // with the y coordinates fixed so far. Entries that hit zero stay zero.
    let base = 1.0 / qn as f64;
    let mut weights: Vec<f64> = Vec::with_capacity(2 * qn);
    weights.extend(std::iter::repeat(a0.norm_sqr() * base).take(qn));
    weights.extend(std::iter::repeat(a1.norm_sqr() * base).take(qn));

    let mut y_vals = Vec::with_capacity(params.m);
    for coord in 0..params.m {
        let mut table = vec![0.0f64; q as usize];
        for (idx, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let c = centers[idx].get(coord);
            for (v, cell) in table.iter_mut().enumerate() {
                *cell += w * dens.prob((v as u64 + q - c) % q);
            }
        }
        let v = sample_index(&table, rng) as u64;
        y_vals.push(v);
        for (idx, w) in weights.iter_mut().enumerate() {
            if *w != 0.0 {
                *w *= dens.prob((v + q - centers[idx].get(coord)) % q);
            }
        }
    }
    let y = ZqVector::new(q, y_vals);

    // Post-measurement amplitudes: α_b · √(∏_i D(y_i − c_i)), renormalized.
    let layout = RegisterLayout::new(&[(REG_COMMITTED, 2), (REG_PREIMAGE, qn)])?;
    let mut amps = vec![Complex64::ZERO; 2 * qn];
    for (idx, amp) in amps.iter_mut().enumerate() {
        let alpha = if idx < qn { a0 } else { a1 };
        if alpha == Complex64::ZERO {
            continue;
        }
        let residual = y.sub(&centers[idx]).map_err(lat_err)?;
        *amp = alpha * dens.prob_vec(&residual).sqrt();
    }
    let state = QState::from_amps_normalized(layout, amps)?;
    Ok((state, y))
}

/// Commits one qubit register of a larger (possibly entangled) state:
/// entangles it with a fresh preimage register under the published densities
/// for `key`, measures the commitment string, and returns the collapsed
/// state (new register appended under `preimage_name`) together with `y`.
/// Identical to [`samp_commit`] when the state is that single qubit.
pub fn commit_qubit<R: Rng + ?Sized>(
    params: &Params,
    key: &PublicKey,
    state: &QState,
    qubit: usize,
    preimage_name: &str,
    rng: &mut R,
) -> Result<(QState, ZqVector), QuantumError> {
    if state.layout().dim(qubit) != 2 {
        return Err(QuantumError::Dimension(format!(
            "committed register must be a qubit, got dim {}",
            state.layout().dim(qubit)
        )));
    }
    let qn = preimage_dim(params)?;
    let centers = branch_centers(params, key)?;
    let dens = GaussDensity::new(params.q, params.b_p).map_err(lat_err)?;
    let q = params.q;
    let marginal = state.register_distribution(qubit)?;

    let base = 1.0 / qn as f64;
    let mut weights: Vec<f64> = Vec::with_capacity(2 * qn);
    weights.extend(std::iter::repeat(marginal[0] * base).take(qn));
    weights.extend(std::iter::repeat(marginal[1] * base).take(qn));

    let mut y_vals = Vec::with_capacity(params.m);
    for coord in 0..params.m {
        let mut table = vec![0.0f64; q as usize];
        for (idx, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let c = centers[idx].get(coord);
            for (v, cell) in table.iter_mut().enumerate() {
                *cell += w * dens.prob((v as u64 + q - c) % q);
            }
        }
        let v = sample_index(&table, rng) as u64;
        y_vals.push(v);
        for (idx, w) in weights.iter_mut().enumerate() {
            if *w != 0.0 {
                *w *= dens.prob((v + q - centers[idx].get(coord)) % q);
            }
        }
    }
    let y = ZqVector::new(q, y_vals);

    // Amplitude factor √(∏_i D(y_i − c_i)) per (branch, preimage) pair.
    let mut factors = vec![vec![Complex64::ZERO; qn], vec![Complex64::ZERO; qn]];
    for b in 0..2usize {
        for v in 0..qn {
            let residual = y.sub(&centers[b * qn + v]).map_err(lat_err)?;
            factors[b][v] = Complex64::new(dens.prob_vec(&residual).sqrt(), 0.0);
        }
    }
    let appended = state.append_register_factored(qubit, preimage_name, &factors)?;
    Ok((appended.renormalized()?, y))
}

/// Probability that the commitment measurement yields `y`, computed from
/// the analytic mixture `Σ_b |α_b|² · (1/q^n) · Σ_x ∏_i D(y_i − c_i(b,x))`.
pub fn commit_y_probability_mixture(
    params: &Params,
    key: &PublicKey,
    alpha: (Complex64, Complex64),
    y: &ZqVector,
) -> Result<f64, QuantumError> {
    let qn = preimage_dim(params)?;
    let centers = branch_centers(params, key)?;
    let dens = GaussDensity::new(params.q, params.b_p).map_err(lat_err)?;
    let mut total = 0.0;
    for (idx, c) in centers.iter().enumerate() {
        let w = if idx < qn { alpha.0.norm_sqr() } else { alpha.1.norm_sqr() };
        if w == 0.0 {
            continue;
        }
        total += w * dens.prob_vec(&y.sub(c).map_err(lat_err)?);
    }
    Ok(total / qn as f64)
}

/// Probability that the sequential sampler in [`samp_commit`] yields `y`:
/// the product of per-coordinate conditionals, each normalized explicitly.
/// Must agree with [`commit_y_probability_mixture`] by the chain rule.
pub fn commit_y_probability_chain(
    params: &Params,
    key: &PublicKey,
    alpha: (Complex64, Complex64),
    y: &ZqVector,
) -> Result<f64, QuantumError> {
    let qn = preimage_dim(params)?;
    let centers = branch_centers(params, key)?;
    let dens = GaussDensity::new(params.q, params.b_p).map_err(lat_err)?;
    let q = params.q;
    let base = 1.0 / qn as f64;
    let mut weights: Vec<f64> = Vec::with_capacity(2 * qn);
    weights.extend(std::iter::repeat(alpha.0.norm_sqr() * base).take(qn));
    weights.extend(std::iter::repeat(alpha.1.norm_sqr() * base).take(qn));
    let mut prob = 1.0;
    for coord in 0..params.m {
        let mut table = vec![0.0f64; q as usize];
        for (idx, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let c = centers[idx].get(coord);
            for (v, cell) in table.iter_mut().enumerate() {
                *cell += w * dens.prob((v as u64 + q - c) % q);
            }
        }
        let total: f64 = table.iter().sum();
        if total == 0.0 {
            return Ok(0.0);
        }
        prob *= table[y.get(coord) as usize] / total;
        if prob == 0.0 {
            return Ok(0.0);
        }
        for (idx, w) in weights.iter_mut().enumerate() {
            if *w != 0.0 {
                *w *= dens.prob((y.get(coord) + q - centers[idx].get(coord)) % q);
            }
        }
    }
    // The chain conditionals multiply against the initial total weight,
    // which is Σ_b |α_b|² = 1 for a normalized input.
    Ok(prob)
}

/// Full distribution of the commitment string over all `q^m` values.
/// Only for tiny fixtures: errors when `q^m` exceeds the amplitude budget.
pub fn commit_y_distribution(
    params: &Params,
    key: &PublicKey,
    alpha: (Complex64, Complex64),
) -> Result<Vec<f64>, QuantumError> {
    let qm = (params.q as u128)
        .checked_pow(params.m as u32)
        .unwrap_or(u128::MAX);
    if qm > AMP_BUDGET {
        return Err(QuantumError::BudgetExceeded { requested: qm, budget: AMP_BUDGET });
    }
    let mut probs = Vec::with_capacity(qm as usize);
    for flat in 0..qm as usize {
        let y = x_from_index(flat, params.q, params.m);
        probs.push(commit_y_probability_mixture(params, key, alpha, &y)?);
    }
    Ok(probs)
}

/// Relabels the preimage register from `Z_q^n` indexing (dim `q^n`) into
/// bit indexing (dim `2^w`) through the injective bit encoding. Non-image
/// bit patterns keep amplitude zero, so this is an isometry.
pub fn apply_u_j(params: &Params, state: &QState) -> Result<QState, QuantumError> {
    let reg = state.layout().index_of(REG_PREIMAGE)?;
    apply_u_j_at(params, state, reg)
}

/// [`apply_u_j`] for a preimage register addressed by index, for states
/// carrying several commitments.
pub fn apply_u_j_at(params: &Params, state: &QState, reg: usize) -> Result<QState, QuantumError> {
    let qn = state.layout().dim(reg);
    let kappa = params.kappa();
    if params.w > 60 {
        return Err(QuantumError::BadAxis(format!(
            "bit register of {} qubits does not fit a dense state",
            params.w
        )));
    }
    let mut map = Vec::with_capacity(qn);
    for idx in 0..qn {
        let x = x_from_index(idx, params.q, params.n);
        map.push(j_map(&x, kappa).map_err(tcf_err)? as usize);
    }
    state.relabel_register(reg, &map, 1 << params.w)
}

/// Hadamard round: applies `H^{⊗(w+1)}` to the committed qubit and the
/// bit-indexed preimage register, then measures both from the exact joint
/// marginal. Returns `(b', d, collapsed state)`.
pub fn hadamard_round_measure<R: Rng + ?Sized>(
    state: &QState,
    rng: &mut R,
) -> Result<(u8, u64, QState), QuantumError> {
    let qubit = state.layout().index_of(REG_COMMITTED)?;
    let preimage = state.layout().index_of(REG_PREIMAGE)?;
    let rotated = state.fwht_register(qubit)?.fwht_register(preimage)?;
    let (outs, collapsed) = rotated.measure_registers(&[qubit, preimage], rng)?;
    Ok((outs[0] as u8, outs[1] as u64, collapsed))
}

/// Test round: measures the committed qubit and the preimage register in
/// the standard basis. Returns `(b, x, collapsed state)`; the preimage
/// register must still be in `Z_q^n` indexing.
pub fn test_round_measure<R: Rng + ?Sized>(
    params: &Params,
    state: &QState,
    rng: &mut R,
) -> Result<(u8, ZqVector, QState), QuantumError> {
    let qubit = state.layout().index_of(REG_COMMITTED)?;
    let preimage = state.layout().index_of(REG_PREIMAGE)?;
    let (outs, collapsed) = state.measure_registers(&[qubit, preimage], rng)?;
    Ok((outs[0] as u8, x_from_index(outs[1], params.q, params.n), collapsed))
}

/// Exact joint `(b', d)` distribution of the Hadamard round, flat-indexed
/// as `b' * 2^w + d`.
pub fn hadamard_round_distribution(state: &QState) -> Result<Vec<f64>, QuantumError> {
    let qubit = state.layout().index_of(REG_COMMITTED)?;
    let preimage = state.layout().index_of(REG_PREIMAGE)?;
    state.measurement_distribution(&[(qubit, MeasBasis::Hadamard), (preimage, MeasBasis::Hadamard)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ZqMatrix;
    use crate::tcf::{chk, dot_bits, gen_f_with, gen_g, inv_g, NoiseModel};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn qubit(a0: Complex64, a1: Complex64) -> QState {
        let layout = RegisterLayout::new(&[(REG_COMMITTED, 2)]).unwrap();
        QState::from_amps(layout, vec![a0, a1]).unwrap()
    }

    fn plus() -> QState {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        qubit(c(r, 0.0), c(r, 0.0))
    }

    fn zero() -> QState {
        qubit(c(1.0, 0.0), c(0.0, 0.0))
    }

    /// Hand-built sub-scale claw-free key over q = 5, n = 1, m = 2 with
    /// zero key noise and secret s = (1): small enough to enumerate the
    /// whole commitment-string distribution.
    fn tiny_fixture() -> (Params, PublicKey, ZqVector) {
        let params = Params::new_unchecked(8, 1, 1, 2, 5, 1, 1, 1, 1.0);
        let a = ZqMatrix::new(5, 2, 1, vec![1, 3]).unwrap();
        let s = ZqVector::new(5, vec![1]);
        let shift = a.mul_vec(&s).unwrap();
        (params, PublicKey { a, shift }, s)
    }

    fn nonzero_components(state: &QState, tol: f64) -> Vec<(usize, f64)> {
        state
            .amps()
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > tol)
            .map(|(i, a)| (i, a.norm()))
            .collect()
    }

    #[test]
    fn x_index_round_trips() {
        let q = 5;
        for idx in 0..125 {
            let x = x_from_index(idx, q, 3);
            assert_eq!(x_index(&x), idx);
        }
        // Coordinate 0 is the least significant digit.
        assert_eq!(x_index(&ZqVector::new(5, vec![2, 1, 3])), 2 + 5 + 75);
    }

    #[test]
    fn injective_commit_of_zero_collapses_to_a_product() {
        let params = Params::toy();
        let mut rng = ChaCha20Rng::seed_from_u64(64);
        let (key, td) = gen_g(&params, &mut rng).unwrap();
        for _ in 0..20 {
            let (state, y) = samp_commit(&params, &key, &zero(), &mut rng).unwrap();
            let comps = nonzero_components(&state, 1e-12);
            assert_eq!(comps.len(), 1, "injective keys collapse to one component");
            let (flat, mag) = comps[0];
            assert_relative_eq!(mag, 1.0, epsilon = 1e-12);
            let qn = state.layout().dim(1);
            assert!(flat < qn, "input |0> can only land on branch 0");
            let x = x_from_index(flat % qn, params.q, params.n);
            let (b, x_dec) = inv_g(&key, &td, &y).unwrap();
            assert_eq!(b, 0);
            assert_eq!(x_dec, x);
            assert!(chk(&key, params.b_p, 0, &x, &y).unwrap());
        }
    }

    #[test]
    fn injective_commit_of_plus_splits_branches_by_born_rule() {
        let params = Params::toy();
        let mut rng = ChaCha20Rng::seed_from_u64(65);
        let (key, td) = gen_g(&params, &mut rng).unwrap();
        let input = plus();
        let trials = 10_000usize;
        let mut zeros = 0usize;
        for _ in 0..trials {
            let (_, y) = samp_commit(&params, &key, &input, &mut rng).unwrap();
            let (b, _) = inv_g(&key, &td, &y).unwrap();
            if b == 0 {
                zeros += 1;
            }
        }
        // Born rule: P(b=0) = 1/2; allow 3 sigma = 3·√(N/4) = 150.
        let dev = (zeros as f64 - trials as f64 / 2.0).abs();
        assert!(dev <= 150.0, "branch frequency {zeros}/{trials} deviates by {dev}");
    }

    #[test]
    fn clawfree_commit_of_plus_has_exactly_two_equal_components() {
        let params = Params::toy();
        let mut rng = ChaCha20Rng::seed_from_u64(66);
        let (key, td) = gen_f_with(&params, NoiseModel::Zero, &mut rng).unwrap();
        let qn = params.q as usize;
        for _ in 0..50 {
            let (state, y) = samp_commit(&params, &key, &plus(), &mut rng).unwrap();
            let comps = nonzero_components(&state, 1e-12);
            assert_eq!(comps.len(), 2, "claw-free commits keep both branches");
            let (f0, m0) = comps[0];
            let (f1, m1) = comps[1];
            assert!(f0 < qn && f1 >= qn, "one component per branch");
            assert!((m0 - m1).abs() <= 1e-9, "zero key noise gives equal magnitudes");
            let x0 = x_from_index(f0, params.q, params.n);
            let x1 = x_from_index(f1 - qn, params.q, params.n);
            assert_eq!(x0.sub(&x1).unwrap(), td.s, "components form a claw");
            assert!(chk(&key, params.b_p, 0, &x0, &y).unwrap());
            assert!(chk(&key, params.b_p, 1, &x1, &y).unwrap());
        }
    }

    #[test]
    fn noisy_clawfree_magnitudes_follow_the_density_ratio() {
        let params = Params::toy();
        let mut rng = ChaCha20Rng::seed_from_u64(67);
        let (key, td) = gen_f_with(&params, NoiseModel::GaussianBv, &mut rng).unwrap();
        let dens = GaussDensity::new(params.q, params.b_p).unwrap();
        let qn = params.q as usize;
        let mut both = 0usize;
        let mut single = 0usize;
        for _ in 0..100 {
            let (state, y) = samp_commit(&params, &key, &plus(), &mut rng).unwrap();
            let comps = nonzero_components(&state, 1e-12);
            match comps.len() {
                1 => single += 1,
                2 => {
                    both += 1;
                    let (f0, m0) = comps[0];
                    let (f1, m1) = comps[1];
                    let x0 = x_from_index(f0, params.q, params.n);
                    let x1 = x_from_index(f1 - qn, params.q, params.n);
                    let c0 = key.a.mul_vec(&x0).unwrap();
                    let c1 = key.a.mul_vec(&x1).unwrap().add(&key.shift).unwrap();
                    let d0 = dens.prob_vec(&y.sub(&c0).unwrap());
                    let d1 = dens.prob_vec(&y.sub(&c1).unwrap());
                    assert_relative_eq!(m0 * m0 / (m1 * m1), d0 / d1, epsilon = 1e-9);
                    // Still a claw even with key noise.
                    assert_eq!(x0.sub(&x1).unwrap(), td.s);
                }
                k => panic!("unexpected component count {k}"),
            }
        }
        assert_eq!(both + single, 100);
        assert!(both > 0, "two-component outcomes must occur");
    }

    #[test]
    fn sampler_chain_matches_the_analytic_mixture() {
        let params = Params::toy();
        let mut rng = ChaCha20Rng::seed_from_u64(68);
        let (key, _) = gen_f_with(&params, NoiseModel::GaussianBv, &mut rng).unwrap();
        let alpha = (c(0.6, 0.0), c(0.0, 0.8));
        let input = qubit(alpha.0, alpha.1);
        // On sampled commitment strings (always nonzero probability)...
        for _ in 0..50 {
            let (_, y) = samp_commit(&params, &key, &input, &mut rng).unwrap();
            let chain = commit_y_probability_chain(&params, &key, alpha, &y).unwrap();
            let mixture = commit_y_probability_mixture(&params, &key, alpha, &y).unwrap();
            assert!(mixture > 0.0);
            assert_relative_eq!(chain, mixture, max_relative = 1e-12);
        }
        // ...and on uniform strings, including zero-probability ones.
        for _ in 0..50 {
            let y = ZqVector::uniform(params.q, params.m, &mut rng);
            let chain = commit_y_probability_chain(&params, &key, alpha, &y).unwrap();
            let mixture = commit_y_probability_mixture(&params, &key, alpha, &y).unwrap();
            if mixture == 0.0 {
                assert_eq!(chain, 0.0);
            } else {
                assert_relative_eq!(chain, mixture, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn tiny_fixture_distribution_is_exact_and_matched_by_sampling() {
        let (params, key, _) = tiny_fixture();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let alpha = (c(r, 0.0), c(r, 0.0));
        let dist = commit_y_distribution(&params, &key, alpha).unwrap();
        assert_eq!(dist.len(), 25);
        let total: f64 = dist.iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        for (flat, &p) in dist.iter().enumerate() {
            let y = x_from_index(flat, params.q, params.m);
            let chain = commit_y_probability_chain(&params, &key, alpha, &y).unwrap();
            assert_relative_eq!(chain, p, epsilon = 1e-13);
        }
        // Empirical frequencies of the sequential sampler converge to the
        // same distribution.
        let mut rng = ChaCha20Rng::seed_from_u64(69);
        let input = qubit(alpha.0, alpha.1);
        let trials = 20_000usize;
        let mut counts = vec![0usize; 25];
        for _ in 0..trials {
            let (_, y) = samp_commit(&params, &key, &input, &mut rng).unwrap();
            counts[x_index(&y)] += 1;
        }
        let tv: f64 = dist
            .iter()
            .zip(&counts)
            .map(|(&p, &n)| (p - n as f64 / trials as f64).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.05, "empirical TV {tv} too large");
    }

    #[test]
    fn budget_is_enforced_before_allocation() {
        let params = Params::new_unchecked(8, 1, 9, 4, 83, 2, 4, 8, 1.0);
        let key_params = Params::toy();
        let mut rng = ChaCha20Rng::seed_from_u64(70);
        let (key, _) = gen_f_with(&key_params, NoiseModel::Zero, &mut rng).unwrap();
        let err = samp_commit(&params, &key, &zero(), &mut rng).unwrap_err();
        assert!(matches!(err, QuantumError::BudgetExceeded { .. }));
    }

    #[test]
    fn u_j_relabels_every_preimage_and_is_invertible_on_its_image() {
        let (params, _, _) = tiny_fixture();
        let kappa = params.kappa();
        let qn = params.q as usize;
        let w_dim = 1usize << params.w;
        for idx in 0..qn {
            let layout =
                RegisterLayout::new(&[(REG_COMMITTED, 2), (REG_PREIMAGE, qn)]).unwrap();
            let state = QState::basis_state(layout, &[1, idx]).unwrap();
            let mapped = apply_u_j(&params, &state).unwrap();
            assert_relative_eq!(mapped.norm2(), 1.0, epsilon = 1e-12);
            let x = x_from_index(idx, params.q, params.n);
            let j = j_map(&x, kappa).unwrap() as usize;
            assert_eq!(mapped.amps()[w_dim + j], c(1.0, 0.0));
        }
        // Round trip: send each image point back to its preimage index and
        // park the non-image bit patterns on the leftover indices.
        let layout = RegisterLayout::new(&[(REG_COMMITTED, 2), (REG_PREIMAGE, qn)]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(71);
        let amps: Vec<Complex64> = (0..2 * qn)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let state = QState::from_amps_normalized(layout, amps).unwrap();
        let mapped = apply_u_j(&params, &state).unwrap();
        let mut back = vec![usize::MAX; w_dim];
        for idx in 0..qn {
            let x = x_from_index(idx, params.q, params.n);
            back[j_map(&x, kappa).unwrap() as usize] = idx;
        }
        let mut spare = qn..w_dim;
        for slot in back.iter_mut() {
            if *slot == usize::MAX {
                *slot = spare.next().unwrap();
            }
        }
        let restored = mapped.relabel_register(1, &back, w_dim).unwrap();
        for idx in 0..qn {
            for b in 0..2 {
                let orig = state.amps()[b * qn + idx];
                let got = restored.amps()[b * w_dim + idx];
                assert_relative_eq!(orig.re, got.re, epsilon = 1e-12);
                assert_relative_eq!(orig.im, got.im, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_basis_commit_gives_uniform_hadamard_outcomes() {
        // An injective-style collapsed commitment |b⟩|J(x)⟩ is a basis
        // state, so both Hadamard marginals are exactly uniform.
        let (params, _, _) = tiny_fixture();
        let w_dim = 1usize << params.w;
        let layout = RegisterLayout::new(&[(REG_COMMITTED, 2), (REG_PREIMAGE, w_dim)]).unwrap();
        let state = QState::basis_state(layout.clone(), &[1, 5]).unwrap();
        let dist = hadamard_round_distribution(&state).unwrap();
        for &p in &dist {
            assert_relative_eq!(p, 1.0 / (2.0 * w_dim as f64), epsilon = 1e-12);
        }
        // A phase-0 superposition on the qubit with a shared preimage
        // instead pins b' = 0 while d stays uniform.
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![Complex64::ZERO; 2 * w_dim];
        amps[5] = c(r, 0.0);
        amps[w_dim + 5] = c(r, 0.0);
        let shared = QState::from_amps(layout, amps).unwrap();
        let dist = hadamard_round_distribution(&shared).unwrap();
        for (flat, &p) in dist.iter().enumerate() {
            if flat < w_dim {
                assert_relative_eq!(p, 1.0 / w_dim as f64, epsilon = 1e-12);
            } else {
                assert!(p.abs() < 1e-15, "b' = 1 must never appear");
            }
        }
    }

    #[test]
    fn true_claw_always_decodes_to_zero() {
        let params = Params::toy();
        let mut rng = ChaCha20Rng::seed_from_u64(72);
        let (key, _) = gen_f_with(&params, NoiseModel::Zero, &mut rng).unwrap();
        let (state, _) = samp_commit(&params, &key, &plus(), &mut rng).unwrap();
        let comps = nonzero_components(&state, 1e-12);
        assert_eq!(comps.len(), 2);
        let qn = params.q as usize;
        let j0 = j_map(&x_from_index(comps[0].0, params.q, params.n), params.kappa()).unwrap();
        let j1 =
            j_map(&x_from_index(comps[1].0 - qn, params.q, params.n), params.kappa()).unwrap();
        let delta = j0 ^ j1;
        let mapped = apply_u_j(&params, &state).unwrap();
        // Exact joint distribution: outcomes violating b' = d·ΔJ carry no
        // probability at all.
        let dist = hadamard_round_distribution(&mapped).unwrap();
        let w_dim = 1usize << params.w;
        let mut violating = 0.0;
        for (flat, &p) in dist.iter().enumerate() {
            let bprime = (flat / w_dim) as u8;
            let d = (flat % w_dim) as u64;
            if bprime != dot_bits(d, delta) {
                violating += p;
            }
        }
        assert!(violating <= 1e-12, "violating mass {violating}");
        // And sampled rounds satisfy the relation every time.
        for _ in 0..200 {
            let (bprime, d, _) = hadamard_round_measure(&mapped, &mut rng).unwrap();
            assert_eq!(bprime, dot_bits(d, delta));
        }
    }

    #[test]
    fn decoded_bit_matches_the_input_hadamard_distribution() {
        let params = Params::toy();
        let mut rng = ChaCha20Rng::seed_from_u64(73);
        let (key, _) = gen_f_with(&params, NoiseModel::Zero, &mut rng).unwrap();
        let qn = params.q as usize;
        let w_dim = 1usize << params.w;
        for trial in 0..5 {
            let a0 = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let a1 = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let norm = (a0.norm_sqr() + a1.norm_sqr()).sqrt();
            let (a0, a1) = (a0 / norm, a1 / norm);
            let (state, _) = samp_commit(&params, &key, &qubit(a0, a1), &mut rng).unwrap();
            let comps = nonzero_components(&state, 1e-12);
            assert_eq!(comps.len(), 2, "trial {trial}");
            let j0 =
                j_map(&x_from_index(comps[0].0, params.q, params.n), params.kappa()).unwrap();
            let j1 = j_map(&x_from_index(comps[1].0 - qn, params.q, params.n), params.kappa())
                .unwrap();
            let delta = j0 ^ j1;
            let mapped = apply_u_j(&params, &state).unwrap();
            let dist = hadamard_round_distribution(&mapped).unwrap();
            let mut decoded = [0.0f64; 2];
            for (flat, &p) in dist.iter().enumerate() {
                let bprime = (flat / w_dim) as u8;
                let d = (flat % w_dim) as u64;
                decoded[(bprime ^ dot_bits(d, delta)) as usize] += p;
            }
            let expect0 = (a0 + a1).norm_sqr() / 2.0;
            let expect1 = (a0 - a1).norm_sqr() / 2.0;
            assert_relative_eq!(decoded[0], expect0, epsilon = 1e-9);
            assert_relative_eq!(decoded[1], expect1, epsilon = 1e-9);
        }
    }

    #[test]
    fn d_is_uniform_once_the_qubit_is_measured_out() {
        let params = Params::toy();
        let mut rng = ChaCha20Rng::seed_from_u64(74);
        let (key, _) = gen_f_with(&params, NoiseModel::Zero, &mut rng).unwrap();
        let (state, _) = samp_commit(&params, &key, &plus(), &mut rng).unwrap();
        let mapped = apply_u_j(&params, &state).unwrap();
        let (_, collapsed) = mapped.measure_register(0, &mut rng).unwrap();
        let rotated = collapsed.fwht_register(1).unwrap();
        let w_dim = 1usize << params.w;
        let trials = 10_000usize;
        let mut counts = vec![0usize; w_dim];
        for _ in 0..trials {
            let (d, _) = rotated.measure_register(1, &mut rng).unwrap();
            counts[d] += 1;
        }
        let expected = trials as f64 / w_dim as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&n| {
                let dev = n as f64 - expected;
                dev * dev / expected
            })
            .sum();
        // 1% upper critical value of chi-squared with 127 degrees of
        // freedom is about 167.
        assert!(chi2 < 167.0, "chi2 = {chi2}");
    }

    #[test]
    fn test_round_measures_a_checkable_preimage() {
        let params = Params::toy();
        let mut rng = ChaCha20Rng::seed_from_u64(75);
        let (key, _) = gen_f_with(&params, NoiseModel::Zero, &mut rng).unwrap();
        for _ in 0..50 {
            let (state, y) = samp_commit(&params, &key, &plus(), &mut rng).unwrap();
            let (b, x, _) = test_round_measure(&params, &state, &mut rng).unwrap();
            assert!(chk(&key, params.b_p, b, &x, &y).unwrap());
        }
    }

    #[test]
    fn commit_qubit_reproduces_samp_commit_on_a_single_qubit() {
        let params = Params::toy();
        let mut keyrng = ChaCha20Rng::seed_from_u64(76);
        let (key, _) = gen_f_with(&params, NoiseModel::GaussianBv, &mut keyrng).unwrap();
        let input = qubit(c(0.6, 0.0), c(0.0, 0.8));
        let mut rng_a = ChaCha20Rng::seed_from_u64(77);
        let mut rng_b = ChaCha20Rng::seed_from_u64(77);
        let (s1, y1) = samp_commit(&params, &key, &input, &mut rng_a).unwrap();
        let (s2, y2) = commit_qubit(&params, &key, &input, 0, REG_PREIMAGE, &mut rng_b).unwrap();
        assert_eq!(y1, y2);
        assert_eq!(s1.layout().dims(), s2.layout().dims());
        for (a, b) in s1.amps().iter().zip(s2.amps()) {
            assert_relative_eq!((a - b).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn committing_one_bell_qubit_with_an_injective_key_collapses_the_partner() {
        let params = Params::toy();
        let mut rng = ChaCha20Rng::seed_from_u64(78);
        let (key, td) = gen_g(&params, &mut rng).unwrap();
        let layout = RegisterLayout::new(&[("c0", 2), ("c1", 2)]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let bell =
            QState::from_amps(layout, vec![c(r, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(r, 0.0)])
                .unwrap();
        for _ in 0..10 {
            let (state, y) = commit_qubit(&params, &key, &bell, 0, "p0", &mut rng).unwrap();
            let (b, _) = inv_g(&key, &td, &y).unwrap();
            // Disjoint branch supports collapse the committed qubit, and with
            // it the entangled partner: both marginals are deterministic and
            // agree with the inverted branch.
            let m0 = state.register_distribution(0).unwrap();
            let m1 = state.register_distribution(1).unwrap();
            assert_relative_eq!(m0[b as usize], 1.0, epsilon = 1e-12);
            assert_relative_eq!(m1[b as usize], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn committing_both_bell_qubits_with_clawfree_keys_keeps_four_components() {
        let params = Params::toy();
        let mut rng = ChaCha20Rng::seed_from_u64(79);
        let (k0, _) = gen_f_with(&params, NoiseModel::Zero, &mut rng).unwrap();
        let (k1, _) = gen_f_with(&params, NoiseModel::Zero, &mut rng).unwrap();
        let layout = RegisterLayout::new(&[("c0", 2), ("c1", 2)]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let bell =
            QState::from_amps(layout, vec![c(r, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(r, 0.0)])
                .unwrap();
        let (state, _y0) = commit_qubit(&params, &k0, &bell, 0, "p0", &mut rng).unwrap();
        let (state, _y1) = commit_qubit(&params, &k1, &state, 1, "p1", &mut rng).unwrap();
        assert_eq!(state.layout().num_registers(), 4);
        // Each commitment string pins exactly one preimage per surviving
        // branch, and the Bell correlation fixes qubit 1 per branch of qubit
        // 0 — so the state stays two perfectly correlated components.
        let comps = nonzero_components(&state, 1e-9);
        assert_eq!(comps.len(), 2);
        for (_, mag) in &comps {
            assert_relative_eq!(*mag, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-9);
        }
        // Both committed marginals stay uniform, and the branch bits agree
        // within each component.
        for reg in [0usize, 1] {
            let m = state.register_distribution(reg).unwrap();
            assert_relative_eq!(m[0], 0.5, epsilon = 1e-9);
        }
        for (flat, _) in &comps {
            let idx = state.layout().unflatten(*flat);
            assert_eq!(idx[0], idx[1]);
        }
    }
}
