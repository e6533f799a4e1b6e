//! XZ local Hamiltonians and the energy-verification layer.
//!
//! A Hamiltonian here is a real combination `H = Σ_S d_S·S` of Pauli strings
//! over {I, X, Z} with at most two non-identity factors per term. Verifying
//! an energy bound reduces to single-term measurements: rescale the terms
//! into a probability vector `π_S = |d_S| / Σ|d|`, sample terms i.i.d. by
//! `π`, measure each sampled term's qubits in its own bases (X → Hadamard,
//! Z → standard), and accept a round when the ±1 outcome product equals
//! `−sign(d_S)`. The per-round acceptance probability of a state ρ is the
//! closed form `p_acc = 1 − (Tr(Hρ) + Σ|d|) / (2Σ|d|)`, an affine function
//! of the energy — so energy estimation becomes frequency estimation, and a
//! strict-majority vote over k′ repetitions amplifies the gap.
//!
//! The full verification run drives the measurement protocol: the sampled
//! terms fix a basis choice, the prover commits, and the verifier's decoded
//! bits feed the majority rule. Repetitions use k′ disjoint qubit blocks
//! (the honest prover sends k′ copies of ρ), so no qubit is ever asked for
//! both bases; since the blocks are unentangled product factors and every
//! protocol step acts per qubit, the blocks run as k′ independent sessions,
//! which keeps the simulated state sizes flat in k′.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HamiltonianError, ProtocolError};
use crate::lattice::Params;
use crate::protocol::{
    run_session, BasisChoice, MeasBasisChoicePlaceholder, ProverSpec, RoundChoice, RoundType,
    SessionConfig, Transcript,
};
use crate::quantum::{DensityOp, MeasBasis, QState, RegisterLayout};
use crate::tcf::{GSetPolicy, NoiseModel};

/// Dense matrices and exact diagonalization stay below this qubit count.
pub const DENSE_QUBIT_CAP: usize = 12;

/// Default repetition count for majority-amplified verification runs.
pub const QPIP_DEFAULT_KPRIME: usize = 15;

/// One non-identity Pauli factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Z,
}

/// One term `d_S · S`: a coefficient and the non-identity factors of the
/// Pauli string, as (qubit index, axis) pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    pub paulis: Vec<(usize, Axis)>,
}

/// `H = Σ_S d_S · S` over `n` qubits, at most two non-identity factors per
/// term, every factor X or Z.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct XZHamiltonian {
    pub n: usize,
    pub terms: Vec<PauliTerm>,
}

impl XZHamiltonian {
    /// Builds and validates.
    pub fn new(n: usize, terms: Vec<PauliTerm>) -> Result<Self, HamiltonianError> {
        let h = XZHamiltonian { n, terms };
        h.validate()?;
        Ok(h)
    }

    /// Parses the JSON description `{n, terms: [{coeff, paulis: [[idx,
    /// "X"|"Z"], ...]}, ...]}` and validates it.
    pub fn from_json(text: &str) -> Result<Self, HamiltonianError> {
        let h: XZHamiltonian =
            serde_json::from_str(text).map_err(|e| HamiltonianError::Json(e.to_string()))?;
        h.validate()?;
        Ok(h)
    }

    /// Checks every structural invariant: at least one term, coefficients
    /// finite and nonzero, each term a product of at most two distinct
    /// single-qubit factors inside the declared system.
    pub fn validate(&self) -> Result<(), HamiltonianError> {
        if self.n == 0 {
            return Err(HamiltonianError::Verification("n = 0 qubits".into()));
        }
        if self.terms.is_empty() {
            return Err(HamiltonianError::Empty);
        }
        for (t, term) in self.terms.iter().enumerate() {
            if !term.coeff.is_finite() || term.coeff == 0.0 {
                return Err(HamiltonianError::BadCoefficient { term: t, coeff: term.coeff });
            }
            if term.paulis.len() > 2 {
                return Err(HamiltonianError::MalformedTerm { term: t });
            }
            for &(q, _) in &term.paulis {
                if q >= self.n {
                    return Err(HamiltonianError::QubitOutOfRange { term: t, qubit: q, n: self.n });
                }
            }
            if term.paulis.len() == 2 && term.paulis[0].0 == term.paulis[1].0 {
                return Err(HamiltonianError::MalformedTerm { term: t });
            }
        }
        Ok(())
    }

    /// `Σ_S |d_S|`, the total term weight.
    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.abs()).sum()
    }

    /// The dense `2^n × 2^n` matrix of `H` (real: X and Z have real
    /// entries). Qubit 0 is the most significant tensor factor, matching
    /// the register order of the simulated states.
    pub fn matrix(&self) -> Result<DMatrix<f64>, HamiltonianError> {
        if self.n > DENSE_QUBIT_CAP {
            return Err(HamiltonianError::TooLarge { n: self.n });
        }
        let dim = 1usize << self.n;
        let mut acc = DMatrix::<f64>::zeros(dim, dim);
        for term in &self.terms {
            acc += pauli_string_matrix(self.n, &term.paulis) * term.coeff;
        }
        Ok(acc)
    }
}

/// The dense matrix of a Pauli string with the given non-identity factors.
fn pauli_string_matrix(n: usize, paulis: &[(usize, Axis)]) -> DMatrix<f64> {
    let x = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let mut acc = DMatrix::<f64>::identity(1, 1);
    for q in 0..n {
        let factor = match paulis.iter().find(|&&(i, _)| i == q) {
            Some(&(_, Axis::X)) => &x,
            Some(&(_, Axis::Z)) => &z,
            None => &DMatrix::<f64>::identity(2, 2),
        }
        .clone();
        acc = acc.kronecker(&factor);
    }
    acc
}

/// One rescaled term: sampling weight, coefficient sign, and the factors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RescaledTerm {
    pub pi: f64,
    pub sign: i8,
    pub paulis: Vec<(usize, Axis)>,
}

/// `H′ = Σ_S π_S P_S` with `π_S = |d_S|/Σ|d|` and `P_S = (I + sign(d_S)·S)/2`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RescaledHamiltonian {
    pub n: usize,
    pub terms: Vec<RescaledTerm>,
}

impl RescaledTerm {
    /// The projector `P_S = (I + sign·S)/2` as a dense matrix.
    pub fn projector(&self, n: usize) -> Result<DMatrix<f64>, HamiltonianError> {
        if n > DENSE_QUBIT_CAP {
            return Err(HamiltonianError::TooLarge { n });
        }
        let dim = 1usize << n;
        let s = pauli_string_matrix(n, &self.paulis);
        Ok((DMatrix::<f64>::identity(dim, dim) + s * self.sign as f64) * 0.5)
    }
}

/// Turns `H` into its rescaled form. Validation guarantees every
/// coefficient is nonzero, so the weights are a genuine probability vector.
pub fn rescale(h: &XZHamiltonian) -> Result<RescaledHamiltonian, HamiltonianError> {
    h.validate()?;
    let total = h.total_weight();
    let terms = h
        .terms
        .iter()
        .map(|t| RescaledTerm {
            pi: t.coeff.abs() / total,
            sign: if t.coeff >= 0.0 { 1 } else { -1 },
            paulis: t.paulis.clone(),
        })
        .collect();
    Ok(RescaledHamiltonian { n: h.n, terms })
}

/// Exact minimal eigenvalue of `H` with a minimizing eigenvector, by dense
/// diagonalization (real symmetric; n ≤ [`DENSE_QUBIT_CAP`]).
pub fn ground_energy(h: &XZHamiltonian) -> Result<(f64, QState), HamiltonianError> {
    let m = h.matrix()?;
    let eig = m.symmetric_eigen();
    let mut best = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] < eig.eigenvalues[best] {
            best = i;
        }
    }
    let amps: Vec<Complex64> =
        eig.eigenvectors.column(best).iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let names: Vec<String> = (0..h.n).map(|i| format!("c{i}")).collect();
    let regs: Vec<(&str, usize)> = names.iter().map(|s| (s.as_str(), 2)).collect();
    let layout = RegisterLayout::new(&regs)?;
    let state = QState::from_amps_normalized(layout, amps)?;
    Ok((eig.eigenvalues[best], state))
}

/// `Tr(Hρ)` for a density operator over the matching qubit count.
pub fn energy(h: &XZHamiltonian, rho: &DensityOp) -> Result<f64, HamiltonianError> {
    let dim = 1usize << h.n;
    if rho.layout().total_dim() != dim {
        return Err(HamiltonianError::Verification(format!(
            "state dimension {} does not match 2^{}",
            rho.layout().total_dim(),
            h.n
        )));
    }
    let m = h.matrix()?;
    let mut tr = 0.0;
    for r in 0..dim {
        for c in 0..dim {
            tr += m[(r, c)] * rho.matrix()[(c, r)].re;
        }
    }
    Ok(tr)
}

/// The per-round acceptance probability of the single-term measurement:
/// `p_acc = 1 − (Tr(Hρ) + Σ|d|) / (2Σ|d|)`. Checked to lie in [0, 1]
/// within 1e-9 and clamped to the interval.
pub fn p_acc(h: &XZHamiltonian, rho: &DensityOp) -> Result<f64, HamiltonianError> {
    let total = h.total_weight();
    let tr = energy(h, rho)?;
    let p = 1.0 - (tr + total) / (2.0 * total);
    if !(-1e-9..=1.0 + 1e-9).contains(&p) {
        return Err(HamiltonianError::Verification(format!(
            "acceptance probability {p} outside [0, 1]"
        )));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// The same acceptance probability computed the long way: for each term,
/// measure the term's qubits of ρ in the term's own bases exactly and sum
/// the probability of outcome products equal to `−sign`, weighted by π.
/// Agrees with [`p_acc`] identically — the closed form is this sum.
pub fn exact_single_round_accept(
    h: &XZHamiltonian,
    rho: &DensityOp,
) -> Result<f64, HamiltonianError> {
    let hp = rescale(h)?;
    let dim = 1usize << h.n;
    if rho.layout().total_dim() != dim {
        return Err(HamiltonianError::Verification(format!(
            "state dimension {} does not match 2^{}",
            rho.layout().total_dim(),
            h.n
        )));
    }
    let mut acc = 0.0;
    for term in &hp.terms {
        let mut sel: Vec<(usize, MeasBasis)> = term
            .paulis
            .iter()
            .map(|&(q, axis)| {
                (q, if axis == Axis::X { MeasBasis::Hadamard } else { MeasBasis::Standard })
            })
            .collect();
        sel.sort_by_key(|&(q, _)| q);
        let dist = rho.measurement_distribution(&sel)?;
        let mut hit = 0.0;
        for (outcome, &p) in dist.iter().enumerate() {
            let product: i8 =
                if (outcome.count_ones() & 1) == 0 { 1 } else { -1 };
            if product == -term.sign {
                hit += p;
            }
        }
        acc += term.pi * hit;
    }
    Ok(acc)
}

/// Samples `kprime` term indices i.i.d. by the rescaled weights.
pub fn sample_terms<R: Rng + ?Sized>(
    hp: &RescaledHamiltonian,
    kprime: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut out = Vec::with_capacity(kprime);
    for _ in 0..kprime {
        let u: f64 = rng.gen_range(0.0..1.0);
        let mut cum = 0.0;
        let mut pick = hp.terms.len() - 1;
        for (i, t) in hp.terms.iter().enumerate() {
            cum += t.pi;
            if u < cum {
                pick = i;
                break;
            }
        }
        out.push(pick);
    }
    out
}

/// Lays the sampled terms out on disjoint qubit blocks — repetition `i`
/// owns qubits `[i·n, (i+1)·n)` — and returns the basis choice for the
/// expanded layout: Hadamard where the owning term applies X, standard
/// where it applies Z or leaves the qubit untouched.
///
/// The second value reports which qubits would have been asked for both
/// bases had every term been measured on one shared block; the
/// block-per-repetition layout exists precisely to keep that list empty.
pub fn basis_from_terms(
    hp: &RescaledHamiltonian,
    sampled: &[usize],
) -> Result<(BasisChoice, Vec<usize>), HamiltonianError> {
    let n = hp.n;
    let mut bits = String::with_capacity(sampled.len() * n);
    for &t in sampled {
        let term = hp.terms.get(t).ok_or_else(|| {
            HamiltonianError::Verification(format!("sampled term index {t} out of range"))
        })?;
        for q in 0..n {
            let x_here = term.paulis.iter().any(|&(i, a)| i == q && a == Axis::X);
            bits.push(if x_here { '1' } else { '0' });
        }
    }
    let mut conflicted = Vec::new();
    for q in 0..n {
        let mut wants_x = false;
        let mut wants_z = false;
        for &t in sampled {
            for &(i, a) in &hp.terms[t].paulis {
                if i == q {
                    match a {
                        Axis::X => wants_x = true,
                        Axis::Z => wants_z = true,
                    }
                }
            }
        }
        if wants_x && wants_z {
            conflicted.push(q);
        }
    }
    let h = BasisChoice::parse(&bits).map_err(HamiltonianError::Protocol)?;
    Ok((h, conflicted))
}

/// The majority rule over decoded bits: repetition `i` reads its term's
/// qubits from block `i`, forms the ±1 product (bit b ↦ (−1)^b), and is
/// satisfied when the product equals `−sign(d)`. Accepts iff a strict
/// majority of repetitions is satisfied. Also returns the per-repetition
/// verdicts.
pub fn mf_accept(
    hp: &RescaledHamiltonian,
    sampled: &[usize],
    m: &[u8],
) -> Result<(bool, Vec<bool>), HamiltonianError> {
    let n = hp.n;
    if m.len() != sampled.len() * n {
        return Err(HamiltonianError::Verification(format!(
            "{} decoded bits for {} repetitions of {} qubits",
            m.len(),
            sampled.len(),
            n
        )));
    }
    let mut satisfied = Vec::with_capacity(sampled.len());
    for (i, &t) in sampled.iter().enumerate() {
        let term = &hp.terms[t];
        let mut product: i8 = 1;
        for &(q, _) in &term.paulis {
            if m[i * n + q] & 1 == 1 {
                product = -product;
            }
        }
        satisfied.push(product == -term.sign);
    }
    let yes = satisfied.iter().filter(|&&s| s).count();
    Ok((2 * yes > sampled.len(), satisfied))
}

/// Probability that a strict majority of `kprime` i.i.d. rounds accepts,
/// each with probability `p` — the analytic acceptance rate of the
/// repeated protocol.
pub fn majority_rate(p: f64, kprime: usize) -> f64 {
    let mut rate = 0.0;
    for j in 0..=kprime {
        if 2 * j > kprime {
            rate += binomial(kprime, j) * p.powi(j as i32) * (1.0 - p).powi((kprime - j) as i32);
        }
    }
    rate
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Everything a verification run needs besides the Hamiltonian and prover.
#[derive(Clone, Debug)]
pub struct QpipConfig {
    pub params: Params,
    pub kprime: usize,
    pub round: RoundChoice,
    pub gset: GSetPolicy,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl QpipConfig {
    pub fn new(params: &Params, kprime: usize, seed: u64) -> Self {
        QpipConfig {
            params: params.clone(),
            kprime,
            round: RoundChoice::RandomCoin,
            gset: GSetPolicy::AllowAll,
            noise: NoiseModel::Zero,
            seed,
        }
    }
}

/// Outcome of one full verification run.
#[derive(Clone, Debug)]
pub struct QpipOutcome {
    /// The round actually played (one choice for all blocks).
    pub round: RoundType,
    /// Overall verdict: protocol acceptance, and for Hadamard rounds also
    /// the majority rule.
    pub accept: bool,
    /// Every block's measurement-protocol verdict.
    pub protocol_accept: bool,
    /// The majority verdict, present exactly for Hadamard rounds.
    pub mf: Option<bool>,
    /// Per-repetition term satisfaction (empty for test rounds).
    pub term_satisfied: Vec<bool>,
    /// Indices of the sampled terms, one per repetition.
    pub sampled: Vec<usize>,
    /// Basis choice over the expanded block layout.
    pub h: BasisChoice,
    /// Decoded bits over the expanded layout (Hadamard rounds).
    pub m: Option<Vec<u8>>,
    /// One transcript per block.
    pub transcripts: Vec<Transcript>,
}

/// Runs the verification protocol once: samples `k′` terms, derives the
/// expanded basis choice, plays one measurement-protocol session per block
/// with the given per-block prover, and combines the verdicts (test round:
/// every block's support check; Hadamard round: every block accepted and
/// the strict majority of term products correct).
///
/// The prover specification describes ONE block; every block runs an
/// independent copy, which is exactly the k′-fold product prover since
/// blocks share no state and no protocol step couples them.
pub fn run_qpip(
    ham: &XZHamiltonian,
    prover: &ProverSpec,
    cfg: &QpipConfig,
) -> Result<QpipOutcome, HamiltonianError> {
    if cfg.kprime == 0 {
        return Err(HamiltonianError::Verification("kprime = 0 repetitions".into()));
    }
    let n = prover.n_qubits().map_err(HamiltonianError::Protocol)?;
    if n != ham.n {
        return Err(HamiltonianError::Verification(format!(
            "prover prepares {n} qubits per block but the hamiltonian has {}",
            ham.n
        )));
    }
    let hp = rescale(ham)?;

    let mut qpip_rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    qpip_rng.set_stream(3);
    let sampled = sample_terms(&hp, cfg.kprime, &mut qpip_rng);
    let round = match cfg.round {
        RoundChoice::Test => RoundType::Test,
        RoundChoice::Hadamard => RoundType::Hadamard,
        RoundChoice::RandomCoin => {
            if qpip_rng.gen_range(0..2u8) == 0 {
                RoundType::Test
            } else {
                RoundType::Hadamard
            }
        }
    };
    let (h, _) = basis_from_terms(&hp, &sampled)?;

    let mut vseeds = ChaCha20Rng::seed_from_u64(cfg.seed);
    vseeds.set_stream(4);
    let mut pseeds = ChaCha20Rng::seed_from_u64(cfg.seed);
    pseeds.set_stream(5);

    let fixed = if round == RoundType::Test { RoundChoice::Test } else { RoundChoice::Hadamard };
    let mut transcripts = Vec::with_capacity(cfg.kprime);
    let mut m_all: Vec<u8> = Vec::with_capacity(cfg.kprime * n);
    let mut protocol_accept = true;
    for i in 0..cfg.kprime {
        let block_bits: String =
            (0..n).map(|j| if h.bit(i * n + j) == 1 { '1' } else { '0' }).collect();
        let block_h = BasisChoice::parse(&block_bits).map_err(HamiltonianError::Protocol)?;
        let mut scfg =
            SessionConfig::new(&cfg.params, &block_h, fixed, vseeds.gen(), pseeds.gen());
        scfg.gset = cfg.gset;
        scfg.noise = cfg.noise;
        scfg.session_id = format!("qpip-{:x}-b{i}", cfg.seed);
        let t = run_session(prover, &scfg).map_err(HamiltonianError::Protocol)?;
        protocol_accept &= t.accept;
        if round == RoundType::Hadamard {
            let bits = t.m.as_ref().ok_or_else(|| {
                HamiltonianError::Verification("hadamard block produced no decoded bits".into())
            })?;
            m_all.extend_from_slice(bits);
        }
        transcripts.push(t);
    }

    let (accept, mf, term_satisfied, m) = if round == RoundType::Hadamard {
        let (maj, satisfied) = mf_accept(&hp, &sampled, &m_all)?;
        (protocol_accept && maj, Some(maj), satisfied, Some(m_all))
    } else {
        (protocol_accept, None, Vec::new(), None)
    };

    Ok(QpipOutcome {
        round,
        accept,
        protocol_accept,
        mf,
        term_satisfied,
        sampled,
        h,
        m,
        transcripts,
    })
}
