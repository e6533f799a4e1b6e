//! Prover implementations: the honest prover, and provers characterized by
//! an attack channel applied between the bit conversion and the Hadamard
//! measurement.
//!
//! Every prover follows the same commitment stage — entangle each input
//! qubit with a fresh preimage register and report the measured commitment
//! strings — because the stage is fixed by the keys, not by the prover's
//! intentions. The variants differ only in what happens afterwards:
//!
//! - `Honest` answers both rounds by direct measurement;
//! - `Characterized` applies a channel to one committed qubit (optionally
//!   joined with a fresh auxiliary qubit or a second committed qubit) before
//!   Hadamard measurement; test rounds measure directly, untouched by the
//!   channel;
//! - `Trivial` is `Characterized` restricted to channels that commute with
//!   standard-basis measurement of the committed qubits they touch, checked
//!   numerically at construction.
//!
//! Channels act on pure states by Kraus-branch sampling (each branch weight
//! is the squared norm it leaves), which reproduces the channel in
//! distribution; exact computations enumerate the branches instead.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::ProtocolError;
use crate::lattice::{Params, ZqVector};
use crate::quantum::{
    apply_u_j_at, commit_qubit, pauli_block_decompose, sample_index, x_from_index, QState,
    RegisterLayout,
};
use crate::tcf::PublicKey;

use super::messages::{HadamardAnswer, TestAnswer};

/// Register name of the auxiliary qubit a two-register attack appends.
pub const REG_AUX: &str = "aux";

/// Tolerance for the structural checks on attacks (trace preservation,
/// commutation with standard-basis measurement).
pub const ATTACK_TOL: f64 = 1e-9;

/// Branch weights below this are treated as exactly dead.
const DEAD_BRANCH: f64 = 1e-30;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Named n-qubit input preparations.
#[derive(Clone, Debug, PartialEq)]
pub enum InputState {
    /// `|0…0⟩` on `n` qubits.
    Zero(usize),
    /// `|+…+⟩` on `n` qubits.
    Plus(usize),
    /// `(|00⟩ + |11⟩)/√2`.
    Bell,
    /// Explicit amplitudes over `2^n` basis states (must be normalized).
    Custom(Vec<Complex64>),
}

impl InputState {
    pub fn n_qubits(&self) -> Result<usize, ProtocolError> {
        match self {
            InputState::Zero(n) | InputState::Plus(n) => {
                if *n == 0 {
                    return Err(ProtocolError::InvalidProver("zero-qubit input".into()));
                }
                Ok(*n)
            }
            InputState::Bell => Ok(2),
            InputState::Custom(amps) => {
                let len = amps.len();
                if len < 2 || !len.is_power_of_two() {
                    return Err(ProtocolError::InvalidProver(format!(
                        "custom input of {len} amplitudes is not a qubit register"
                    )));
                }
                Ok(len.trailing_zeros() as usize)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            InputState::Zero(_) => "zero".into(),
            InputState::Plus(_) => "plus".into(),
            InputState::Bell => "bell".into(),
            InputState::Custom(a) => format!("custom{}", a.len().trailing_zeros()),
        }
    }

    /// Materializes the state over qubit registers named `c0..c{n-1}`.
    pub fn state(&self) -> Result<QState, ProtocolError> {
        let n = self.n_qubits()?;
        let names: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
        let regs: Vec<(&str, usize)> = names.iter().map(|s| (s.as_str(), 2)).collect();
        let layout = RegisterLayout::new(&regs).map_err(ProtocolError::Quantum)?;
        let state = match self {
            InputState::Zero(_) => QState::zero_state(layout),
            InputState::Plus(_) => {
                let amp = Complex64::new(1.0 / (layout.total_dim() as f64).sqrt(), 0.0);
                QState::from_amps(layout.clone(), vec![amp; layout.total_dim()])
                    .map_err(ProtocolError::Quantum)?
            }
            InputState::Bell => {
                let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                QState::from_amps(layout, vec![r, C0, C0, r]).map_err(ProtocolError::Quantum)?
            }
            InputState::Custom(amps) => {
                QState::from_amps(layout, amps.clone()).map_err(ProtocolError::Quantum)?
            }
        };
        Ok(state)
    }
}

/// A channel applied to one committed qubit — optionally joined with one
/// fresh auxiliary qubit, or with a second committed qubit — before the
/// Hadamard measurement.
#[derive(Clone, Debug)]
pub struct Attack {
    pub name: String,
    /// Which committed qubit the channel acts on.
    pub qubit: usize,
    /// Whether the channel also acts on an appended `|0⟩` auxiliary qubit
    /// (the committed qubit is the more significant tensor factor).
    pub with_aux: bool,
    /// A second committed qubit the channel acts on instead of an auxiliary
    /// (the attacked qubit stays the more significant tensor factor).
    pub pair: Option<usize>,
    kraus: Vec<DMatrix<Complex64>>,
}

impl Attack {
    pub fn new(
        name: &str,
        qubit: usize,
        with_aux: bool,
        kraus: Vec<DMatrix<Complex64>>,
    ) -> Result<Self, ProtocolError> {
        let dim = if with_aux { 4 } else { 2 };
        if kraus.is_empty() {
            return Err(ProtocolError::InvalidProver(format!("attack {name} has no operators")));
        }
        for k in &kraus {
            if k.nrows() != dim || k.ncols() != dim {
                return Err(ProtocolError::InvalidProver(format!(
                    "attack {name}: operator is {}x{}, expected {dim}x{dim}",
                    k.nrows(),
                    k.ncols()
                )));
            }
        }
        let mut sum = DMatrix::<Complex64>::zeros(dim, dim);
        for k in &kraus {
            sum += k.adjoint() * k;
        }
        let deviation = (sum - DMatrix::<Complex64>::identity(dim, dim))
            .iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max);
        if deviation > ATTACK_TOL {
            return Err(ProtocolError::InvalidProver(format!(
                "attack {name} is not trace preserving (deviation {deviation:.2e})"
            )));
        }
        Ok(Attack { name: name.to_string(), qubit, with_aux, pair: None, kraus })
    }

    /// A single-unitary attack.
    pub fn unitary(
        name: &str,
        qubit: usize,
        with_aux: bool,
        u: DMatrix<Complex64>,
    ) -> Result<Self, ProtocolError> {
        Attack::new(name, qubit, with_aux, vec![u])
    }

    /// A channel across two committed qubits: `qubit` as the more
    /// significant tensor factor, `partner` as the less significant one.
    pub fn two_qubit(
        name: &str,
        qubit: usize,
        partner: usize,
        kraus: Vec<DMatrix<Complex64>>,
    ) -> Result<Self, ProtocolError> {
        if partner == qubit {
            return Err(ProtocolError::InvalidProver(format!(
                "attack {name} pairs qubit {qubit} with itself"
            )));
        }
        let mut attack = Attack::new(name, qubit, true, kraus)?;
        attack.with_aux = false;
        attack.pair = Some(partner);
        Ok(attack)
    }

    /// A single-unitary attack across two committed qubits.
    pub fn unitary_pair(
        name: &str,
        qubit: usize,
        partner: usize,
        u: DMatrix<Complex64>,
    ) -> Result<Self, ProtocolError> {
        Attack::two_qubit(name, qubit, partner, vec![u])
    }

    pub fn kraus(&self) -> &[DMatrix<Complex64>] {
        &self.kraus
    }

    pub fn dim(&self) -> usize {
        if self.with_aux || self.pair.is_some() {
            4
        } else {
            2
        }
    }

    /// Whether the channel commutes with standard-basis measurement of every
    /// committed qubit it touches, as an instrument: `P E(ρ) P = E(P ρ P)`
    /// for each outcome projector `P`, checked exactly on a full basis of
    /// matrix units. For a single-qubit or auxiliary-joined channel the
    /// projectors are the two committed-factor sectors (an auxiliary qubit
    /// is the prover's own and free to change); a two-committed-qubit
    /// channel must respect all four joint sectors.
    pub fn is_x_trivial(&self, tol: f64) -> bool {
        let dim = self.dim();
        let aux_dim = dim / 2;
        let projectors: Vec<DMatrix<Complex64>> = if self.pair.is_some() {
            (0..dim)
                .map(|v| DMatrix::from_fn(dim, dim, |r, s| if r == s && r == v { C1 } else { C0 }))
                .collect()
        } else {
            (0..2usize)
                .map(|c| {
                    DMatrix::from_fn(
                        dim,
                        dim,
                        |r, s| if r == s && r / aux_dim == c { C1 } else { C0 },
                    )
                })
                .collect()
        };
        let apply = |m: &DMatrix<Complex64>| -> DMatrix<Complex64> {
            let mut out = DMatrix::zeros(dim, dim);
            for k in &self.kraus {
                out += k * m * k.adjoint();
            }
            out
        };
        for p in &projectors {
            for i in 0..dim {
                for j in 0..dim {
                    let mut unit = DMatrix::<Complex64>::zeros(dim, dim);
                    unit[(i, j)] = C1;
                    let lhs = p * apply(&unit) * p;
                    let rhs = apply(&(p * unit * p));
                    let dev = (lhs - rhs).iter().map(|c| c.norm()).fold(0.0f64, f64::max);
                    if dev > tol {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// The channel `ρ ↦ ½(S(ρ) + Z S(Z ρ Z) Z)` with `Z` on the committed
/// factor: each operator splits into itself and its Z-conjugate, both
/// weighted `1/√2`.
pub fn z_twirl_attack(attack: &Attack) -> Attack {
    let dim = attack.dim();
    let aux_dim = dim / 2;
    let z = DMatrix::from_fn(dim, dim, |r, c| {
        if r != c {
            C0
        } else if r / aux_dim == 1 {
            Complex64::new(-1.0, 0.0)
        } else {
            C1
        }
    });
    let scale = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut kraus = Vec::with_capacity(2 * attack.kraus.len());
    for k in &attack.kraus {
        kraus.push(k * scale);
        kraus.push(&z * k * &z * scale);
    }
    Attack {
        name: format!("{}+ztwirl", attack.name),
        qubit: attack.qubit,
        with_aux: attack.with_aux,
        pair: attack.pair,
        kraus,
    }
}

/// Strips the bit-flip component of the channel at the committed qubit:
/// each operator `K = Σ_{x,z} X^x Z^z ⊗ B_{xz}` splits into the two
/// block-diagonal operators `Σ_z Z^z ⊗ B_{xz}`, `x ∈ {0,1}`. The result is
/// trace preserving, commutes with standard-basis measurement of the
/// committed qubit, and — followed by Hadamard measurement of that qubit —
/// is equivalent to the Z-twirl of the original channel.
pub fn x_trivialize_attack(attack: &Attack) -> Attack {
    let dim = attack.dim();
    let half = dim / 2;
    let mut kraus = Vec::with_capacity(2 * attack.kraus.len());
    for k in &attack.kraus {
        let blocks = pauli_block_decompose(k).expect("attack dimensions are even");
        for x in 0..2usize {
            let b0 = &blocks[2 * x];
            let b1 = &blocks[2 * x + 1];
            let mut bp = DMatrix::from_element(dim, dim, C0);
            bp.view_mut((0, 0), (half, half)).copy_from(&(b0 + b1));
            bp.view_mut((half, half), (half, half)).copy_from(&(b0 - b1));
            if bp.iter().map(|c| c.norm_sqr()).sum::<f64>() > DEAD_BRANCH {
                kraus.push(bp);
            }
        }
    }
    Attack {
        name: format!("{}+xtrivial", attack.name),
        qubit: attack.qubit,
        with_aux: attack.with_aux,
        pair: attack.pair,
        kraus,
    }
}

/// The fixed attack roster used by the equality experiments: identity, the
/// three basic single-qubit conjugations, a controlled-Z onto a fresh
/// auxiliary qubit, and one seeded Haar-ish two-qubit unitary.
pub fn attack_library(qubit: usize) -> Vec<Attack> {
    let h = DMatrix::from_row_slice(2, 2, &{
        let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        [r, r, r, -r]
    });
    let x = DMatrix::from_row_slice(2, 2, &[C0, C1, C1, C0]);
    let z = DMatrix::from_row_slice(2, 2, &[C1, C0, C0, Complex64::new(-1.0, 0.0)]);
    let hzh = &h * &z * &h;
    let mut cz = DMatrix::<Complex64>::identity(4, 4);
    cz[(3, 3)] = Complex64::new(-1.0, 0.0);
    let mut rng = ChaCha20Rng::seed_from_u64(0x2b1e);
    let tall = DMatrix::from_fn(4, 4, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let random2q = tall.qr().q();
    vec![
        Attack::unitary("identity", qubit, false, DMatrix::identity(2, 2)).unwrap(),
        Attack::unitary("x", qubit, false, x).unwrap(),
        Attack::unitary("z", qubit, false, z).unwrap(),
        Attack::unitary("hzh", qubit, false, hzh).unwrap(),
        Attack::unitary("cz-aux", qubit, true, cz).unwrap(),
        Attack::unitary("random2q", qubit, true, random2q).unwrap(),
    ]
}

/// What kind of prover plays the session.
#[derive(Clone, Debug)]
pub enum ProverSpec {
    Honest { input: InputState },
    Characterized { input: InputState, attack: Attack },
    Trivial { input: InputState, attack: Attack },
}

impl ProverSpec {
    pub fn honest(input: InputState) -> Result<Self, ProtocolError> {
        input.n_qubits()?;
        Ok(ProverSpec::Honest { input })
    }

    pub fn characterized(input: InputState, attack: Attack) -> Result<Self, ProtocolError> {
        let n = input.n_qubits()?;
        if attack.qubit >= n {
            return Err(ProtocolError::InvalidProver(format!(
                "attack targets qubit {} of {n}",
                attack.qubit
            )));
        }
        if let Some(partner) = attack.pair {
            if partner >= n {
                return Err(ProtocolError::InvalidProver(format!(
                    "attack pairs with qubit {partner} of {n}"
                )));
            }
        }
        Ok(ProverSpec::Characterized { input, attack })
    }

    /// A characterized prover whose attack must commute with standard-basis
    /// measurement of the committed qubit.
    pub fn trivial(input: InputState, attack: Attack) -> Result<Self, ProtocolError> {
        if !attack.is_x_trivial(ATTACK_TOL) {
            return Err(ProtocolError::InvalidProver(format!(
                "attack {} does not commute with standard-basis measurement",
                attack.name
            )));
        }
        match ProverSpec::characterized(input, attack)? {
            ProverSpec::Characterized { input, attack } => {
                Ok(ProverSpec::Trivial { input, attack })
            }
            _ => unreachable!(),
        }
    }

    pub fn input(&self) -> &InputState {
        match self {
            ProverSpec::Honest { input }
            | ProverSpec::Characterized { input, .. }
            | ProverSpec::Trivial { input, .. } => input,
        }
    }

    pub fn attack(&self) -> Option<&Attack> {
        match self {
            ProverSpec::Honest { .. } => None,
            ProverSpec::Characterized { attack, .. } | ProverSpec::Trivial { attack, .. } => {
                Some(attack)
            }
        }
    }

    pub fn n_qubits(&self) -> Result<usize, ProtocolError> {
        self.input().n_qubits()
    }

    pub fn label(&self) -> String {
        match self {
            ProverSpec::Honest { input } => format!("honest:{}", input.label()),
            ProverSpec::Characterized { input, attack } => {
                format!("characterized:{}:{}", input.label(), attack.name)
            }
            ProverSpec::Trivial { input, attack } => {
                format!("trivial:{}:{}", input.label(), attack.name)
            }
        }
    }
}

/// Converts to the row-major layout the register-level state operations
/// expect (nalgebra stores column-major).
pub fn row_major(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

/// Appends the auxiliary qubit if the attack needs one and resolves the
/// registers the attack acts on (committed factor first).
fn attack_staging(state: &QState, attack: &Attack) -> Result<(QState, Vec<usize>), ProtocolError> {
    let mut staged = state.clone();
    let committed = staged
        .layout()
        .index_of(&format!("c{}", attack.qubit))
        .map_err(ProtocolError::Quantum)?;
    let regs = if let Some(partner) = attack.pair {
        let other = staged
            .layout()
            .index_of(&format!("c{partner}"))
            .map_err(ProtocolError::Quantum)?;
        vec![committed, other]
    } else if attack.with_aux {
        let aux_layout = RegisterLayout::new(&[(REG_AUX, 2)]).map_err(ProtocolError::Quantum)?;
        staged = staged
            .tensor(&QState::zero_state(aux_layout))
            .map_err(ProtocolError::Quantum)?;
        let aux = staged.layout().index_of(REG_AUX).map_err(ProtocolError::Quantum)?;
        vec![committed, aux]
    } else {
        vec![committed]
    };
    Ok((staged, regs))
}

/// All live Kraus branches of the attack on a pure state, as
/// `(weight, normalized branch state)` pairs; weights sum to 1.
pub fn apply_attack_branches(
    state: &QState,
    attack: &Attack,
) -> Result<Vec<(f64, QState)>, ProtocolError> {
    let (staged, regs) = attack_staging(state, attack)?;
    let mut out = Vec::with_capacity(attack.kraus.len());
    for k in &attack.kraus {
        let branch = staged
            .apply_multi_register_matrix(&regs, &row_major(k))
            .map_err(ProtocolError::Quantum)?;
        let w = branch.norm2();
        if w > DEAD_BRANCH {
            out.push((w, branch.renormalized().map_err(ProtocolError::Quantum)?));
        }
    }
    Ok(out)
}

/// Samples one Kraus branch with its Born weight and returns the collapsed
/// state — the trajectory unraveling of the channel.
pub fn apply_attack_sampled<R: Rng + ?Sized>(
    state: &QState,
    attack: &Attack,
    rng: &mut R,
) -> Result<QState, ProtocolError> {
    let branches = apply_attack_branches(state, attack)?;
    let weights: Vec<f64> = branches.iter().map(|(w, _)| *w).collect();
    let pick = sample_index(&weights, rng);
    Ok(branches.into_iter().nth(pick).expect("sampled branch exists").1)
}

/// One prover's session state: the input, its commitments, and the registers
/// still in play.
pub struct ProverSim {
    params: Params,
    spec: ProverSpec,
    keys: Vec<PublicKey>,
    n: usize,
    state: QState,
    ys: Vec<ZqVector>,
    committed: bool,
    rng: ChaCha20Rng,
}

impl ProverSim {
    pub fn new(
        spec: &ProverSpec,
        params: &Params,
        keys: &[PublicKey],
        seed: u64,
    ) -> Result<Self, ProtocolError> {
        let n = spec.n_qubits()?;
        if keys.len() != n {
            return Err(ProtocolError::InvalidProver(format!(
                "{} keys for {n} qubits",
                keys.len()
            )));
        }
        Ok(ProverSim {
            params: params.clone(),
            spec: spec.clone(),
            keys: keys.to_vec(),
            n,
            state: spec.input().state()?,
            ys: Vec::new(),
            committed: false,
            rng: ChaCha20Rng::seed_from_u64(seed),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn state(&self) -> &QState {
        &self.state
    }

    pub fn ys(&self) -> &[ZqVector] {
        &self.ys
    }

    /// Commits every qubit in order, appending one preimage register per
    /// qubit, and returns the measured commitment strings.
    pub fn commit_all(&mut self) -> Result<Vec<ZqVector>, ProtocolError> {
        if self.committed {
            return Err(ProtocolError::InvalidProver("commitment stage already played".into()));
        }
        for i in 0..self.n {
            let reg = self
                .state
                .layout()
                .index_of(&format!("c{i}"))
                .map_err(ProtocolError::Quantum)?;
            let (next, y) =
                commit_qubit(&self.params, &self.keys[i], &self.state, reg, &format!("p{i}"), &mut self.rng)
                    .map_err(ProtocolError::Quantum)?;
            self.state = next;
            self.ys.push(y);
        }
        self.committed = true;
        Ok(self.ys.clone())
    }

    /// Test round: standard-basis measurement of every committed qubit and
    /// preimage register; no channel is involved.
    pub fn test_answers(&mut self) -> Result<Vec<TestAnswer>, ProtocolError> {
        self.expect_committed()?;
        let mut answers = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let c = self.reg(&format!("c{i}"))?;
            let p = self.reg(&format!("p{i}"))?;
            let (outs, next) =
                self.state.measure_registers(&[c, p], &mut self.rng).map_err(ProtocolError::Quantum)?;
            self.state = next;
            answers.push(TestAnswer {
                b: outs[0] as u8,
                x: x_from_index(outs[1], self.params.q, self.params.n).vals().to_vec(),
            });
        }
        Ok(answers)
    }

    /// Hadamard round: convert every preimage register to bit indexing,
    /// apply the attack channel (if the prover has one), then measure every
    /// register in the Hadamard basis.
    pub fn hadamard_answers(&mut self) -> Result<Vec<HadamardAnswer>, ProtocolError> {
        self.expect_committed()?;
        for i in 0..self.n {
            let p = self.reg(&format!("p{i}"))?;
            self.state =
                apply_u_j_at(&self.params, &self.state, p).map_err(ProtocolError::Quantum)?;
        }
        if let Some(attack) = self.spec.attack() {
            self.state = apply_attack_sampled(&self.state, attack, &mut self.rng)?;
        }
        let mut rotated = self.state.clone();
        for r in 0..rotated.layout().num_registers() {
            rotated = rotated.fwht_register(r).map_err(ProtocolError::Quantum)?;
        }
        let all: Vec<usize> = (0..rotated.layout().num_registers()).collect();
        let (outs, next) =
            rotated.measure_registers(&all, &mut self.rng).map_err(ProtocolError::Quantum)?;
        let mut answers = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let c = next.layout().index_of(&format!("c{i}")).map_err(ProtocolError::Quantum)?;
            let p = next.layout().index_of(&format!("p{i}")).map_err(ProtocolError::Quantum)?;
            answers.push(HadamardAnswer { b: outs[c] as u8, d: outs[p] as u64 });
        }
        self.state = next;
        Ok(answers)
    }

    fn reg(&self, name: &str) -> Result<usize, ProtocolError> {
        self.state.layout().index_of(name).map_err(ProtocolError::Quantum)
    }

    fn expect_committed(&self) -> Result<(), ProtocolError> {
        if !self.committed {
            return Err(ProtocolError::InvalidProver("commitment stage not played yet".into()));
        }
        Ok(())
    }
}
