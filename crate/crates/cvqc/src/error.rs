//! Error types shared across the stack.
//!
//! Each layer has its own enum; higher layers wrap lower ones with `#[from]`.
//! `NotInvertible` is a signal (a well-formed "no preimage" answer that the
//! protocol handles by rejecting), not a fault.

use thiserror::Error;

/// Errors from the `lattice` layer.
#[derive(Debug, Error)]
pub enum LatticeError {
    /// A parameter set violates one of its structural invariants.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Shapes of operands do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Moduli of operands differ.
    #[error("modulus mismatch: {left} vs {right}")]
    ModulusMismatch { left: u64, right: u64 },

    /// No secret has a residual within the norm bound. A signal, not a fault.
    #[error("no preimage within the residual bound")]
    NotInvertible,

    /// An exhaustive scan over `q^n` secrets would exceed the configured cap.
    #[error("secret space q^n = {space} exceeds enumeration cap {cap}")]
    SecretSpaceTooLarge { space: u128, cap: u128 },

    /// Rejection sampling failed to find an object within its iteration cap.
    #[error("rejection sampling exhausted after {tries} tries: {what}")]
    RejectionExhausted { what: &'static str, tries: usize },

    /// No modulus in the candidate list admits a valid parameter set.
    #[error("no candidate modulus admits a valid parameter set: {0}")]
    NoViableModulus(String),
}

/// Errors from the `tcf` layer.
#[derive(Debug, Error)]
pub enum TcfError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),

    /// Key generation could not produce a valid key (e.g. the injective-key
    /// shift rejection ran out of iterations).
    #[error("key generation failed: {0}")]
    KeyGeneration(String),

    /// A bit string does not decode to a vector with entries below q.
    #[error("bit string does not decode: block {block} has value {value} >= q = {q}")]
    BitDecode { block: usize, value: u64, q: u64 },

    /// Inversion found residuals passing the support check for both function
    /// branches (cannot happen for keys produced by the shipped generators).
    #[error("ambiguous inversion: both branches pass the support check")]
    AmbiguousInverse,

    /// Inversion found no branch whose residual passes the support check.
    #[error("no branch passes the support check")]
    NoBranch,
}

/// Errors from the `quantum` layer.
#[derive(Debug, Error)]
pub enum QuantumError {
    /// Allocating a register would exceed the amplitude budget.
    #[error("state of {requested} amplitudes exceeds budget {budget}")]
    BudgetExceeded { requested: u128, budget: u128 },

    /// An axis index is out of range or has the wrong dimension.
    #[error("bad register axis: {0}")]
    BadAxis(String),

    /// A state lost normalization beyond tolerance (internal consistency check).
    #[error("state norm {norm} deviates from 1 beyond tolerance")]
    NotNormalized { norm: f64 },

    /// Kraus operators do not sum to the identity within tolerance.
    #[error("channel is not trace preserving: max deviation {deviation}")]
    NotTracePreserving { deviation: f64 },

    /// A matrix expected to be a density operator fails its checks.
    #[error("not a density operator: {0}")]
    NotDensity(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Errors from the `protocol` layer.
#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Tcf(#[from] TcfError),

    #[error(transparent)]
    Lattice(#[from] LatticeError),

    #[error(transparent)]
    Quantum(#[from] QuantumError),

    /// A prover answer has the wrong shape for the round being played.
    #[error("malformed prover answer: {0}")]
    MalformedAnswer(String),

    /// A transcript failed to parse or replay.
    #[error("transcript error: {0}")]
    Transcript(String),

    /// A prover specification cannot be realized (bad attack shape, an attack
    /// that fails its commutation requirement, ...).
    #[error("invalid prover specification: {0}")]
    InvalidProver(String),
}

/// Errors from the `hamiltonian` layer.
#[derive(Debug, Error)]
pub enum HamiltonianError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),

    #[error(transparent)]
    Quantum(#[from] QuantumError),

    /// The term list is empty (no measurement to verify).
    #[error("hamiltonian has no terms")]
    Empty,

    /// A term references a qubit index outside the declared system.
    #[error("term {term} references qubit {qubit} but n = {n}")]
    QubitOutOfRange { term: usize, qubit: usize, n: usize },

    /// A term mixes X and Z on the same qubit or repeats a qubit.
    #[error("term {term} is not a product of distinct single-qubit X/Z factors")]
    MalformedTerm { term: usize },

    /// A coefficient is zero, NaN, or infinite.
    #[error("term {term} has unusable coefficient {coeff}")]
    BadCoefficient { term: usize, coeff: f64 },

    /// Dense simulation of this Hamiltonian would exceed the amplitude budget.
    #[error("n = {n} qubits exceeds the dense-simulation budget")]
    TooLarge { n: usize },

    /// The JSON description failed to parse.
    #[error("hamiltonian JSON: {0}")]
    Json(String),

    /// An energy-verification quantity failed a shape or range check.
    #[error("energy verification: {0}")]
    Verification(String),
}
