//! The interactive measurement protocol.
//!
//! A classical verifier leads a prover holding an n-qubit state through a
//! five-message exchange: per-qubit keys (injective where the verifier wants
//! a standard-basis read, claw-free where it wants a Hadamard-basis read),
//! the prover's commitment strings, a round choice, the prover's answers,
//! and a verdict. Test rounds audit the commitment; Hadamard rounds decode
//! one measurement bit per qubit through the trapdoors.
//!
//! - [`messages`]: wire types and the serializable [`Transcript`];
//! - [`verifier`]: key generation, answer checking, decoding;
//! - [`prover`]: honest and attack-characterized provers over simulated
//!   quantum state;
//! - [`session`]: orchestration, replay, empirical distributions;
//! - [`extraction`]: reconstruction of the state a prover effectively
//!   measures, with exact decode distributions for frozen sessions.

pub mod extraction;
pub mod messages;
pub mod prover;
pub mod session;
pub mod verifier;

pub use extraction::{
    construct_underlying_state, density_distribution, exact_decode_distribution,
    exact_distribution, extract_density, prepare_committed_session,
    support_on_valid_preimages, CommittedSession, DecodeVariant, KeyVariant,
};

pub use messages::{
    BasisChoice, Direction, HadamardAnswer, Message, Payload, QubitVerdict, RoundChoice,
    RoundType, TestAnswer, Transcript,
};
pub use prover::{
    apply_attack_branches, apply_attack_sampled, attack_library, row_major, x_trivialize_attack,
    z_twirl_attack, Attack, InputState, ProverSim, ProverSpec, ATTACK_TOL, REG_AUX,
};
pub use session::{
    estimate_distribution, pack_bits, replay, run_session, EmpiricalDistribution, ReplayReport,
    SessionConfig,
};
pub use verifier::{verifier_keygen, Verifier};
