//! Interactive measurement protocol on lattice trapdoor claw-free functions,
//! built small enough that its correctness claims are exhaustively checkable.
//!
//! The stack, bottom up:
//!
//! - [`lattice`]: arithmetic over `Z_q`, truncated discrete Gaussians, gadget
//!   trapdoors with exact inversion, lossy matrix sampling.
//! - [`tcf`]: the claw-free / injective function family pair built on those
//!   trapdoors — key generation, densities, inversion, support checks, and the
//!   bit-decoding maps used by the protocol.
//! - [`quantum`]: a dense state-vector simulator for the prover side, plus a
//!   small density-operator lab for channel-level identities (twirls, distance
//!   measures).
//! - [`protocol`]: the four-message commit-and-measure protocol between a
//!   classical verifier and a simulated prover, with transcripts, replay, and
//!   the state-construction hybrids used in the soundness argument.
//! - [`hamiltonian`]: XZ Hamiltonians, ground energies, and the
//!   energy-verification layer that drives the protocol as a subroutine.
//! - [`harness`]: seeded experiments and the identity/lemma checks with
//!   negative controls.

pub mod error;
pub mod hamiltonian;
pub mod harness;
pub mod lattice;
pub mod protocol;
pub mod quantum;
pub mod tcf;
