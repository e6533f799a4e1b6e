//! Exact quantum simulation of the prover side: dense states over named
//! registers, the commitment subroutine with its round measurements,
//! density operators with CPTP maps, distance functionals, and the Z-twirl
//! equivalence check.
//!
//! Everything here is exact up to floating point: measurements sample from
//! fully computed marginals, and every distribution-level claim in the
//! protocol layer can be checked against closed-form values.

pub mod commit;
pub mod density_op;
pub mod distance;
pub mod state;

pub use commit::{
    apply_u_j, apply_u_j_at, commit_qubit, commit_y_distribution, commit_y_probability_chain,
    commit_y_probability_mixture, hadamard_round_distribution, hadamard_round_measure,
    samp_commit, test_round_measure, x_from_index, x_index, REG_COMMITTED, REG_PREIMAGE,
};
pub use density_op::{
    embed_register_op, pauli_block_decompose, pauli_block_reconstruct, pauli_x, pauli_xz, pauli_z,
    random_density, walsh_matrix, with_hadamard_measurement, z_twirl_check, z_twirl_families,
    CPTPMap, DensityOp, OP_TOL,
};
pub use distance::{hellinger2, trace_distance, trace_distance_matrices, tv_distance};
pub use state::{sample_index, MeasBasis, QState, RegisterLayout, AMP_BUDGET, NORM_TOL};
