//! Integer lattice substrate: `Z_q` linear algebra, truncated discrete
//! Gaussians, parameter sets, gadget trapdoors, and lossy matrices.

pub mod gauss;
pub mod lossy;
pub mod params;
pub mod trapdoor;
pub mod zq;

pub use gauss::{
    gaussian_density, hellinger2_shift_bound, hellinger2_shifted, sample_gaussian_vec,
    tv_shifted_exact, GaussDensity,
};
pub use lossy::{lossy_sample, lossy_sample_parts, LossySample};
pub use params::{ceil_log2, is_prime, Params};
pub use trapdoor::{
    brute_force_invert, gadget_matrix, gen_trap, gen_trap_separated, invert, min_box_margin2,
    min_nonzero_dist2, MatrixTrapdoor, ENUM_CAP,
};
pub use zq::{abs_signed, mod_inverse, rank_mod_q, signed_rep, ZqMatrix, ZqVector};
