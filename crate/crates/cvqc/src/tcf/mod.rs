//! Trapdoor claw-free and trapdoor injective function families over `Z_q`.
//!
//! Both families share one public-key shape — a separated-decoding matrix
//! `A` and a shift vector — and one evaluation rule: branch `b` of the
//! function is a box-truncated Gaussian centered at `A·x + b·shift`. What
//! differs is how the shift is made. The claw-free generator hides a lattice
//! relation in it (`shift = A·s + e`), so the two branches are near-perfect
//! translates and every range point has a claw `(x, x − s)`. The injective
//! generator picks the shift far from *every* `A·s`, so the branches can
//! never collide and `(b, x)` is recoverable exactly.
//!
//! The module also carries the bit-level plumbing the measurement protocol
//! needs: the preimage bit-encoding `j_map`, the mask embedding that turns a
//! claw's XOR difference into secret bits, and the admissibility policy for
//! measured strings.

pub mod density;
pub mod gset;
pub mod invert;
pub mod jmap;
pub mod keys;

pub use density::{chk, range_density, range_mismatch2, true_density, RangeDensity};
pub use gset::GSetPolicy;
pub use invert::{claw_delta_bits, claw_of, hadamard_decode_bit, inv_f, inv_g};
pub use jmap::{
    bit_of, bits_to_u64, decode_identity_check, dot_bits, embed_dhat, j_inv, j_map, u64_to_bits,
    wraparound, DecodeIdentityReport,
};
pub use keys::{
    gen_f, gen_f_with, gen_g, is_u_admissible, ClawFreeTrapdoor, InjectiveTrapdoor, NoiseModel,
    PublicKey, Trapdoor,
};
