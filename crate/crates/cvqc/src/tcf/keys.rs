//! Key generation for the two function families.
//!
//! Both families publish the same shape of key — a matrix `A` and a shift
//! vector — and differ only in what the shift hides:
//!
//! - claw-free keys set `shift = A·s + e` for a binary secret `s` and small
//!   noise `e`: the two branches `y ~ A·x + b·shift + box-noise` then overlap
//!   pairwise (each `x` has claw partner `x - s`);
//! - injective keys set `shift = u` for a `u` far (in infinity norm) from
//!   every lattice point: the branches' supports are then all disjoint and
//!   `(b, x)` is recoverable.
//!
//! [`PublicKey`] carries no family marker on purpose: every prover-facing
//! operation is implemented once against `(A, shift)`, so the two families
//! are literally indistinguishable to code without the trapdoor.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::TcfError;
use crate::lattice::params::Params;
use crate::lattice::trapdoor::{gen_trap_separated, MatrixTrapdoor, ENUM_CAP};
use crate::lattice::zq::{signed_rep, ZqMatrix, ZqVector};
use crate::lattice::gauss::sample_gaussian_vec;

/// Iteration cap for the injective-key shift rejection loop.
pub const GEN_G_MAX_TRIES: usize = 64;

/// Draw cap for the box-margin rejection in key generation (measured pass
/// rate at the toy preset is ~2.5%, so this leaves orders of magnitude).
pub const GEN_TRAP_MAX_TRIES: usize = 100_000;

/// What a prover sees: the matrix and the branch shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicKey {
    pub a: ZqMatrix,
    pub shift: ZqVector,
}

/// Noise model for claw-free key generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseModel {
    /// Width-`B_V` truncated Gaussian noise (the default).
    GaussianBv,
    /// Zero noise: `shift = A·s` exactly. Every support statement becomes
    /// exact; used by the exactness-facing experiments.
    Zero,
}

/// Secret side of a claw-free key.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClawFreeTrapdoor {
    pub params: Params,
    pub lattice: MatrixTrapdoor,
    /// Binary secret: the claw is `x` paired with `x - s`.
    pub s: ZqVector,
    /// Key noise, `shift = A·s + e`.
    pub e: ZqVector,
}

/// Secret side of an injective key.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InjectiveTrapdoor {
    pub params: Params,
    pub lattice: MatrixTrapdoor,
}

/// The verifier's per-position secret: which family the key belongs to, and
/// its trapdoor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Trapdoor {
    ClawFree(ClawFreeTrapdoor),
    Injective(InjectiveTrapdoor),
}

/// Generates a claw-free key with the default Gaussian key noise.
pub fn gen_f<R: Rng + ?Sized>(
    params: &Params,
    rng: &mut R,
) -> Result<(PublicKey, ClawFreeTrapdoor), TcfError> {
    gen_f_with(params, NoiseModel::GaussianBv, rng)
}

/// Generates a claw-free key under the given noise model.
pub fn gen_f_with<R: Rng + ?Sized>(
    params: &Params,
    noise: NoiseModel,
    rng: &mut R,
) -> Result<(PublicKey, ClawFreeTrapdoor), TcfError> {
    let (a, lattice) = gen_trap_separated(
        params.n,
        params.m,
        params.q,
        params.b_p,
        GEN_TRAP_MAX_TRIES,
        rng,
    )?;
    let s = ZqVector::new(params.q, (0..params.n).map(|_| rng.gen_range(0..2u64)).collect());
    let e = match noise {
        NoiseModel::GaussianBv => sample_gaussian_vec(params.m, params.b_v, params.q, rng)?,
        NoiseModel::Zero => ZqVector::zeros(params.q, params.m),
    };
    let shift = a.mul_vec(&s)?.add(&e)?;
    let key = PublicKey { a, shift };
    let td = ClawFreeTrapdoor { params: params.clone(), lattice, s, e };
    Ok((key, td))
}

/// Whether `u` keeps infinity-norm distance strictly greater than `2 B_P`
/// from every lattice point `A·s` — the admissibility test for injective
/// shifts. Exhaustive over the secret space (guarded by the enumeration cap).
pub fn is_u_admissible(a: &ZqMatrix, u: &ZqVector, b_p: u64) -> Result<bool, TcfError> {
    let q = a.q();
    let n = a.cols();
    let space = (q as u128).pow(n as u32);
    if space > ENUM_CAP {
        return Err(TcfError::Lattice(
            crate::error::LatticeError::SecretSpaceTooLarge { space, cap: ENUM_CAP },
        ));
    }
    let cols: Vec<ZqVector> = (0..n).map(|c| a.col(c)).collect();
    let m = a.rows();
    let mut cur = vec![0u64; m]; // A·s for the current s, starting at s = 0
    let mut s = vec![0u64; n];
    loop {
        let dist_inf = (0..m)
            .map(|i| {
                let diff = (u.get(i) + q - cur[i]) % q;
                signed_rep(diff, q).unsigned_abs()
            })
            .max()
            .unwrap_or(0);
        if dist_inf <= 2 * b_p {
            return Ok(false);
        }
        let mut j = 0;
        loop {
            if j == n {
                return Ok(true);
            }
            for (ci, cv) in cur.iter_mut().enumerate() {
                *cv = (*cv + cols[j].get(ci)) % q;
            }
            s[j] += 1;
            if s[j] < q {
                break;
            }
            s[j] = 0;
            j += 1;
        }
    }
}

/// Whole-key attempts for injective generation: each draws a fresh matrix
/// and runs the shift rejection loop. The admissibility rate is a property
/// of the matrix, so a fresh matrix — not more shift draws — is the right
/// retry when the loop caps out.
pub const GEN_G_MAX_ATTEMPTS: usize = 16;

/// Generates an injective key: a separated matrix plus an admissible shift,
/// rejection-sampled with a cap of [`GEN_G_MAX_TRIES`] iterations. A capped
/// shift loop retries with a fresh matrix, up to [`GEN_G_MAX_ATTEMPTS`]
/// attempts; exhausting those signals pathological parameters.
pub fn gen_g<R: Rng + ?Sized>(
    params: &Params,
    rng: &mut R,
) -> Result<(PublicKey, InjectiveTrapdoor), TcfError> {
    for _ in 0..GEN_G_MAX_ATTEMPTS {
        let (a, lattice) = gen_trap_separated(
            params.n,
            params.m,
            params.q,
            params.b_p,
            GEN_TRAP_MAX_TRIES,
            rng,
        )?;
        for _ in 0..GEN_G_MAX_TRIES {
            let u = ZqVector::uniform(params.q, params.m, rng);
            if is_u_admissible(&a, &u, params.b_p)? {
                let key = PublicKey { a, shift: u };
                let td = InjectiveTrapdoor { params: params.clone(), lattice };
                return Ok((key, td));
            }
        }
    }
    Err(TcfError::KeyGeneration(format!(
        "no admissible injective shift in {GEN_G_MAX_ATTEMPTS} x {GEN_G_MAX_TRIES} draws"
    )))
}
