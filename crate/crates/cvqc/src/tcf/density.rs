//! Range densities of the function families and the public support check.
//!
//! For key `(A, shift)`, branch `b`, and preimage `x`, the published range
//! density is the truncated Gaussian box centered at `A·x + b·shift`. The
//! same code serves both families — which is the point: the support check
//! and sampler cannot depend on anything the trapdoor knows.

use rand::Rng;

use crate::error::TcfError;
use crate::lattice::gauss::{hellinger2_shifted, GaussDensity};
use crate::lattice::zq::ZqVector;
use crate::tcf::keys::{ClawFreeTrapdoor, PublicKey};

/// A product truncated-Gaussian density centered at a lattice-coset point.
#[derive(Debug, Clone)]
pub struct RangeDensity {
    center: ZqVector,
    gauss: GaussDensity,
}

impl RangeDensity {
    pub fn new(center: ZqVector, b_p: u64) -> Result<Self, TcfError> {
        let gauss = GaussDensity::new(center.q(), b_p)?;
        Ok(RangeDensity { center, gauss })
    }

    pub fn center(&self) -> &ZqVector {
        &self.center
    }

    /// Probability of `y` under the product density.
    pub fn prob(&self, y: &ZqVector) -> f64 {
        assert_eq!(y.len(), self.center.len(), "length mismatch");
        let q = self.center.q();
        (0..y.len())
            .map(|i| self.gauss.prob((y.get(i) + q - self.center.get(i)) % q))
            .product()
    }

    /// Probability of coordinate `i` taking value `y_i`.
    pub fn coord_prob(&self, i: usize, y_i: u64) -> f64 {
        let q = self.center.q();
        self.gauss.prob((y_i % q + q - self.center.get(i)) % q)
    }

    /// Whether `y` lies in the support box.
    pub fn support_contains(&self, y: &ZqVector) -> bool {
        let q = self.center.q();
        (0..y.len()).all(|i| self.gauss.in_support((y.get(i) + q - self.center.get(i)) % q))
    }

    /// Samples `center + box noise`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ZqVector {
        let q = self.center.q();
        ZqVector::new(
            q,
            (0..self.center.len())
                .map(|i| (self.center.get(i) + self.gauss.sample(rng)) % q)
                .collect(),
        )
    }
}

/// Published range density for `(b, x)`: box centered at `A·x + b·shift`.
pub fn range_density(
    key: &PublicKey,
    b_p: u64,
    b: u8,
    x: &ZqVector,
) -> Result<RangeDensity, TcfError> {
    debug_assert!(b <= 1);
    let mut center = key.a.mul_vec(x).map_err(TcfError::Lattice)?;
    if b == 1 {
        center = center.add(&key.shift).map_err(TcfError::Lattice)?;
    }
    RangeDensity::new(center, b_p)
}

/// Hidden true density of a claw-free key for `(b, x)`: box centered at
/// `A·x + b·A·s` (the key noise removed). Coincides with the published
/// density at `b = 0`, and for zero-noise keys at both branches.
pub fn true_density(
    key: &PublicKey,
    td: &ClawFreeTrapdoor,
    b: u8,
    x: &ZqVector,
) -> Result<RangeDensity, TcfError> {
    debug_assert!(b <= 1);
    let mut center = key.a.mul_vec(x).map_err(TcfError::Lattice)?;
    if b == 1 {
        let a_s = key.a.mul_vec(&td.s).map_err(TcfError::Lattice)?;
        center = center.add(&a_s).map_err(TcfError::Lattice)?;
    }
    RangeDensity::new(center, td.params.b_p)
}

/// The public support check: is `y` in the box of `(b, x)`? Identical for
/// both families by construction (it reads only the public key).
pub fn chk(key: &PublicKey, b_p: u64, b: u8, x: &ZqVector, y: &ZqVector) -> Result<bool, TcfError> {
    Ok(range_density(key, b_p, b, x)?.support_contains(y))
}

/// Exact squared Hellinger distance between the true and published densities
/// of a claw-free key, `H^2(f_{k,b}(x), f'_{k,b}(x))`. Independent of `x`
/// (both are boxes shifted by the same key noise), zero at `b = 0`.
pub fn range_mismatch2(td: &ClawFreeTrapdoor, b: u8) -> Result<f64, TcfError> {
    if b == 0 {
        return Ok(0.0);
    }
    let h2 = hellinger2_shifted(td.params.b_p, &td.e).map_err(TcfError::Lattice)?;
    // The product of Bhattacharyya coefficients can overshoot 1 by an ulp at
    // zero shift; a squared distance is nonnegative by definition.
    Ok(h2.max(0.0))
}
