//! Truncated discrete Gaussians on `Z_q`.
//!
//! The one-dimensional density with width parameter `B` is proportional to
//! `exp(-pi * |x|^2 / B^2)` on the support `{x : |x| <= B}` (signed
//! representative) and zero elsewhere; m-dimensional versions are coordinate
//! products, so their support is the box with per-coordinate radius `B`.

use rand::Rng;

use crate::error::LatticeError;
use crate::lattice::zq::{abs_signed, ZqVector};

/// Tabulated one-dimensional truncated Gaussian over `Z_q`.
#[derive(Debug, Clone)]
pub struct GaussDensity {
    q: u64,
    b: u64,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl GaussDensity {
    /// Tabulates the density. Requires `2B + 1 <= q` so the support does not
    /// wrap around the torus (`B = 0` gives a point mass at 0).
    pub fn new(q: u64, b: u64) -> Result<Self, LatticeError> {
        if q < 2 {
            return Err(LatticeError::InvalidParams(format!("modulus {q} < 2")));
        }
        if 2 * b + 1 > q {
            return Err(LatticeError::InvalidParams(format!(
                "support width 2B+1 = {} exceeds q = {q}",
                2 * b + 1
            )));
        }
        let bf = b as f64;
        let mut probs: Vec<f64> = (0..q)
            .map(|x| {
                let a = abs_signed(x, q);
                if a <= b {
                    let af = a as f64;
                    if b == 0 {
                        1.0
                    } else {
                        (-std::f64::consts::PI * af * af / (bf * bf)).exp()
                    }
                } else {
                    0.0
                }
            })
            .collect();
        let z: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= z;
        }
        let mut cdf = Vec::with_capacity(q as usize);
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cdf.push(acc);
        }
        Ok(GaussDensity { q, b, probs, cdf })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn width(&self) -> u64 {
        self.b
    }

    /// Probability of the canonical value `x`.
    pub fn prob(&self, x: u64) -> f64 {
        self.probs[(x % self.q) as usize]
    }

    /// Whether `x` lies in the support (|signed| <= B).
    pub fn in_support(&self, x: u64) -> bool {
        abs_signed(x % self.q, self.q) <= self.b
    }

    /// Product probability of a vector under the coordinate-wise density.
    pub fn prob_vec(&self, v: &ZqVector) -> f64 {
        assert_eq!(v.q(), self.q, "modulus mismatch");
        v.vals().iter().map(|&x| self.probs[x as usize]).product()
    }

    /// Inverse-CDF sample of a canonical value.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.gen();
        self.cdf.partition_point(|&c| c <= u) as u64 % self.q
    }

    /// Bhattacharyya coefficient between this density and its shift by `e`
    /// (canonical): `sum_x sqrt(p(x) p(x - e))`.
    pub fn bhattacharyya_shift(&self, e: u64) -> f64 {
        let e = e % self.q;
        (0..self.q)
            .map(|x| {
                let shifted = (x + self.q - e) % self.q;
                (self.probs[x as usize] * self.probs[shifted as usize]).sqrt()
            })
            .sum()
    }
}

/// One-shot density lookup: probability of canonical `x` under the truncated
/// Gaussian of width `B` over `Z_q`.
pub fn gaussian_density(x: u64, b: u64, q: u64) -> Result<f64, LatticeError> {
    Ok(GaussDensity::new(q, b)?.prob(x))
}

/// Samples an m-vector with i.i.d. truncated-Gaussian coordinates.
pub fn sample_gaussian_vec<R: Rng + ?Sized>(
    m: usize,
    b: u64,
    q: u64,
    rng: &mut R,
) -> Result<ZqVector, LatticeError> {
    let g = GaussDensity::new(q, b)?;
    Ok(ZqVector::new(q, (0..m).map(|_| g.sample(rng)).collect()))
}

/// Exact squared Hellinger distance between the m-dimensional product density
/// and its shift by `e`, via the product structure:
/// `H^2 = 1 - prod_i BC(e_i)` where `BC` is the one-dimensional
/// Bhattacharyya coefficient.
pub fn hellinger2_shifted(b: u64, e: &ZqVector) -> Result<f64, LatticeError> {
    let g = GaussDensity::new(e.q(), b)?;
    let bc: f64 = e.vals().iter().map(|&ei| g.bhattacharyya_shift(ei)).product();
    Ok(1.0 - bc)
}

/// Closed-form upper bound `1 - exp(-2 pi sqrt(m) ||e|| / B)` on the squared
/// Hellinger distance between the product density and its shift by `e`
/// (Euclidean norm of the signed representative). The squared total-variation
/// distance is bounded by twice this quantity.
pub fn hellinger2_shift_bound(b: u64, e: &ZqVector) -> f64 {
    let m = e.len() as f64;
    let norm = (e.norm2_signed() as f64).sqrt();
    1.0 - (-2.0 * std::f64::consts::PI * m.sqrt() * norm / b as f64).exp()
}

/// Exact total-variation distance between the m-dimensional product density
/// and its shift by `e`, by enumerating all `q^m` points. Guarded by `cap`.
pub fn tv_shifted_exact(b: u64, e: &ZqVector, cap: u128) -> Result<f64, LatticeError> {
    let q = e.q();
    let m = e.len();
    let space = (q as u128).checked_pow(m as u32).ok_or_else(|| {
        LatticeError::InvalidParams("q^m overflows".into())
    })?;
    if space > cap {
        return Err(LatticeError::SecretSpaceTooLarge { space, cap });
    }
    let g = GaussDensity::new(q, b)?;
    let mut acc = 0.0;
    let mut y = vec![0u64; m];
    loop {
        let mut p = 1.0;
        let mut p_shift = 1.0;
        for i in 0..m {
            p *= g.prob(y[i]);
            p_shift *= g.prob((y[i] + q - e.get(i)) % q);
        }
        acc += (p - p_shift).abs();
        // odometer over Z_q^m
        let mut i = 0;
        loop {
            if i == m {
                return Ok(acc / 2.0);
            }
            y[i] += 1;
            if y[i] < q {
                break;
            }
            y[i] = 0;
            i += 1;
        }
    }
}
