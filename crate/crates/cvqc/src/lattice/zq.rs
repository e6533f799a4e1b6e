//! Vectors and matrices over `Z_q` with canonical representatives in `[0, q)`
//! and signed representatives in `(-q/2, q/2]`.
//!
//! All norms are taken of the signed representative. Entries are stored
//! canonically; every operation reduces mod q on the way out.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::LatticeError;

/// Signed representative of `x mod q`, in `(-q/2, q/2]`.
///
/// For odd q this is the symmetric range `[-(q-1)/2, (q-1)/2]`; for even q
/// the value `q/2` maps to `+q/2`.
pub fn signed_rep(x: u64, q: u64) -> i64 {
    debug_assert!(x < q);
    if 2 * x <= q {
        x as i64
    } else {
        x as i64 - q as i64
    }
}

/// `|signed_rep(x, q)|` as an unsigned magnitude.
pub fn abs_signed(x: u64, q: u64) -> u64 {
    signed_rep(x, q).unsigned_abs()
}

/// A vector over `Z_q`, entries stored canonically in `[0, q)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ZqVector {
    q: u64,
    vals: Vec<u64>,
}

impl ZqVector {
    /// Builds a vector, reducing each entry mod q.
    pub fn new(q: u64, vals: Vec<u64>) -> Self {
        assert!(q >= 2, "modulus must be at least 2");
        let vals = vals.into_iter().map(|v| v % q).collect();
        ZqVector { q, vals }
    }

    /// Builds a vector from signed integers, reducing mod q.
    pub fn from_signed(q: u64, vals: &[i64]) -> Self {
        assert!(q >= 2, "modulus must be at least 2");
        let qi = q as i64;
        let vals = vals.iter().map(|&v| v.rem_euclid(qi) as u64).collect();
        ZqVector { q, vals }
    }

    pub fn zeros(q: u64, len: usize) -> Self {
        ZqVector { q, vals: vec![0; len] }
    }

    pub fn uniform<R: Rng + ?Sized>(q: u64, len: usize, rng: &mut R) -> Self {
        ZqVector { q, vals: (0..len).map(|_| rng.gen_range(0..q)).collect() }
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn vals(&self) -> &[u64] {
        &self.vals
    }

    pub fn get(&self, i: usize) -> u64 {
        self.vals[i]
    }

    pub fn set(&mut self, i: usize, v: u64) {
        self.vals[i] = v % self.q;
    }

    /// Signed representative of entry `i`.
    pub fn signed(&self, i: usize) -> i64 {
        signed_rep(self.vals[i], self.q)
    }

    pub fn signed_vals(&self) -> Vec<i64> {
        self.vals.iter().map(|&v| signed_rep(v, self.q)).collect()
    }

    fn check_match(&self, other: &Self) -> Result<(), LatticeError> {
        if self.q != other.q {
            return Err(LatticeError::ModulusMismatch { left: self.q, right: other.q });
        }
        if self.vals.len() != other.vals.len() {
            return Err(LatticeError::Dimension(format!(
                "vector lengths {} vs {}",
                self.vals.len(),
                other.vals.len()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, LatticeError> {
        self.check_match(other)?;
        let vals = self
            .vals
            .iter()
            .zip(&other.vals)
            .map(|(&a, &b)| (a + b) % self.q)
            .collect();
        Ok(ZqVector { q: self.q, vals })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LatticeError> {
        self.check_match(other)?;
        let vals = self
            .vals
            .iter()
            .zip(&other.vals)
            .map(|(&a, &b)| (a + self.q - b) % self.q)
            .collect();
        Ok(ZqVector { q: self.q, vals })
    }

    pub fn neg(&self) -> Self {
        let vals = self.vals.iter().map(|&a| (self.q - a) % self.q).collect();
        ZqVector { q: self.q, vals }
    }

    /// Scales every entry by `c mod q`.
    pub fn scale(&self, c: u64) -> Self {
        let c = c % self.q;
        let vals = self
            .vals
            .iter()
            .map(|&a| ((a as u128 * c as u128) % self.q as u128) as u64)
            .collect();
        ZqVector { q: self.q, vals }
    }

    /// Inner product mod q.
    pub fn dot(&self, other: &Self) -> Result<u64, LatticeError> {
        self.check_match(other)?;
        let q = self.q as u128;
        let mut acc: u128 = 0;
        for (&a, &b) in self.vals.iter().zip(&other.vals) {
            acc = (acc + a as u128 * b as u128) % q;
        }
        Ok(acc as u64)
    }

    /// Squared Euclidean norm of the signed representative.
    pub fn norm2_signed(&self) -> u128 {
        self.vals
            .iter()
            .map(|&v| {
                let s = signed_rep(v, self.q) as i128;
                (s * s) as u128
            })
            .sum()
    }

    /// Infinity norm of the signed representative.
    pub fn norm_inf_signed(&self) -> u64 {
        self.vals.iter().map(|&v| abs_signed(v, self.q)).max().unwrap_or(0)
    }

    /// L1 norm of the signed representative.
    pub fn norm1_signed(&self) -> u128 {
        self.vals.iter().map(|&v| abs_signed(v, self.q) as u128).sum()
    }
}

/// A row-major matrix over `Z_q`, entries stored canonically in `[0, q)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZqMatrix {
    q: u64,
    rows: usize,
    cols: usize,
    vals: Vec<u64>,
}

impl ZqMatrix {
    /// Builds a matrix from row-major entries, reducing each mod q.
    pub fn new(q: u64, rows: usize, cols: usize, vals: Vec<u64>) -> Result<Self, LatticeError> {
        assert!(q >= 2, "modulus must be at least 2");
        if vals.len() != rows * cols {
            return Err(LatticeError::Dimension(format!(
                "{} entries for a {}x{} matrix",
                vals.len(),
                rows,
                cols
            )));
        }
        let vals = vals.into_iter().map(|v| v % q).collect();
        Ok(ZqMatrix { q, rows, cols, vals })
    }

    pub fn zeros(q: u64, rows: usize, cols: usize) -> Self {
        ZqMatrix { q, rows, cols, vals: vec![0; rows * cols] }
    }

    pub fn uniform<R: Rng + ?Sized>(q: u64, rows: usize, cols: usize, rng: &mut R) -> Self {
        let vals = (0..rows * cols).map(|_| rng.gen_range(0..q)).collect();
        ZqMatrix { q, rows, cols, vals }
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn vals(&self) -> &[u64] {
        &self.vals
    }

    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.vals[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: u64) {
        self.vals[r * self.cols + c] = v % self.q;
    }

    pub fn row(&self, r: usize) -> ZqVector {
        ZqVector {
            q: self.q,
            vals: self.vals[r * self.cols..(r + 1) * self.cols].to_vec(),
        }
    }

    pub fn col(&self, c: usize) -> ZqVector {
        ZqVector {
            q: self.q,
            vals: (0..self.rows).map(|r| self.get(r, c)).collect(),
        }
    }

    /// Matrix-vector product `A·x` over `Z_q`.
    pub fn mul_vec(&self, x: &ZqVector) -> Result<ZqVector, LatticeError> {
        if x.q() != self.q {
            return Err(LatticeError::ModulusMismatch { left: self.q, right: x.q() });
        }
        if x.len() != self.cols {
            return Err(LatticeError::Dimension(format!(
                "matrix has {} cols, vector has {} entries",
                self.cols,
                x.len()
            )));
        }
        let q = self.q as u128;
        let mut out = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let mut acc: u128 = 0;
            for c in 0..self.cols {
                acc = (acc + self.get(r, c) as u128 * x.get(c) as u128) % q;
            }
            out.push(acc as u64);
        }
        Ok(ZqVector { q: self.q, vals: out })
    }

    /// Matrix product `self · other` over `Z_q`.
    pub fn mul_mat(&self, other: &ZqMatrix) -> Result<ZqMatrix, LatticeError> {
        if other.q != self.q {
            return Err(LatticeError::ModulusMismatch { left: self.q, right: other.q });
        }
        if self.cols != other.rows {
            return Err(LatticeError::Dimension(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let q = self.q as u128;
        let mut vals = vec![0u64; self.rows * other.cols];
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k) as u128;
                if a == 0 {
                    continue;
                }
                for c in 0..other.cols {
                    let idx = r * other.cols + c;
                    vals[idx] =
                        ((vals[idx] as u128 + a * other.get(k, c) as u128) % q) as u64;
                }
            }
        }
        Ok(ZqMatrix { q: self.q, rows: self.rows, cols: other.cols, vals })
    }

    pub fn add(&self, other: &ZqMatrix) -> Result<ZqMatrix, LatticeError> {
        if other.q != self.q {
            return Err(LatticeError::ModulusMismatch { left: self.q, right: other.q });
        }
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LatticeError::Dimension(format!(
                "{}x{} plus {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let vals = self
            .vals
            .iter()
            .zip(&other.vals)
            .map(|(&a, &b)| (a + b) % self.q)
            .collect();
        Ok(ZqMatrix { q: self.q, rows: self.rows, cols: self.cols, vals })
    }

    pub fn sub(&self, other: &ZqMatrix) -> Result<ZqMatrix, LatticeError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> ZqMatrix {
        let vals = self.vals.iter().map(|&a| (self.q - a) % self.q).collect();
        ZqMatrix { q: self.q, rows: self.rows, cols: self.cols, vals }
    }

    /// Stacks matrices vertically (all must share q and column count).
    pub fn vstack(parts: &[&ZqMatrix]) -> Result<ZqMatrix, LatticeError> {
        assert!(!parts.is_empty(), "vstack of nothing");
        let q = parts[0].q;
        let cols = parts[0].cols;
        let mut vals = Vec::new();
        let mut rows = 0;
        for p in parts {
            if p.q != q {
                return Err(LatticeError::ModulusMismatch { left: q, right: p.q });
            }
            if p.cols != cols {
                return Err(LatticeError::Dimension(format!(
                    "vstack column counts {} vs {}",
                    cols, p.cols
                )));
            }
            vals.extend_from_slice(&p.vals);
            rows += p.rows;
        }
        Ok(ZqMatrix { q, rows, cols, vals })
    }

    /// Rows `lo..hi` as a new matrix.
    pub fn row_block(&self, lo: usize, hi: usize) -> ZqMatrix {
        assert!(lo <= hi && hi <= self.rows);
        ZqMatrix {
            q: self.q,
            rows: hi - lo,
            cols: self.cols,
            vals: self.vals[lo * self.cols..hi * self.cols].to_vec(),
        }
    }

    /// Max over entries of `|signed|`.
    pub fn norm_inf_signed(&self) -> u64 {
        self.vals.iter().map(|&v| abs_signed(v, self.q)).max().unwrap_or(0)
    }
}

/// Rank of a matrix over the field `Z_q` (q prime), by Gaussian elimination.
pub fn rank_mod_q(mat: &ZqMatrix) -> usize {
    let q = mat.q();
    let mut m: Vec<Vec<u64>> = (0..mat.rows())
        .map(|r| (0..mat.cols()).map(|c| mat.get(r, c)).collect())
        .collect();
    let (rows, cols) = (mat.rows(), mat.cols());
    let mut rank = 0;
    let mut pivot_row = 0;
    for col in 0..cols {
        let Some(src) = (pivot_row..rows).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(pivot_row, src);
        let inv = mod_inverse(m[pivot_row][col], q).expect("prime modulus");
        for c in col..cols {
            m[pivot_row][c] = ((m[pivot_row][c] as u128 * inv as u128) % q as u128) as u64;
        }
        for r in 0..rows {
            if r != pivot_row && m[r][col] != 0 {
                let f = m[r][col];
                for c in col..cols {
                    let sub = (f as u128 * m[pivot_row][c] as u128) % q as u128;
                    m[r][c] = ((m[r][c] as u128 + q as u128 * q as u128 - sub)
                        % q as u128) as u64;
                }
            }
        }
        rank += 1;
        pivot_row += 1;
        if pivot_row == rows {
            break;
        }
    }
    rank
}

/// Multiplicative inverse mod q (q prime), via extended Euclid.
pub fn mod_inverse(a: u64, q: u64) -> Option<u64> {
    let a = a % q;
    if a == 0 {
        return None;
    }
    let (mut t, mut new_t): (i128, i128) = (0, 1);
    let (mut r, mut new_r): (i128, i128) = (q as i128, a as i128);
    while new_r != 0 {
        let quot = r / new_r;
        (t, new_t) = (new_t, t - quot * new_t);
        (r, new_r) = (new_r, r - quot * new_r);
    }
    if r != 1 {
        return None;
    }
    Some(t.rem_euclid(q as i128) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn signed_rep_symmetric_range_odd_q() {
        // q = 7: canonical 0..6 maps to 0,1,2,3,-3,-2,-1
        let got: Vec<i64> = (0..7).map(|x| signed_rep(x, 7)).collect();
        assert_eq!(got, vec![0, 1, 2, 3, -3, -2, -1]);
    }

    #[test]
    fn signed_rep_even_q_keeps_half() {
        // q = 8: the value 4 sits at +q/2 by convention.
        let got: Vec<i64> = (0..8).map(|x| signed_rep(x, 8)).collect();
        assert_eq!(got, vec![0, 1, 2, 3, 4, -3, -2, -1]);
    }

    #[test]
    fn vector_arithmetic_round_trip() {
        let a = ZqVector::new(7, vec![1, 6, 3]);
        let b = ZqVector::new(7, vec![5, 5, 5]);
        let s = a.add(&b).unwrap();
        assert_eq!(s.vals(), &[6, 4, 1]);
        let d = s.sub(&b).unwrap();
        assert_eq!(d, a);
        assert_eq!(a.dot(&b).unwrap(), (5 + 30 + 15) % 7);
    }

    #[test]
    fn norms_use_signed_representative() {
        let v = ZqVector::new(7, vec![6, 3, 0, 5]); // signed: -1, 3, 0, -2
        assert_eq!(v.norm2_signed(), 1 + 9 + 0 + 4);
        assert_eq!(v.norm_inf_signed(), 3);
        assert_eq!(v.norm1_signed(), 6);
    }

    #[test]
    fn matvec_matches_by_hand() {
        let a = ZqMatrix::new(5, 2, 3, vec![1, 2, 3, 4, 0, 1]).unwrap();
        let x = ZqVector::new(5, vec![2, 1, 3]);
        let y = a.mul_vec(&x).unwrap();
        assert_eq!(y.vals(), &[(2 + 2 + 9) % 5, (8 + 0 + 3) % 5]);
    }

    #[test]
    fn matmul_associates_with_matvec() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let a = ZqMatrix::uniform(11, 4, 3, &mut rng);
        let b = ZqMatrix::uniform(11, 3, 2, &mut rng);
        let x = ZqVector::uniform(11, 2, &mut rng);
        let left = a.mul_mat(&b).unwrap().mul_vec(&x).unwrap();
        let right = a.mul_vec(&b.mul_vec(&x).unwrap()).unwrap();
        assert_eq!(left, right);
    }

    #[test]
    fn rank_detects_dependent_rows() {
        let full = ZqMatrix::new(5, 2, 3, vec![1, 2, 3, 0, 1, 0]).unwrap();
        assert_eq!(rank_mod_q(&full), 2);
        // Second row is 2x the first mod 5: (2, 4, 6) = (2, 4, 1).
        let dep = ZqMatrix::new(5, 2, 3, vec![1, 2, 3, 2, 4, 1]).unwrap();
        assert_eq!(rank_mod_q(&dep), 1);
        assert_eq!(rank_mod_q(&ZqMatrix::zeros(5, 3, 3)), 0);
    }

    #[test]
    fn mod_inverse_matches_definition() {
        for q in [3u64, 5, 7, 83] {
            for a in 1..q {
                let inv = mod_inverse(a, q).unwrap();
                assert_eq!((a * inv) % q, 1, "a={a} q={q}");
            }
        }
        assert_eq!(mod_inverse(0, 7), None);
    }

    proptest! {
        #[test]
        fn signed_rep_in_range(x in 0u64..1000, q in 2u64..1000) {
            let x = x % q;
            let s = signed_rep(x, q);
            prop_assert!(2 * s > -(q as i64) && 2 * s <= q as i64);
            prop_assert_eq!(s.rem_euclid(q as i64) as u64, x);
        }

        #[test]
        fn add_neg_cancels(vals in proptest::collection::vec(0u64..83, 1..8)) {
            let v = ZqVector::new(83, vals);
            let z = v.add(&v.neg()).unwrap();
            prop_assert_eq!(z, ZqVector::zeros(83, v.len()));
        }
    }
}
