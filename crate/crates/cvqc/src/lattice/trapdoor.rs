//! Gadget-based matrix trapdoors: generate a public matrix `A` together with
//! secret data that makes recovering `s` from `A·s + e` easy, for noise `e`
//! within a norm bound.
//!
//! Construction: `A` stacks a uniform block `Ā` (m̄ rows) over a gadget block
//! `G - R·Ā`, where `R` has small (width-1 Gaussian) entries and `G` is the
//! block-diagonal powers-of-`base` matrix. Then `[R | I]·A = G`, so from
//! `y = A·s + e` the holder of `R` computes `z = G·s + (e_gad + R·e_top)` and
//! reads digits of each `s_j` through small noise.
//!
//! The digit count adapts to the available rows: `digits = min(ceil(log2 q),
//! floor((m - 2n) / n))` with `base` the smallest integer whose `digits`-th
//! power reaches `q`. With the standard row slack (`m >= n ceil(log2 q) + 2n`)
//! this is exactly the base-2 gadget; tighter `m` trades base size for rows.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::LatticeError;
use crate::lattice::gauss::GaussDensity;
use crate::lattice::zq::{signed_rep, ZqMatrix, ZqVector};

/// Cap on `q^n` for exhaustive secret-space scans (brute-force inversion,
/// separation checks).
pub const ENUM_CAP: u128 = 1 << 24;

/// Secret data accompanying a public matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixTrapdoor {
    /// Small-entry transform, `(n * digits) x m_bar`.
    r: ZqMatrix,
    /// Gadget digit base.
    base: u64,
    /// Gadget digits per secret coordinate.
    digits: usize,
    /// Rows of the uniform block.
    m_bar: usize,
    n: usize,
    m: usize,
    q: u64,
}

impl MatrixTrapdoor {
    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn digits(&self) -> usize {
        self.digits
    }

    pub fn m_bar(&self) -> usize {
        self.m_bar
    }

    pub fn transform(&self) -> &ZqMatrix {
        &self.r
    }
}

/// The gadget matrix: `n * digits` rows, `n` columns; row `j*digits + i` has
/// `base^i` in column `j`.
pub fn gadget_matrix(n: usize, digits: usize, base: u64, q: u64) -> ZqMatrix {
    let mut g = ZqMatrix::zeros(q, n * digits, n);
    for j in 0..n {
        let mut pow: u64 = 1 % q;
        for i in 0..digits {
            g.set(j * digits + i, j, pow);
            pow = ((pow as u128 * base as u128) % q as u128) as u64;
        }
    }
    g
}

fn gadget_shape(n: usize, m: usize, q: u64) -> Result<(usize, u64), LatticeError> {
    if n < 1 {
        return Err(LatticeError::InvalidParams("n must be >= 1".into()));
    }
    if m < 3 * n {
        return Err(LatticeError::Dimension(format!(
            "m = {m} must be >= 3n = {} to fit a gadget",
            3 * n
        )));
    }
    let digits = crate::lattice::params::ceil_log2(q).min((m - 2 * n) / n);
    // Smallest base with base^digits >= q.
    let pow = |b: u64| -> u128 { (0..digits).fold(1u128, |acc, _| acc.saturating_mul(b as u128)) };
    let mut base = (q as f64).powf(1.0 / digits as f64).ceil() as u64;
    base = base.max(2);
    while base > 2 && pow(base - 1) >= q as u128 {
        base -= 1;
    }
    while pow(base) < q as u128 {
        base += 1;
    }
    Ok((digits, base))
}

/// Generates a public matrix with a trapdoor. `A` is `m x n`; its first
/// `m_bar` rows are uniform and the rest hide the gadget.
pub fn gen_trap<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    q: u64,
    rng: &mut R,
) -> Result<(ZqMatrix, MatrixTrapdoor), LatticeError> {
    let (digits, base) = gadget_shape(n, m, q)?;
    let w_g = n * digits;
    let m_bar = m - w_g;
    let a_bar = ZqMatrix::uniform(q, m_bar, n, rng);
    let width_one = GaussDensity::new(q, 1)?;
    let mut r = ZqMatrix::zeros(q, w_g, m_bar);
    for row in 0..w_g {
        // Resample all-zero rows: a zero row would leave that gadget row's
        // constant visible in A, breaking per-entry uniformity.
        loop {
            let mut any = false;
            for col in 0..m_bar {
                let v = width_one.sample(rng);
                r.set(row, col, v);
                any |= v != 0;
            }
            if any {
                break;
            }
        }
    }
    let g = gadget_matrix(n, digits, base, q);
    let gadget_rows = g.sub(&r.mul_mat(&a_bar)?)?;
    let a = ZqMatrix::vstack(&[&a_bar, &gadget_rows])?;
    Ok((a, MatrixTrapdoor { r, base, digits, m_bar, n, m, q }))
}

/// Squared Euclidean length of the shortest nonzero lattice vector
/// `{A·t : t in Z_q^n, t != 0}`, by exhaustive scan (guarded by [`ENUM_CAP`]).
pub fn min_nonzero_dist2(a: &ZqMatrix) -> Result<u128, LatticeError> {
    let q = a.q();
    let n = a.cols();
    let space = (q as u128)
        .checked_pow(n as u32)
        .ok_or(LatticeError::SecretSpaceTooLarge { space: u128::MAX, cap: ENUM_CAP })?;
    if space > ENUM_CAP {
        return Err(LatticeError::SecretSpaceTooLarge { space, cap: ENUM_CAP });
    }
    let cols: Vec<ZqVector> = (0..n).map(|c| a.col(c)).collect();
    let m = a.rows();
    let mut cur = vec![0u64; m];
    let mut t = vec![0u64; n];
    let mut best = u128::MAX;
    // Odometer over t; each step (including carries) adds one column to cur,
    // because wrapping a coordinate q-1 -> 0 is also a +1 mod q.
    loop {
        let mut j = 0;
        loop {
            if j == n {
                return Ok(best);
            }
            for (ci, cv) in cur.iter_mut().enumerate() {
                *cv = (*cv + cols[j].get(ci)) % q;
            }
            t[j] += 1;
            if t[j] < q {
                break;
            }
            t[j] = 0;
            j += 1;
        }
        let norm2: u128 = cur
            .iter()
            .map(|&v| {
                let s = signed_rep(v, q) as i128;
                (s * s) as u128
            })
            .sum();
        if norm2 < best {
            best = norm2;
        }
    }
}

/// Minimum over nonzero `t` of the box-decode margin
/// `sum_i (|signed((A t)_i)| - b_p)^2`, by exhaustive scan (guarded by
/// [`ENUM_CAP`]).
///
/// Decoding noise from the per-coordinate-radius-`b_p` box is exact for a
/// lattice `{A t}` if and only if no bisector hyperplane between 0 and a
/// lattice vector `v` meets the box, i.e. `||v||^2 > 2 b_p ||v||_1` for every
/// nonzero `v` — which is the integer condition `margin(v) > m b_p^2`.
/// Modular wraparound is covered because the canonical signed representative
/// minimizes the per-coordinate term among all lifts.
pub fn min_box_margin2(a: &ZqMatrix, b_p: u64) -> Result<u128, LatticeError> {
    let q = a.q();
    let n = a.cols();
    let space = (q as u128)
        .checked_pow(n as u32)
        .ok_or(LatticeError::SecretSpaceTooLarge { space: u128::MAX, cap: ENUM_CAP })?;
    if space > ENUM_CAP {
        return Err(LatticeError::SecretSpaceTooLarge { space, cap: ENUM_CAP });
    }
    let cols: Vec<ZqVector> = (0..n).map(|c| a.col(c)).collect();
    let m = a.rows();
    let mut cur = vec![0u64; m];
    let mut t = vec![0u64; n];
    let mut best = u128::MAX;
    loop {
        let mut j = 0;
        loop {
            if j == n {
                return Ok(best);
            }
            for (ci, cv) in cur.iter_mut().enumerate() {
                *cv = (*cv + cols[j].get(ci)) % q;
            }
            t[j] += 1;
            if t[j] < q {
                break;
            }
            t[j] = 0;
            j += 1;
        }
        let margin: u128 = cur
            .iter()
            .map(|&v| {
                let d = signed_rep(v, q).unsigned_abs() as i128 - b_p as i128;
                (d * d) as u128
            })
            .sum();
        if margin < best {
            best = margin;
        }
    }
}

/// Like [`gen_trap`], but rejection-samples until the lattice spanned by `A`
/// clears the box-decode margin for noise boxes of per-coordinate radius
/// `b_p`: `min_{t != 0} sum_i (|signed((A t)_i)| - b_p)^2 > m b_p^2` (see
/// [`min_box_margin2`]). For such `A`, minimum-residual decoding is exact for
/// every noise vector in the box (and in any smaller box), and any two
/// distinct lattice points have boxes that do not intersect.
pub fn gen_trap_separated<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    q: u64,
    b_p: u64,
    max_tries: usize,
    rng: &mut R,
) -> Result<(ZqMatrix, MatrixTrapdoor), LatticeError> {
    let threshold = m as u128 * (b_p as u128) * (b_p as u128);
    for _ in 0..max_tries {
        let (a, td) = gen_trap(n, m, q, rng)?;
        if min_box_margin2(&a, b_p)? > threshold {
            return Ok((a, td));
        }
    }
    Err(LatticeError::RejectionExhausted { what: "separated public matrix", tries: max_tries })
}

fn isqrt_u128(x: u128) -> u64 {
    let mut r = (x as f64).sqrt() as u128;
    while r > 0 && r * r > x {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= x {
        r += 1;
    }
    r as u64
}

/// Selection shared by [`invert`] and [`brute_force_invert`]: among all
/// secrets whose residual passes the bound, the one with the smallest squared
/// residual norm, ties broken by lexicographically smallest canonical entries.
fn better(
    cand_norm2: u128,
    cand: &[u64],
    best: &Option<(u128, Vec<u64>)>,
) -> bool {
    match best {
        None => true,
        Some((bn, bv)) => cand_norm2 < *bn || (cand_norm2 == *bn && cand < bv.as_slice()),
    }
}

/// Trapdoor inversion: given `y`, finds `s` minimizing `||y - A·s||^2` among
/// all `s` with `||y - A·s||^2 <= max_norm2`, returning `(s, e = y - A·s)`.
/// Returns [`LatticeError::NotInvertible`] when no secret passes the bound.
pub fn invert(
    a: &ZqMatrix,
    td: &MatrixTrapdoor,
    y: &ZqVector,
    max_norm2: u128,
) -> Result<(ZqVector, ZqVector), LatticeError> {
    let q = a.q();
    if y.q() != q {
        return Err(LatticeError::ModulusMismatch { left: q, right: y.q() });
    }
    if y.len() != td.m || a.rows() != td.m || a.cols() != td.n {
        return Err(LatticeError::Dimension(format!(
            "invert expects A {}x{} and y of length {}",
            td.m, td.n, td.m
        )));
    }
    let bound_inf = isqrt_u128(max_norm2);
    let y_top = ZqVector::new(q, y.vals()[..td.m_bar].to_vec());
    let y_gad = ZqVector::new(q, y.vals()[td.m_bar..].to_vec());
    let z = y_gad.add(&td.r.mul_vec(&y_top)?)?;

    // Per-coordinate candidate sets. Any s that can pass the final residual
    // check appears in every one: its residual e has per-coordinate magnitude
    // at most bound_inf, and row i of the gadget-side noise e_gad + R·e_top
    // has magnitude at most bound_inf * (1 + ||R_row||_1).
    let mut block_candidates: Vec<Vec<u64>> = Vec::with_capacity(td.n);
    for j in 0..td.n {
        let bounds: Vec<u128> = (0..td.digits)
            .map(|i| bound_inf as u128 * (1 + td.r.row(j * td.digits + i).norm1_signed()))
            .collect();
        let b0 = bounds[0];
        let mut cands: Vec<u64> = if 2 * b0 + 1 >= q as u128 {
            (0..q).collect()
        } else {
            let z0 = z.get(j * td.digits);
            let b0 = b0 as u64;
            (0..=2 * b0).map(|off| (z0 + q - b0 + off) % q).collect()
        };
        let mut pow = td.base % q;
        for i in 1..td.digits {
            cands.retain(|&s_j| {
                let pred = ((pow as u128 * s_j as u128) % q as u128) as u64;
                let diff = (z.get(j * td.digits + i) + q - pred) % q;
                (signed_rep(diff, q).unsigned_abs() as u128) <= bounds[i]
            });
            pow = ((pow as u128 * td.base as u128) % q as u128) as u64;
        }
        cands.sort_unstable();
        cands.dedup();
        block_candidates.push(cands);
    }

    let total: u128 = block_candidates.iter().map(|c| c.len() as u128).product();
    if total > ENUM_CAP {
        return Err(LatticeError::SecretSpaceTooLarge { space: total, cap: ENUM_CAP });
    }

    let mut best: Option<(u128, Vec<u64>)> = None;
    let mut idx = vec![0usize; td.n];
    if block_candidates.iter().all(|c| !c.is_empty()) {
        loop {
            let s_vals: Vec<u64> = (0..td.n).map(|j| block_candidates[j][idx[j]]).collect();
            let s = ZqVector::new(q, s_vals);
            let e = y.sub(&a.mul_vec(&s)?)?;
            let norm2 = e.norm2_signed();
            if norm2 <= max_norm2 && better(norm2, s.vals(), &best) {
                best = Some((norm2, s.vals().to_vec()));
            }
            let mut j = 0;
            loop {
                if j == td.n {
                    break;
                }
                idx[j] += 1;
                if idx[j] < block_candidates[j].len() {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == td.n {
                break;
            }
        }
    }

    match best {
        Some((_, s_vals)) => {
            let s = ZqVector::new(q, s_vals);
            let e = y.sub(&a.mul_vec(&s)?)?;
            Ok((s, e))
        }
        None => Err(LatticeError::NotInvertible),
    }
}

/// Reference inverter: scans every secret in `Z_q^n` (guarded by [`ENUM_CAP`])
/// and applies the same selection rule as [`invert`].
pub fn brute_force_invert(
    a: &ZqMatrix,
    y: &ZqVector,
    max_norm2: u128,
) -> Result<(ZqVector, ZqVector), LatticeError> {
    let q = a.q();
    let n = a.cols();
    if y.q() != q {
        return Err(LatticeError::ModulusMismatch { left: q, right: y.q() });
    }
    if y.len() != a.rows() {
        return Err(LatticeError::Dimension(format!(
            "y has {} entries for a {}-row matrix",
            y.len(),
            a.rows()
        )));
    }
    let space = (q as u128)
        .checked_pow(n as u32)
        .ok_or(LatticeError::SecretSpaceTooLarge { space: u128::MAX, cap: ENUM_CAP })?;
    if space > ENUM_CAP {
        return Err(LatticeError::SecretSpaceTooLarge { space, cap: ENUM_CAP });
    }
    let cols: Vec<ZqVector> = (0..n).map(|c| a.col(c)).collect();
    let m = a.rows();
    let mut cur = vec![0u64; m]; // A·s for the current s
    let mut s = vec![0u64; n];
    let mut best: Option<(u128, Vec<u64>)> = None;
    loop {
        let norm2: u128 = (0..m)
            .map(|i| {
                let diff = (y.get(i) + q - cur[i]) % q;
                let sv = signed_rep(diff, q) as i128;
                (sv * sv) as u128
            })
            .sum();
        if norm2 <= max_norm2 && better(norm2, &s, &best) {
            best = Some((norm2, s.clone()));
        }
        let mut j = 0;
        loop {
            if j == n {
                match best {
                    Some((_, s_vals)) => {
                        let s = ZqVector::new(q, s_vals);
                        let e = y.sub(&a.mul_vec(&s)?)?;
                        return Ok((s, e));
                    }
                    None => return Err(LatticeError::NotInvertible),
                }
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
