//! Bit encoding of preimages and the secret-extraction identity.
//!
//! `j_map` encodes each coordinate's canonical representative in `[0, q)` as
//! a block of `kappa = ceil(log2 q)` bits, least significant bit first, and
//! packs the blocks into a `u64` (coordinate 0 occupies the lowest bits).
//! With this layout the mask that probes each block's least significant bit
//! (`embed_dhat`) turns a claw's XOR difference into the parity `dhat·s` —
//! except at inputs where the subtraction of the secret wraps mod q, which
//! `wraparound` identifies and `decode_identity_check` counts.

use crate::error::TcfError;
use crate::lattice::zq::ZqVector;
use serde::{Deserialize, Serialize};

/// Packs the preimage `x` into `n·kappa` bits, LSB-first per coordinate.
pub fn j_map(x: &ZqVector, kappa: usize) -> Result<u64, TcfError> {
    let w = x.len() * kappa;
    assert!(w <= 64, "bit encoding of {w} bits exceeds u64");
    let mut packed = 0u64;
    for (i, &v) in x.vals().iter().enumerate() {
        debug_assert!(kappa == 64 || (v as u64) < (1u64 << kappa));
        packed |= (v as u64) << (i * kappa);
    }
    Ok(packed)
}

/// Decodes `n` blocks of `kappa` bits back into a vector over `Z_q`.
pub fn j_inv(packed: u64, n: usize, kappa: usize, q: u64) -> Result<ZqVector, TcfError> {
    let w = n * kappa;
    assert!(w <= 64, "bit encoding of {w} bits exceeds u64");
    debug_assert!(w == 64 || packed >> w == 0, "stray bits beyond block {n}");
    let mask = if kappa == 64 { u64::MAX } else { (1u64 << kappa) - 1 };
    let mut vals = Vec::with_capacity(n);
    for block in 0..n {
        let value = (packed >> (block * kappa)) & mask;
        if value >= q {
            return Err(TcfError::BitDecode { block, value, q });
        }
        vals.push(value);
    }
    Ok(ZqVector::new(q, vals))
}

/// Bit `i` of a packed string.
pub fn bit_of(packed: u64, i: usize) -> u8 {
    ((packed >> i) & 1) as u8
}

/// Packs a slice of 0/1 values LSB-first.
pub fn bits_to_u64(bits: &[u8]) -> u64 {
    assert!(bits.len() <= 64);
    let mut packed = 0u64;
    for (i, &b) in bits.iter().enumerate() {
        debug_assert!(b <= 1);
        packed |= (b as u64) << i;
    }
    packed
}

/// Unpacks the low `len` bits into a vector of 0/1 values.
pub fn u64_to_bits(packed: u64, len: usize) -> Vec<u8> {
    (0..len).map(|i| bit_of(packed, i)).collect()
}

/// Parity of the bitwise AND: the GF(2) inner product of two packed strings.
pub fn dot_bits(a: u64, b: u64) -> u8 {
    ((a & b).count_ones() & 1) as u8
}

/// Spreads an `n`-bit mask so bit `i` lands on coordinate block `i`'s least
/// significant position; all other bits are zero.
pub fn embed_dhat(dhat: &[u8], kappa: usize) -> u64 {
    assert!(dhat.len() * kappa <= 64);
    let mut packed = 0u64;
    for (i, &b) in dhat.iter().enumerate() {
        debug_assert!(b <= 1);
        packed |= (b as u64) << (i * kappa);
    }
    packed
}

/// True when subtracting `(-1)^b · s` from `x` wraps mod q in some
/// coordinate, breaking the per-block LSB relation between the claw's two
/// encodings. With binary `s` this happens exactly at coordinates where
/// `s_i = 1` and `x_i` sits at the relevant end of `[0, q)`.
pub fn wraparound(x: &ZqVector, b: u8, s: &ZqVector) -> bool {
    debug_assert_eq!(x.q(), s.q());
    debug_assert_eq!(x.len(), s.len());
    let q = x.q();
    x.vals()
        .iter()
        .zip(s.vals())
        .any(|(&xi, &si)| si == 1 && if b == 0 { xi == 0 } else { xi == q - 1 })
}

/// Tally from [`decode_identity_check`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeIdentityReport {
    /// (s, b, x, dhat) combinations whose identity was evaluated.
    pub checked: u64,
    /// Evaluated combinations where the identity failed.
    pub violations: u64,
    /// (s, b, x) triples skipped because the claw wraps mod q.
    pub wraparound_excluded: u64,
}

/// Exhaustively verifies, for every binary secret `s`, branch `b`, preimage
/// `x`, and mask `dhat`, that the embedded mask decodes the claw's XOR
/// difference to `dhat·s mod 2` — skipping (and counting) wraparound inputs.
///
/// The claw is anchored at the given endpoint: for `b = 0` the pair is
/// `(x, x − s)`, for `b = 1` it is `(x + s, x)`.
pub fn decode_identity_check(q: u64, n: usize) -> Result<DecodeIdentityReport, TcfError> {
    let kappa = crate::lattice::params::ceil_log2(q);
    let mut report = DecodeIdentityReport {
        checked: 0,
        violations: 0,
        wraparound_excluded: 0,
    };
    for s_mask in 0..(1u64 << n) {
        let s = ZqVector::new(q, (0..n).map(|i| (s_mask >> i) & 1).collect());
        for b in [0u8, 1] {
            let mut x_vals = vec![0u64; n];
            loop {
                let x = ZqVector::new(q, x_vals.clone());
                if wraparound(&x, b, &s) {
                    report.wraparound_excluded += 1;
                } else {
                    let (x0, x1) = if b == 0 {
                        (x.clone(), x.sub(&s).map_err(TcfError::Lattice)?)
                    } else {
                        (x.add(&s).map_err(TcfError::Lattice)?, x.clone())
                    };
                    let delta = j_map(&x0, kappa)? ^ j_map(&x1, kappa)?;
                    for dhat_mask in 0..(1u64 << n) {
                        let dhat = u64_to_bits(dhat_mask, n);
                        let lhs = dot_bits(embed_dhat(&dhat, kappa), delta);
                        let rhs = dhat
                            .iter()
                            .zip(s.vals())
                            .map(|(&di, &si)| (di as u64) * si)
                            .sum::<u64>() as u8
                            & 1;
                        report.checked += 1;
                        if lhs != rhs {
                            report.violations += 1;
                        }
                    }
                }
                // Odometer over Z_q^n.
                let mut pos = 0;
                loop {
                    if pos == n {
                        break;
                    }
                    x_vals[pos] += 1;
                    if x_vals[pos] < q {
                        break;
                    }
                    x_vals[pos] = 0;
                    pos += 1;
                }
                if pos == n {
                    break;
                }
            }
        }
    }
    Ok(report)
}
