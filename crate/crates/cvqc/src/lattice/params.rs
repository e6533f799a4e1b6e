//! Parameter sets tying together modulus, dimensions, and noise widths.
//!
//! Three Gaussian widths with enforced headroom between them:
//! `B_L` (hardness-facing noise floor), `B_V` (key noise), `B_P`
//! (commitment-box width). The modulus must leave room for the inverter to
//! decode noise of width `B_P` — that is the `B_P <= q / (2 C_T sqrt(m n log2 q))`
//! invariant, with `C_T` a tunable slack constant.

use serde::{Deserialize, Serialize};

use crate::error::LatticeError;

/// A complete parameter set. All structural invariants are checked by
/// [`Params::validate`]; construct sub-scale fixture sets (which deliberately
/// violate the width bound) with [`Params::new_unchecked`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Nominal security parameter (bookkeeping only at desk scale).
    pub lambda: u64,
    /// Lossy-mode inner dimension, `1 <= l <= n`.
    pub l: usize,
    /// Secret dimension.
    pub n: usize,
    /// Sample dimension (rows of the public matrix), `m >= 3n`.
    pub m: usize,
    /// Preimage bit-string length, `w = n * ceil(log2 q)`.
    pub w: usize,
    /// Odd prime modulus.
    pub q: u64,
    /// Noise floor width.
    #[serde(rename = "B_L")]
    pub b_l: u64,
    /// Key noise width.
    #[serde(rename = "B_V")]
    pub b_v: u64,
    /// Commitment-box width.
    #[serde(rename = "B_P")]
    pub b_p: u64,
    /// Decoding slack constant.
    #[serde(rename = "C_T")]
    pub c_t: f64,
}

/// Deterministic primality by trial division (desk-scale moduli).
pub fn is_prime(q: u64) -> bool {
    if q < 2 {
        return false;
    }
    if q % 2 == 0 {
        return q == 2;
    }
    let mut d = 3u64;
    while d * d <= q {
        if q % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// `ceil(log2 q)` for `q >= 2`, computed exactly in integers.
pub fn ceil_log2(q: u64) -> usize {
    assert!(q >= 2);
    (64 - (q - 1).leading_zeros()) as usize
}

impl Params {
    /// Builds a parameter set without checking invariants. Intended for the
    /// deliberately sub-scale fixtures (e.g. q = 5, m = 4) where no positive
    /// integer width satisfies the decoding bound.
    #[allow(clippy::too_many_arguments)]
    pub fn new_unchecked(
        lambda: u64,
        l: usize,
        n: usize,
        m: usize,
        q: u64,
        b_l: u64,
        b_v: u64,
        b_p: u64,
        c_t: f64,
    ) -> Self {
        Params { lambda, l, n, m, w: n * ceil_log2(q), q, b_l, b_v, b_p, c_t }
    }

    /// The frozen desk-scale preset: every protocol-level exactness claim in
    /// this crate is exercised at these values.
    pub fn toy() -> Self {
        Params {
            lambda: 8,
            l: 1,
            n: 1,
            m: 4,
            w: 7,
            q: 83,
            b_l: 2,
            b_v: 4,
            b_p: 8,
            c_t: 1.0,
        }
    }

    /// Bits per secret coordinate in the preimage bit encoding.
    pub fn kappa(&self) -> usize {
        ceil_log2(self.q)
    }

    /// Number of secrets, `q^n`.
    pub fn secret_space(&self) -> u128 {
        (self.q as u128).pow(self.n as u32)
    }

    /// Upper bound the width invariant imposes on `B_P`:
    /// `q / (2 C_T sqrt(m n log2 q))`.
    pub fn bp_bound(&self) -> f64 {
        let log2q = (self.q as f64).log2();
        self.q as f64 / (2.0 * self.c_t * (self.m as f64 * self.n as f64 * log2q).sqrt())
    }

    /// The asymptotic inverter tolerance `q / (C_T sqrt(n log2 q))` (Euclidean
    /// norm). Reported for context; at desk scale the inverter instead accepts
    /// residuals up to the commitment-box circumradius, see
    /// [`Params::invert_bound2`].
    pub fn theorem_invert_bound(&self) -> f64 {
        let log2q = (self.q as f64).log2();
        self.q as f64 / (self.c_t * (self.n as f64 * log2q).sqrt())
    }

    /// Squared Euclidean bound used by inversion: `(B_P)^2 * m`, the squared
    /// circumradius of the commitment box.
    pub fn invert_bound2(&self) -> u128 {
        (self.b_p as u128) * (self.b_p as u128) * self.m as u128
    }

    /// Strict lower bound demanded of the lattice box-decode margin
    /// `min_{t != 0} sum_i (|signed((A t)_i)| - B_P)^2` by the
    /// separation-sampled generators: `m * (B_P)^2`. Strictly exceeding this
    /// is equivalent to exact minimum-residual decoding for every noise
    /// vector in the `B_P` box, and implies all pairwise supports the
    /// protocol compares are disjoint.
    pub fn decode_margin2(&self) -> u128 {
        (self.b_p as u128) * (self.b_p as u128) * self.m as u128
    }

    /// Checks every structural invariant, with `min_ratio` (>= 2) the demanded
    /// headroom between consecutive widths.
    pub fn validate(&self, min_ratio: f64) -> Result<(), LatticeError> {
        let fail = |msg: String| Err(LatticeError::InvalidParams(msg));
        if !(min_ratio >= 2.0) {
            return fail(format!("minimum width ratio {min_ratio} must be >= 2"));
        }
        if self.q < 3 || self.q % 2 == 0 || !is_prime(self.q) {
            return fail(format!("q = {} must be an odd prime >= 3", self.q));
        }
        if self.n < 1 {
            return fail("n must be >= 1".into());
        }
        if self.m < 3 * self.n {
            return fail(format!("m = {} must be >= 3n = {}", self.m, 3 * self.n));
        }
        if self.l < 1 || self.l > self.n {
            return fail(format!("l = {} must satisfy 1 <= l <= n = {}", self.l, self.n));
        }
        if self.lambda < 1 {
            return fail("lambda must be >= 1".into());
        }
        if self.w != self.n * self.kappa() {
            return fail(format!(
                "w = {} must equal n * ceil(log2 q) = {}",
                self.w,
                self.n * self.kappa()
            ));
        }
        if self.b_l < 1 {
            return fail("B_L must be >= 1".into());
        }
        if (self.b_l as f64) < 2.0 * (self.n as f64).sqrt() {
            return fail(format!(
                "B_L = {} must be >= 2 sqrt(n) = {}",
                self.b_l,
                2.0 * (self.n as f64).sqrt()
            ));
        }
        if !(self.b_l < self.b_v && self.b_v < self.b_p) {
            return fail(format!(
                "widths must be strictly increasing: B_L = {}, B_V = {}, B_P = {}",
                self.b_l, self.b_v, self.b_p
            ));
        }
        let tol = 1e-9;
        if (self.b_v as f64) < min_ratio * self.b_l as f64 - tol {
            return fail(format!(
                "B_V / B_L = {} below minimum ratio {min_ratio}",
                self.b_v as f64 / self.b_l as f64
            ));
        }
        if (self.b_p as f64) < min_ratio * self.b_v as f64 - tol {
            return fail(format!(
                "B_P / B_V = {} below minimum ratio {min_ratio}",
                self.b_p as f64 / self.b_v as f64
            ));
        }
        if (self.b_p as f64) > self.bp_bound() + tol {
            return fail(format!(
                "B_P = {} exceeds decoding bound {}",
                self.b_p,
                self.bp_bound()
            ));
        }
        if 2 * self.b_p + 1 > self.q {
            return fail(format!(
                "commitment box width 2 B_P + 1 = {} exceeds q = {}",
                2 * self.b_p + 1,
                self.q
            ));
        }
        if !self.c_t.is_finite() || self.c_t <= 0.0 {
            return fail(format!("C_T = {} must be positive and finite", self.c_t));
        }
        Ok(())
    }

    /// Searches `q_candidates` (ascending) for the smallest modulus admitting
    /// a valid set at the given dimensions, taking the minimal widths at each
    /// step: `B_L = max(1, ceil(2 sqrt(n)))`, then each next width the
    /// smallest integer at least `min_ratio` times the previous.
    ///
    /// `lambda` is fixed at 8 and `l` at `min(1, n) = 1`, matching the desk
    /// presets.
    pub fn find_params(
        q_candidates: &[u64],
        n: usize,
        m: usize,
        min_ratio: f64,
        c_t: f64,
    ) -> Result<Params, LatticeError> {
        if !(min_ratio >= 2.0) {
            return Err(LatticeError::InvalidParams(format!(
                "minimum width ratio {min_ratio} must be >= 2"
            )));
        }
        let b_l = ((2.0 * (n as f64).sqrt()).ceil() as u64).max(1);
        let b_v = ((min_ratio * b_l as f64).ceil() as u64).max(b_l + 1);
        let b_p = ((min_ratio * b_v as f64).ceil() as u64).max(b_v + 1);
        let mut sorted: Vec<u64> = q_candidates.to_vec();
        sorted.sort_unstable();
        for &q in &sorted {
            if q < 3 || q % 2 == 0 || !is_prime(q) {
                continue;
            }
            let p = Params {
                lambda: 8,
                l: 1,
                n,
                m,
                w: n * ceil_log2(q),
                q,
                b_l,
                b_v,
                b_p,
                c_t,
            };
            if p.validate(min_ratio).is_ok() {
                return Ok(p);
            }
        }
        Err(LatticeError::NoViableModulus(format!(
            "n = {n}, m = {m}, ratio = {min_ratio}, C_T = {c_t}, widths ({b_l}, {b_v}, {b_p}), \
             {} candidates",
            sorted.len()
        )))
    }

    /// Parses the `key=value` structured-text form (one pair per line, `#`
    /// comments allowed). All ten fields are required.
    pub fn from_kv_str(text: &str) -> Result<Params, LatticeError> {
        let mut lambda = None;
        let mut l = None;
        let mut n = None;
        let mut m = None;
        let mut w = None;
        let mut q = None;
        let mut b_l = None;
        let mut b_v = None;
        let mut b_p = None;
        let mut c_t = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(LatticeError::InvalidParams(format!(
                    "line {}: expected key=value, got {line:?}",
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            let bad = |e: &dyn std::fmt::Display| {
                LatticeError::InvalidParams(format!("line {}: {key} = {value}: {e}", lineno + 1))
            };
            match key {
                "lambda" => lambda = Some(value.parse::<u64>().map_err(|e| bad(&e))?),
                "l" => l = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                "n" => n = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                "m" => m = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                "w" => w = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                "q" => q = Some(value.parse::<u64>().map_err(|e| bad(&e))?),
                "B_L" => b_l = Some(value.parse::<u64>().map_err(|e| bad(&e))?),
                "B_V" => b_v = Some(value.parse::<u64>().map_err(|e| bad(&e))?),
                "B_P" => b_p = Some(value.parse::<u64>().map_err(|e| bad(&e))?),
                "C_T" => c_t = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
                other => {
                    return Err(LatticeError::InvalidParams(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        let missing = |what: &str| LatticeError::InvalidParams(format!("missing key {what}"));
        Ok(Params {
            lambda: lambda.ok_or_else(|| missing("lambda"))?,
            l: l.ok_or_else(|| missing("l"))?,
            n: n.ok_or_else(|| missing("n"))?,
            m: m.ok_or_else(|| missing("m"))?,
            w: w.ok_or_else(|| missing("w"))?,
            q: q.ok_or_else(|| missing("q"))?,
            b_l: b_l.ok_or_else(|| missing("B_L"))?,
            b_v: b_v.ok_or_else(|| missing("B_V"))?,
            b_p: b_p.ok_or_else(|| missing("B_P"))?,
            c_t: c_t.ok_or_else(|| missing("C_T"))?,
        })
    }

    /// Renders the `key=value` structured-text form.
    pub fn to_kv_string(&self) -> String {
        format!(
            "lambda={}\nl={}\nn={}\nm={}\nw={}\nq={}\nB_L={}\nB_V={}\nB_P={}\nC_T={}\n",
            self.lambda, self.l, self.n, self.m, self.w, self.q, self.b_l, self.b_v, self.b_p,
            self.c_t
        )
    }

    /// Short stable hash of the canonical JSON form, for run headers.
    pub fn short_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("params serialize");
        // FNV-1a, 64-bit.
        let mut h: u64 = 0xcbf29ce484222325;
        for byte in json.as_bytes() {
            h ^= *byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}
