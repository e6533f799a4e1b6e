//! The verifier's side of the measurement protocol.
//!
//! Key generation hands out an injective key where the basis choice reads
//! the standard basis and a claw-free key where it reads the Hadamard basis.
//! Test rounds check every reported preimage against the public support
//! predicate; Hadamard rounds decode through the trapdoors. Every decode
//! failure — an inversion miss or an inadmissible answer string — follows
//! the same escape hatch: the verifier stores a coin flip as that qubit's
//! measurement result and rejects the session.
//!
//! The verifier draws from two independent streams of one seeded generator:
//! stream 0 feeds key generation, stream 1 feeds the round coin and the
//! stored random bits. A replay that already has the keys can therefore
//! reproduce the verdict stream exactly.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{ProtocolError, TcfError};
use crate::lattice::{Params, ZqVector};
use crate::tcf::{
    chk, claw_delta_bits, dot_bits, gen_f_with, gen_g, inv_g, GSetPolicy, NoiseModel, PublicKey,
    Trapdoor,
};

use super::messages::{
    BasisChoice, HadamardAnswer, QubitVerdict, RoundChoice, RoundType, TestAnswer,
};

/// Generates one key pair per qubit: injective for standard-basis positions,
/// claw-free for Hadamard-basis positions. Only the public halves go on the
/// wire.
pub fn verifier_keygen<R: Rng + ?Sized>(
    h: &BasisChoice,
    params: &Params,
    noise: NoiseModel,
    rng: &mut R,
) -> Result<(Vec<PublicKey>, Vec<Trapdoor>), TcfError> {
    let mut keys = Vec::with_capacity(h.len());
    let mut tds = Vec::with_capacity(h.len());
    for i in 0..h.len() {
        if h.bit(i) == 0 {
            let (key, td) = gen_g(params, rng)?;
            keys.push(key);
            tds.push(Trapdoor::Injective(td));
        } else {
            let (key, td) = gen_f_with(params, noise, rng)?;
            keys.push(key);
            tds.push(Trapdoor::ClawFree(td));
        }
    }
    Ok((keys, tds))
}

/// The verifier's session state: keys, trapdoors, and the verdict stream.
pub struct Verifier {
    params: Params,
    h: BasisChoice,
    gset: GSetPolicy,
    keys: Vec<PublicKey>,
    trapdoors: Vec<Trapdoor>,
    verdict_rng: ChaCha20Rng,
}

impl Verifier {
    /// Runs key generation from stream 0 of the seed and arms the verdict
    /// stream.
    pub fn new(
        params: &Params,
        h: &BasisChoice,
        gset: GSetPolicy,
        noise: NoiseModel,
        seed: u64,
    ) -> Result<Self, ProtocolError> {
        let mut keyrng = ChaCha20Rng::seed_from_u64(seed);
        keyrng.set_stream(0);
        let (keys, trapdoors) = verifier_keygen(h, params, noise, &mut keyrng)?;
        Ok(Verifier {
            params: params.clone(),
            h: h.clone(),
            gset,
            keys,
            trapdoors,
            verdict_rng: Self::verdict_stream(seed),
        })
    }

    /// Rebuilds a verifier around recorded keys and trapdoors (replay): no
    /// generation happens, but the verdict stream is re-armed from the seed.
    pub fn from_recorded(
        params: &Params,
        h: &BasisChoice,
        gset: GSetPolicy,
        keys: Vec<PublicKey>,
        trapdoors: Vec<Trapdoor>,
        seed: u64,
    ) -> Result<Self, ProtocolError> {
        if keys.len() != h.len() || trapdoors.len() != h.len() {
            return Err(ProtocolError::Transcript(format!(
                "{} keys / {} trapdoors for {} qubits",
                keys.len(),
                trapdoors.len(),
                h.len()
            )));
        }
        Ok(Verifier {
            params: params.clone(),
            h: h.clone(),
            gset,
            keys,
            trapdoors,
            verdict_rng: Self::verdict_stream(seed),
        })
    }

    fn verdict_stream(seed: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(1);
        rng
    }

    pub fn keys(&self) -> &[PublicKey] {
        &self.keys
    }

    pub fn trapdoors(&self) -> &[Trapdoor] {
        &self.trapdoors
    }

    pub fn h(&self) -> &BasisChoice {
        &self.h
    }

    /// Resolves the round: a fixed request passes through, the coin draws
    /// from the verdict stream with probability ½ each.
    pub fn choose_round(&mut self, choice: RoundChoice) -> RoundType {
        match choice {
            RoundChoice::Test => RoundType::Test,
            RoundChoice::Hadamard => RoundType::Hadamard,
            RoundChoice::RandomCoin => {
                if self.verdict_rng.gen_range(0..2u8) == 0 {
                    RoundType::Test
                } else {
                    RoundType::Hadamard
                }
            }
        }
    }

    /// Test round: every reported `(b', x')` must pass the public support
    /// check against its commitment string.
    pub fn verify_test(
        &self,
        ys: &[ZqVector],
        answers: &[TestAnswer],
    ) -> Result<Vec<QubitVerdict>, ProtocolError> {
        self.expect_counts(ys.len(), answers.len())?;
        let mut verdicts = Vec::with_capacity(answers.len());
        for (i, ans) in answers.iter().enumerate() {
            if ans.b > 1 || ans.x.len() != self.params.n {
                return Err(ProtocolError::MalformedAnswer(format!(
                    "test answer {i} has branch {} and {} coordinates",
                    ans.b,
                    ans.x.len()
                )));
            }
            let x = ZqVector::new(self.params.q, ans.x.clone());
            let ok = chk(&self.keys[i], self.params.b_p, ans.b, &x, &ys[i])
                .map_err(ProtocolError::Tcf)?;
            verdicts.push(QubitVerdict { accept: ok, m: None, random_fill: false });
        }
        Ok(verdicts)
    }

    /// Hadamard round: standard-basis positions decode from the commitment
    /// string alone through the injective trapdoor; Hadamard-basis positions
    /// decode `b' ⊕ d·(J(x0) ⊕ J(x1))` from the claw. Misses and
    /// inadmissible `d` store a coin flip and reject.
    pub fn verify_hadamard(
        &mut self,
        ys: &[ZqVector],
        answers: &[HadamardAnswer],
    ) -> Result<Vec<QubitVerdict>, ProtocolError> {
        self.expect_counts(ys.len(), answers.len())?;
        let mut verdicts = Vec::with_capacity(answers.len());
        for (i, ans) in answers.iter().enumerate() {
            if ans.b > 1 {
                return Err(ProtocolError::MalformedAnswer(format!(
                    "hadamard answer {i} has branch {}",
                    ans.b
                )));
            }
            let verdict = match (&self.trapdoors[i], self.h.bit(i)) {
                (Trapdoor::Injective(td), 0) => match inv_g(&self.keys[i], td, &ys[i]) {
                    Ok((m, _x)) => QubitVerdict { accept: true, m: Some(m), random_fill: false },
                    Err(e) if e.is_inversion_miss() => self.random_fill(),
                    Err(e) => return Err(ProtocolError::Tcf(e)),
                },
                (Trapdoor::ClawFree(td), 1) => {
                    match claw_delta_bits(&self.keys[i], td, &ys[i]) {
                        Ok(delta) => {
                            if self.gset.admits(ans.d) {
                                let m = ans.b ^ dot_bits(ans.d, delta);
                                QubitVerdict { accept: true, m: Some(m), random_fill: false }
                            } else {
                                self.random_fill()
                            }
                        }
                        Err(e) if e.is_inversion_miss() => self.random_fill(),
                        Err(e) => return Err(ProtocolError::Tcf(e)),
                    }
                }
                _ => {
                    return Err(ProtocolError::Transcript(format!(
                        "trapdoor kind at qubit {i} does not match basis bit {}",
                        self.h.bit(i)
                    )))
                }
            };
            verdicts.push(verdict);
        }
        Ok(verdicts)
    }

    fn random_fill(&mut self) -> QubitVerdict {
        QubitVerdict {
            accept: false,
            m: Some(self.verdict_rng.gen_range(0..2u8)),
            random_fill: true,
        }
    }

    fn expect_counts(&self, ys: usize, answers: usize) -> Result<(), ProtocolError> {
        let n = self.h.len();
        if ys != n || answers != n {
            return Err(ProtocolError::MalformedAnswer(format!(
                "{ys} commitments and {answers} answers for {n} qubits"
            )));
        }
        Ok(())
    }
}
