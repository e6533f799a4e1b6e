//! Session orchestration: runs the five-message exchange between one prover
//! and one verifier, records it as a [`Transcript`], replays transcripts,
//! and estimates decoded-bit distributions over repeated sessions.
//!
//! A replay rebuilds the verifier from the recorded keys, trapdoors, and
//! seed, re-draws the round coin, and recomputes every verdict — including
//! the stored coin flips for rejected answers, which come from the same
//! seeded stream — so an untampered transcript reproduces bit-exactly.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::ProtocolError;
use crate::lattice::{Params, ZqVector};
use crate::tcf::{GSetPolicy, NoiseModel};

use super::messages::{
    BasisChoice, Direction, Message, Payload, RoundChoice, RoundType, Transcript,
};
use super::prover::{ProverSim, ProverSpec};
use super::verifier::Verifier;

/// Everything a session needs besides the prover: parameters, basis choice,
/// round selection, policies, and the two RNG seeds.
#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub params: Params,
    pub h: BasisChoice,
    pub round: RoundChoice,
    pub gset: GSetPolicy,
    pub noise: NoiseModel,
    pub verifier_seed: u64,
    pub prover_seed: u64,
    pub session_id: String,
}

impl SessionConfig {
    /// Zero-noise, admit-everything defaults around the given choices.
    pub fn new(
        params: &Params,
        h: &BasisChoice,
        round: RoundChoice,
        verifier_seed: u64,
        prover_seed: u64,
    ) -> Self {
        SessionConfig {
            params: params.clone(),
            h: h.clone(),
            round,
            gset: GSetPolicy::AllowAll,
            noise: NoiseModel::Zero,
            verifier_seed,
            prover_seed,
            session_id: format!("s{verifier_seed:x}-{prover_seed:x}"),
        }
    }
}

/// Runs one full session and returns the validated transcript.
pub fn run_session(spec: &ProverSpec, cfg: &SessionConfig) -> Result<Transcript, ProtocolError> {
    let n = spec.n_qubits()?;
    if n != cfg.h.len() {
        return Err(ProtocolError::InvalidProver(format!(
            "prover prepares {n} qubits but the basis choice names {}",
            cfg.h.len()
        )));
    }
    let mut verifier = Verifier::new(&cfg.params, &cfg.h, cfg.gset, cfg.noise, cfg.verifier_seed)?;
    let mut messages = Vec::with_capacity(5);
    messages.push(Message {
        seq: 0,
        direction: Direction::VerifierToProver,
        payload: Payload::Keys { keys: verifier.keys().to_vec() },
    });
    let mut prover = ProverSim::new(spec, &cfg.params, verifier.keys(), cfg.prover_seed)?;
    let ys = prover.commit_all()?;
    messages.push(Message {
        seq: 1,
        direction: Direction::ProverToVerifier,
        payload: Payload::Commitments { y: ys.iter().map(|y| y.vals().to_vec()).collect() },
    });
    let round = verifier.choose_round(cfg.round);
    messages.push(Message {
        seq: 2,
        direction: Direction::VerifierToProver,
        payload: Payload::Round { round },
    });
    let (answer_payload, verdicts) = match round {
        RoundType::Test => {
            let answers = prover.test_answers()?;
            let verdicts = verifier.verify_test(&ys, &answers)?;
            (Payload::TestAnswers { answers }, verdicts)
        }
        RoundType::Hadamard => {
            let answers = prover.hadamard_answers()?;
            let verdicts = verifier.verify_hadamard(&ys, &answers)?;
            (Payload::HadamardAnswers { answers }, verdicts)
        }
    };
    messages.push(Message { seq: 3, direction: Direction::ProverToVerifier, payload: answer_payload });
    let accept = verdicts.iter().all(|v| v.accept);
    let m: Option<Vec<u8>> = match round {
        RoundType::Hadamard => Some(
            verdicts
                .iter()
                .map(|v| v.m.expect("hadamard verdicts carry a decoded bit"))
                .collect(),
        ),
        RoundType::Test => None,
    };
    messages.push(Message {
        seq: 4,
        direction: Direction::VerifierToProver,
        payload: Payload::Verdict { accept, per_qubit: verdicts },
    });
    let transcript = Transcript {
        session_id: cfg.session_id.clone(),
        params: cfg.params.clone(),
        h: cfg.h.clone(),
        round_choice: cfg.round,
        round,
        gset: cfg.gset,
        noise: cfg.noise,
        prover: spec.label(),
        verifier_seed: cfg.verifier_seed,
        prover_seed: cfg.prover_seed,
        messages,
        accept,
        m,
        trapdoors: verifier.trapdoors().to_vec(),
    };
    transcript.validate()?;
    Ok(transcript)
}

/// What a replay found: whether every recomputed quantity matches the
/// recorded transcript.
#[derive(Clone, Debug)]
pub struct ReplayReport {
    pub round_matches: bool,
    pub verdicts_match: bool,
    pub accept_matches: bool,
    pub m_matches: bool,
    pub recomputed_accept: bool,
    pub recomputed_m: Option<Vec<u8>>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.round_matches && self.verdicts_match && self.accept_matches && self.m_matches
    }
}

/// Re-verifies a transcript without re-running the prover: the recorded
/// answers flow through a verifier rebuilt from the recorded keys,
/// trapdoors, and seed.
pub fn replay(t: &Transcript) -> Result<ReplayReport, ProtocolError> {
    t.validate()?;
    let keys = t.keys()?.to_vec();
    let mut verifier =
        Verifier::from_recorded(&t.params, &t.h, t.gset, keys, t.trapdoors.clone(), t.verifier_seed)?;
    let round = verifier.choose_round(t.round_choice);
    let ys: Vec<ZqVector> =
        t.commitments()?.iter().map(|v| ZqVector::new(t.params.q, v.clone())).collect();
    let verdicts = match (&t.messages[3].payload, round) {
        (Payload::TestAnswers { answers }, RoundType::Test) => verifier.verify_test(&ys, answers)?,
        (Payload::HadamardAnswers { answers }, RoundType::Hadamard) => {
            verifier.verify_hadamard(&ys, answers)?
        }
        // The replayed coin landed on the other round kind: nothing further
        // can be compared.
        _ => {
            return Ok(ReplayReport {
                round_matches: false,
                verdicts_match: false,
                accept_matches: false,
                m_matches: false,
                recomputed_accept: false,
                recomputed_m: None,
            })
        }
    };
    let recomputed_accept = verdicts.iter().all(|v| v.accept);
    let recomputed_m: Option<Vec<u8>> = match round {
        RoundType::Hadamard => {
            Some(verdicts.iter().map(|v| v.m.expect("hadamard verdicts carry a decoded bit")).collect())
        }
        RoundType::Test => None,
    };
    Ok(ReplayReport {
        round_matches: round == t.round,
        verdicts_match: verdicts.as_slice() == t.verdicts()?,
        accept_matches: recomputed_accept == t.accept,
        m_matches: recomputed_m == t.m,
        recomputed_accept,
        recomputed_m,
    })
}

/// Packs decoded bits into an index, qubit 0 most significant (matching the
/// register-layout convention).
pub fn pack_bits(bits: &[u8]) -> usize {
    bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b as usize & 1))
}

/// Empirical decoded-bit statistics over repeated Hadamard-round sessions.
#[derive(Clone, Debug)]
pub struct EmpiricalDistribution {
    pub n: usize,
    pub trials: usize,
    pub accepted: usize,
    pub accept_rate: f64,
    /// P[m] over all sessions, coin fills included; indexed by [`pack_bits`].
    pub d: Vec<f64>,
    /// P[m | accepted]; all zeros when nothing was accepted.
    pub d_cond: Vec<f64>,
}

/// Runs `trials` independent Hadamard-round sessions (fresh seeds drawn from
/// the config's seeds) and tallies the decoded bits, both unconditionally
/// and conditioned on acceptance.
pub fn estimate_distribution(
    spec: &ProverSpec,
    cfg: &SessionConfig,
    trials: usize,
) -> Result<EmpiricalDistribution, ProtocolError> {
    let n = spec.n_qubits()?;
    let dim = 1usize << n;
    // Per-trial seeds come from dedicated streams so they cannot collide
    // with the in-session streams derived from the same seed values.
    let mut vseeds = ChaCha20Rng::seed_from_u64(cfg.verifier_seed);
    vseeds.set_stream(7);
    let mut pseeds = ChaCha20Rng::seed_from_u64(cfg.prover_seed);
    pseeds.set_stream(8);
    let mut counts = vec![0u64; dim];
    let mut cond_counts = vec![0u64; dim];
    let mut accepted = 0usize;
    for t in 0..trials {
        let mut trial_cfg = cfg.clone();
        trial_cfg.round = RoundChoice::Hadamard;
        trial_cfg.verifier_seed = vseeds.gen();
        trial_cfg.prover_seed = pseeds.gen();
        trial_cfg.session_id = format!("{}-t{t}", cfg.session_id);
        let transcript = run_session(spec, &trial_cfg)?;
        let m = transcript.m.as_ref().expect("hadamard sessions record decoded bits");
        let idx = pack_bits(m);
        counts[idx] += 1;
        if transcript.accept {
            cond_counts[idx] += 1;
            accepted += 1;
        }
    }
    let norm = |c: &[u64], total: usize| -> Vec<f64> {
        if total == 0 {
            return vec![0.0; c.len()];
        }
        c.iter().map(|&k| k as f64 / total as f64).collect()
    };
    Ok(EmpiricalDistribution {
        n,
        trials,
        accepted,
        accept_rate: accepted as f64 / trials.max(1) as f64,
        d: norm(&counts, trials),
        d_cond: norm(&cond_counts, accepted),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::prover::InputState;
    use crate::tcf::{gen_g, Trapdoor};
    use num_complex::Complex64;

    fn minus() -> InputState {
        let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        InputState::Custom(vec![r, -r])
    }

    fn one() -> InputState {
        InputState::Custom(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)])
    }

    #[test]
    fn honest_test_rounds_accept_across_basis_choices() {
        let params = Params::toy();
        let cases = [
            (ProverSpec::honest(InputState::Zero(2)).unwrap(), "00"),
            (ProverSpec::honest(InputState::Zero(1)).unwrap(), "0"),
            (ProverSpec::honest(InputState::Plus(1)).unwrap(), "1"),
            (ProverSpec::honest(InputState::Bell).unwrap(), "01"),
        ];
        for (i, (spec, h)) in cases.iter().enumerate() {
            let h = BasisChoice::parse(h).unwrap();
            let cfg =
                SessionConfig::new(&params, &h, RoundChoice::Test, 100 + i as u64, 200 + i as u64);
            let t = run_session(spec, &cfg).unwrap();
            assert!(t.accept, "case {i} rejected");
            assert!(t.m.is_none());
            assert_eq!(t.round, RoundType::Test);
        }
    }

    #[test]
    fn standard_basis_decoding_reads_the_input_bit() {
        let params = Params::toy();
        let h = BasisChoice::parse("0").unwrap();
        for seed in 0..25u64 {
            for (input, expect) in [(InputState::Zero(1), 0u8), (one(), 1u8)] {
                let spec = ProverSpec::honest(input).unwrap();
                let cfg = SessionConfig::new(&params, &h, RoundChoice::Hadamard, seed, seed + 1000);
                let t = run_session(&spec, &cfg).unwrap();
                assert!(t.accept);
                assert_eq!(t.m.as_deref(), Some(&[expect][..]), "seed {seed}");
            }
        }
    }

    #[test]
    fn hadamard_basis_decoding_reads_the_conjugate_bit() {
        let params = Params::toy();
        let h = BasisChoice::parse("1").unwrap();
        for seed in 0..25u64 {
            for (input, expect) in [(InputState::Plus(1), 0u8), (minus(), 1u8)] {
                let spec = ProverSpec::honest(input).unwrap();
                let cfg = SessionConfig::new(&params, &h, RoundChoice::Hadamard, seed, seed + 2000);
                let t = run_session(&spec, &cfg).unwrap();
                assert!(t.accept);
                assert_eq!(t.m.as_deref(), Some(&[expect][..]), "seed {seed}");
            }
        }
    }

    #[test]
    fn phase_flip_attack_equals_honest_prerotated_input() {
        // A Z conjugation on the committed qubit decodes exactly like the
        // honest prover holding the pre-rotated input: |+⟩ turns into |−⟩,
        // so every session decodes 1.
        let params = Params::toy();
        let h = BasisChoice::parse("1").unwrap();
        let lib = super::super::prover::attack_library(0);
        let z = lib[2].clone();
        let attacked = ProverSpec::characterized(InputState::Plus(1), z).unwrap();
        let prerotated = ProverSpec::honest(minus()).unwrap();
        for seed in 0..20u64 {
            let cfg = SessionConfig::new(&params, &h, RoundChoice::Hadamard, seed, seed + 3000);
            let ta = run_session(&attacked, &cfg).unwrap();
            let th = run_session(&prerotated, &cfg).unwrap();
            assert!(ta.accept && th.accept);
            assert_eq!(ta.m.as_deref(), Some(&[1u8][..]), "seed {seed} attacked");
            assert_eq!(th.m.as_deref(), Some(&[1u8][..]), "seed {seed} prerotated");
        }
    }

    #[test]
    fn bit_flip_attack_leaves_standard_basis_decoding_alone() {
        // At a standard-basis position the decoded bit comes from the
        // commitment string alone, which is fixed before the attack acts.
        let params = Params::toy();
        let h = BasisChoice::parse("0").unwrap();
        let lib = super::super::prover::attack_library(0);
        let honest = ProverSpec::honest(InputState::Zero(1)).unwrap();
        let idle = ProverSpec::characterized(InputState::Zero(1), lib[0].clone()).unwrap();
        let flip = ProverSpec::characterized(InputState::Zero(1), lib[1].clone()).unwrap();
        for seed in 0..10u64 {
            let cfg = SessionConfig::new(&params, &h, RoundChoice::Hadamard, seed, seed + 4000);
            let th = run_session(&honest, &cfg).unwrap();
            let ti = run_session(&idle, &cfg).unwrap();
            let tf = run_session(&flip, &cfg).unwrap();
            assert_eq!(th.m, ti.m, "seed {seed}");
            assert_eq!(ti.m, tf.m, "seed {seed}");
            assert!(th.accept && ti.accept && tf.accept);
        }
    }

    #[test]
    fn aux_joining_attack_runs_end_to_end() {
        let params = Params::toy();
        let h = BasisChoice::parse("1").unwrap();
        let lib = super::super::prover::attack_library(0);
        let spec = ProverSpec::characterized(InputState::Plus(1), lib[4].clone()).unwrap();
        let cfg = SessionConfig::new(&params, &h, RoundChoice::Hadamard, 9, 10);
        let t = run_session(&spec, &cfg).unwrap();
        t.validate().unwrap();
        assert_eq!(t.m.as_ref().unwrap().len(), 1);
    }

    #[test]
    fn sessions_are_deterministic_in_their_seeds() {
        let params = Params::toy();
        let h = BasisChoice::parse("01").unwrap();
        let spec = ProverSpec::honest(InputState::Bell).unwrap();
        let cfg = SessionConfig::new(&params, &h, RoundChoice::RandomCoin, 31, 32);
        let a = run_session(&spec, &cfg).unwrap().to_lines().unwrap();
        let b = run_session(&spec, &cfg).unwrap().to_lines().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn transcripts_round_trip_and_enforce_message_order() {
        let params = Params::toy();
        let h = BasisChoice::parse("1").unwrap();
        let spec = ProverSpec::honest(InputState::Plus(1)).unwrap();
        let cfg = SessionConfig::new(&params, &h, RoundChoice::Hadamard, 41, 42);
        let t = run_session(&spec, &cfg).unwrap();
        let text = t.to_lines().unwrap();
        let back = Transcript::from_lines(&text).unwrap();
        assert_eq!(back.to_lines().unwrap(), text);
        // Swapping two messages breaks the order invariant.
        let mut shuffled = t.clone();
        shuffled.messages.swap(1, 2);
        assert!(shuffled.validate().is_err());
        // A wrong sequence number is caught.
        let mut reseq = t.clone();
        reseq.messages[3].seq = 7;
        assert!(reseq.validate().is_err());
        // Dropping the verifier-private line is caught on parse.
        let headless: String =
            text.lines().filter(|l| !l.contains("verifier_private")).collect::<Vec<_>>().join("\n");
        assert!(Transcript::from_lines(&headless).is_err());
    }

    #[test]
    fn replay_confirms_honest_sessions() {
        let params = Params::toy();
        let h = BasisChoice::parse("01").unwrap();
        let spec = ProverSpec::honest(InputState::Bell).unwrap();
        for (seed, round) in
            [(51, RoundChoice::Test), (52, RoundChoice::Hadamard), (53, RoundChoice::RandomCoin)]
        {
            let cfg = SessionConfig::new(&params, &h, round, seed, seed + 5000);
            let t = run_session(&spec, &cfg).unwrap();
            let report = replay(&t).unwrap();
            assert!(report.is_clean(), "seed {seed}: {report:?}");
            assert_eq!(report.recomputed_accept, t.accept);
        }
    }

    #[test]
    fn replay_reproduces_stored_coin_fills_bit_exactly() {
        // Force the inadmissible answer string under the reject-zero policy:
        // the verdict stores a coin from the verifier's seeded stream, and
        // the replay must land on the same bit.
        let params = Params::toy();
        let h = BasisChoice::parse("1").unwrap();
        let mut verifier =
            Verifier::new(&params, &h, GSetPolicy::RejectZero, NoiseModel::Zero, 61).unwrap();
        let spec = ProverSpec::honest(InputState::Plus(1)).unwrap();
        let mut prover = ProverSim::new(&spec, &params, verifier.keys(), 62).unwrap();
        let ys = prover.commit_all().unwrap();
        let round = verifier.choose_round(RoundChoice::Hadamard);
        assert_eq!(round, RoundType::Hadamard);
        let mut answers = prover.hadamard_answers().unwrap();
        answers[0].d = 0;
        let verdicts = verifier.verify_hadamard(&ys, &answers).unwrap();
        assert!(verdicts[0].random_fill && !verdicts[0].accept);
        let m: Vec<u8> = verdicts.iter().map(|v| v.m.unwrap()).collect();
        let transcript = Transcript {
            session_id: "forced-fill".into(),
            params: params.clone(),
            h,
            round_choice: RoundChoice::Hadamard,
            round,
            gset: GSetPolicy::RejectZero,
            noise: NoiseModel::Zero,
            prover: spec.label(),
            verifier_seed: 61,
            prover_seed: 62,
            messages: vec![
                Message {
                    seq: 0,
                    direction: Direction::VerifierToProver,
                    payload: Payload::Keys { keys: verifier.keys().to_vec() },
                },
                Message {
                    seq: 1,
                    direction: Direction::ProverToVerifier,
                    payload: Payload::Commitments {
                        y: ys.iter().map(|y| y.vals().to_vec()).collect(),
                    },
                },
                Message {
                    seq: 2,
                    direction: Direction::VerifierToProver,
                    payload: Payload::Round { round },
                },
                Message {
                    seq: 3,
                    direction: Direction::ProverToVerifier,
                    payload: Payload::HadamardAnswers { answers },
                },
                Message {
                    seq: 4,
                    direction: Direction::VerifierToProver,
                    payload: Payload::Verdict { accept: false, per_qubit: verdicts },
                },
            ],
            accept: false,
            m: Some(m),
            trapdoors: verifier.trapdoors().to_vec(),
        };
        transcript.validate().unwrap();
        let report = replay(&transcript).unwrap();
        assert!(report.is_clean(), "{report:?}");
    }

    #[test]
    fn replay_flags_tampering() {
        let params = Params::toy();
        let h = BasisChoice::parse("1").unwrap();
        let spec = ProverSpec::honest(InputState::Plus(1)).unwrap();
        let cfg = SessionConfig::new(&params, &h, RoundChoice::Hadamard, 71, 72);
        let t = run_session(&spec, &cfg).unwrap();

        // Flip the recorded decoded bit.
        let mut bad_m = t.clone();
        bad_m.m.as_mut().unwrap()[0] ^= 1;
        assert!(!replay(&bad_m).unwrap().m_matches);

        // Flip the recorded acceptance.
        let mut bad_accept = t.clone();
        bad_accept.accept = !bad_accept.accept;
        assert!(!replay(&bad_accept).unwrap().accept_matches);

        // Tamper with the answer's branch bit: the recomputed decode flips,
        // so the recorded verdicts and decoded bits no longer match.
        let mut bad_answer = t.clone();
        if let Payload::HadamardAnswers { answers } = &mut bad_answer.messages[3].payload {
            answers[0].b ^= 1;
        }
        let report = replay(&bad_answer).unwrap();
        assert!(!report.m_matches && !report.verdicts_match);

        // Swap in a trapdoor of the wrong kind: the decode refuses outright.
        let mut bad_td = t.clone();
        let mut rng = ChaCha20Rng::seed_from_u64(73);
        let (_, wrong_kind) = gen_g(&params, &mut rng).unwrap();
        bad_td.trapdoors[0] = Trapdoor::Injective(wrong_kind);
        assert!(replay(&bad_td).is_err());
    }

    #[test]
    fn empirical_distribution_concentrates_for_honest_conjugate_states() {
        let params = Params::toy();
        let h = BasisChoice::parse("1").unwrap();
        let spec = ProverSpec::honest(InputState::Plus(1)).unwrap();
        let cfg = SessionConfig::new(&params, &h, RoundChoice::Hadamard, 81, 82);
        let est = estimate_distribution(&spec, &cfg, 150).unwrap();
        assert_eq!(est.trials, 150);
        assert_eq!(est.accepted, 150);
        assert_eq!(est.accept_rate, 1.0);
        assert_eq!(est.d, vec![1.0, 0.0]);
        assert_eq!(est.d_cond, vec![1.0, 0.0]);
    }

    #[test]
    fn bit_packing_is_most_significant_first() {
        assert_eq!(pack_bits(&[0]), 0);
        assert_eq!(pack_bits(&[1]), 1);
        assert_eq!(pack_bits(&[1, 0]), 2);
        assert_eq!(pack_bits(&[0, 1]), 1);
        assert_eq!(pack_bits(&[1, 1, 0]), 6);
    }
}
