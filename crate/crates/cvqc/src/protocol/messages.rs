//! Wire types for the interactive measurement protocol.
//!
//! A session is five messages: keys, commitment strings, the round choice,
//! the prover's answers, and the verdict. [`Transcript`] records them in
//! order together with everything needed to replay the verifier bit-exactly:
//! parameters, basis choice, RNG seeds, and the verifier's private trapdoors
//! (a transcript is an audit artifact for the party that ran the verifier,
//! not a public object).

use serde::{Deserialize, Serialize};

use crate::error::ProtocolError;
use crate::lattice::Params;
use crate::tcf::{GSetPolicy, NoiseModel, PublicKey, Trapdoor};

/// Per-qubit measurement-basis choice: 0 reads the standard basis, 1 the
/// Hadamard basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasisChoice {
    bits: Vec<u8>,
}

impl BasisChoice {
    pub fn new(bits: &[u8]) -> Result<Self, ProtocolError> {
        if bits.is_empty() {
            return Err(ProtocolError::MalformedAnswer("empty basis choice".into()));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(ProtocolError::MalformedAnswer("basis bits must be 0 or 1".into()));
        }
        Ok(BasisChoice { bits: bits.to_vec() })
    }

    /// Parses a string of `0`/`1` characters, one per qubit.
    pub fn parse(s: &str) -> Result<Self, ProtocolError> {
        let bits: Result<Vec<u8>, ProtocolError> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                other => Err(ProtocolError::MalformedAnswer(format!(
                    "basis character {other:?} is not 0 or 1"
                ))),
            })
            .collect();
        BasisChoice::new(&bits?)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, i: usize) -> u8 {
        self.bits[i]
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Indices measured in the standard basis.
    pub fn standard_positions(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.bits[i] == 0).collect()
    }

    /// Indices measured in the Hadamard basis.
    pub fn hadamard_positions(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.bits[i] == 1).collect()
    }
}

impl std::fmt::Display for BasisChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl Serialize for BasisChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BasisChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        BasisChoice::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// What the verifier was asked to play: a fixed round kind, or a fair coin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundChoice {
    Test,
    Hadamard,
    RandomCoin,
}

/// The round kind actually played.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundType {
    Test,
    Hadamard,
}

/// Test-round answer for one qubit: the claimed branch and preimage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestAnswer {
    pub b: u8,
    pub x: Vec<u64>,
}

/// Hadamard-round answer for one qubit: measured branch bit and the packed
/// preimage-register measurement string.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HadamardAnswer {
    pub b: u8,
    pub d: u64,
}

/// The verifier's per-qubit outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitVerdict {
    pub accept: bool,
    /// Decoded measurement bit (Hadamard rounds only; random when rejected).
    pub m: Option<u8>,
    /// True when `m` came from the reject-and-flip-a-coin branch rather than
    /// a decode.
    pub random_fill: bool,
}

/// Message direction on the in-process channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    VerifierToProver,
    ProverToVerifier,
}

/// One protocol message body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Keys { keys: Vec<PublicKey> },
    Commitments { y: Vec<Vec<u64>> },
    Round { round: RoundType },
    TestAnswers { answers: Vec<TestAnswer> },
    HadamardAnswers { answers: Vec<HadamardAnswer> },
    Verdict { accept: bool, per_qubit: Vec<QubitVerdict> },
}

impl Payload {
    fn order_rank(&self) -> usize {
        match self {
            Payload::Keys { .. } => 0,
            Payload::Commitments { .. } => 1,
            Payload::Round { .. } => 2,
            Payload::TestAnswers { .. } | Payload::HadamardAnswers { .. } => 3,
            Payload::Verdict { .. } => 4,
        }
    }
}

/// One protocol message: sequence number, direction, body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub seq: u32,
    pub direction: Direction,
    pub payload: Payload,
}

/// A complete session record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Transcript {
    pub session_id: String,
    pub params: Params,
    pub h: BasisChoice,
    /// How the round was chosen (the coin, if any, replays from the seed).
    pub round_choice: RoundChoice,
    pub round: RoundType,
    pub gset: GSetPolicy,
    pub noise: NoiseModel,
    /// Label describing the prover that produced the answers.
    pub prover: String,
    pub verifier_seed: u64,
    pub prover_seed: u64,
    pub messages: Vec<Message>,
    pub accept: bool,
    /// Decoded bits, one per qubit; present exactly for Hadamard rounds.
    pub m: Option<Vec<u8>>,
    /// The verifier's secrets, kept so a replay can re-run the decode.
    pub trapdoors: Vec<Trapdoor>,
}

/// One line of the serialized transcript file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum TranscriptLine {
    Header {
        version: String,
        session_id: String,
        params: Params,
        h: BasisChoice,
        round_choice: RoundChoice,
        round: RoundType,
        gset: GSetPolicy,
        noise: NoiseModel,
        prover: String,
        verifier_seed: u64,
        prover_seed: u64,
        accept: bool,
        m: Option<Vec<u8>>,
    },
    Message {
        seq: u32,
        direction: Direction,
        payload: Payload,
    },
    VerifierPrivate {
        trapdoors: Vec<Trapdoor>,
    },
}

impl Transcript {
    /// Checks the message-order invariant: keys → commitments → round →
    /// answers → verdict, with answers matching the round kind and decoded
    /// bits present exactly for Hadamard rounds.
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let ranks: Vec<usize> = self.messages.iter().map(|m| m.payload.order_rank()).collect();
        if ranks != (0..5).collect::<Vec<_>>() {
            return Err(ProtocolError::Transcript(format!(
                "message order {ranks:?} violates keys → y → round → answers → verdict"
            )));
        }
        for (i, msg) in self.messages.iter().enumerate() {
            if msg.seq != i as u32 {
                return Err(ProtocolError::Transcript(format!(
                    "message {i} carries sequence number {}",
                    msg.seq
                )));
            }
            let expect_v2p = matches!(msg.payload.order_rank(), 0 | 2 | 4);
            let dir_ok = match msg.direction {
                Direction::VerifierToProver => expect_v2p,
                Direction::ProverToVerifier => !expect_v2p,
            };
            if !dir_ok {
                return Err(ProtocolError::Transcript(format!(
                    "message {i} flows in the wrong direction"
                )));
            }
        }
        let answers_match = match (&self.messages[3].payload, self.round) {
            (Payload::TestAnswers { .. }, RoundType::Test) => true,
            (Payload::HadamardAnswers { .. }, RoundType::Hadamard) => true,
            _ => false,
        };
        if !answers_match {
            return Err(ProtocolError::Transcript(
                "answer message does not match the round type".into(),
            ));
        }
        if self.m.is_some() != (self.round == RoundType::Hadamard) {
            return Err(ProtocolError::Transcript(
                "decoded bits must be present exactly for Hadamard rounds".into(),
            ));
        }
        Ok(())
    }

    pub fn keys(&self) -> Result<&[PublicKey], ProtocolError> {
        match &self.messages.first().map(|m| &m.payload) {
            Some(Payload::Keys { keys }) => Ok(keys),
            _ => Err(ProtocolError::Transcript("first message is not the key list".into())),
        }
    }

    pub fn commitments(&self) -> Result<&[Vec<u64>], ProtocolError> {
        match &self.messages.get(1).map(|m| &m.payload) {
            Some(Payload::Commitments { y }) => Ok(y),
            _ => Err(ProtocolError::Transcript("second message is not the commitments".into())),
        }
    }

    pub fn verdicts(&self) -> Result<&[QubitVerdict], ProtocolError> {
        match &self.messages.get(4).map(|m| &m.payload) {
            Some(Payload::Verdict { per_qubit, .. }) => Ok(per_qubit),
            _ => Err(ProtocolError::Transcript("fifth message is not the verdict".into())),
        }
    }

    /// Serializes as line-delimited JSON: a header line, one line per
    /// message, and the verifier-private trailer.
    pub fn to_lines(&self) -> Result<String, ProtocolError> {
        let mut lines = Vec::with_capacity(self.messages.len() + 2);
        let header = TranscriptLine::Header {
            version: env!("CARGO_PKG_VERSION").to_string(),
            session_id: self.session_id.clone(),
            params: self.params.clone(),
            h: self.h.clone(),
            round_choice: self.round_choice,
            round: self.round,
            gset: self.gset,
            noise: self.noise,
            prover: self.prover.clone(),
            verifier_seed: self.verifier_seed,
            prover_seed: self.prover_seed,
            accept: self.accept,
            m: self.m.clone(),
        };
        lines.push(serde_json::to_string(&header).map_err(json_err)?);
        for msg in &self.messages {
            let line = TranscriptLine::Message {
                seq: msg.seq,
                direction: msg.direction,
                payload: msg.payload.clone(),
            };
            lines.push(serde_json::to_string(&line).map_err(json_err)?);
        }
        lines.push(
            serde_json::to_string(&TranscriptLine::VerifierPrivate {
                trapdoors: self.trapdoors.clone(),
            })
            .map_err(json_err)?,
        );
        Ok(lines.join("\n") + "\n")
    }

    /// Parses the line-delimited form and re-checks the order invariant.
    pub fn from_lines(text: &str) -> Result<Self, ProtocolError> {
        let mut header: Option<TranscriptLine> = None;
        let mut messages = Vec::new();
        let mut trapdoors: Option<Vec<Trapdoor>> = None;
        for (ln, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: TranscriptLine = serde_json::from_str(line).map_err(|e| {
                ProtocolError::Transcript(format!("line {}: {e}", ln + 1))
            })?;
            match parsed {
                TranscriptLine::Header { .. } if header.is_none() => header = Some(parsed),
                TranscriptLine::Header { .. } => {
                    return Err(ProtocolError::Transcript("duplicate header line".into()))
                }
                TranscriptLine::Message { seq, direction, payload } => {
                    messages.push(Message { seq, direction, payload })
                }
                TranscriptLine::VerifierPrivate { trapdoors: t } => trapdoors = Some(t),
            }
        }
        let Some(TranscriptLine::Header {
            session_id,
            params,
            h,
            round_choice,
            round,
            gset,
            noise,
            prover,
            verifier_seed,
            prover_seed,
            accept,
            m,
            ..
        }) = header
        else {
            return Err(ProtocolError::Transcript("missing header line".into()));
        };
        let transcript = Transcript {
            session_id,
            params,
            h,
            round_choice,
            round,
            gset,
            noise,
            prover,
            verifier_seed,
            prover_seed,
            messages,
            accept,
            m,
            trapdoors: trapdoors
                .ok_or_else(|| ProtocolError::Transcript("missing verifier-private line".into()))?,
        };
        transcript.validate()?;
        Ok(transcript)
    }
}

fn json_err(e: serde_json::Error) -> ProtocolError {
    ProtocolError::Transcript(e.to_string())
}
