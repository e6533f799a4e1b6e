//! Reconstruction of the state a prover effectively measures, and exact
//! decoded-bit distributions.
//!
//! The verifier never holds the prover's qubits, yet the decoded bits of a
//! Hadamard round follow the distribution of *some* n-qubit state measured
//! in the requested bases. For a simulated prover that state can be built
//! outright: freeze the session right after the commitment stage, convert
//! the preimage registers to bit indexing, apply the prover's channel,
//! Hadamard-measure the preimage registers, kick the claw phase
//! `Z^{d_i·ΔJ_i}` back onto each committed qubit, and trace everything else
//! out. Companion variants skip the phase at standard-basis positions or
//! swap in injective keys there, so the chain of equalities connecting the
//! reconstructed state to the live protocol can be checked link by link —
//! exactly, because every comparison runs against the same frozen snapshot.
//!
//! Two desk-scale facts shape this module. First, keys here are generated
//! with zero key noise, making every support statement exact. Second,
//! claw-free secrets are resampled until nonzero: a zero secret collapses
//! the claw (`x_0 = x_1`, so `ΔJ = 0`) and the decode mask degenerates,
//! which at cryptographic scale happens with negligible probability but at
//! toy scale would hit half of all keys.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{ProtocolError, TcfError};
use crate::lattice::{Params, ZqVector};
use crate::quantum::{
    apply_u_j_at, x_from_index, DensityOp, MeasBasis, QState, RegisterLayout,
};
use crate::tcf::{
    chk, claw_delta_bits, dot_bits, gen_f_with, gen_g, inv_g, ClawFreeTrapdoor, GSetPolicy,
    NoiseModel, PublicKey, Trapdoor,
};

use super::messages::BasisChoice;
use super::prover::{apply_attack_branches, ProverSim, ProverSpec};

/// Per-qubit cap on claw-free key resampling before giving up.
const KEY_RESAMPLE_CAP: usize = 64;

/// Which key family backs each committed qubit when a session is prepared
/// for reconstruction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeyVariant {
    /// Claw-free keys at every position, whatever the basis choice says.
    /// This is the key set under which the underlying state is defined.
    AllClawFree,
    /// The measurement protocol's own assignment: injective keys where the
    /// basis choice is standard, claw-free where it is Hadamard.
    InjectiveAtStandard,
}

/// Which committed qubits receive the claw-phase correction `Z^{d_i·ΔJ_i}`
/// during reconstruction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeVariant {
    /// Every claw-free qubit.
    ZDecodeAll,
    /// Only claw-free qubits at Hadamard positions. (A phase never exists at
    /// injective positions, so under `InjectiveAtStandard` keys the two
    /// variants coincide.)
    SkipZAtStandard,
}

/// A session frozen right after the commitment stage: keys, trapdoors, the
/// measured commitment strings, and the joint pure state over
/// `[c0..c_{n-1}, p0..p_{n-1}]` with preimage registers still in `Z_q^n`
/// indexing.
///
/// Several reconstructions can run against one snapshot — and a different
/// attack can be grafted on via [`CommittedSession::with_spec`], because the
/// commitment stage never depends on the attack. That is what makes the
/// equality experiments exact rather than statistical: both sides see
/// identical keys, commitment strings, and amplitudes.
#[derive(Clone)]
pub struct CommittedSession {
    params: Params,
    h: BasisChoice,
    spec: ProverSpec,
    variant: KeyVariant,
    keys: Vec<PublicKey>,
    trapdoors: Vec<Trapdoor>,
    ys: Vec<ZqVector>,
    state: QState,
}

impl CommittedSession {
    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn h(&self) -> &BasisChoice {
        &self.h
    }

    pub fn spec(&self) -> &ProverSpec {
        &self.spec
    }

    pub fn variant(&self) -> KeyVariant {
        self.variant
    }

    pub fn keys(&self) -> &[PublicKey] {
        &self.keys
    }

    pub fn trapdoors(&self) -> &[Trapdoor] {
        &self.trapdoors
    }

    pub fn ys(&self) -> &[ZqVector] {
        &self.ys
    }

    pub fn state(&self) -> &QState {
        &self.state
    }

    /// The same frozen commitment with a different prover specification
    /// grafted on. The input must match the one the session was committed
    /// from — only the channel (applied after the commitment) may differ.
    pub fn with_spec(&self, spec: &ProverSpec) -> Result<Self, ProtocolError> {
        if spec.n_qubits()? != self.n() {
            return Err(ProtocolError::InvalidProver(format!(
                "{}-qubit prover grafted onto a {}-qubit session",
                spec.n_qubits()?,
                self.n()
            )));
        }
        if spec.input().label() != self.spec.input().label() {
            return Err(ProtocolError::InvalidProver(format!(
                "cannot graft a {} prover onto a session committed from {}",
                spec.input().label(),
                self.spec.input().label()
            )));
        }
        let mut out = self.clone();
        out.spec = spec.clone();
        Ok(out)
    }
}

/// Samples a claw-free key with zero key noise and a nonzero secret,
/// retrying as needed.
fn gen_clawfree_nonzero<R: Rng + ?Sized>(
    params: &Params,
    rng: &mut R,
) -> Result<(PublicKey, ClawFreeTrapdoor), ProtocolError> {
    for _ in 0..KEY_RESAMPLE_CAP {
        let (key, td) = gen_f_with(params, NoiseModel::Zero, rng)?;
        if td.s.vals().iter().any(|&v| v != 0) {
            return Ok((key, td));
        }
    }
    Err(ProtocolError::Tcf(TcfError::KeyGeneration(format!(
        "no nonzero claw-free secret in {KEY_RESAMPLE_CAP} samples"
    ))))
}

/// Runs key generation and the commitment stage once and freezes the
/// result. Keys are drawn on stream 0 of the seed, the prover's commitment
/// randomness on stream 2.
pub fn prepare_committed_session(
    spec: &ProverSpec,
    h: &BasisChoice,
    variant: KeyVariant,
    params: &Params,
    seed: u64,
) -> Result<CommittedSession, ProtocolError> {
    let n = spec.n_qubits()?;
    if h.len() != n {
        return Err(ProtocolError::InvalidProver(format!(
            "basis choice of {} bits for {n} qubits",
            h.len()
        )));
    }
    let mut keyrng = ChaCha20Rng::seed_from_u64(seed);
    keyrng.set_stream(0);
    let mut keys = Vec::with_capacity(n);
    let mut trapdoors = Vec::with_capacity(n);
    for i in 0..n {
        if variant == KeyVariant::InjectiveAtStandard && h.bit(i) == 0 {
            let (key, td) = gen_g(params, &mut keyrng).map_err(ProtocolError::Tcf)?;
            keys.push(key);
            trapdoors.push(Trapdoor::Injective(td));
        } else {
            let (key, td) = gen_clawfree_nonzero(params, &mut keyrng)?;
            keys.push(key);
            trapdoors.push(Trapdoor::ClawFree(td));
        }
    }
    let mut seedrng = ChaCha20Rng::seed_from_u64(seed);
    seedrng.set_stream(2);
    let mut prover = ProverSim::new(spec, params, &keys, seedrng.gen())?;
    let ys = prover.commit_all()?;
    Ok(CommittedSession {
        params: params.clone(),
        h: h.clone(),
        spec: spec.clone(),
        variant,
        keys,
        trapdoors,
        ys,
        state: prover.state().clone(),
    })
}

/// Fraction of the committed state's squared amplitude lying on basis
/// components whose every `(b_i, x_i)` is a valid preimage of the reported
/// `y_i`. Exactly 1 for any prover that commits through the published
/// densities: the commitment measurement cannot leave the support.
pub fn support_on_valid_preimages(session: &CommittedSession) -> Result<f64, ProtocolError> {
    let n = session.n();
    let params = &session.params;
    let layout = session.state.layout();
    let qn = layout.dim(n);
    // chk is O(m) per call; cache it over the (qubit, branch, preimage)
    // grid the scan below revisits constantly.
    let mut valid = vec![vec![[false; 2]; qn]; n];
    for i in 0..n {
        for idx in 0..qn {
            let x = x_from_index(idx, params.q, params.n);
            for b in 0..2u8 {
                valid[i][idx][b as usize] =
                    chk(&session.keys[i], params.b_p, b, &x, &session.ys[i])
                        .map_err(ProtocolError::Tcf)?;
            }
        }
    }
    let mut mass = 0.0;
    for (flat, amp) in session.state.amps().iter().enumerate() {
        let w = amp.norm_sqr();
        if w == 0.0 {
            continue;
        }
        let indices = layout.unflatten(flat);
        if (0..n).all(|i| valid[i][indices[n + i]][indices[i]]) {
            mass += w;
        }
    }
    Ok(mass)
}

/// Runs the reconstruction against a frozen session: bit-index every
/// preimage register, apply the prover's channel branch by branch,
/// Hadamard-transform the preimage registers, fold the claw phase
/// `(−1)^{b_i·(d_i·ΔJ_i)}` into the selected qubits, and trace out
/// everything but the committed block.
pub fn extract_density(
    session: &CommittedSession,
    decode: DecodeVariant,
) -> Result<DensityOp, ProtocolError> {
    let n = session.n();
    let params = &session.params;

    let mut state = session.state.clone();
    for i in 0..n {
        let reg = state
            .layout()
            .index_of(&format!("p{i}"))
            .map_err(ProtocolError::Quantum)?;
        state = apply_u_j_at(params, &state, reg).map_err(ProtocolError::Quantum)?;
    }
    let branches = match session.spec.attack() {
        Some(attack) => apply_attack_branches(&state, attack)?,
        None => vec![(1.0, state)],
    };

    // The XOR mask per claw-free qubit, where the decode applies it.
    let mut deltas = vec![None; n];
    for i in 0..n {
        if let Trapdoor::ClawFree(td) = &session.trapdoors[i] {
            if decode == DecodeVariant::ZDecodeAll || session.h.bit(i) == 1 {
                deltas[i] = Some(
                    claw_delta_bits(&session.keys[i], td, &session.ys[i])
                        .map_err(ProtocolError::Tcf)?,
                );
            }
        }
    }

    let committed_dim = 1usize << n;
    let mut acc = DMatrix::<Complex64>::zeros(committed_dim, committed_dim);
    for (weight, branch) in &branches {
        let mut rotated = branch.clone();
        let mut p_regs = Vec::with_capacity(n);
        for i in 0..n {
            let reg = rotated
                .layout()
                .index_of(&format!("p{i}"))
                .map_err(ProtocolError::Quantum)?;
            rotated = rotated.fwht_register(reg).map_err(ProtocolError::Quantum)?;
            p_regs.push(reg);
        }
        let layout = rotated.layout().clone();
        let rest_dim = layout.total_dim() / committed_dim;
        // Reshape to [committed × rest] with the phase folded in. The
        // committed qubits are the leading registers, so rows collect them;
        // every other register (Hadamard-rotated preimages, any auxiliary)
        // lands in the column index and is traced by the outer product.
        let mut a = DMatrix::<Complex64>::zeros(committed_dim, rest_dim);
        for (flat, amp) in rotated.amps().iter().enumerate() {
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            let indices = layout.unflatten(flat);
            let mut sign = 1.0f64;
            let mut row = 0usize;
            for i in 0..n {
                row = row * 2 + indices[i];
                if let Some(delta) = deltas[i] {
                    let d = indices[p_regs[i]] as u64;
                    if indices[i] as u8 & dot_bits(d, delta) == 1 {
                        sign = -sign;
                    }
                }
            }
            let mut col = 0usize;
            for r in n..layout.num_registers() {
                col = col * layout.dim(r) + indices[r];
            }
            a[(row, col)] = amp * Complex64::new(sign, 0.0);
        }
        acc += &a * a.adjoint() * Complex64::new(*weight, 0.0);
    }

    let names: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
    let regs: Vec<(&str, usize)> = names.iter().map(|s| (s.as_str(), 2)).collect();
    let layout = RegisterLayout::new(&regs).map_err(ProtocolError::Quantum)?;
    DensityOp::new(layout, acc).map_err(ProtocolError::Quantum)
}

/// The n-qubit state the prover effectively hands to the verifier: the full
/// reconstruction, with claw-free keys everywhere and the claw phase applied
/// everywhere. For an honest prover with zero key noise this returns the
/// committed input exactly — the phase kick undoes the commitment — and a
/// unitary channel rides through onto the input.
pub fn construct_underlying_state(
    session: &CommittedSession,
) -> Result<DensityOp, ProtocolError> {
    if session.variant != KeyVariant::AllClawFree {
        return Err(ProtocolError::InvalidProver(
            "state reconstruction needs claw-free keys at every position".into(),
        ));
    }
    extract_density(session, DecodeVariant::ZDecodeAll)
}

/// Distribution of outcomes when `rho`'s qubits are measured in the bases
/// `h` selects (0 standard, 1 Hadamard), flat-indexed with qubit 0 most
/// significant.
pub fn density_distribution(
    rho: &DensityOp,
    h: &BasisChoice,
) -> Result<Vec<f64>, ProtocolError> {
    let n = rho.layout().num_registers();
    if h.len() != n {
        return Err(ProtocolError::InvalidProver(format!(
            "basis choice of {} bits for {n} qubits",
            h.len()
        )));
    }
    let sel: Vec<(usize, MeasBasis)> = (0..n)
        .map(|i| {
            (i, if h.bit(i) == 0 { MeasBasis::Standard } else { MeasBasis::Hadamard })
        })
        .collect();
    rho.measurement_distribution(&sel).map_err(ProtocolError::Quantum)
}

/// Per-qubit decode rule of the Hadamard round.
enum QubitDecode {
    /// Standard position: the bit recovered by inverting the commitment
    /// string. `None` when inversion fails — that position then rejects
    /// every outcome.
    Fixed(Option<u8>),
    /// Hadamard position: XOR the answer bit with `d·ΔJ`.
    Claw(u64),
}

/// Exact joint distribution of the verifier's decoded bits for this frozen
/// session, conditioned on acceptance, together with the acceptance
/// probability. Plays the Hadamard round against every channel branch in
/// superposition and folds each outcome through the verifier's decode:
/// standard positions read the trapdoor inversion of `y_i` (deterministic
/// given the session), Hadamard positions decode `b′_i ⊕ d_i·ΔJ_i` and
/// reject inadmissible `d_i`.
///
/// The session must carry the protocol's key assignment
/// ([`KeyVariant::InjectiveAtStandard`]): the verifier has no decode rule
/// for a claw-free key at a standard position.
pub fn exact_decode_distribution(
    session: &CommittedSession,
    gset: GSetPolicy,
) -> Result<(Vec<f64>, f64), ProtocolError> {
    let n = session.n();
    let params = &session.params;

    let mut decode = Vec::with_capacity(n);
    for i in 0..n {
        match (&session.trapdoors[i], session.h.bit(i)) {
            (Trapdoor::Injective(td), 0) => {
                let fixed = inv_g(&session.keys[i], td, &session.ys[i]).ok().map(|(b, _)| b);
                decode.push(QubitDecode::Fixed(fixed));
            }
            (Trapdoor::ClawFree(td), 1) => {
                decode.push(QubitDecode::Claw(
                    claw_delta_bits(&session.keys[i], td, &session.ys[i])
                        .map_err(ProtocolError::Tcf)?,
                ));
            }
            _ => {
                return Err(ProtocolError::InvalidProver(
                    "protocol decode needs injective keys at standard positions and \
                     claw-free keys at Hadamard positions"
                        .into(),
                ))
            }
        }
    }

    let mut state = session.state.clone();
    for i in 0..n {
        let reg = state
            .layout()
            .index_of(&format!("p{i}"))
            .map_err(ProtocolError::Quantum)?;
        state = apply_u_j_at(params, &state, reg).map_err(ProtocolError::Quantum)?;
    }
    let branches = match session.spec.attack() {
        Some(attack) => apply_attack_branches(&state, attack)?,
        None => vec![(1.0, state)],
    };

    let mut dist = vec![0.0f64; 1 << n];
    let mut accept_mass = 0.0f64;
    for (weight, branch) in &branches {
        // Hadamard basis on the committed and preimage registers; an
        // auxiliary register's basis cannot move the (b′, d) marginal, so it
        // is left alone and summed over.
        let mut rotated = branch.clone();
        let mut p_regs = Vec::with_capacity(n);
        for i in 0..n {
            let c = rotated
                .layout()
                .index_of(&format!("c{i}"))
                .map_err(ProtocolError::Quantum)?;
            rotated = rotated.fwht_register(c).map_err(ProtocolError::Quantum)?;
            let p = rotated
                .layout()
                .index_of(&format!("p{i}"))
                .map_err(ProtocolError::Quantum)?;
            rotated = rotated.fwht_register(p).map_err(ProtocolError::Quantum)?;
            p_regs.push(p);
        }
        let layout = rotated.layout().clone();
        for (flat, amp) in rotated.amps().iter().enumerate() {
            let p = weight * amp.norm_sqr();
            if p == 0.0 {
                continue;
            }
            let indices = layout.unflatten(flat);
            let mut m = 0usize;
            let mut ok = true;
            for i in 0..n {
                match &decode[i] {
                    QubitDecode::Fixed(Some(b)) => m = m << 1 | *b as usize,
                    QubitDecode::Fixed(None) => {
                        ok = false;
                        break;
                    }
                    QubitDecode::Claw(delta) => {
                        let d = indices[p_regs[i]] as u64;
                        if !gset.admits(d) {
                            ok = false;
                            break;
                        }
                        let bprime = indices[i] as u8;
                        m = m << 1 | (bprime ^ dot_bits(d, *delta)) as usize;
                    }
                }
            }
            if ok {
                dist[m] += p;
                accept_mass += p;
            }
        }
    }
    if accept_mass > 0.0 {
        for v in &mut dist {
            *v /= accept_mass;
        }
    }
    Ok((dist, accept_mass))
}

/// The prover specification with the input replaced, channel untouched.
fn respecify(spec: &ProverSpec, input: super::prover::InputState) -> Result<ProverSpec, ProtocolError> {
    match spec {
        ProverSpec::Honest { .. } => ProverSpec::honest(input),
        ProverSpec::Characterized { attack, .. } => {
            ProverSpec::characterized(input, attack.clone())
        }
        ProverSpec::Trivial { attack, .. } => ProverSpec::trivial(input, attack.clone()),
    }
}

/// Exact decoded-bit distribution of the measurement protocol for a prover
/// specification — the distribution of `m` conditioned on acceptance — and
/// the overall acceptance probability.
///
/// Standard-basis positions collapse at commitment time with Born weights,
/// so the full distribution is the sector-weighted average of per-sector
/// conditionals: the input is split over the populated standard sectors,
/// each sector is committed once under the protocol's keys, and the frozen
/// session's exact conditional is computed. The Hadamard-position
/// conditional does not depend on which keys or commitment strings the
/// session drew (the cross-seed tests pin this down), so one session per
/// sector is the whole distribution.
pub fn exact_distribution(
    spec: &ProverSpec,
    h: &BasisChoice,
    params: &Params,
    gset: GSetPolicy,
    seed: u64,
) -> Result<(Vec<f64>, f64), ProtocolError> {
    let n = spec.n_qubits()?;
    if h.len() != n {
        return Err(ProtocolError::InvalidProver(format!(
            "basis choice of {} bits for {n} qubits",
            h.len()
        )));
    }
    let psi = spec.input().state()?;
    let mut sectors: Vec<(f64, QState)> = vec![(1.0, psi)];
    for i in 0..n {
        if h.bit(i) != 0 {
            continue;
        }
        let mut next = Vec::with_capacity(2 * sectors.len());
        for (w, s) in &sectors {
            let marginal = s.register_distribution(i).map_err(ProtocolError::Quantum)?;
            for (b, &pb) in marginal.iter().enumerate() {
                if pb > 0.0 {
                    let (_, collapsed) =
                        s.project_register(i, b).map_err(ProtocolError::Quantum)?;
                    next.push((w * pb, collapsed));
                }
            }
        }
        sectors = next;
    }

    let mut dist = vec![0.0f64; 1 << n];
    let mut accept = 0.0f64;
    for (k, (w, sector)) in sectors.iter().enumerate() {
        let sub = respecify(spec, super::prover::InputState::Custom(sector.amps().to_vec()))?;
        let session = prepare_committed_session(
            &sub,
            h,
            KeyVariant::InjectiveAtStandard,
            params,
            seed.wrapping_add(k as u64),
        )?;
        let (d, acc) = exact_decode_distribution(&session, gset)?;
        for (slot, v) in dist.iter_mut().zip(&d) {
            *slot += w * acc * v;
        }
        accept += w * acc;
    }
    if accept > 0.0 {
        for v in &mut dist {
            *v /= accept;
        }
    }
    Ok((dist, accept))
}
