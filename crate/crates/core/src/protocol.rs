//! The three-stage exchange and multi-block key sessions.
//!
//! ```text
//!   Alice                          Bob
//!   UA·S          ── stage 1 ──▶
//!                 ◀── stage 2 ──   UB·UA·S
//!   UA†·UB·UA·S   ── stage 3 ──▶
//!                                  UB†·UA†·UB·UA·S  ≅  S
//! ```
//!
//! The last line equals the secret up to a global phase whenever `UA` and `UB`
//! commute up to a phase, so the pair is checked before anything is sent.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;

use crate::adversary::{transmit, ChannelContext, EveGuesser, EveStrategy, NoiseModel};
use crate::error::{domain, Error, Result};
use crate::opsets::{commutation_phase, family_by_name};
use crate::qcore::{equal_up_to_global_phase, index_bits, Outcome, StateVector, UnitaryOperator, DERIVED_TOL};
use crate::rng::stream_rng;

/// One of the three transmissions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StageLabel {
    AliceToBob1,
    BobToAlice2,
    AliceToBob3,
}

impl StageLabel {
    pub const ALL: [StageLabel; 3] = [StageLabel::AliceToBob1, StageLabel::BobToAlice2, StageLabel::AliceToBob3];

    /// 1, 2 or 3.
    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(StageLabel::AliceToBob1),
            2 => Some(StageLabel::BobToAlice2),
            3 => Some(StageLabel::AliceToBob3),
            _ => None,
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            StageLabel::AliceToBob1 => 0,
            StageLabel::BobToAlice2 => 1,
            StageLabel::AliceToBob3 => 2,
        }
    }
}

impl fmt::Display for StageLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            StageLabel::AliceToBob1 => "alice->bob (1)",
            StageLabel::BobToAlice2 => "bob->alice (2)",
            StageLabel::AliceToBob3 => "alice->bob (3)",
        };
        f.write_str(name)
    }
}

/// Full record of one exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub secret: StateVector,
    pub alice_op: UnitaryOperator,
    pub bob_op: UnitaryOperator,
    /// State as it left the sender, indexed by stage.
    pub wire_states: [StateVector; 3],
    /// State as it reached the receiver, after eavesdropping and noise.
    pub delivered_states: [StateVector; 3],
    pub recovered: StateVector,
    /// Bob's computational-basis readout of `recovered`.
    pub measured: Outcome,
    pub eve_records: Vec<(StageLabel, Outcome)>,
}

impl Transcript {
    pub fn wire(&self, stage: StageLabel) -> &StateVector {
        &self.wire_states[stage.index()]
    }

    pub fn delivered(&self, stage: StageLabel) -> &StateVector {
        &self.delivered_states[stage.index()]
    }

    /// Eve's outcome indices in stage order.
    pub fn eve_outcomes(&self) -> Vec<usize> {
        self.eve_records.iter().map(|(_, o)| o.index).collect()
    }
}

/// Runs the four steps: Alice applies `alice_op`, Bob applies `bob_op`, Alice applies
/// `alice_op†`, Bob applies `bob_op†` and measures. Each of the three transmissions
/// passes through `channel`.
///
/// Fails with [`Error::NonCommuting`] when the operators do not commute up to a
/// global phase.
pub fn run_three_stage<R: Rng + ?Sized>(
    secret: &StateVector,
    alice_op: &UnitaryOperator,
    bob_op: &UnitaryOperator,
    channel: &ChannelContext,
    rng: &mut R,
) -> Result<Transcript> {
    if alice_op.dim() != secret.dim() || bob_op.dim() != secret.dim() {
        return domain(format!(
            "operators of dimension {} and {} cannot act on a secret of dimension {}",
            alice_op.dim(),
            bob_op.dim(),
            secret.dim()
        ));
    }
    if commutation_phase(alice_op, bob_op, DERIVED_TOL)?.is_none() {
        return Err(Error::NonCommuting {
            alice: alice_op.label().to_string(),
            bob: bob_op.label().to_string(),
        });
    }
    channel.check_dim(secret.dim())?;

    let alice_undo = alice_op.adjoint();
    let bob_undo = bob_op.adjoint();
    let mut eve_records = Vec::new();

    let sent1 = alice_op.apply(secret)?;
    let (got1, rec1) = transmit(StageLabel::AliceToBob1, &sent1, channel, rng)?;
    eve_records.extend(rec1.map(|o| (StageLabel::AliceToBob1, o)));

    let sent2 = bob_op.apply(&got1)?;
    let (got2, rec2) = transmit(StageLabel::BobToAlice2, &sent2, channel, rng)?;
    eve_records.extend(rec2.map(|o| (StageLabel::BobToAlice2, o)));

    let sent3 = alice_undo.apply(&got2)?;
    let (got3, rec3) = transmit(StageLabel::AliceToBob3, &sent3, channel, rng)?;
    eve_records.extend(rec3.map(|o| (StageLabel::AliceToBob3, o)));

    let recovered = bob_undo.apply(&got3)?;
    let (measured, _) = recovered.measure(rng);

    Ok(Transcript {
        secret: secret.clone(),
        alice_op: alice_op.clone(),
        bob_op: bob_op.clone(),
        wire_states: [sent1, sent2, sent3],
        delivered_states: [got1, got2, got3],
        recovered,
        measured,
        eve_records,
    })
}

/// Whether the recovered state equals the secret up to a global phase.
pub fn verify_recovery(transcript: &Transcript, tol: f64) -> bool {
    equal_up_to_global_phase(&transcript.recovered, &transcript.secret, tol).unwrap_or(false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub family_name: String,
    pub blocks: usize,
    pub eve_strategy: Option<EveStrategy>,
    pub noise: Option<NoiseModel>,
    pub seed: u64,
}

impl SessionConfig {
    pub fn clean(family_name: impl Into<String>, blocks: usize, seed: u64) -> Self {
        Self { family_name: family_name.into(), blocks, eve_strategy: None, noise: None, seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionReport {
    pub alice_bits: Vec<bool>,
    pub bob_bits: Vec<bool>,
    pub block_transcripts: Vec<Transcript>,
    /// Hamming distance between the bit lists divided by their length.
    pub bit_error_rate: f64,
    /// Fraction of blocks whose secret Eve guessed in full; `None` without Eve.
    pub eve_guess_success_rate: Option<f64>,
}

pub fn hamming_distance(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

struct Block {
    transcript: Transcript,
    secret_index: usize,
    eve_correct: Option<bool>,
}

/// Runs `config.blocks` independent exchanges.
///
/// In each block Alice draws a uniform basis secret (one bit per qubit), both parties
/// draw a family member uniformly and independently, and Bob's measured bits become
/// his copy of the key. Block `b` uses random stream `b` of `config.seed`, so the
/// report depends only on the configuration.
pub fn run_key_session(config: &SessionConfig) -> Result<SessionReport> {
    let family = family_by_name(&config.family_name)?;
    if config.blocks == 0 {
        return Err(Error::Config("a session needs at least one block".into()));
    }
    let channel = ChannelContext { eve: config.eve_strategy.clone(), noise: config.noise };
    channel.check_dim(family.dim())?;
    let guesser = config
        .eve_strategy
        .as_ref()
        .map(|eve| EveGuesser::build(&family, eve))
        .transpose()?;
    let num_qubits = family.num_qubits();

    let blocks = (0..config.blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(config.seed, b as u64);
            let secret_index = rng.random_range(0..family.dim());
            let alice = family.draw(&mut rng);
            let bob = family.draw(&mut rng);
            let secret = StateVector::basis(secret_index, num_qubits)?;
            let transcript = run_three_stage(
                &secret,
                &family.members()[alice],
                &family.members()[bob],
                &channel,
                &mut rng,
            )?;
            let eve_correct = guesser
                .as_ref()
                .map(|g| g.guess(&transcript.eve_outcomes(), &mut rng) == secret_index);
            Ok(Block { transcript, secret_index, eve_correct })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut alice_bits = Vec::with_capacity(blocks.len() * num_qubits);
    let mut bob_bits = Vec::with_capacity(blocks.len() * num_qubits);
    let mut eve_hits = 0usize;
    for block in &blocks {
        alice_bits.extend(index_bits(block.secret_index, num_qubits));
        bob_bits.extend(&block.transcript.measured.bits);
        eve_hits += usize::from(block.eve_correct == Some(true));
    }
    let bit_error_rate = hamming_distance(&alice_bits, &bob_bits) as f64 / alice_bits.len() as f64;
    let eve_guess_success_rate = guesser.map(|_| eve_hits as f64 / blocks.len() as f64);
    Ok(SessionReport {
        alice_bits,
        bob_bits,
        block_transcripts: blocks.into_iter().map(|b| b.transcript).collect(),
        bit_error_rate,
        eve_guess_success_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opsets::{hadamard_family, pauli_family};
    use crate::qcore::basis_state;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_state(got: &StateVector, want: &[Complex64]) {
        for (a, b) in got.amplitudes().iter().zip(want) {
            assert!((a - b).norm() < DERIVED_TOL, "got {got}, want {want:?}");
        }
    }

    #[test]
    fn identity_pair_leaves_everything_alone() {
        let p = pauli_family();
        let i = p.member("I").unwrap();
        let zero = basis_state(0, 1).unwrap();
        let mut rng = stream_rng(0, 0);
        let t = run_three_stage(&zero, i, i, &ChannelContext::clean(), &mut rng).unwrap();
        for stage in StageLabel::ALL {
            assert_eq!(t.wire(stage), &zero);
            assert_eq!(t.delivered(stage), &zero);
        }
        assert_eq!(t.recovered, zero);
        assert_eq!(t.measured.index, 0);
        assert!(t.eve_records.is_empty());
    }

    #[test]
    fn x_then_y_by_hand() {
        let p = pauli_family();
        let zero = basis_state(0, 1).unwrap();
        let mut rng = stream_rng(0, 0);
        let t = run_three_stage(&zero, p.member("X").unwrap(), p.member("Y").unwrap(), &ChannelContext::clean(), &mut rng)
            .unwrap();
        let zero_c = c(0.0, 0.0);
        assert_state(t.wire(StageLabel::AliceToBob1), &[zero_c, c(1.0, 0.0)]);
        assert_state(t.wire(StageLabel::BobToAlice2), &[c(0.0, -1.0), zero_c]);
        assert_state(t.wire(StageLabel::AliceToBob3), &[zero_c, c(0.0, -1.0)]);
        assert_state(&t.recovered, &[c(-1.0, 0.0), zero_c]);
        assert!(verify_recovery(&t, DERIVED_TOL));
    }

    #[test]
    fn hadamard_pair_by_hand() {
        let h = hadamard_family();
        let l = h.member("L").unwrap();
        let one = basis_state(1, 1).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut rng = stream_rng(0, 0);
        let t = run_three_stage(&one, l, l, &ChannelContext::clean(), &mut rng).unwrap();
        assert_state(t.wire(StageLabel::AliceToBob1), &[c(r, 0.0), c(-r, 0.0)]);
        assert_state(t.wire(StageLabel::BobToAlice2), &[c(0.0, 0.0), c(1.0, 0.0)]);
        assert_state(t.wire(StageLabel::AliceToBob3), &[c(r, 0.0), c(-r, 0.0)]);
        assert_state(&t.recovered, &[c(0.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(t.measured.index, 1);
    }

    #[test]
    fn refuses_non_commuting_pair() {
        let x = pauli_family().member("X").unwrap().clone();
        let l = hadamard_family().member("L").unwrap().clone();
        let zero = basis_state(0, 1).unwrap();
        let mut rng = stream_rng(0, 0);
        let err = run_three_stage(&zero, &x, &l, &ChannelContext::clean(), &mut rng).unwrap_err();
        assert_eq!(err, Error::NonCommuting { alice: "X".into(), bob: "L".into() });
        let err = run_three_stage(&basis_state(0, 2).unwrap(), &x, &x, &ChannelContext::clean(), &mut rng).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn tampered_transcript_fails_recovery() {
        let p = pauli_family();
        let zero = basis_state(0, 1).unwrap();
        let mut rng = stream_rng(0, 0);
        let mut t =
            run_three_stage(&zero, p.member("Z").unwrap(), p.member("X").unwrap(), &ChannelContext::clean(), &mut rng)
                .unwrap();
        assert!(verify_recovery(&t, DERIVED_TOL));
        t.recovered = basis_state(1, 1).unwrap();
        assert!(!verify_recovery(&t, DERIVED_TOL));
    }

    #[test]
    fn stage_numbers_round_trip() {
        for stage in StageLabel::ALL {
            assert_eq!(StageLabel::from_number(stage.number()), Some(stage));
        }
        assert_eq!(StageLabel::from_number(4), None);
    }

    #[test]
    fn clean_sessions_are_error_free() {
        let report = run_key_session(&SessionConfig::clean("pauli", 100, 9)).unwrap();
        assert_eq!(report.bit_error_rate, 0.0);
        assert_eq!(report.bob_bits.len(), 100);
        assert_eq!(report.eve_guess_success_rate, None);
        let report = run_key_session(&SessionConfig::clean("dft", 100, 9)).unwrap();
        assert_eq!(report.bit_error_rate, 0.0);
        assert_eq!(report.bob_bits.len(), 200);
        assert_eq!(report.block_transcripts.len(), 100);
    }

    #[test]
    fn sessions_are_deterministic() {
        let mut config = SessionConfig::clean("hadamard", 200, 77);
        config.eve_strategy = Some(EveStrategy::new([StageLabel::AliceToBob1], None).unwrap());
        let a = run_key_session(&config).unwrap();
        let b = run_key_session(&config).unwrap();
        assert_eq!(a, b);
        config.seed = 78;
        assert_ne!(run_key_session(&config).unwrap().bob_bits, a.bob_bits);
    }

    #[test]
    fn session_configuration_errors() {
        assert!(matches!(run_key_session(&SessionConfig::clean("rotation", 10, 0)), Err(Error::Config(_))));
        assert!(matches!(run_key_session(&SessionConfig::clean("pauli", 0, 0)), Err(Error::Config(_))));
        let mut config = SessionConfig::clean("pauli", 10, 0);
        let rotation = crate::opsets::quaternion_family().member("Qi").unwrap().clone();
        config.eve_strategy = Some(EveStrategy::new([StageLabel::AliceToBob1], Some(rotation)).unwrap());
        assert!(run_key_session(&config).is_err());
    }

    #[test]
    fn bit_error_rate_is_hamming_fraction() {
        let mut config = SessionConfig::clean("hadamard", 500, 3);
        config.noise = Some(NoiseModel::new(0.2).unwrap());
        let r = run_key_session(&config).unwrap();
        let expected = hamming_distance(&r.alice_bits, &r.bob_bits) as f64 / r.alice_bits.len() as f64;
        assert!((r.bit_error_rate - expected).abs() < 1e-12);
        assert!(r.bit_error_rate > 0.0);
    }
}
