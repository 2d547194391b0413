//! Channel interference and its analysis.
//!
//! An eavesdropper runs an intercept-resend attack on a chosen subset of the three
//! transmissions: she optionally rotates the state, measures it in the computational
//! basis, re-prepares the collapsed basis state and undoes the rotation. Independent
//! per-qubit bit flips model channel noise and are applied after her.
//!
//! [`exact_analysis`] enumerates every operator pair and every branch of Eve's
//! measurements with its Born probability. [`monte_carlo_analysis`] samples the same
//! scenarios through [`run_three_stage`] and is checked against it.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::opsets::OperatorFamily;
use crate::protocol::{run_three_stage, StageLabel};
use crate::qcore::{index_bits, Outcome, StateVector, UnitaryOperator, DERIVED_TOL};
use crate::rng::stream_rng;

/// Branches below this probability are dropped from the enumeration.
const BRANCH_FLOOR: f64 = 1e-15;

/// Joint probabilities this close to the maximum count as ties for Eve's guess.
const TIE_TOL: f64 = 1e-12;

/// Intercept-resend attack on a nonempty set of stages.
#[derive(Debug, Clone, PartialEq)]
pub struct EveStrategy {
    stages: BTreeSet<StageLabel>,
    pre_rotation: Option<UnitaryOperator>,
}

impl EveStrategy {
    pub fn new(stages: impl IntoIterator<Item = StageLabel>, pre_rotation: Option<UnitaryOperator>) -> Result<Self> {
        let stages: BTreeSet<_> = stages.into_iter().collect();
        if stages.is_empty() {
            return Err(Error::Config("an eavesdropper must attack at least one stage".into()));
        }
        Ok(Self { stages, pre_rotation })
    }

    pub fn stages(&self) -> &BTreeSet<StageLabel> {
        &self.stages
    }

    pub fn pre_rotation(&self) -> Option<&UnitaryOperator> {
        self.pre_rotation.as_ref()
    }

    pub fn attacks(&self, stage: StageLabel) -> bool {
        self.stages.contains(&stage)
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        match &self.pre_rotation {
            Some(r) if r.dim() != dim => domain(format!(
                "eavesdropper rotation {} has dimension {} but the session has dimension {dim}",
                r.label(),
                r.dim()
            )),
            _ => Ok(()),
        }
    }

    /// Measures `psi` in the rotated basis. Returns the outcome and the re-prepared
    /// state that is sent on.
    fn intercept<R: Rng + ?Sized>(&self, psi: &StateVector, rng: &mut R) -> Result<(Outcome, StateVector)> {
        match &self.pre_rotation {
            None => Ok(psi.measure(rng)),
            Some(r) => {
                let (outcome, collapsed) = r.apply(psi)?.measure(rng);
                Ok((outcome, r.adjoint().apply(&collapsed)?))
            }
        }
    }
}

/// Independent bit flip on each qubit of every transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    bit_flip_probability: f64,
}

impl NoiseModel {
    pub fn new(bit_flip_probability: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&bit_flip_probability) {
            return Err(Error::Config(format!(
                "bit flip probability {bit_flip_probability} is outside [0, 1]"
            )));
        }
        Ok(Self { bit_flip_probability })
    }

    pub fn bit_flip_probability(&self) -> f64 {
        self.bit_flip_probability
    }
}

/// Everything that can happen to a state between sender and receiver.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChannelContext {
    pub eve: Option<EveStrategy>,
    pub noise: Option<NoiseModel>,
}

impl ChannelContext {
    pub fn clean() -> Self {
        Self::default()
    }

    pub fn with_eve(eve: EveStrategy) -> Self {
        Self { eve: Some(eve), noise: None }
    }

    pub fn with_noise(noise: NoiseModel) -> Self {
        Self { eve: None, noise: Some(noise) }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        self.eve.as_ref().map_or(Ok(()), |e| e.check_dim(dim))
    }
}

/// `X` on one qubit: swaps the amplitudes of basis indices that differ in that bit.
fn flip_qubit(psi: &StateVector, qubit: usize) -> StateVector {
    let mask = 1 << (psi.num_qubits() - 1 - qubit);
    let amplitudes = (0..psi.dim()).map(|k| psi.amplitudes()[k ^ mask]).collect();
    StateVector::new(amplitudes).expect("permuting amplitudes preserves the norm")
}

/// Sends `psi` through the channel at `stage`.
///
/// Eve acts first when she attacks this stage, then each qubit is flipped with the
/// noise probability. Returns the delivered state and Eve's outcome, if any.
pub fn transmit<R: Rng + ?Sized>(
    stage: StageLabel,
    psi: &StateVector,
    ctx: &ChannelContext,
    rng: &mut R,
) -> Result<(StateVector, Option<Outcome>)> {
    ctx.check_dim(psi.dim())?;
    let (mut state, record) = match &ctx.eve {
        Some(eve) if eve.attacks(stage) => {
            let (outcome, resent) = eve.intercept(psi, rng)?;
            (resent, Some(outcome))
        }
        _ => (psi.clone(), None),
    };
    if let Some(noise) = &ctx.noise {
        for qubit in 0..state.num_qubits() {
            if rng.random::<f64>() < noise.bit_flip_probability {
                state = flip_qubit(&state, qubit);
            }
        }
    }
    Ok((state, record))
}

/// Exact disturbance and leakage figures for one secret.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactAnalysis {
    /// Expected fraction of Bob's measured bits that differ from the secret bits.
    pub bit_error_rate: f64,
    /// Expected `1 - |⟨secret|recovered⟩|²`: the probability that the recovered state
    /// fails a projective test against the secret. For basis secrets this is the
    /// probability that Bob's block contains at least one error.
    pub detection_relevant_disturbance: f64,
    /// Probability that Eve's maximum-a-posteriori guess of the secret is correct.
    pub eve_guess_success_rate: f64,
    /// Number of (Alice operator, Bob operator, Eve outcome sequence) branches with
    /// nonzero probability.
    pub branch_count: usize,
    /// Sum of all branch probabilities.
    pub total_probability: f64,
}

/// A leaf of the enumeration: Eve's outcomes so far and the state Bob ends with.
#[derive(Debug, Clone)]
struct Branch {
    probability: f64,
    records: Vec<usize>,
    state: StateVector,
}

fn check_secret(family: &OperatorFamily, secret: &StateVector) -> Result<usize> {
    if family.dim() != secret.dim() {
        return domain(format!(
            "family {} has dimension {} but the secret has dimension {}",
            family.name(),
            family.dim(),
            secret.dim()
        ));
    }
    secret
        .basis_index(DERIVED_TOL)
        .ok_or_else(|| Error::Domain("the secret must be a computational basis state".into()))
}

/// Splits every branch over Eve's measurement outcomes when she attacks `stage`.
fn intercept_branches(branches: Vec<Branch>, stage: StageLabel, eve: &EveStrategy) -> Result<Vec<Branch>> {
    if !eve.attacks(stage) {
        return Ok(branches);
    }
    let undo = eve.pre_rotation().map(UnitaryOperator::adjoint);
    let mut out = Vec::with_capacity(branches.len() * 2);
    for branch in branches {
        let measured = match eve.pre_rotation() {
            Some(r) => r.apply(&branch.state)?,
            None => branch.state.clone(),
        };
        for (k, p) in measured.outcome_distribution().into_iter().enumerate() {
            if p <= BRANCH_FLOOR {
                continue;
            }
            let collapsed = StateVector::basis(k, measured.num_qubits())?;
            let resent = match &undo {
                Some(u) => u.apply(&collapsed)?,
                None => collapsed,
            };
            let mut records = branch.records.clone();
            records.push(k);
            out.push(Branch { probability: branch.probability * p, records, state: resent });
        }
    }
    Ok(out)
}

fn map_branches(branches: Vec<Branch>, op: &UnitaryOperator) -> Result<Vec<Branch>> {
    branches
        .into_iter()
        .map(|b| Ok(Branch { state: op.apply(&b.state)?, ..b }))
        .collect()
}

/// Every noise-free branch of the exchange for a fixed secret, with operator pairs
/// weighted uniformly.
fn enumerate_branches(family: &OperatorFamily, eve: &EveStrategy, secret: &StateVector) -> Result<Vec<Branch>> {
    let weight = 1.0 / (family.len() * family.len()) as f64;
    let mut leaves = Vec::new();
    for alice in family.members() {
        for bob in family.members() {
            let start = Branch { probability: weight, records: Vec::new(), state: alice.apply(secret)? };
            let mut branches = intercept_branches(vec![start], StageLabel::AliceToBob1, eve)?;
            branches = map_branches(branches, bob)?;
            branches = intercept_branches(branches, StageLabel::BobToAlice2, eve)?;
            branches = map_branches(branches, &alice.adjoint())?;
            branches = intercept_branches(branches, StageLabel::AliceToBob3, eve)?;
            leaves.extend(map_branches(branches, &bob.adjoint())?);
        }
    }
    Ok(leaves)
}

/// Eve's maximum-a-posteriori guess of the secret from her outcome records.
///
/// The posterior comes from the exact noise-free joint distribution of secret and
/// records, with the secret uniform over the computational basis. Ties are broken
/// uniformly at random, and records the noise-free model never produces fall back
/// to a uniform guess.
#[derive(Debug, Clone, PartialEq)]
pub struct EveGuesser {
    dim: usize,
    best: BTreeMap<Vec<usize>, Vec<usize>>,
}

impl EveGuesser {
    pub fn build(family: &OperatorFamily, eve: &EveStrategy) -> Result<Self> {
        eve.check_dim(family.dim())?;
        let dim = family.dim();
        let mut joint: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
        for s in 0..dim {
            let secret = StateVector::basis(s, family.num_qubits())?;
            for branch in enumerate_branches(family, eve, &secret)? {
                joint.entry(branch.records).or_insert_with(|| vec![0.0; dim])[s] += branch.probability / dim as f64;
            }
        }
        let best = joint
            .into_iter()
            .map(|(records, weights)| {
                let top = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let argmax = (0..dim).filter(|&s| weights[s] >= top - TIE_TOL).collect();
                (records, argmax)
            })
            .collect();
        Ok(Self { dim, best })
    }

    /// Secrets that maximize the posterior for `records`.
    pub fn candidates(&self, records: &[usize]) -> Vec<usize> {
        self.best
            .get(records)
            .cloned()
            .unwrap_or_else(|| (0..self.dim).collect())
    }

    /// Probability that the tie-broken guess equals `secret`.
    pub fn success_probability(&self, records: &[usize], secret: usize) -> f64 {
        let candidates = self.candidates(records);
        if candidates.contains(&secret) {
            1.0 / candidates.len() as f64
        } else {
            0.0
        }
    }

    pub fn guess<R: Rng + ?Sized>(&self, records: &[usize], rng: &mut R) -> usize {
        let candidates = self.candidates(records);
        if candidates.len() == 1 {
            candidates[0]
        } else {
            candidates[rng.random_range(0..candidates.len())]
        }
    }
}

fn bit_error_fraction(measured: usize, secret: usize, num_qubits: usize) -> f64 {
    let errors = index_bits(measured, num_qubits)
        .iter()
        .zip(index_bits(secret, num_qubits))
        .filter(|(a, b)| **a != *b)
        .count();
    errors as f64 / num_qubits as f64
}

/// Exact error rate, disturbance and Eve's success for a noise-free exchange of the
/// basis state `secret`, with both operators drawn uniformly from `family`.
pub fn exact_analysis(family: &OperatorFamily, eve: &EveStrategy, secret: &StateVector) -> Result<ExactAnalysis> {
    let secret_index = check_secret(family, secret)?;
    eve.check_dim(family.dim())?;
    let guesser = EveGuesser::build(family, eve)?;
    let branches = enumerate_branches(family, eve, secret)?;
    let num_qubits = family.num_qubits();

    let mut total_probability = 0.0;
    let mut bit_error_rate = 0.0;
    let mut disturbance = 0.0;
    let mut eve_success = 0.0;
    for branch in &branches {
        total_probability += branch.probability;
        let expected_errors: f64 = branch
            .state
            .outcome_distribution()
            .iter()
            .enumerate()
            .map(|(k, p)| p * bit_error_fraction(k, secret_index, num_qubits))
            .sum();
        bit_error_rate += branch.probability * expected_errors;
        disturbance += branch.probability * (1.0 - branch.state.fidelity(secret)?);
        eve_success += branch.probability * guesser.success_probability(&branch.records, secret_index);
    }
    if (total_probability - 1.0).abs() > 1e-12 {
        return domain(format!("branch probabilities sum to {total_probability}, not 1"));
    }
    let clamp = |x: f64| x.clamp(0.0, 1.0);
    Ok(ExactAnalysis {
        bit_error_rate: clamp(bit_error_rate),
        detection_relevant_disturbance: clamp(disturbance),
        eve_guess_success_rate: clamp(eve_success),
        branch_count: branches.len(),
        total_probability,
    })
}

/// Sample means with standard errors of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub trials: usize,
    pub bit_error_rate: f64,
    pub bit_error_std_err: f64,
    pub eve_guess_success_rate: Option<f64>,
    pub eve_guess_std_err: Option<f64>,
}

/// Mean and standard error of per-trial values. For 0/1 values this is the binomial
/// standard error `sqrt(p(1-p)/n)`.
pub fn mean_and_std_err(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let second = values.iter().map(|x| x * x).sum::<f64>() / n;
    let variance = (second - mean * mean).max(0.0);
    (mean, (variance / n).sqrt())
}

/// Repeats the exchange of `secret` `trials` times with fresh uniform operator draws.
///
/// Trial `t` uses random stream `t` of `seed`. Eve's guess, when she is present, uses
/// the same rule as [`exact_analysis`].
pub fn monte_carlo_analysis(
    family: &OperatorFamily,
    ctx: &ChannelContext,
    secret: &StateVector,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    let secret_index = check_secret(family, secret)?;
    if trials == 0 {
        return domain("at least one trial is required");
    }
    ctx.check_dim(family.dim())?;
    let guesser = ctx.eve.as_ref().map(|eve| EveGuesser::build(family, eve)).transpose()?;
    let num_qubits = family.num_qubits();

    let samples = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t as u64);
            let alice = &family.members()[family.draw(&mut rng)];
            let bob = &family.members()[family.draw(&mut rng)];
            let transcript = run_three_stage(secret, alice, bob, ctx, &mut rng)?;
            let errors = bit_error_fraction(transcript.measured.index, secret_index, num_qubits);
            let hit = guesser
                .as_ref()
                .map(|g| g.guess(&transcript.eve_outcomes(), &mut rng) == secret_index);
            Ok((errors, hit))
        })
        .collect::<Result<Vec<_>>>()?;

    let errors: Vec<f64> = samples.iter().map(|(e, _)| *e).collect();
    let (bit_error_rate, bit_error_std_err) = mean_and_std_err(&errors);
    let (eve_guess_success_rate, eve_guess_std_err) = if guesser.is_some() {
        let hits: Vec<f64> = samples.iter().map(|(_, h)| f64::from(u8::from(h == &Some(true)))).collect();
        let (m, se) = mean_and_std_err(&hits);
        (Some(m), Some(se))
    } else {
        (None, None)
    };
    Ok(MonteCarloEstimate { trials, bit_error_rate, bit_error_std_err, eve_guess_success_rate, eve_guess_std_err })
}
