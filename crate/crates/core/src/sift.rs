//! Parity checks over random subsets of the key.
//!
//! Each round picks a uniformly random nonempty subset of key positions and both
//! parties compare the XOR of their bits there. A fixed nonzero error pattern has odd
//! overlap with exactly `2^(n-1)` of the `2^n - 1` nonempty subsets, so one round
//! catches it with probability `2^(n-1) / (2^n - 1)` regardless of its weight.

use std::collections::BTreeSet;

use rand::Rng;

use crate::error::{domain, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityRound {
    /// Sorted key positions in this round's subset.
    pub subset: Vec<usize>,
    pub alice_parity: bool,
    pub bob_parity: bool,
}

impl ParityRound {
    pub fn mismatch(&self) -> bool {
        self.alice_parity != self.bob_parity
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiftReport {
    pub rounds: Vec<ParityRound>,
    /// True iff some round's parities disagree.
    pub detected: bool,
    /// Every position revealed through some round's parity.
    pub disclosed_indices: BTreeSet<usize>,
}

fn parity(bits: &[bool], subset: &[usize]) -> bool {
    subset.iter().fold(false, |acc, &i| acc ^ bits[i])
}

/// Uniform over the nonempty subsets of `0..n`, by rejection.
fn random_nonempty_subset<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    loop {
        let subset: Vec<usize> = (0..n).filter(|_| rng.random::<bool>()).collect();
        if !subset.is_empty() {
            return subset;
        }
    }
}

/// Compares parities of `rounds` random nonempty subsets of the two keys.
pub fn parity_check<R: Rng + ?Sized>(
    alice_key: &[bool],
    bob_key: &[bool],
    rounds: usize,
    rng: &mut R,
) -> Result<SiftReport> {
    if alice_key.len() != bob_key.len() {
        return domain(format!(
            "key lengths differ ({} vs {})",
            alice_key.len(),
            bob_key.len()
        ));
    }
    if alice_key.is_empty() {
        return domain("keys are empty");
    }
    if rounds == 0 {
        return domain("at least one parity round is required");
    }
    let mut disclosed_indices = BTreeSet::new();
    let rounds: Vec<ParityRound> = (0..rounds)
        .map(|_| {
            let subset = random_nonempty_subset(alice_key.len(), rng);
            disclosed_indices.extend(subset.iter().copied());
            ParityRound {
                alice_parity: parity(alice_key, &subset),
                bob_parity: parity(bob_key, &subset),
                subset,
            }
        })
        .collect();
    let detected = rounds.iter().any(ParityRound::mismatch);
    Ok(SiftReport { rounds, detected, disclosed_indices })
}

/// Probability that at least one of `rounds` uniform nonempty subsets has odd overlap
/// with a fixed error pattern of weight `error_weight` on a key of `key_length` bits.
pub fn detection_probability(key_length: usize, error_weight: usize, rounds: usize) -> Result<f64> {
    if key_length == 0 || error_weight > key_length {
        return domain(format!(
            "error weight {error_weight} is not valid for a key of length {key_length}"
        ));
    }
    if rounds == 0 {
        return domain("at least one parity round is required");
    }
    if error_weight == 0 {
        return Ok(0.0);
    }
    // 2^(n-1) / (2^n - 1), written to stay finite for long keys.
    let per_round = 1.0 / (2.0 - 2f64.powi(1 - key_length.min(i32::MAX as usize) as i32));
    Ok(1.0 - (1.0 - per_round).powi(rounds.min(i32::MAX as usize) as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    /// Fraction of nonempty subsets of `0..n` with odd overlap with `pattern`.
    fn brute_force_per_round(n: usize, pattern: u32) -> f64 {
        let odd = (1u32..(1 << n)).filter(|s| (s & pattern).count_ones() % 2 == 1).count();
        odd as f64 / ((1u32 << n) - 1) as f64
    }

    fn key_pair(n: usize, weight: usize) -> (Vec<bool>, Vec<bool>) {
        let alice: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
        let mut bob = alice.clone();
        for b in bob.iter_mut().take(weight) {
            *b = !*b;
        }
        (alice, bob)
    }

    #[test]
    fn brute_force_count_is_weight_independent() {
        for n in 1..=10 {
            for pattern in 1u32..(1 << n) {
                let q = brute_force_per_round(n, pattern);
                let closed = detection_probability(n, pattern.count_ones() as usize, 1).unwrap();
                assert!((q - closed).abs() < 1e-15, "n={n} pattern={pattern:b}");
            }
        }
    }

    #[test]
    fn named_values() {
        assert_eq!(detection_probability(8, 0, 5).unwrap(), 0.0);
        assert!((detection_probability(8, 1, 1).unwrap() - 128.0 / 255.0).abs() < 1e-15);
        let q = brute_force_per_round(8, 0b111);
        let want = 1.0 - (1.0 - q).powi(4);
        assert!((detection_probability(8, 3, 4).unwrap() - want).abs() < 1e-15);
        assert!((detection_probability(1, 1, 1).unwrap() - 1.0).abs() < 1e-15);
        assert!((detection_probability(4000, 1, 1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_counts() {
        assert!(detection_probability(4, 5, 1).is_err());
        assert!(detection_probability(0, 0, 1).is_err());
        assert!(detection_probability(4, 1, 0).is_err());
    }

    #[test]
    fn monotone_in_rounds() {
        for n in [2, 4, 8, 16] {
            for w in 1..=n.min(3) {
                let mut last = 0.0;
                for k in 1..30 {
                    let p = detection_probability(n, w, k).unwrap();
                    assert!(p >= last && p > 0.0);
                    last = p;
                }
            }
        }
    }

    #[test]
    fn identical_keys_never_detect() {
        let (alice, _) = key_pair(16, 0);
        let mut rng = stream_rng(3, 0);
        let report = parity_check(&alice, &alice, 50, &mut rng).unwrap();
        assert!(!report.detected);
        assert_eq!(report.rounds.len(), 50);
    }

    #[test]
    fn parities_and_disclosure_are_consistent() {
        let (alice, bob) = key_pair(12, 2);
        let mut rng = stream_rng(8, 0);
        let report = parity_check(&alice, &bob, 6, &mut rng).unwrap();
        let mut union = BTreeSet::new();
        for round in &report.rounds {
            assert!(!round.subset.is_empty());
            assert_eq!(round.alice_parity, parity(&alice, &round.subset));
            assert_eq!(round.bob_parity, parity(&bob, &round.subset));
            union.extend(round.subset.iter().copied());
        }
        assert_eq!(union, report.disclosed_indices);
        assert_eq!(report.detected, report.rounds.iter().any(|r| r.mismatch()));
    }

    #[test]
    fn single_error_detection_frequencies() {
        let n = 16;
        let (alice, bob) = key_pair(n, 1);
        let seeds = 10_000;
        for (rounds, check) in [(1usize, 0.015), (20, 0.0)] {
            let hits = (0..seeds)
                .filter(|&s| {
                    let mut rng = stream_rng(s, 0);
                    parity_check(&alice, &bob, rounds, &mut rng).unwrap().detected
                })
                .count();
            let freq = hits as f64 / seeds as f64;
            if rounds == 1 {
                let q = detection_probability(n, 1, 1).unwrap();
                assert!((freq - q).abs() <= check, "{freq}");
                assert!((freq - 0.5).abs() <= 0.015);
            } else {
                assert!(freq >= 0.999, "{freq}");
            }
        }
    }

    #[test]
    fn input_errors() {
        let mut rng = stream_rng(0, 0);
        assert!(parity_check(&[true], &[true, false], 1, &mut rng).is_err());
        assert!(parity_check(&[], &[], 1, &mut rng).is_err());
        assert!(parity_check(&[true], &[true], 0, &mut rng).is_err());
    }
}
