//! Error likelihoods for a qubit stored in the 3-qubit phase-flip
//! repetition code.
//!
//! Every syndrome round is classified as [`Outcome::Plus`] (trivial syndrome
//! `(0,0)`) or [`Outcome::Minus`] (any of the three non-trivial syndromes).
//! Given the per-round physical flip probability `p`, each outcome carries a
//! conditional probability that the round left a logical flip behind. Two
//! logical flips cancel, so the probability of ending error-free is the
//! probability that the total number of flips is even:
//!
//! ```text
//! Pr[no error | n_plus, n_minus] = (1 + f_plus^n_plus * f_minus^n_minus) / 2
//! f_plus  = 1 - 2 * p^3 / ((1-p)^3 + p^3)
//! f_minus = 1 - 2 * p
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts above this use `exp(n * ln f)` instead of `powi`.
const POWI_LIMIT: u64 = 1_000_000;

/// Dephasing probability of a physical qubit after `t` seconds in memory.
pub fn phase_flip_prob(gamma: f64, t: f64) -> Result<f64> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidDecayRate(gamma));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidDuration(t));
    }
    // (1 - e^{-gamma t}) / 2 without cancellation for small gamma * t
    Ok(-(-gamma * t).exp_m1() / 2.0)
}

fn check_round_prob(p: f64) -> Result<()> {
    if (0.0..0.5).contains(&p) {
        Ok(())
    } else {
        Err(Error::ProbabilityOutOfRange(p))
    }
}

/// Probability of a logical flip in a round whose syndrome was trivial.
///
/// Only the all-three-flipped pattern is invisible to the stabilizers.
pub fn cond_error_given_plus(p: f64) -> Result<f64> {
    check_round_prob(p)?;
    let p3 = p * p * p;
    let q = 1.0 - p;
    Ok(p3 / (q * q * q + p3))
}

/// Probability of a logical flip in a round with a non-trivial syndrome.
///
/// The decoder is wrong exactly when two qubits flipped, which happens with
/// conditional probability `p` for every non-trivial syndrome.
pub fn cond_error_given_minus(p: f64) -> Result<f64> {
    check_round_prob(p)?;
    Ok(p)
}

/// Memory noise: dephasing rate and error-correction period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Decay rate in hertz, the inverse of T2.
    pub gamma: f64,
    /// Seconds between two syndrome rounds.
    pub tau: f64,
}

impl NoiseParams {
    pub fn new(gamma: f64, tau: f64) -> Result<Self> {
        let params = Self { gamma, tau };
        params.validate()?;
        Ok(params)
    }

    /// Decay rate that yields per-round flip probability `p` at period `tau`.
    pub fn from_round_flip_prob(p: f64, tau: f64) -> Result<Self> {
        if !(p > 0.0 && p < 0.5) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
        Self::new(-(-2.0 * p).ln_1p() / tau, tau)
    }

    pub fn validate(&self) -> Result<()> {
        let p = phase_flip_prob(self.gamma, self.tau)?;
        if !(p > 0.0 && p < 0.5) {
            return Err(Error::DegenerateNoise { tau: self.tau, p });
        }
        Ok(())
    }

    /// Per-round physical flip probability `p(tau)`.
    pub fn round_flip_prob(&self) -> f64 {
        -(-self.gamma * self.tau).exp_m1() / 2.0
    }

    pub fn round_probs(&self) -> CondErrorProbs {
        CondErrorProbs::from_flip_prob(self.round_flip_prob())
            .expect("validated noise parameters give p in (0, 0.5)")
    }
}

/// Syndrome round classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

/// Counts of `+1` and `-1` rounds seen by a stored logical qubit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SyndromeHistory {
    pub n_plus: u64,
    pub n_minus: u64,
}

impl SyndromeHistory {
    pub const EMPTY: Self = Self {
        n_plus: 0,
        n_minus: 0,
    };

    pub fn new(n_plus: u64, n_minus: u64) -> Self {
        Self { n_plus, n_minus }
    }

    pub fn rounds(&self) -> u64 {
        self.n_plus + self.n_minus
    }

    pub fn record(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::Plus => self.n_plus += 1,
            Outcome::Minus => self.n_minus += 1,
        }
    }

    pub fn from_outcomes<'a>(outcomes: impl IntoIterator<Item = &'a Outcome>) -> Self {
        let mut h = Self::EMPTY;
        for &o in outcomes {
            h.record(o);
        }
        h
    }
}

/// Conditional logical-error probabilities for one round at flip
/// probability `p`, together with the parity factors `1 - 2 * prob`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondErrorProbs {
    pub p: f64,
    pub p_given_plus: f64,
    pub p_given_minus: f64,
    pub factor_plus: f64,
    pub factor_minus: f64,
}

impl CondErrorProbs {
    pub fn from_flip_prob(p: f64) -> Result<Self> {
        let p_given_plus = cond_error_given_plus(p)?;
        let p_given_minus = cond_error_given_minus(p)?;
        Ok(Self {
            p,
            p_given_plus,
            p_given_minus,
            factor_plus: 1.0 - 2.0 * p_given_plus,
            factor_minus: 1.0 - 2.0 * p_given_minus,
        })
    }

    /// Probability that a round yields the trivial syndrome:
    /// no qubit flipped or all three did.
    pub fn plus_prob(&self) -> f64 {
        let q = 1.0 - self.p;
        q * q * q + self.p * self.p * self.p
    }

    pub fn error_given(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::Plus => self.p_given_plus,
            Outcome::Minus => self.p_given_minus,
        }
    }

    pub fn factor(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::Plus => self.factor_plus,
            Outcome::Minus => self.factor_minus,
        }
    }

    /// Expected parity sign `E[(-1)^flips]` over a history,
    /// `f_plus^n_plus * f_minus^n_minus`.
    pub fn parity_bias(&self, h: &SyndromeHistory) -> f64 {
        pow_count(self.factor_plus, h.n_plus) * pow_count(self.factor_minus, h.n_minus)
    }
}

fn pow_count(base: f64, n: u64) -> f64 {
    if n <= POWI_LIMIT {
        base.powi(n as i32)
    } else {
        (n as f64 * base.ln()).exp()
    }
}

/// Probability that a qubit with history `h` carries no logical error.
pub fn success_prob(h: &SyndromeHistory, per_round: &CondErrorProbs) -> f64 {
    (1.0 + per_round.parity_bias(h)) / 2.0
}

/// Fidelity of the teleported `|+>` state with its ideal, which for a
/// dephasing channel is the no-error probability itself.
pub fn teleport_fidelity(h: &SyndromeHistory, per_round: &CondErrorProbs) -> f64 {
    success_prob(h, per_round)
}

/// One sampled syndrome round: the outcome label and whether the round left
/// a logical flip behind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundSample {
    pub outcome: Outcome,
    pub logical_flip: bool,
}

/// Draws a syndrome round from the joint distribution of (outcome, logical
/// flip). Consumes exactly two uniforms so that streams stay aligned across
/// policies.
pub fn sample_syndrome_round<R: Rng + ?Sized>(per_round: &CondErrorProbs, rng: &mut R) -> RoundSample {
    let u_syndrome: f64 = rng.random();
    let u_flip: f64 = rng.random();
    let outcome = if u_syndrome < per_round.plus_prob() {
        Outcome::Plus
    } else {
        Outcome::Minus
    };
    RoundSample {
        outcome,
        logical_flip: u_flip < per_round.error_given(outcome),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn default_p() -> f64 {
        phase_flip_prob(50.0, 0.003).unwrap()
    }

    /// Exhaustive parity enumeration: every assignment of logical flips to
    /// rounds, weighted by its probability, keeping the even ones.
    fn brute_force_success(h: &SyndromeHistory, p: f64) -> f64 {
        let p_plus = p.powi(3) / ((1.0 - p).powi(3) + p.powi(3));
        let probs: Vec<f64> = std::iter::repeat_n(p_plus, h.n_plus as usize)
            .chain(std::iter::repeat_n(p, h.n_minus as usize))
            .collect();
        let n = probs.len();
        let mut total = 0.0;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() % 2 != 0 {
                continue;
            }
            let mut w = 1.0;
            for (i, &q) in probs.iter().enumerate() {
                w *= if mask & (1 << i) != 0 { q } else { 1.0 - q };
            }
            total += w;
        }
        total
    }

    #[test]
    fn flip_prob_anchor_values() {
        assert!((default_p() - 0.069).abs() < 1e-3);
        assert_eq!(phase_flip_prob(3.0, 0.0).unwrap(), 0.0);
        assert!((phase_flip_prob(50.0, 10.0).unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn flip_prob_rejects_bad_inputs() {
        assert_eq!(phase_flip_prob(50.0, -1.0), Err(Error::InvalidDuration(-1.0)));
        assert_eq!(phase_flip_prob(0.0, 1.0), Err(Error::InvalidDecayRate(0.0)));
        assert!(phase_flip_prob(-2.0, 1.0).is_err());
        assert!(phase_flip_prob(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn conditional_errors() {
        let p = default_p();
        assert!((cond_error_given_plus(p).unwrap() - 0.00042).abs() < 5e-5);
        assert_eq!(cond_error_given_minus(p).unwrap(), p);
        assert_eq!(cond_error_given_plus(0.0).unwrap(), 0.0);
        assert_eq!(cond_error_given_minus(0.0).unwrap(), 0.0);
        assert_eq!(cond_error_given_minus(0.25).unwrap(), 0.25);
        // 0.027 / (0.343 + 0.027)
        assert!((cond_error_given_plus(0.3).unwrap() - 0.072_972_972_972_973).abs() < 1e-12);
    }

    #[test]
    fn conditional_errors_reject_out_of_regime() {
        for p in [-0.1, 0.5, 0.7, f64::NAN] {
            assert!(cond_error_given_plus(p).is_err());
            assert!(cond_error_given_minus(p).is_err());
        }
    }

    #[test]
    fn success_anchor_values() {
        let probs = CondErrorProbs::from_flip_prob(default_p()).unwrap();
        assert_eq!(success_prob(&SyndromeHistory::EMPTY, &probs), 1.0);
        assert!((success_prob(&SyndromeHistory::new(0, 1), &probs) - 0.93).abs() < 5e-3);
        assert!((success_prob(&SyndromeHistory::new(0, 2), &probs) - 0.87).abs() < 5e-3);
        let fresh = success_prob(&SyndromeHistory::new(5, 0), &probs);
        let stale = success_prob(&SyndromeHistory::new(3, 1), &probs);
        assert!((fresh - 0.9979).abs() < 1e-4);
        assert!((stale - 0.9292).abs() < 1e-4);
    }

    #[test]
    fn fidelity_is_success_probability() {
        let probs = CondErrorProbs::from_flip_prob(0.12).unwrap();
        for a in 0..6 {
            for b in 0..6 {
                let h = SyndromeHistory::new(a, b);
                assert_eq!(
                    teleport_fidelity(&h, &probs).to_bits(),
                    success_prob(&h, &probs).to_bits()
                );
            }
        }
    }

    #[test]
    fn parity_matches_enumeration_small() {
        for &p in &[0.05, 0.069, 0.2, 0.4] {
            let probs = CondErrorProbs::from_flip_prob(p).unwrap();
            for n in 0..=6u64 {
                for b in 0..=n {
                    let h = SyndromeHistory::new(n - b, b);
                    let diff = (success_prob(&h, &probs) - brute_force_success(&h, p)).abs();
                    assert!(diff < 1e-12, "p={p} h={h:?} diff={diff}");
                }
            }
        }
    }

    #[test]
    fn large_counts_use_log_power() {
        let probs = CondErrorProbs::from_flip_prob(1e-4).unwrap();
        let h = SyndromeHistory::new(2_000_000, 0);
        let direct = probs.factor_plus.powi(2_000_000);
        assert!(((success_prob(&h, &probs) - (1.0 + direct) / 2.0) / direct).abs() < 1e-9);
    }

    #[test]
    fn noiseless_round_is_always_plus() {
        let probs = CondErrorProbs::from_flip_prob(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let s = sample_syndrome_round(&probs, &mut rng);
            assert_eq!(s.outcome, Outcome::Plus);
            assert!(!s.logical_flip);
        }
    }

    /// Physical-qubit oracle: flip three qubits independently and read off
    /// the syndrome class directly.
    fn plus_frequency_by_physical_flips(p: f64, n: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut plus = 0usize;
        for _ in 0..n {
            let flips = (0..3).filter(|_| rng.random::<f64>() < p).count();
            if flips == 0 || flips == 3 {
                plus += 1;
            }
        }
        plus as f64 / n as f64
    }

    #[test]
    fn sampled_plus_frequency() {
        let n = 1_000_000;
        for (p, seed) in [(default_p(), 7), (0.069, 8), (0.4, 9)] {
            let expected = (1.0 - p).powi(3) + p.powi(3);
            let probs = CondErrorProbs::from_flip_prob(p).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let plus = (0..n)
                .filter(|_| sample_syndrome_round(&probs, &mut rng).outcome == Outcome::Plus)
                .count();
            let freq = plus as f64 / n as f64;
            assert!((freq - expected).abs() < 2e-3, "p={p} freq={freq}");
            let physical = plus_frequency_by_physical_flips(p, n, seed + 100);
            assert!((physical - expected).abs() < 2e-3);
        }
        // the two anchor frequencies quoted for this model
        assert!(((1.0 - default_p()).powi(3) + default_p().powi(3) - 0.8055).abs() < 2e-3);
        assert!((0.6f64.powi(3) + 0.4f64.powi(3) - 0.280).abs() < 1e-12);
    }

    #[test]
    fn sampled_flip_rate_matches_conditionals() {
        let probs = CondErrorProbs::from_flip_prob(0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mut minus, mut minus_flips, mut plus, mut plus_flips) = (0u64, 0u64, 0u64, 0u64);
        for _ in 0..400_000 {
            let s = sample_syndrome_round(&probs, &mut rng);
            match s.outcome {
                Outcome::Plus => {
                    plus += 1;
                    plus_flips += s.logical_flip as u64;
                }
                Outcome::Minus => {
                    minus += 1;
                    minus_flips += s.logical_flip as u64;
                }
            }
        }
        assert!((minus_flips as f64 / minus as f64 - 0.3).abs() < 5e-3);
        assert!((plus_flips as f64 / plus as f64 - probs.p_given_plus).abs() < 5e-3);
    }

    proptest! {
        #[test]
        fn ordering_of_conditionals(p in 1e-6f64..0.4999) {
            let probs = CondErrorProbs::from_flip_prob(p).unwrap();
            prop_assert!(probs.p_given_plus < probs.p_given_minus);
            prop_assert!(probs.p_given_minus < 0.5);
            prop_assert!(0.0 < probs.factor_minus && probs.factor_minus < probs.factor_plus);
            prop_assert!(probs.factor_plus < 1.0);
        }

        #[test]
        fn success_monotone_and_bounded(p in 0.01f64..0.3, a in 0u64..25, b in 0u64..25) {
            let probs = CondErrorProbs::from_flip_prob(p).unwrap();
            let s = success_prob(&SyndromeHistory::new(a, b), &probs);
            let more_minus = success_prob(&SyndromeHistory::new(a, b + 1), &probs);
            let more_plus = success_prob(&SyndromeHistory::new(a + 1, b), &probs);
            prop_assert!(s > 0.5 && s <= 1.0);
            prop_assert!(more_minus < s);
            // f_plus is within 1e-6 of 1 at small p, below f64 resolution here
            prop_assert!(more_plus <= s);
            // a minus round always costs more than a plus round
            prop_assert!(s - more_minus > s - more_plus);
            if a + b > 0 {
                prop_assert!(s < 1.0);
            }
        }

        #[test]
        fn flip_prob_monotone_in_time(gamma in 0.1f64..500.0, t in 0.0f64..0.05, dt in 1e-6f64..0.05) {
            let lo = phase_flip_prob(gamma, t).unwrap();
            let hi = phase_flip_prob(gamma, t + dt).unwrap();
            prop_assert!(lo < hi);
            prop_assert!((0.0..0.5).contains(&lo));
        }
    }
}
