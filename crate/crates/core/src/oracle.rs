//! Independent checks of batch-scheduling optimality.
//!
//! A [`BatchInstance`] is `k` requests stored at t = 0, EPR pairs ready at
//! fixed times `t_1 < ... < t_k`, and a syndrome trajectory per request. The
//! module offers three views of it:
//!
//! - [`total_success`] / [`best_assignment`]: the summed no-error
//!   probability of a fixed service permutation and exhaustive search over
//!   all `k!` of them, with trajectories known in hindsight.
//! - [`expected_values`]: exact expected total success of FQF and of the best
//!   non-anticipating policy when only the syndromes seen so far are known
//!   and future rounds are random.
//! - [`interchange_gap`]: the pairwise exchange quantity behind the
//!   optimality argument, in raw and factored form.

use std::collections::HashMap;

use rand::Rng;
use serde::Serialize;

use crate::analytics::{
    sample_syndrome_round, success_prob, CondErrorProbs, NoiseParams, Outcome, SyndromeHistory,
};
use crate::error::{Error, Result};
use crate::rng::{Stream, StreamFactory};

#[derive(Debug, Clone, PartialEq)]
pub struct BatchInstance {
    pub serve_times: Vec<f64>,
    /// One outcome per round index, per request.
    pub trajectories: Vec<Vec<Outcome>>,
    pub noise: NoiseParams,
}

impl BatchInstance {
    pub fn new(serve_times: Vec<f64>, trajectories: Vec<Vec<Outcome>>, noise: NoiseParams) -> Result<Self> {
        let inst = Self {
            serve_times,
            trajectories,
            noise,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn k(&self) -> usize {
        self.serve_times.len()
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInstance(m));
        self.noise.validate()?;
        if self.serve_times.is_empty() {
            return bad("no serve times".into());
        }
        if self.trajectories.len() != self.k() {
            return bad(format!("{} trajectories for {} serve times", self.trajectories.len(), self.k()));
        }
        if !(self.serve_times[0] > 0.0) || self.serve_times.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("serve times must be positive and strictly increasing".into());
        }
        let needed = self.rounds_at(*self.serve_times.last().unwrap()) as usize;
        if let Some(short) = self.trajectories.iter().position(|t| t.len() < needed) {
            return bad(format!("trajectory {short} covers fewer than {needed} rounds"));
        }
        Ok(())
    }

    /// Completed rounds at time `t`, all requests sharing the t = 0 clock.
    pub fn rounds_at(&self, t: f64) -> u64 {
        (t / self.noise.tau).floor() as u64
    }

    /// `-1` count of request `i` after the rounds completed by `t`.
    pub fn minus_at(&self, i: usize, t: f64) -> u64 {
        let n = self.rounds_at(t) as usize;
        self.trajectories[i][..n].iter().filter(|&&o| o == Outcome::Minus).count() as u64
    }

    pub fn history_at(&self, i: usize, t: f64) -> SyndromeHistory {
        let n = self.rounds_at(t);
        let m = self.minus_at(i, t);
        SyndromeHistory::new(n - m, m)
    }

    /// Trajectories drawn from the simulator's per-qubit streams, so that a
    /// single-batch run with the same seed sees exactly these rounds.
    pub fn from_streams(seed: u64, serve_times: Vec<f64>, noise: NoiseParams) -> Result<Self> {
        noise.validate()?;
        let k = serve_times.len();
        let rounds = serve_times.last().map_or(0, |&t| (t / noise.tau).floor() as usize);
        let per_round = noise.round_probs();
        let streams = StreamFactory::new(seed);
        let trajectories = (0..k as u64)
            .map(|id| {
                let mut rng = streams.stream(Stream::Qubit(id));
                (0..rounds).map(|_| sample_syndrome_round(&per_round, &mut rng).outcome).collect()
            })
            .collect();
        Self::new(serve_times, trajectories, noise)
    }

    /// Random instance: `k` in `1..=max_k`, serve times uniform on
    /// `(0, max_rounds * tau)`, `p` uniform on `p_range`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_k: usize, max_rounds: u64, p_range: (f64, f64)) -> Self {
        let tau = 1.0;
        let p = rng.random_range(p_range.0..p_range.1);
        let noise = NoiseParams::from_round_flip_prob(p, tau).expect("p inside (0, 0.5)");
        let k = rng.random_range(1..=max_k);
        let horizon = max_rounds as f64 * tau;
        let mut times: Vec<f64> = Vec::with_capacity(k);
        while times.len() < k {
            let t = rng.random_range(0.0..horizon);
            if t > 0.0 && !times.contains(&t) {
                times.push(t);
            }
        }
        times.sort_by(f64::total_cmp);
        let per_round = noise.round_probs();
        let trajectories = (0..k)
            .map(|_| (0..max_rounds).map(|_| sample_syndrome_round(&per_round, rng).outcome).collect())
            .collect();
        Self::new(times, trajectories, noise).expect("generated instance is valid")
    }
}

/// `assignment[i]` is the serve-time index of request `i`.
fn check_permutation(assignment: &[usize], k: usize) -> Result<()> {
    let mut seen = vec![false; k];
    if assignment.len() != k {
        return Err(Error::NotAPermutation(k));
    }
    for &j in assignment {
        if j >= k || std::mem::replace(&mut seen[j], true) {
            return Err(Error::NotAPermutation(k));
        }
    }
    Ok(())
}

/// Sum over requests of the no-error probability at their serve time.
pub fn total_success(instance: &BatchInstance, assignment: &[usize]) -> Result<f64> {
    check_permutation(assignment, instance.k())?;
    let per_round = instance.noise.round_probs();
    Ok(assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| success_prob(&instance.history_at(i, instance.serve_times[j]), &per_round))
        .sum())
}

/// At each serve time, the unserved request with the fewest `-1`s so far,
/// lowest index on ties.
pub fn fqf_assignment(instance: &BatchInstance) -> Vec<usize> {
    let k = instance.k();
    let mut assignment = vec![usize::MAX; k];
    for (j, &t) in instance.serve_times.iter().enumerate() {
        let chosen = (0..k)
            .filter(|&i| assignment[i] == usize::MAX)
            .min_by_key(|&i| (instance.minus_at(i, t), i))
            .expect("one unserved request per remaining serve time");
        assignment[chosen] = j;
    }
    assignment
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                prefix.push(j);
                go(prefix, used, out);
                prefix.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

/// Exhaustive search over all `k!` assignments; returns the best total and
/// the first assignment attaining it.
pub fn best_assignment(instance: &BatchInstance) -> (f64, Vec<usize>) {
    permutations(instance.k())
        .into_iter()
        .map(|a| (total_success(instance, &a).expect("enumerated permutation"), a))
        .fold((f64::MIN, Vec::new()), |best, cur| if cur.0 > best.0 { cur } else { best })
}

/// Expected total success of FQF and of the optimal non-anticipating policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectedValues {
    pub fqf: f64,
    pub optimal: f64,
}

/// Exact expectation over future syndrome rounds, starting from the `-1`
/// counts the instance's trajectories show at the first serve time. A
/// policy may only use syndromes observed before each decision.
pub fn expected_values(instance: &BatchInstance) -> ExpectedValues {
    let per_round = instance.noise.round_probs();
    let minus_prob = 1.0 - per_round.plus_prob();
    let rounds: Vec<u64> = instance.serve_times.iter().map(|&t| instance.rounds_at(t)).collect();
    let start: Vec<u64> = (0..instance.k()).map(|i| instance.minus_at(i, instance.serve_times[0])).collect();
    let mut dp = ExpectationDp {
        per_round,
        minus_prob,
        rounds,
        memo: HashMap::new(),
    };
    ExpectedValues {
        fqf: dp.value(0, sorted(start.clone()), false),
        optimal: dp.value(0, sorted(start), true),
    }
}

fn sorted(mut v: Vec<u64>) -> Vec<u64> {
    v.sort_unstable();
    v
}

fn binomial_pmf(n: u64, q: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; n as usize + 1];
    let mut coef = 1.0;
    for k in 0..=n {
        pmf[k as usize] = coef * q.powi(k as i32) * (1.0 - q).powi((n - k) as i32);
        coef = coef * (n - k) as f64 / (k + 1) as f64;
    }
    pmf
}

struct ExpectationDp {
    per_round: CondErrorProbs,
    minus_prob: f64,
    rounds: Vec<u64>,
    memo: HashMap<(usize, Vec<u64>, bool), f64>,
}

impl ExpectationDp {
    /// Expected remaining success from serve slot `stage` with the sorted
    /// `-1` counts of the unserved requests. Only counts matter because all
    /// unserved requests share the round count.
    fn value(&mut self, stage: usize, state: Vec<u64>, optimal: bool) -> f64 {
        if state.is_empty() {
            return 0.0;
        }
        let key = (stage, state, optimal);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let (_, state, _) = &key;
        let n = self.rounds[stage];
        let candidates: Vec<usize> = if optimal {
            // equal counts are interchangeable
            (0..state.len()).filter(|&i| i == 0 || state[i] != state[i - 1]).collect()
        } else {
            vec![0]
        };
        let mut best = f64::MIN;
        for i in candidates {
            let m = state[i];
            let now = success_prob(&SyndromeHistory::new(n - m, m), &self.per_round);
            let mut rest = state.clone();
            rest.remove(i);
            let later = self.expected_after(stage, rest, optimal);
            best = best.max(now + later);
        }
        self.memo.insert(key, best);
        best
    }

    fn expected_after(&mut self, stage: usize, rest: Vec<u64>, optimal: bool) -> f64 {
        if rest.is_empty() {
            return 0.0;
        }
        let d = self.rounds[stage + 1] - self.rounds[stage];
        let pmf = binomial_pmf(d, self.minus_prob);
        // enumerate the joint increments of the remaining requests
        let mut total = 0.0;
        let mut incr = vec![0u64; rest.len()];
        loop {
            let w: f64 = incr.iter().map(|&x| pmf[x as usize]).product();
            if w > 0.0 {
                let next: Vec<u64> = rest.iter().zip(&incr).map(|(m, x)| m + x).collect();
                total += w * self.value(stage + 1, sorted(next), optimal);
            }
            let mut pos = 0;
            loop {
                if pos == incr.len() {
                    return total;
                }
                incr[pos] += 1;
                if incr[pos] <= d {
                    break;
                }
                incr[pos] = 0;
                pos += 1;
            }
        }
    }
}

/// Raw and factored values of the interchange quantity
/// `P(m1, nj) + P(m2 + m1p - m1, nl) - P(m2, nj) - P(m1p, nl)`,
/// where `P(m, n)` is the no-error probability after `n` rounds of which
/// `m` were `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterchangeGap {
    pub raw: f64,
    pub factored: f64,
    pub factors: [f64; 3],
}

/// Counts for one exchange: requests with `m1 < m2` minus outcomes at the
/// earlier slot (`nj` rounds); the first would reach `m1p` by the later slot
/// (`nl` rounds).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Exchange {
    pub m1: u64,
    pub m2: u64,
    pub m1p: u64,
    pub nj: u64,
    pub nl: u64,
}

impl Exchange {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InterchangePrecondition(m.into()));
        let Exchange { m1, m2, m1p, nj, nl } = *self;
        if m1 >= m2 {
            return bad("need m1 < m2");
        }
        if m2 > nj {
            return bad("need m2 <= nj");
        }
        if nl <= nj {
            return bad("need nl > nj");
        }
        if m1p < m1 {
            return bad("need m1p >= m1");
        }
        if m1p - m1 > nl - nj {
            return bad("more -1s than rounds between the two slots");
        }
        Ok(())
    }
}

pub fn interchange_gap(ex: Exchange, p: f64) -> Result<InterchangeGap> {
    ex.check()?;
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    let probs = CondErrorProbs::from_flip_prob(p)?;
    let Exchange { m1, m2, m1p, nj, nl } = ex;

    // P(m, n) - 1/2; the constant halves cancel exactly in the sum
    let excess = |m: u64, n: u64| probs.parity_bias(&SyndromeHistory::new(n - m, m)) / 2.0;
    let raw = excess(m1, nj) + excess(m2 + m1p - m1, nl) - excess(m2, nj) - excess(m1p, nl);

    let (fp, fm) = (probs.factor_plus, probs.factor_minus);
    let pw = |base: f64, e: u64| base.powi(e as i32);
    let factors = [
        pw(fm, m1) * pw(fp, nj - m2),
        pw(fp, m2 - m1) - pw(fm, m2 - m1),
        1.0 - pw(fm, m1p - m1) * pw(fp, nl - nj - (m1p - m1)),
    ];
    Ok(InterchangeGap {
        raw,
        factored: factors.iter().product::<f64>() / 2.0,
        factors,
    })
}

/// Every valid exchange with counts up to `max_count`.
pub fn exchange_grid(max_count: u64) -> Vec<Exchange> {
    let mut out = Vec::new();
    for nj in 1..=max_count {
        for nl in nj + 1..=max_count {
            for m2 in 1..=nj {
                for m1 in 0..m2 {
                    for m1p in m1..=m1 + (nl - nj) {
                        out.push(Exchange { m1, m2, m1p, nj, nl });
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct InterchangeReport {
    pub cases: usize,
    pub min_gap: f64,
    pub min_gap_at: Option<(Exchange, f64)>,
    pub min_factor: f64,
    pub max_abs_diff: f64,
    pub non_positive: usize,
}

impl InterchangeReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.non_positive == 0 && self.max_abs_diff <= tol
    }
}

pub fn sweep_interchange(ps: &[f64], max_count: u64) -> Result<InterchangeReport> {
    let grid = exchange_grid(max_count);
    let mut report = InterchangeReport {
        cases: 0,
        min_gap: f64::INFINITY,
        min_gap_at: None,
        min_factor: f64::INFINITY,
        max_abs_diff: 0.0,
        non_positive: 0,
    };
    for &p in ps {
        for &ex in &grid {
            let g = interchange_gap(ex, p)?;
            report.cases += 1;
            if g.raw < report.min_gap {
                report.min_gap = g.raw;
                report.min_gap_at = Some((ex, p));
            }
            report.min_factor = g.factors.iter().copied().fold(report.min_factor, f64::min);
            report.max_abs_diff = report.max_abs_diff.max((g.raw - g.factored).abs());
            if !(g.raw > 0.0 && g.factors.iter().all(|&f| f > 0.0)) {
                report.non_positive += 1;
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimalityReport {
    pub instances: usize,
    /// Instances where FQF attains the hindsight permutation maximum.
    pub hindsight_matches: usize,
    pub worst_hindsight_gap: f64,
    /// Instances where FQF attains the optimal expected total.
    pub expected_matches: usize,
    pub worst_expected_gap: f64,
}

impl OptimalityReport {
    pub fn hindsight_passed(&self) -> bool {
        self.hindsight_matches == self.instances
    }

    pub fn expected_passed(&self) -> bool {
        self.expected_matches == self.instances
    }
}

pub fn verify_batch_optimality(seed: u64, instances: usize, max_k: usize, max_rounds: u64, p_range: (f64, f64), tol: f64) -> OptimalityReport {
    let mut rng = StreamFactory::new(seed).stream(Stream::Arrivals);
    let mut report = OptimalityReport {
        instances,
        hindsight_matches: 0,
        worst_hindsight_gap: 0.0,
        expected_matches: 0,
        worst_expected_gap: 0.0,
    };
    for _ in 0..instances {
        let inst = BatchInstance::random(&mut rng, max_k, max_rounds, p_range);
        let fqf = total_success(&inst, &fqf_assignment(&inst)).expect("fqf assignment is a permutation");
        let (best, _) = best_assignment(&inst);
        let gap = best - fqf;
        report.worst_hindsight_gap = report.worst_hindsight_gap.max(gap);
        if gap <= tol {
            report.hindsight_matches += 1;
        }
        let ev = expected_values(&inst);
        let gap = ev.optimal - ev.fqf;
        report.worst_expected_gap = report.worst_expected_gap.max(gap);
        if gap <= tol {
            report.expected_matches += 1;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::phase_flip_prob;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use Outcome::{Minus as M, Plus as P};

    fn noise() -> NoiseParams {
        NoiseParams::new(50.0, 0.003).unwrap()
    }

    fn probs() -> CondErrorProbs {
        noise().round_probs()
    }

    #[test]
    fn validation() {
        assert!(BatchInstance::new(vec![0.004, 0.002], vec![vec![P]; 2], noise()).is_err());
        assert!(BatchInstance::new(vec![0.0], vec![vec![]], noise()).is_err());
        assert!(BatchInstance::new(vec![0.007], vec![vec![P]], noise()).is_err());
        assert!(BatchInstance::new(vec![0.007], vec![vec![P, M]; 2], noise()).is_err());
        assert!(BatchInstance::new(vec![0.007], vec![vec![P, M]], noise()).is_ok());
    }

    #[test]
    fn rejects_non_permutations() {
        let inst = BatchInstance::new(vec![0.004, 0.007], vec![vec![P, P]; 2], noise()).unwrap();
        for bad in [vec![0, 0], vec![0], vec![0, 2], vec![1, 0, 2]] {
            assert_eq!(total_success(&inst, &bad), Err(Error::NotAPermutation(2)));
        }
    }

    #[test]
    fn single_request() {
        let inst = BatchInstance::new(vec![0.0071], vec![vec![M, P]], noise()).unwrap();
        let expected = success_prob(&SyndromeHistory::new(1, 1), &probs());
        assert_eq!(total_success(&inst, &[0]).unwrap(), expected);
        assert_eq!(fqf_assignment(&inst), vec![0]);
        assert_eq!(best_assignment(&inst).0, expected);
    }

    #[test]
    fn identical_trajectories_are_symmetric() {
        let inst = BatchInstance::new(vec![0.004, 0.01], vec![vec![P, M, P]; 2], noise()).unwrap();
        assert_eq!(total_success(&inst, &[0, 1]).unwrap(), total_success(&inst, &[1, 0]).unwrap());
    }

    #[test]
    fn all_plus_is_identity() {
        let inst = BatchInstance::new(vec![0.001, 0.004, 0.01, 0.02], vec![vec![P; 6]; 4], noise()).unwrap();
        assert_eq!(fqf_assignment(&inst), vec![0, 1, 2, 3]);
    }

    #[test]
    fn fqf_serves_fewer_minus_first() {
        let inst = BatchInstance::new(vec![0.004, 0.0065], vec![vec![P, P], vec![M, P]], noise()).unwrap();
        assert_eq!(fqf_assignment(&inst), vec![0, 1]);
        let inst = BatchInstance::new(vec![0.004, 0.0065], vec![vec![M, P], vec![P, P]], noise()).unwrap();
        assert_eq!(fqf_assignment(&inst), vec![1, 0]);
    }

    #[test]
    fn swap_difference_is_the_interchange_quantity() {
        // request 0 saw a -1 in round 1, request 1 a +1; one more round
        // passes before the second slot
        let inst = BatchInstance::new(vec![0.004, 0.0065], vec![vec![M, P], vec![P, P]], noise()).unwrap();
        let minus_last = total_success(&inst, &[1, 0]).unwrap();
        let minus_first = total_success(&inst, &[0, 1]).unwrap();
        let ex = Exchange { m1: 0, m2: 1, m1p: 0, nj: 1, nl: 2 };
        let gap = interchange_gap(ex, noise().round_flip_prob()).unwrap();
        assert!((minus_last - minus_first - gap.raw).abs() < 1e-15);
        assert!(gap.raw > 0.0);
    }

    #[test]
    fn interchange_anchor() {
        let ex = Exchange { m1: 0, m2: 1, m1p: 0, nj: 1, nl: 2 };
        let g = interchange_gap(ex, 0.069).unwrap();
        assert!(g.raw > 0.0);
        assert!((g.raw - g.factored).abs() < 1e-15);
        // P(0,1) + P(1,2) - P(1,1) - P(0,2) evaluated independently
        let p = 0.069f64;
        let fp = 1.0 - 2.0 * p.powi(3) / ((1.0 - p).powi(3) + p.powi(3));
        let fm = 1.0 - 2.0 * p;
        let ps = |m: i32, n: i32| (1.0 + fm.powi(m) * fp.powi(n - m)) / 2.0;
        assert!((g.raw - (ps(0, 1) + ps(1, 2) - ps(1, 1) - ps(0, 2))).abs() < 1e-15);
    }

    #[test]
    fn interchange_preconditions() {
        let ok = Exchange { m1: 0, m2: 1, m1p: 0, nj: 1, nl: 2 };
        for bad in [
            Exchange { m2: 0, ..ok },
            Exchange { m1: 1, m2: 1, ..ok },
            Exchange { m2: 2, ..ok },
            Exchange { nl: 1, ..ok },
            Exchange { m1: 1, m2: 2, nj: 2, nl: 3, m1p: 0 },
            Exchange { m1p: 2, ..ok },
        ] {
            assert!(interchange_gap(bad, 0.1).is_err(), "{bad:?}");
        }
        assert!(interchange_gap(ok, 0.0).is_err());
        assert!(interchange_gap(ok, 0.5).is_err());
    }

    #[test]
    fn small_grid_sweep() {
        let ps: Vec<f64> = (0..25).map(|i| 0.01 + 0.02 * i as f64).collect();
        let r = sweep_interchange(&ps, 6).unwrap();
        assert!(r.passed(1e-12), "{r:?}");
        assert!(r.min_factor > 0.0);
    }

    #[test]
    fn hindsight_counterexample() {
        // request 0 is fresher at the first slot and stays clean; request 1
        // keeps collecting -1s, so in hindsight it should have gone first
        let traj0 = vec![P; 6];
        let traj1 = vec![M; 6];
        let noise = NoiseParams::from_round_flip_prob(0.2, 1.0).unwrap();
        let inst = BatchInstance::new(vec![1.5, 6.5], vec![traj0, traj1], noise).unwrap();
        let fqf = total_success(&inst, &fqf_assignment(&inst)).unwrap();
        let (best, arg) = best_assignment(&inst);
        assert_eq!(fqf_assignment(&inst), vec![0, 1]);
        assert_eq!(arg, vec![1, 0]);
        assert!(best > fqf + 1e-3);
        // in expectation, with only the first round known, FQF is optimal
        let ev = expected_values(&inst);
        assert!((ev.optimal - ev.fqf).abs() < 1e-12);
    }

    /// Monte Carlo estimate of the expected FQF total from the same start.
    #[test]
    fn expected_value_matches_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = NoiseParams::from_round_flip_prob(0.15, 1.0).unwrap();
        let base = BatchInstance::new(vec![1.5, 3.2, 4.7], vec![vec![M, P, P, P], vec![P, P, P, P], vec![P, M, M, P]], noise).unwrap();
        let ev = expected_values(&base);
        let per_round = noise.round_probs();
        let n = 200_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let trajectories: Vec<Vec<Outcome>> = base
                .trajectories
                .iter()
                .map(|t| {
                    let mut t = t[..1].to_vec();
                    t.extend((0..3).map(|_| sample_syndrome_round(&per_round, &mut rng).outcome));
                    t
                })
                .collect();
            let inst = BatchInstance { trajectories, ..base.clone() };
            acc += total_success(&inst, &fqf_assignment(&inst)).unwrap();
        }
        let mc = acc / n as f64;
        assert!((mc - ev.fqf).abs() < 2e-3, "mc {mc} dp {}", ev.fqf);
    }

    #[test]
    fn permutation_count() {
        assert_eq!(permutations(4).len(), 24);
        assert_eq!(permutations(1), vec![vec![0]]);
    }

    #[test]
    fn stream_instances_are_reproducible() {
        let a = BatchInstance::from_streams(9, vec![0.01, 0.02], noise()).unwrap();
        let b = BatchInstance::from_streams(9, vec![0.01, 0.02], noise()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trajectories[0].len(), 6);
        assert!((phase_flip_prob(a.noise.gamma, a.noise.tau).unwrap() - 0.0696).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn factor_identity_and_positivity(
            nj in 1u64..12, extra in 1u64..6, m2_frac in 0.0f64..1.0, m1_frac in 0.0f64..1.0,
            m1p_frac in 0.0f64..1.0, p in 0.01f64..0.49,
        ) {
            let nl = nj + extra;
            let m2 = 1 + ((nj - 1) as f64 * m2_frac) as u64;
            let m1 = (m2 as f64 * m1_frac) as u64 % m2;
            let m1p = m1 + ((nl - nj) as f64 * m1p_frac) as u64;
            let g = interchange_gap(Exchange { m1, m2, m1p, nj, nl }, p).unwrap();
            prop_assert!(g.raw > 0.0);
            prop_assert!(g.factors.iter().all(|&f| f > 0.0));
            prop_assert!((g.raw - g.factored).abs() < 1e-12);
        }

        #[test]
        fn fqf_is_expected_optimal(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = BatchInstance::random(&mut rng, 4, 6, (0.01, 0.45));
            let ev = expected_values(&inst);
            prop_assert!((ev.optimal - ev.fqf).abs() < 1e-12);
        }
    }
}
