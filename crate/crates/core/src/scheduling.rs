//! Service and pushout decisions over the stored request qubits.
//!
//! Decisions are pure functions of a buffer snapshot. Every policy resolves
//! ties deterministically: timing policies by `tie_rank` and then id, FQF by
//! id alone.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytics::{success_prob, CondErrorProbs, SyndromeHistory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QubitId(pub u64);

impl fmt::Display for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

/// One stored request qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitRecord {
    pub id: QubitId,
    pub arrival_time: f64,
    pub history: SyndromeHistory,
    /// Time of the most recent completed syndrome round, or the arrival time.
    pub last_ec_time: f64,
    /// Order among records that arrived at the same instant. Equals the id
    /// unless batches are shuffled.
    pub tie_rank: u64,
}

impl QubitRecord {
    pub fn new(id: u64, arrival_time: f64) -> Self {
        Self {
            id: QubitId(id),
            arrival_time,
            history: SyndromeHistory::EMPTY,
            last_ec_time: arrival_time,
            tie_rank: id,
        }
    }

    pub fn with_history(mut self, history: SyndromeHistory) -> Self {
        self.history = history;
        self
    }

    pub fn with_tie_rank(mut self, rank: u64) -> Self {
        self.tie_rank = rank;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    /// Oldest Qubit First.
    Oqf,
    /// Youngest Qubit First.
    Yqf,
    /// Freshest Qubit First: lowest syndrome-conditioned error likelihood.
    Fqf,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Oqf, PolicyKind::Yqf, PolicyKind::Fqf];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Oqf => "oqf",
            PolicyKind::Yqf => "yqf",
            PolicyKind::Fqf => "fqf",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "oqf" => Ok(PolicyKind::Oqf),
            "yqf" => Ok(PolicyKind::Yqf),
            "fqf" => Ok(PolicyKind::Fqf),
            _ => Err(Error::UnknownPolicy(s.to_string())),
        }
    }
}

fn oldest_first(a: &QubitRecord, b: &QubitRecord) -> Ordering {
    a.arrival_time
        .total_cmp(&b.arrival_time)
        .then(a.tie_rank.cmp(&b.tie_rank))
        .then(a.id.cmp(&b.id))
}

fn youngest_first(a: &QubitRecord, b: &QubitRecord) -> Ordering {
    b.arrival_time
        .total_cmp(&a.arrival_time)
        .then(a.tie_rank.cmp(&b.tie_rank))
        .then(a.id.cmp(&b.id))
}

/// Picks the record that is least under `cmp`.
fn pick<'a, I, F>(buffer: I, mut cmp: F) -> Result<QubitId>
where
    I: IntoIterator<Item = &'a QubitRecord>,
    F: FnMut(&QubitRecord, &QubitRecord) -> Ordering,
{
    buffer
        .into_iter()
        .min_by(|a, b| cmp(a, b))
        .map(|r| r.id)
        .ok_or(Error::EmptyBuffer)
}

/// The record to teleport when an EPR pair becomes available.
pub fn select_for_service<'a, I>(policy: PolicyKind, buffer: I, per_round: &CondErrorProbs) -> Result<QubitId>
where
    I: IntoIterator<Item = &'a QubitRecord>,
{
    match policy {
        PolicyKind::Oqf => pick(buffer, oldest_first),
        PolicyKind::Yqf => pick(buffer, youngest_first),
        PolicyKind::Fqf => pick(buffer, |a, b| {
            let sa = success_prob(&a.history, per_round);
            let sb = success_prob(&b.history, per_round);
            sb.total_cmp(&sa).then(a.id.cmp(&b.id))
        }),
    }
}

/// The record to discard when an arrival finds the buffer full. Timing
/// policies both evict the oldest record; FQF evicts the most likely to be
/// in error.
pub fn select_for_pushout<'a, I>(policy: PolicyKind, buffer: I, per_round: &CondErrorProbs) -> Result<QubitId>
where
    I: IntoIterator<Item = &'a QubitRecord>,
{
    match policy {
        PolicyKind::Oqf | PolicyKind::Yqf => pick(buffer, oldest_first),
        PolicyKind::Fqf => pick(buffer, |a, b| {
            let sa = success_prob(&a.history, per_round);
            let sb = success_prob(&b.history, per_round);
            sa.total_cmp(&sb).then(a.id.cmp(&b.id))
        }),
    }
}

/// Admits every arrival, then evicts one record at a time by the policy's
/// pushout rule until the buffer fits `capacity`. Returns the evicted
/// records in eviction order.
pub fn admit(
    buffer: &mut Vec<QubitRecord>,
    arrivals: Vec<QubitRecord>,
    capacity: Option<usize>,
    policy: PolicyKind,
    per_round: &CondErrorProbs,
) -> Vec<QubitRecord> {
    buffer.extend(arrivals);
    let mut evicted = Vec::new();
    let Some(capacity) = capacity else {
        return evicted;
    };
    while buffer.len() > capacity {
        let victim = select_for_pushout(policy, buffer.iter(), per_round).expect("buffer over capacity is non-empty");
        let idx = buffer.iter().position(|r| r.id == victim).expect("victim is resident");
        evicted.push(buffer.remove(idx));
    }
    evicted
}
