//! Seeded discrete-event simulation of one teleportation node.
//!
//! Requests arrive (one-shot batch, Poisson singles, or Poisson batches), are
//! admitted through the policy's pushout rule, and undergo a syndrome round
//! every `tau` seconds measured from their own arrival. EPR pairs are
//! generated on demand: a generation with an exponential duration runs
//! whenever the buffer is non-empty, and each completed pair is consumed at
//! once by the request the policy selects. That request gets one last,
//! partial syndrome round before teleportation.
//!
//! A run is single-threaded and fully determined by its [`SimConfig`],
//! including the seed.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::analytics::{
    phase_flip_prob, sample_syndrome_round, success_prob, CondErrorProbs, NoiseParams, Outcome, SyndromeHistory,
};
use crate::error::{Error, Result};
use crate::event::{EventClass, EventQueue, Payload};
use crate::rng::{Stream, StreamFactory};
use crate::scheduling::{admit, select_for_service, PolicyKind, QubitId, QubitRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// One batch of `batch_size` requests at t = 0 and nothing after.
    SingleBatch,
    /// Poisson arrivals of single requests at rate `lambda_r`.
    Stream,
    /// Poisson arrival epochs at rate `lambda_r`, `batch_size` requests each.
    BatchedStream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BufferCap {
    Infinite,
    Finite(usize),
}

impl BufferCap {
    pub fn limit(self) -> Option<usize> {
        match self {
            BufferCap::Infinite => None,
            BufferCap::Finite(n) => Some(n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// Stop after this many departures, warmup included.
    Departures(u64),
    /// Stop once simulated time would pass this many seconds.
    Seconds(f64),
}

/// How timing policies order requests that arrived at the same instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Creation order.
    #[default]
    LowestId,
    /// A seeded random permutation of each batch.
    Shuffled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario: Scenario,
    /// Request (or batch) arrival rate in hertz. Unused for a single batch.
    pub lambda_r: f64,
    /// EPR generation rate in hertz.
    pub lambda_e: f64,
    pub batch_size: usize,
    pub buffer: BufferCap,
    pub noise: NoiseParams,
    pub policy: PolicyKind,
    pub seed: u64,
    /// Ignored for a single batch, which always runs until the buffer drains.
    pub horizon: Horizon,
    /// Departures discarded from the statistics.
    pub warmup: u64,
    #[serde(default)]
    pub tie_break: TieBreak,
    /// Keep a per-service trace in [`RunMetrics::services`].
    #[serde(default)]
    pub trace: bool,
}

impl SimConfig {
    /// Defaults used throughout the evaluation: `tau = 3 ms`, `Gamma = 50 Hz`.
    pub fn stream(lambda_r: f64, lambda_e: f64, policy: PolicyKind, seed: u64) -> Self {
        Self {
            scenario: Scenario::Stream,
            lambda_r,
            lambda_e,
            batch_size: 1,
            buffer: BufferCap::Infinite,
            noise: NoiseParams { gamma: 50.0, tau: 0.003 },
            policy,
            seed,
            horizon: Horizon::Departures(100_000),
            warmup: 10_000,
            tie_break: TieBreak::LowestId,
            trace: false,
        }
    }

    pub fn single_batch(batch_size: usize, lambda_e: f64, policy: PolicyKind, seed: u64) -> Self {
        Self {
            scenario: Scenario::SingleBatch,
            lambda_r: 0.0,
            batch_size,
            horizon: Horizon::Departures(batch_size as u64),
            warmup: 0,
            ..Self::stream(0.0, lambda_e, policy, seed)
        }
    }

    pub fn batched_stream(lambda_r: f64, lambda_e: f64, batch_size: usize, buffer: usize, policy: PolicyKind, seed: u64) -> Self {
        Self {
            scenario: Scenario::BatchedStream,
            batch_size,
            buffer: BufferCap::Finite(buffer),
            ..Self::stream(lambda_r, lambda_e, policy, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        self.noise.validate()?;
        if !(self.lambda_e.is_finite() && self.lambda_e > 0.0) {
            return bad(format!("lambda_e must be positive, got {}", self.lambda_e));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if let BufferCap::Finite(cap) = self.buffer {
            if cap < self.batch_size {
                return bad(format!("buffer {cap} is smaller than batch size {}", self.batch_size));
            }
        }
        match self.scenario {
            Scenario::SingleBatch => {}
            Scenario::Stream | Scenario::BatchedStream => {
                if !(self.lambda_r.is_finite() && self.lambda_r > 0.0) {
                    return bad(format!("lambda_r must be positive, got {}", self.lambda_r));
                }
                if self.scenario == Scenario::Stream && self.batch_size != 1 {
                    return bad("stream scenario has single arrivals; use batched_stream for b > 1".into());
                }
                match self.horizon {
                    Horizon::Departures(n) if n <= self.warmup => {
                        return bad(format!("horizon of {n} departures does not exceed warmup {}", self.warmup));
                    }
                    Horizon::Seconds(t) if !(t.is_finite() && t > 0.0) => {
                        return bad(format!("time horizon must be positive, got {t}"));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Offered qubit rate over service rate.
    pub fn load(&self) -> Result<f64> {
        load(self)
    }
}

/// Traffic intensity `lambda_r * b / lambda_e` of a stream scenario.
pub fn load(config: &SimConfig) -> Result<f64> {
    match config.scenario {
        Scenario::SingleBatch => Err(Error::InvalidConfig("load is undefined for a single batch".into())),
        Scenario::Stream | Scenario::BatchedStream => Ok(config.lambda_r * config.batch_size as f64 / config.lambda_e),
    }
}

/// One teleportation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceRecord {
    pub qubit: QubitId,
    pub arrival_time: f64,
    pub time: f64,
    /// Completed full rounds only.
    pub history: SyndromeHistory,
    /// The partial round over the residual interval, if it had non-zero length.
    pub final_round: Option<Outcome>,
    pub fidelity: f64,
    pub no_error: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    /// Per-departure no-error probability, warmup excluded.
    pub fidelity_samples: Vec<f64>,
    pub departure_times: Vec<f64>,
    /// Whether the sampled logical flips of each departure cancelled.
    pub realized_no_error: Vec<bool>,
    /// All departures, warmup included.
    pub departures: u64,
    pub warmup_discarded: u64,
    pub arrivals_count: u64,
    pub pushout_count: u64,
    pub pushouts_after_warmup: u64,
    pub residual_occupancy: u64,
    pub end_time: f64,
    pub time_avg_occupancy: f64,
    pub max_occupancy: usize,
    pub services: Vec<ServiceRecord>,
}

impl RunMetrics {
    pub fn mean_fidelity(&self) -> f64 {
        mean(&self.fidelity_samples)
    }

    pub fn mean_realized(&self) -> f64 {
        let n = self.realized_no_error.len();
        self.realized_no_error.iter().filter(|&&ok| ok).count() as f64 / n as f64
    }

    /// Mean with every post-warmup pushout scored as fidelity 0.
    pub fn mean_fidelity_with_drops(&self) -> f64 {
        let n = self.fidelity_samples.len() as u64 + self.pushouts_after_warmup;
        self.fidelity_samples.iter().sum::<f64>() / n as f64
    }

    pub fn drop_rate(&self) -> f64 {
        if self.arrivals_count == 0 {
            0.0
        } else {
            self.pushout_count as f64 / self.arrivals_count as f64
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Final partial round and fidelity of a request teleported at `now`.
///
/// The partial round spans `now - last_ec_time` and is scored with its own
/// conditional error probability, so the returned fidelity stays the exact
/// no-error probability given everything observed.
pub fn final_round<R: rand::Rng + ?Sized>(
    record: &QubitRecord,
    now: f64,
    noise: &NoiseParams,
    per_round: &CondErrorProbs,
    rng: &mut R,
) -> (f64, Option<crate::analytics::RoundSample>) {
    let delta = now - record.last_ec_time;
    let bias = per_round.parity_bias(&record.history);
    if delta <= 0.0 {
        return (success_prob(&record.history, per_round), None);
    }
    let p = phase_flip_prob(noise.gamma, delta).expect("validated noise and non-negative interval");
    let partial = CondErrorProbs::from_flip_prob(p).expect("partial interval is shorter than tau");
    let sample = sample_syndrome_round(&partial, rng);
    ((1.0 + bias * partial.factor(sample.outcome)) / 2.0, Some(sample))
}

struct QubitState {
    rng: ChaCha8Rng,
    /// Odd number of logical flips so far.
    flipped: bool,
}

/// Event loop state for one run.
pub struct Simulator {
    cfg: SimConfig,
    per_round: CondErrorProbs,
    queue: EventQueue,
    buffer: Vec<QubitRecord>,
    states: HashMap<QubitId, QubitState>,
    streams: StreamFactory,
    arrivals_rng: ChaCha8Rng,
    epr_rng: ChaCha8Rng,
    shuffle_rng: ChaCha8Rng,
    arrival_gap: Option<Exp<f64>>,
    epr_duration: Exp<f64>,
    epr_in_flight: bool,
    next_id: u64,
    now: f64,
    occupancy_area: f64,
    done: bool,
    metrics: RunMetrics,
}

impl Simulator {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let streams = StreamFactory::new(cfg.seed);
        let arrival_gap = match cfg.scenario {
            Scenario::SingleBatch => None,
            _ => Some(Exp::new(cfg.lambda_r).map_err(|e| Error::InvalidConfig(e.to_string()))?),
        };
        let epr_duration = Exp::new(cfg.lambda_e).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let mut sim = Self {
            per_round: cfg.noise.round_probs(),
            queue: EventQueue::new(),
            buffer: Vec::new(),
            states: HashMap::new(),
            arrivals_rng: streams.stream(Stream::Arrivals),
            epr_rng: streams.stream(Stream::Epr),
            shuffle_rng: streams.stream(Stream::Shuffle),
            streams,
            arrival_gap,
            epr_duration,
            epr_in_flight: false,
            next_id: 0,
            now: 0.0,
            occupancy_area: 0.0,
            done: false,
            metrics: RunMetrics {
                seed: cfg.seed,
                fidelity_samples: Vec::new(),
                departure_times: Vec::new(),
                realized_no_error: Vec::new(),
                departures: 0,
                warmup_discarded: 0,
                arrivals_count: 0,
                pushout_count: 0,
                pushouts_after_warmup: 0,
                residual_occupancy: 0,
                end_time: 0.0,
                time_avg_occupancy: 0.0,
                max_occupancy: 0,
                services: Vec::new(),
            },
            cfg,
        };
        sim.schedule_first_arrival();
        Ok(sim)
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn buffer(&self) -> &[QubitRecord] {
        &self.buffer
    }

    pub fn pending(&self, class: EventClass) -> usize {
        self.queue.count(class)
    }

    pub fn next_event_time(&self) -> Option<f64> {
        self.queue.peek_time()
    }

    pub fn metrics(&self) -> &RunMetrics {
        &self.metrics
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    fn schedule_first_arrival(&mut self) {
        match self.cfg.scenario {
            Scenario::SingleBatch => self.queue.schedule(0.0, Payload::Arrival { batch: self.cfg.batch_size }),
            Scenario::Stream | Scenario::BatchedStream => self.schedule_next_arrival(),
        }
    }

    fn schedule_next_arrival(&mut self) {
        if let Some(gap) = &self.arrival_gap {
            let t = self.now + gap.sample(&mut self.arrivals_rng);
            self.queue.schedule(t, Payload::Arrival { batch: self.cfg.batch_size });
        }
    }

    /// Processes the next event. Returns `false` once the run has ended.
    pub fn step(&mut self) -> bool {
        if self.done {
            return false;
        }
        let Some(event) = self.queue.pop() else {
            self.finish();
            return false;
        };
        if let Horizon::Seconds(limit) = self.cfg.horizon {
            if self.cfg.scenario != Scenario::SingleBatch && event.time > limit {
                self.advance_clock(limit);
                self.finish();
                return false;
            }
        }
        self.advance_clock(event.time);
        match event.payload {
            Payload::EcRound { qubit, round } => self.ec_round(qubit, round),
            Payload::Arrival { batch } => self.arrival(batch),
            Payload::EprReady => self.epr_ready(),
        }
        if let (Horizon::Departures(n), false) = (self.cfg.horizon, self.cfg.scenario == Scenario::SingleBatch) {
            if self.metrics.departures >= n {
                self.finish();
            }
        }
        !self.done
    }

    pub fn run_to_end(mut self) -> RunMetrics {
        while self.step() {}
        self.metrics
    }

    fn advance_clock(&mut self, t: f64) {
        debug_assert!(t >= self.now);
        self.occupancy_area += self.buffer.len() as f64 * (t - self.now);
        self.now = t;
    }

    fn finish(&mut self) {
        self.done = true;
        self.metrics.end_time = self.now;
        self.metrics.residual_occupancy = self.buffer.len() as u64;
        self.metrics.time_avg_occupancy = if self.now > 0.0 { self.occupancy_area / self.now } else { 0.0 };
    }

    fn ec_round_time(&self, record: &QubitRecord, round: u64) -> f64 {
        record.arrival_time + round as f64 * self.cfg.noise.tau
    }

    fn schedule_ec_round(&mut self, record_idx: usize) {
        let record = &self.buffer[record_idx];
        let round = record.history.rounds() + 1;
        let t = self.ec_round_time(record, round);
        self.queue.schedule(t, Payload::EcRound { qubit: record.id, round });
    }

    fn ec_round(&mut self, qubit: QubitId, round: u64) {
        // served or pushed out since this round was scheduled
        let Some(state) = self.states.get_mut(&qubit) else {
            return;
        };
        let idx = self.buffer.iter().position(|r| r.id == qubit).expect("stateful qubit is resident");
        debug_assert_eq!(self.buffer[idx].history.rounds() + 1, round);
        let sample = sample_syndrome_round(&self.per_round, &mut state.rng);
        state.flipped ^= sample.logical_flip;
        let tau = self.cfg.noise.tau;
        let record = &mut self.buffer[idx];
        record.history.record(sample.outcome);
        record.last_ec_time = record.arrival_time + round as f64 * tau;
        self.schedule_ec_round(idx);
    }

    fn arrival(&mut self, batch: usize) {
        let first = self.next_id;
        self.next_id += batch as u64;
        let mut ranks: Vec<u64> = (0..batch as u64).collect();
        if self.cfg.tie_break == TieBreak::Shuffled {
            ranks.shuffle(&mut self.shuffle_rng);
        }
        let arrivals: Vec<QubitRecord> = (0..batch)
            .map(|i| {
                let id = first + i as u64;
                let rec = QubitRecord::new(id, self.now);
                match self.cfg.tie_break {
                    TieBreak::LowestId => rec,
                    TieBreak::Shuffled => rec.with_tie_rank(ranks[i]),
                }
            })
            .collect();
        for rec in &arrivals {
            self.states.insert(
                rec.id,
                QubitState {
                    rng: self.streams.stream(Stream::Qubit(rec.id.0)),
                    flipped: false,
                },
            );
        }
        self.metrics.arrivals_count += batch as u64;
        let evicted = admit(&mut self.buffer, arrivals, self.cfg.buffer.limit(), self.cfg.policy, &self.per_round);
        for gone in &evicted {
            self.states.remove(&gone.id);
        }
        self.metrics.pushout_count += evicted.len() as u64;
        if self.metrics.departures >= self.cfg.warmup {
            self.metrics.pushouts_after_warmup += evicted.len() as u64;
        }
        for idx in 0..self.buffer.len() {
            if self.buffer[idx].id.0 >= first {
                self.schedule_ec_round(idx);
            }
        }
        self.metrics.max_occupancy = self.metrics.max_occupancy.max(self.buffer.len());
        self.start_generation_if_needed();
        self.schedule_next_arrival();
    }

    fn start_generation_if_needed(&mut self) {
        if !self.epr_in_flight && !self.buffer.is_empty() {
            self.epr_in_flight = true;
            let t = self.now + self.epr_duration.sample(&mut self.epr_rng);
            self.queue.schedule(t, Payload::EprReady);
        }
    }

    fn epr_ready(&mut self) {
        self.epr_in_flight = false;
        if self.buffer.is_empty() {
            return;
        }
        let chosen = select_for_service(self.cfg.policy, &self.buffer, &self.per_round).expect("buffer is non-empty");
        let idx = self.buffer.iter().position(|r| r.id == chosen).expect("chosen qubit is resident");
        let record = self.buffer.remove(idx);
        let mut state = self.states.remove(&chosen).expect("resident qubit has state");
        let (fidelity, partial) = final_round(&record, self.now, &self.cfg.noise, &self.per_round, &mut state.rng);
        let flipped = state.flipped ^ partial.is_some_and(|s| s.logical_flip);
        self.metrics.departures += 1;
        if self.metrics.departures > self.cfg.warmup {
            self.metrics.fidelity_samples.push(fidelity);
            self.metrics.departure_times.push(self.now);
            self.metrics.realized_no_error.push(!flipped);
        } else {
            self.metrics.warmup_discarded += 1;
        }
        if self.cfg.trace {
            self.metrics.services.push(ServiceRecord {
                qubit: record.id,
                arrival_time: record.arrival_time,
                time: self.now,
                history: record.history,
                final_round: partial.map(|s| s.outcome),
                fidelity,
                no_error: !flipped,
            });
        }
        // EPR pairs are never stored: generation only resumes if work remains
        self.start_generation_if_needed();
    }
}

/// Runs one replication to its horizon.
pub fn run(config: &SimConfig) -> Result<RunMetrics> {
    Ok(Simulator::new(config.clone())?.run_to_end())
}
