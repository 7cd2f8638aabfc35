//! Time-ordered event queue with a deterministic total order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::scheduling::QubitId;

/// Event classes in the order they fire at equal timestamps: syndromes are
/// brought up to date before any admission or service decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventClass {
    EcRound = 0,
    Arrival = 1,
    EprReady = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Payload {
    /// Round index (1-based) of a syndrome round for this qubit.
    EcRound { qubit: QubitId, round: u64 },
    Arrival { batch: usize },
    EprReady,
}

impl Payload {
    pub fn class(&self) -> EventClass {
        match self {
            Payload::EcRound { .. } => EventClass::EcRound,
            Payload::Arrival { .. } => EventClass::Arrival,
            Payload::EprReady => EventClass::EprReady,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    pub payload: Payload,
}

impl Event {
    pub fn class(&self) -> EventClass {
        self.payload.class()
    }

    fn key_cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.class().cmp(&other.class()))
            .then(self.seq.cmp(&other.seq))
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so that `BinaryHeap` pops the earliest event.
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        other.key_cmp(self)
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn schedule(&mut self, time: f64, payload: Payload) {
        debug_assert!(time.is_finite());
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { time, seq, payload });
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn count(&self, class: EventClass) -> usize {
        self.heap.iter().filter(|e| e.class() == class).count()
    }
}
