//! Event heap for the discrete-event engine.
//!
//! Events dispatch in `(time, seq)` order, where `seq` is the insertion
//! sequence. Two events at the same virtual instant therefore dispatch in the
//! order they were scheduled, which keeps simultaneous arrivals, cutoffs and
//! timers deterministic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::units::SimTime;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    RoundStart { job: usize, round: usize },
    UpdateArrived { job: usize, round: usize, party: usize },
    WaitCutoff { job: usize, round: usize },
    TimerAlert { job: usize, round: usize },
    SchedulerTick,
    /// A dynamic instance finished its deploy phase and can start fusing.
    DeployDone { slot: usize, gen: u64 },
    /// A fusion step on `slot` completed; commit its absorbed updates.
    StepDone { slot: usize, gen: u64 },
    ExecutorFreed { slot: usize, gen: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimEvent {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want earliest first.
        other
            .time
            .cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Min-queue of events keyed by `(time, seq)`.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<SimEvent>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: SimTime, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(SimEvent { time, seq, kind });
    }

    pub fn pop(&mut self) -> Option<SimEvent> {
        self.heap.pop()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
