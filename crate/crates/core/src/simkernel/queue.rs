//! Buffered update queues and per-round fusion checkpoints.
//!
//! Dynamic deployment strategies need model updates buffered somewhere while
//! no aggregator instance is up; this module is that buffer. Each job has one
//! live round at a time, holding the round's pending updates, the partial
//! aggregate checkpoint, and the acceptance bookkeeping.

use std::collections::VecDeque;

use crate::model::{fuse_pair, lift, ModelUpdate, PartialAggregate};
use crate::units::SimTime;

/// Outcome of offering an update to a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Accepted,
    DroppedLate,
}

/// State of one job's current synchronization round.
#[derive(Debug)]
pub struct RoundQueue {
    pub round: usize,
    pub started_at: SimTime,
    /// Hard acceptance cutoff (`round start + t_wait`), when the job has
    /// intermittent parties. Inclusive: an update arriving exactly at the
    /// cutoff is accepted.
    pub cutoff: Option<SimTime>,
    pub cutoff_passed: bool,
    /// Number of parties expected to send this round.
    pub expected: usize,
    pub arrived: usize,
    pub accepted: usize,
    pub dropped: usize,
    pub pending: VecDeque<ModelUpdate>,
    /// The fusion checkpoint: everything absorbed so far.
    pub checkpoint: PartialAggregate,
    pub absorbed: usize,
    pub last_accepted_arrival: Option<SimTime>,
    pub ended: bool,
}

impl RoundQueue {
    pub fn new(round: usize, started_at: SimTime, expected: usize, cutoff: Option<SimTime>) -> Self {
        RoundQueue {
            round,
            started_at,
            cutoff,
            cutoff_passed: false,
            expected,
            arrived: 0,
            accepted: 0,
            dropped: 0,
            pending: VecDeque::new(),
            checkpoint: PartialAggregate::empty(),
            absorbed: 0,
            last_accepted_arrival: None,
            ended: false,
        }
    }

    /// Offers an arriving update: accepted unless the round has a wait
    /// cutoff and the update missed it.
    pub fn enqueue_update(&mut self, update: ModelUpdate) -> EnqueueOutcome {
        self.arrived += 1;
        let late = match self.cutoff {
            Some(c) => update.arrival_time > c,
            None => false,
        };
        if late {
            self.dropped += 1;
            return EnqueueOutcome::DroppedLate;
        }
        self.accepted += 1;
        self.last_accepted_arrival = Some(match self.last_accepted_arrival {
            Some(t) => t.max(update.arrival_time),
            None => update.arrival_time,
        });
        self.pending.push_back(update);
        EnqueueOutcome::Accepted
    }

    /// Pops up to `n` pending updates and fuses them into the checkpoint.
    /// Returns how many were absorbed.
    pub fn absorb(&mut self, n: usize) -> usize {
        let mut taken = 0;
        while taken < n {
            let Some(u) = self.pending.pop_front() else { break };
            self.checkpoint =
                fuse_pair(&self.checkpoint, &lift(&u)).expect("round updates share the job's model shape");
            self.absorbed += 1;
            taken += 1;
        }
        taken
    }

    /// True once every party has reported or the cutoff has passed.
    pub fn intake_closed(&self) -> bool {
        self.arrived == self.expected || self.cutoff_passed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PartyId;
    use crate::units::SimDuration;

    fn update_at(t: SimTime) -> ModelUpdate {
        ModelUpdate {
            party_id: PartyId("p".into()),
            round: 0,
            layers: vec![vec![1.0]],
            sample_weight: 1.0,
            arrival_time: t,
        }
    }

    #[test]
    fn cutoff_boundary_is_inclusive() {
        let start = SimTime::ZERO;
        let cutoff = start + SimDuration::from_secs_f64(600.0);
        let mut q = RoundQueue::new(0, start, 3, Some(cutoff));

        assert_eq!(q.enqueue_update(update_at(cutoff)), EnqueueOutcome::Accepted);
        let just_late = cutoff + SimDuration::from_micros(1);
        assert_eq!(q.enqueue_update(update_at(just_late)), EnqueueOutcome::DroppedLate);
        assert_eq!((q.accepted, q.dropped), (1, 1));
    }

    #[test]
    fn active_round_accepts_everything() {
        let mut q = RoundQueue::new(0, SimTime::ZERO, 2, None);
        let far = SimTime::from_secs_f64(1e6);
        assert_eq!(q.enqueue_update(update_at(far)), EnqueueOutcome::Accepted);
    }

    #[test]
    fn conservation_accepted_plus_dropped_is_arrived() {
        let start = SimTime::ZERO;
        let cutoff = start + SimDuration::from_secs_f64(10.0);
        let mut q = RoundQueue::new(0, start, 5, Some(cutoff));
        for i in 0..5 {
            q.enqueue_update(update_at(start + SimDuration::from_secs_f64(4.0 * i as f64)));
        }
        assert_eq!(q.arrived, 5);
        assert_eq!(q.accepted + q.dropped, q.arrived);
        assert_eq!(q.dropped, 2);
    }

    #[test]
    fn absorb_moves_pending_into_checkpoint() {
        let mut q = RoundQueue::new(0, SimTime::ZERO, 3, None);
        for _ in 0..3 {
            q.enqueue_update(update_at(SimTime::ZERO));
        }
        assert_eq!(q.absorb(2), 2);
        assert_eq!(q.pending.len(), 1);
        assert_eq!(q.absorbed, 2);
        assert_eq!(q.checkpoint.total_weight, 2.0);
        assert_eq!(q.absorb(5), 1);
        assert_eq!(q.absorbed, 3);
    }
}
