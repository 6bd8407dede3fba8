//! Batched serverless aggregation: a dynamic instance is deployed whenever a
//! full batch of unassigned updates is queued, plus one residue instance at
//! the round cutoff (or once every party has reported). Each instance absorbs
//! exactly its batch. Instances of the same round run one at a time, since
//! each resumes from the checkpoint the previous one wrote.

use std::collections::{BTreeMap, VecDeque};

use crate::simkernel::{Command, Drain, Policy, View};

pub struct Batched {
    batch_size: usize,
    /// Updates already assigned to a batch, per job (current round).
    assigned: BTreeMap<usize, usize>,
    /// Batches awaiting an executor: (job, round) -> batch sizes in order.
    queued: BTreeMap<(usize, usize), VecDeque<usize>>,
}

impl Batched {
    pub fn new(batch_size: usize) -> Self {
        assert!(batch_size >= 1, "batch size must be >= 1");
        Batched {
            batch_size,
            assigned: BTreeMap::new(),
            queued: BTreeMap::new(),
        }
    }

    fn enqueue_batches(&mut self, job: usize, v: &View) {
        let info = v.round(job);
        if info.ended {
            return;
        }
        let assigned = self.assigned.entry(job).or_insert(0);
        let mut unassigned = info.accepted - *assigned;
        while unassigned >= self.batch_size {
            self.queued
                .entry((job, info.round))
                .or_default()
                .push_back(self.batch_size);
            *assigned += self.batch_size;
            unassigned -= self.batch_size;
        }
        // Residue: once no more updates can come, flush what's left.
        if info.intake_closed && unassigned > 0 {
            self.queued
                .entry((job, info.round))
                .or_default()
                .push_back(unassigned);
            *assigned += unassigned;
        }
    }

    /// Deploys the first queued batch whose round has no live instance.
    fn dispatch(&mut self, v: &View) -> Vec<Command> {
        let Some(slot) = v.idle_slot() else { return Vec::new() };
        let mut stale = Vec::new();
        let mut picked = None;
        for (&(job, round), batches) in self.queued.iter() {
            let info = v.round(job);
            if info.round != round || info.ended {
                stale.push((job, round));
                continue;
            }
            if batches.is_empty() || v.live_instance_for(job, round) {
                continue;
            }
            picked = Some((job, round));
            break;
        }
        for key in stale {
            self.queued.remove(&key);
        }
        let Some((job, round)) = picked else { return Vec::new() };
        let quota = self
            .queued
            .get_mut(&(job, round))
            .and_then(VecDeque::pop_front)
            .expect("picked batch exists");
        vec![Command::Deploy { slot, job, quota: Some(quota) }]
    }
}

impl Policy for Batched {
    fn name(&self) -> &'static str {
        "batched_serverless"
    }

    fn on_round_start(&mut self, job: usize, _v: &View) -> Vec<Command> {
        self.assigned.insert(job, 0);
        Vec::new()
    }

    fn on_update_enqueued(&mut self, job: usize, v: &View) -> Vec<Command> {
        self.enqueue_batches(job, v);
        self.dispatch(v)
    }

    fn on_cutoff(&mut self, job: usize, v: &View) -> Vec<Command> {
        self.enqueue_batches(job, v);
        self.dispatch(v)
    }

    fn on_executor_freed(&mut self, v: &View) -> Vec<Command> {
        self.dispatch(v)
    }

    fn on_instance_drained(&mut self, _slot: usize, _job: usize, _v: &View) -> Drain {
        // A batched instance only exists while its quota lasts; an empty
        // inbox before that cannot happen because batches are only formed
        // from already-queued updates.
        Drain::Release
    }
}
