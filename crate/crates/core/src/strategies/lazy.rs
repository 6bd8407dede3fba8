//! Lazy aggregation: one dynamic instance per round, deployed only once the
//! last expected update is queued (or the wait cutoff has passed and the
//! survivors are all in). Cheapest possible schedule, worst latency.

use std::collections::BTreeSet;

use crate::simkernel::{Command, Drain, Policy, View};

#[derive(Default)]
pub struct LazyPolicy {
    /// Rounds whose single instance has been requested already.
    fired: BTreeSet<(usize, usize)>,
    waiting: BTreeSet<(usize, usize)>,
}

impl LazyPolicy {
    fn trigger(&mut self, job: usize, v: &View) -> Vec<Command> {
        let info = v.round(job);
        if info.ended || !info.intake_closed || info.accepted == 0 {
            return Vec::new();
        }
        if !self.fired.insert((job, info.round)) {
            return Vec::new();
        }
        match v.idle_slot() {
            Some(slot) => vec![Command::Deploy { slot, job, quota: None }],
            None => {
                self.waiting.insert((job, info.round));
                Vec::new()
            }
        }
    }
}

impl Policy for LazyPolicy {
    fn name(&self) -> &'static str {
        "lazy"
    }

    fn on_update_enqueued(&mut self, job: usize, v: &View) -> Vec<Command> {
        self.trigger(job, v)
    }

    fn on_cutoff(&mut self, job: usize, v: &View) -> Vec<Command> {
        self.trigger(job, v)
    }

    fn on_executor_freed(&mut self, v: &View) -> Vec<Command> {
        let Some(slot) = v.idle_slot() else { return Vec::new() };
        loop {
            let Some(&(job, round)) = self.waiting.iter().next() else {
                return Vec::new();
            };
            self.waiting.remove(&(job, round));
            let info = v.round(job);
            if info.round != round || info.ended || info.pending == 0 {
                continue;
            }
            return vec![Command::Deploy { slot, job, quota: None }];
        }
    }

    fn on_instance_drained(&mut self, _slot: usize, _job: usize, _v: &View) -> Drain {
        Drain::Release
    }
}
