//! Eager serverless aggregation: deploy a dynamic instance when an update
//! arrives and no instance is up. Updates landing while an instance is
//! deploying or fusing coalesce into it; once its inbox empties the instance
//! checkpoints and releases, and the next burst pays a fresh deployment.

use std::collections::BTreeSet;

use crate::simkernel::{Command, Drain, Policy, View};

#[derive(Default)]
pub struct EagerServerless {
    /// (job, round) bursts waiting for a free executor.
    waiting: BTreeSet<(usize, usize)>,
}

impl Policy for EagerServerless {
    fn name(&self) -> &'static str {
        "eager_serverless"
    }

    fn on_update_enqueued(&mut self, job: usize, v: &View) -> Vec<Command> {
        let info = v.round(job);
        if info.ended || info.pending == 0 || v.live_instance_for(job, info.round) {
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

    fn on_executor_freed(&mut self, v: &View) -> Vec<Command> {
        let Some(slot) = v.idle_slot() else { return Vec::new() };
        // One deployment per freed executor; stale bursts get dropped.
        loop {
            let Some(&(job, round)) = self.waiting.iter().next() else {
                return Vec::new();
            };
            let info = v.round(job);
            if info.round != round || info.ended || info.pending == 0 {
                self.waiting.remove(&(job, round));
                continue;
            }
            self.waiting.remove(&(job, round));
            return vec![Command::Deploy { slot, job, quota: None }];
        }
    }

    fn on_instance_drained(&mut self, _slot: usize, _job: usize, _v: &View) -> Drain {
        Drain::Release
    }
}
