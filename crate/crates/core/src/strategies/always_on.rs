//! Eager always-on aggregation: one executor held per job for its entire
//! lifetime. The engine fuses each update as it arrives; this policy only
//! has to claim the slot once, at the job's first round.

use crate::simkernel::{Command, Policy, View};

#[derive(Default)]
pub struct AlwaysOn;

impl Policy for AlwaysOn {
    fn name(&self) -> &'static str {
        "always_on"
    }

    fn on_round_start(&mut self, job: usize, v: &View) -> Vec<Command> {
        if v.round(job).round > 0 {
            return Vec::new(); // the instance from round 0 carries over
        }
        let slot = v
            .idle_slot()
            .expect("always-on validated one executor per job");
        vec![Command::Deploy { slot, job, quota: None }]
    }
}
