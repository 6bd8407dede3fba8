//! Just-in-time aggregation scheduling.
//!
//! Per round, the scheduler creates one aggregator task whose deadline is
//! `round_start + t_rnd - t_agg`: the latest start from which aggregation can
//! still finish right when the last predicted update lands. The same value
//! doubles as the task's priority (an absolute timestamp; smaller = more
//! urgent, and comparable across jobs that started at different times). A
//! timer force-starts the task at its deadline, preempting a strictly
//! lower-priority running task if every executor is busy. Before the
//! deadline the scheduler is opportunistic: once a round's entire backlog is
//! queued (every party reported, or the cutoff passed) the task may start
//! early on an idle executor, finish, and release — starting any earlier
//! than that would only buy billed idle time waiting for stragglers.
//!
//! A preempted task persists its partial aggregate as a checkpoint (the
//! engine keeps it with the round's queue) and retains its priority; it
//! resumes on the next free executor its priority entitles it to.

use std::collections::BTreeMap;

use crate::simkernel::{Command, Drain, Policy, Rec, View};
use crate::units::SimTime;

/// Scheduling state of one round's aggregation task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskState {
    Pending,
    Running,
    Preempted,
    Done,
}

impl TaskState {
    fn label(self) -> &'static str {
        match self {
            TaskState::Pending => "pending",
            TaskState::Running => "running",
            TaskState::Preempted => "preempted",
            TaskState::Done => "done",
        }
    }
}

/// One schedulable aggregation unit. The fusion checkpoint itself lives with
/// the round's update queue in the engine; this is the scheduling view.
#[derive(Debug, Clone)]
pub struct AggregatorTask {
    pub job: usize,
    pub round: usize,
    /// Smaller is more urgent. Equal to the deadline timestamp.
    pub priority: SimTime,
    pub deadline: SimTime,
    pub state: TaskState,
    pub slot: Option<usize>,
    /// A preemption was issued on this task's behalf and has not yet
    /// produced a start; stops it from evicting a second victim meanwhile.
    claim: bool,
}

#[derive(Default)]
pub struct JitScheduler {
    tasks: BTreeMap<(usize, usize), AggregatorTask>,
}

impl JitScheduler {
    fn trace_task(t: &AggregatorTask) -> Command {
        Command::Trace(Rec::Task {
            job: t.job,
            round: t.round,
            state: t.state.label(),
            priority: t.priority,
            deadline: t.deadline,
        })
    }

    /// May this task run right now?
    ///
    /// Past its deadline a task runs unconditionally (the timer regime: the
    /// instance deploys and waits for updates if it must). Before the
    /// deadline it may only start greedily once the round's whole remaining
    /// backlog is queued and nonempty.
    fn eligible(t: &AggregatorTask, v: &View) -> bool {
        if !matches!(t.state, TaskState::Pending | TaskState::Preempted) {
            return false;
        }
        let info = v.round(t.job);
        if info.round != t.round || info.ended {
            return false;
        }
        v.now >= t.deadline || (info.intake_closed && info.pending > 0)
    }

    /// Offers free executors to eligible tasks in ascending priority order,
    /// preempting strictly lower-priority running tasks when the cluster is
    /// full. One victim at most per claimant.
    fn pass(&mut self, v: &View) -> Vec<Command> {
        let mut cmds = Vec::new();
        let mut used: Vec<usize> = Vec::new();
        let mut order: Vec<(SimTime, SimTime, (usize, usize))> = self
            .tasks
            .values()
            .filter(|t| Self::eligible(t, v))
            .map(|t| (t.priority, t.deadline, (t.job, t.round)))
            .collect();
        order.sort();

        for (_, _, key) in order {
            let free = (0..v.n_slots()).find(|&s| v.slot_free(s) && !used.contains(&s));
            if let Some(slot) = free {
                used.push(slot);
                let t = self.tasks.get_mut(&key).expect("task listed");
                t.state = TaskState::Running;
                t.slot = Some(slot);
                t.claim = false;
                cmds.push(Command::Deploy { slot, job: key.0, quota: None });
                cmds.push(Self::trace_task(t));
                continue;
            }
            let my_priority = self.tasks[&key].priority;
            if self.tasks[&key].claim {
                continue; // an eviction is already in flight for this task
            }
            // Victim: the least urgent running task, ties broken by later
            // deadline then task id, and only if strictly less urgent.
            let victim = self
                .tasks
                .values()
                .filter(|t| t.state == TaskState::Running)
                .max_by_key(|t| (t.priority, t.deadline, t.job, t.round))
                .filter(|t| t.priority > my_priority)
                .map(|t| (t.job, t.round));
            let Some(vkey) = victim else { continue };
            let vt = self.tasks.get_mut(&vkey).expect("victim listed");
            let slot = vt.slot.take().expect("running task has a slot");
            vt.state = TaskState::Preempted;
            cmds.push(Command::Preempt { slot });
            cmds.push(Self::trace_task(vt));
            self.tasks.get_mut(&key).expect("task listed").claim = true;
        }
        cmds
    }
}

impl Policy for JitScheduler {
    fn name(&self) -> &'static str {
        "jit"
    }

    fn wants_ticks(&self) -> bool {
        true
    }

    fn on_round_start(&mut self, job: usize, v: &View) -> Vec<Command> {
        let info = v.round(job);
        let est = v.estimates(job);
        let defer = est.t_rnd.saturating_sub(est.t_agg);
        let deadline = info.started_at + defer;
        let task = AggregatorTask {
            job,
            round: info.round,
            priority: deadline,
            deadline,
            state: TaskState::Pending,
            slot: None,
            claim: false,
        };
        let mut cmds = vec![
            Self::trace_task(&task),
            Command::SetTimer { job, round: info.round, at: deadline },
        ];
        if est.t_agg >= est.t_rnd {
            cmds.push(Command::Trace(Rec::Warn {
                text: format!(
                    "job {job} round {}: t_agg >= t_rnd, aggregation cannot be deferred; \
                     deadline clamped to round start",
                    info.round
                ),
            }));
        }
        self.tasks.insert((job, info.round), task);
        cmds
    }

    fn on_update_enqueued(&mut self, _job: usize, v: &View) -> Vec<Command> {
        self.pass(v)
    }

    fn on_cutoff(&mut self, _job: usize, v: &View) -> Vec<Command> {
        self.pass(v)
    }

    fn on_timer(&mut self, job: usize, round: usize, v: &View) -> Vec<Command> {
        let Some(t) = self.tasks.get(&(job, round)) else {
            return vec![Command::Trace(Rec::Timer { job, round, action: "noop" })];
        };
        let mut cmds = match t.state {
            TaskState::Running | TaskState::Done => {
                vec![Command::Trace(Rec::Timer { job, round, action: "noop" })]
            }
            TaskState::Pending | TaskState::Preempted => {
                vec![Command::Trace(Rec::Timer { job, round, action: "forced" })]
            }
        };
        cmds.extend(self.pass(v));
        cmds
    }

    fn on_tick(&mut self, v: &View) -> Vec<Command> {
        self.pass(v)
    }

    fn on_executor_freed(&mut self, v: &View) -> Vec<Command> {
        self.pass(v)
    }

    fn on_instance_drained(&mut self, _slot: usize, job: usize, v: &View) -> Drain {
        let info = v.round(job);
        let Some(t) = self.tasks.get_mut(&(job, info.round)) else {
            return Drain::Release;
        };
        if v.now >= t.deadline {
            // Timer regime: stay deployed so stragglers fuse on arrival.
            Drain::Stay
        } else {
            // Early start drained its backlog; defer again, keep priority.
            t.state = TaskState::Pending;
            t.slot = None;
            Drain::Release
        }
    }

    fn on_round_ended(&mut self, job: usize, round: usize, _v: &View) -> Vec<Command> {
        let Some(mut t) = self.tasks.remove(&(job, round)) else {
            return Vec::new();
        };
        t.state = TaskState::Done;
        t.slot = None;
        vec![Self::trace_task(&t)]
    }
}
