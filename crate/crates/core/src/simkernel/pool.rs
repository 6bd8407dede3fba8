//! Executor slots and container-second accounting.
//!
//! A slot is one aggregator node. In `AlwaysOn` accounting a slot is held for
//! a whole job and billed for its entire lifetime regardless of how little of
//! it was spent fusing. In `Dynamic` accounting each deployment is billed
//! from deploy start through checkpoint/teardown end.

use serde::{Deserialize, Serialize};

use crate::units::{SimDuration, SimTime};

use super::event::{EventKind, SimEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccountingMode {
    AlwaysOn,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub start: SimTime,
    pub end: SimTime,
}

impl Interval {
    fn span_secs(&self) -> f64 {
        self.end.since(self.start).as_secs_f64()
    }
}

#[derive(Debug, Default)]
struct Slot {
    /// Open occupancy: bill start of the current hold/deployment.
    open_since: Option<SimTime>,
    /// Closed billed intervals.
    billed: Vec<Interval>,
    /// Productive (fusing) intervals, for utilization accounting.
    busy: Vec<Interval>,
}

/// The executor fleet: `n_agg` slots under one accounting mode.
#[derive(Debug)]
pub struct ExecutorPool {
    mode: AccountingMode,
    slots: Vec<Slot>,
    deploy_overhead: SimDuration,
    checkpoint_overhead: SimDuration,
}

impl ExecutorPool {
    pub fn new(
        n_slots: usize,
        mode: AccountingMode,
        deploy_overhead: SimDuration,
        checkpoint_overhead: SimDuration,
    ) -> Self {
        ExecutorPool {
            mode,
            slots: (0..n_slots).map(|_| Slot::default()).collect(),
            deploy_overhead,
            checkpoint_overhead,
        }
    }

    pub fn mode(&self) -> AccountingMode {
        self.mode
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn is_open(&self, slot: usize) -> bool {
        self.slots[slot].open_since.is_some()
    }

    /// Opens a billed occupancy (AlwaysOn hold or dynamic deployment).
    pub fn open(&mut self, slot: usize, start: SimTime) {
        let s = &mut self.slots[slot];
        assert!(
            s.open_since.is_none(),
            "double occupancy on executor slot {slot} at t={start}"
        );
        s.open_since = Some(start);
    }

    /// Closes the open occupancy, returning the billed interval.
    pub fn close(&mut self, slot: usize, end: SimTime) -> Interval {
        let s = &mut self.slots[slot];
        let start = s
            .open_since
            .take()
            .unwrap_or_else(|| panic!("closing idle executor slot {slot} at t={end}"));
        let iv = Interval { start, end };
        s.billed.push(iv);
        iv
    }

    /// Records a productive fusion interval on an occupied slot.
    pub fn record_busy(&mut self, slot: usize, start: SimTime, end: SimTime) {
        let s = &mut self.slots[slot];
        assert!(s.open_since.is_some(), "busy interval on idle slot {slot}");
        if let Some(last) = s.busy.last() {
            assert!(
                last.end <= start,
                "overlapping busy intervals on slot {slot}"
            );
        }
        s.busy.push(Interval { start, end });
    }

    /// Books one self-contained task of known duration onto a slot and
    /// returns the `ExecutorFreed` event for when it releases.
    ///
    /// In `Dynamic` mode the billed interval wraps the productive time with
    /// the deploy and checkpoint overheads. In `AlwaysOn` mode the slot must
    /// already be held; only a busy interval is recorded, since billing
    /// follows the hold, not the task.
    pub fn occupy(&mut self, slot: usize, start: SimTime, duration: SimDuration) -> SimEvent {
        let freed_at = match self.mode {
            AccountingMode::AlwaysOn => {
                let end = start + duration;
                self.record_busy(slot, start, end);
                end
            }
            AccountingMode::Dynamic => {
                self.open(slot, start);
                let busy_start = start + self.deploy_overhead;
                let busy_end = busy_start + duration;
                if !duration.is_zero() {
                    self.record_busy(slot, busy_start, busy_end);
                }
                let end = busy_end + self.checkpoint_overhead;
                self.close(slot, end);
                end
            }
        };
        SimEvent {
            time: freed_at,
            seq: 0,
            kind: EventKind::ExecutorFreed { slot, gen: 0 },
        }
    }

    /// Total billed container-seconds across all slots.
    pub fn container_seconds(&self) -> f64 {
        self.slots
            .iter()
            .flat_map(|s| s.billed.iter())
            .map(Interval::span_secs)
            .sum()
    }

    /// Total productive fusion seconds across all slots.
    pub fn busy_seconds(&self) -> f64 {
        self.slots
            .iter()
            .flat_map(|s| s.busy.iter())
            .map(Interval::span_secs)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn secs(s: f64) -> SimDuration {
        SimDuration::from_secs_f64(s)
    }

    fn at(s: f64) -> SimTime {
        SimTime::from_secs_f64(s)
    }

    #[test]
    fn always_on_bills_slot_lifetime_not_task_length() {
        let mut pool = ExecutorPool::new(1, AccountingMode::AlwaysOn, secs(0.5), secs(0.5));
        pool.open(0, at(0.0));
        pool.occupy(0, at(2.0), secs(6.0));
        pool.close(0, at(21.0));
        assert_eq!(pool.container_seconds(), 21.0);
        assert_eq!(pool.busy_seconds(), 6.0);
    }

    #[test]
    fn dynamic_bills_task_plus_overheads() {
        let mut pool = ExecutorPool::new(2, AccountingMode::Dynamic, secs(0.5), secs(0.5));
        let freed = pool.occupy(0, at(0.0), secs(6.0));
        assert_eq!(freed.time, at(7.0));
        pool.occupy(1, at(10.0), secs(2.0));
        assert_eq!(pool.container_seconds(), 10.0);
    }

    #[test]
    fn dynamic_zero_duration_task_bills_overheads_only() {
        let mut pool = ExecutorPool::new(1, AccountingMode::Dynamic, secs(0.5), secs(0.5));
        let freed = pool.occupy(0, at(3.0), SimDuration::ZERO);
        assert_eq!(freed.time, at(4.0));
        assert_eq!(pool.container_seconds(), 1.0);
    }

    #[test]
    fn no_tasks_means_zero_container_seconds() {
        let pool = ExecutorPool::new(4, AccountingMode::Dynamic, secs(0.5), secs(0.5));
        assert_eq!(pool.container_seconds(), 0.0);
    }

    #[test]
    #[should_panic(expected = "double occupancy")]
    fn double_occupancy_aborts() {
        let mut pool = ExecutorPool::new(1, AccountingMode::Dynamic, secs(0.5), secs(0.5));
        pool.open(0, at(0.0));
        pool.open(0, at(1.0));
    }
}
