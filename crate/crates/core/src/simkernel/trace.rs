//! Structured simulation trace with a stable line-oriented export.
//!
//! Every record renders as one tab-separated line:
//!
//! ```text
//! <time_us>\t<kind>\t<subject>\t<detail>
//! ```
//!
//! Times are integer microseconds of virtual time. The format is stable so
//! golden-file comparisons and the determinism checks can compare exports
//! byte for byte. Reporting recomputes all metrics from these records alone.

use std::fmt::Write as _;

use crate::units::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub enum Rec {
    RoundStart { job: usize, round: usize },
    Arrival { job: usize, round: usize, party: String, accepted: bool },
    Cutoff { job: usize, round: usize },
    Deploy { slot: usize, job: usize, round: usize },
    Step { slot: usize, job: usize, round: usize, absorbed: usize, pending_left: usize },
    Preempt { slot: usize, job: usize, round: usize, absorbed: usize },
    Teardown { slot: usize, job: usize, round: usize },
    Bill { slot: usize, start: SimTime, end: SimTime },
    ModelReady { job: usize, round: usize, contributing: usize },
    RoundComplete { job: usize, round: usize, absorbed: usize },
    RoundIncomplete { job: usize, round: usize, absorbed: usize, quorum: usize },
    Timer { job: usize, round: usize, action: &'static str },
    Task { job: usize, round: usize, state: &'static str, priority: SimTime, deadline: SimTime },
    Warn { text: String },
    JobEnd { job: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time: SimTime,
    pub rec: Rec,
}

/// The full event log of one simulation run.
#[derive(Debug, Default)]
pub struct SimTrace {
    pub records: Vec<TraceRecord>,
}

impl SimTrace {
    pub fn push(&mut self, time: SimTime, rec: Rec) {
        self.records.push(TraceRecord { time, rec });
    }

    /// Renders the stable text form of the whole trace.
    pub fn export(&self) -> String {
        let mut out = String::with_capacity(self.records.len() * 48);
        for r in &self.records {
            let (kind, subject, detail) = r.rec.render();
            let _ = writeln!(out, "{}\t{}\t{}\t{}", r.time, kind, subject, detail);
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter()
    }
}

impl Rec {
    fn render(&self) -> (&'static str, String, String) {
        match self {
            Rec::RoundStart { job, round } => ("round_start", format!("j{job}"), format!("r{round}")),
            Rec::Arrival { job, round, party, accepted } => (
                "arrival",
                format!("j{job}/r{round}"),
                format!("{party} {}", if *accepted { "accepted" } else { "dropped_late" }),
            ),
            Rec::Cutoff { job, round } => ("cutoff", format!("j{job}"), format!("r{round}")),
            Rec::Deploy { slot, job, round } => ("deploy", format!("s{slot}"), format!("j{job}/r{round}")),
            Rec::Step { slot, job, round, absorbed, pending_left } => (
                "step",
                format!("s{slot}"),
                format!("j{job}/r{round} absorbed={absorbed} pending={pending_left}"),
            ),
            Rec::Preempt { slot, job, round, absorbed } => (
                "preempt",
                format!("s{slot}"),
                format!("j{job}/r{round} checkpoint={absorbed}"),
            ),
            Rec::Teardown { slot, job, round } => ("teardown", format!("s{slot}"), format!("j{job}/r{round}")),
            Rec::Bill { slot, start, end } => ("bill", format!("s{slot}"), format!("{start}..{end}")),
            Rec::ModelReady { job, round, contributing } => (
                "model_ready",
                format!("j{job}"),
                format!("r{round} parties={contributing}"),
            ),
            Rec::RoundComplete { job, round, absorbed } => (
                "round_complete",
                format!("j{job}"),
                format!("r{round} absorbed={absorbed}"),
            ),
            Rec::RoundIncomplete { job, round, absorbed, quorum } => (
                "round_incomplete",
                format!("j{job}"),
                format!("r{round} absorbed={absorbed} quorum={quorum}"),
            ),
            Rec::Timer { job, round, action } => ("timer", format!("j{job}/r{round}"), action.to_string()),
            Rec::Task { job, round, state, priority, deadline } => (
                "task",
                format!("j{job}/r{round}"),
                format!("{state} priority={priority} deadline={deadline}"),
            ),
            Rec::Warn { text } => ("warn", "-".into(), text.clone()),
            Rec::JobEnd { job } => ("job_end", format!("j{job}"), String::new()),
        }
    }
}
