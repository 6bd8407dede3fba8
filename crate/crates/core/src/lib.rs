//! Deterministic discrete-event simulator for federated-learning aggregation
//! scheduling.
//!
//! The crate models one aggregation cluster serving FL jobs whose parties
//! send model updates each synchronization round, and compares five ways of
//! scheduling the aggregation work:
//!
//! - **always-on** — an aggregator holds an executor for the whole job and
//!   fuses each update on arrival;
//! - **eager serverless** — a dynamic instance is deployed per update burst,
//!   paying deploy and checkpoint overheads;
//! - **batched serverless** — instances are deployed per batch of updates;
//! - **lazy** — one instance is deployed after the last update of a round;
//! - **jit** — aggregation is deferred to a deadline computed from predicted
//!   update arrivals, with priorities, timers and preemption.
//!
//! Runs are reproducible: virtual time is integer microseconds, every event
//! is ordered by `(time, insertion sequence)`, and all randomness derives
//! from the scenario seed. The same scenario and seed always produce a
//! byte-identical trace.

pub mod error;
pub mod estimator;
pub mod model;
pub mod reporting;
pub mod scenarios;
pub mod simkernel;
pub mod strategies;
pub mod units;

pub use error::{Error, Result};
pub use estimator::{ClusterConfig, EstimateSet, RegressionModel};
pub use model::{
    FLJobSpec, FusionKind, GlobalModel, JobId, ModelUpdate, PartialAggregate, PartyId, PartyProfile,
};
pub use scenarios::Scenario;
pub use simkernel::{SimResult, SimTrace};
pub use strategies::StrategyKind;
pub use units::{SimDuration, SimTime};
