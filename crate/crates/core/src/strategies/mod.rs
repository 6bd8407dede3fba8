//! The five aggregation deployment strategies, as policies over the
//! simulation kernel.

mod always_on;
mod batched;
mod eager;
mod jit;
mod lazy;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::simkernel::Policy;

pub use jit::{AggregatorTask, TaskState};

/// Which deployment strategy a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    /// One aggregator held for the whole job, fusing updates on arrival.
    EagerAlwaysOn,
    /// A dynamic instance per update burst.
    EagerServerless,
    /// A dynamic instance per batch of updates.
    BatchedServerless(usize),
    /// One dynamic instance after the round's last update.
    Lazy,
    /// Deferred aggregation with deadlines, priorities and preemption.
    Jit,
}

impl StrategyKind {
    pub fn all_for(n_parties: usize) -> Vec<StrategyKind> {
        vec![
            StrategyKind::Jit,
            StrategyKind::BatchedServerless(crate::scenarios::batch_trigger_for(n_parties)),
            StrategyKind::EagerServerless,
            StrategyKind::EagerAlwaysOn,
        ]
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyKind::EagerAlwaysOn => write!(f, "always_on"),
            StrategyKind::EagerServerless => write!(f, "eager_serverless"),
            StrategyKind::BatchedServerless(k) => write!(f, "batched:{k}"),
            StrategyKind::Lazy => write!(f, "lazy"),
            StrategyKind::Jit => write!(f, "jit"),
        }
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "always_on" => Ok(StrategyKind::EagerAlwaysOn),
            "eager_serverless" => Ok(StrategyKind::EagerServerless),
            "lazy" => Ok(StrategyKind::Lazy),
            "jit" => Ok(StrategyKind::Jit),
            other => {
                if let Some(k) = other.strip_prefix("batched:") {
                    let k: usize = k
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad batch size in strategy '{other}'")))?;
                    if k == 0 {
                        return Err(Error::Parse("batch size must be >= 1".into()));
                    }
                    Ok(StrategyKind::BatchedServerless(k))
                } else {
                    Err(Error::Parse(format!(
                        "unknown strategy '{other}' (expected always_on | eager_serverless | \
                         batched:<k> | lazy | jit)"
                    )))
                }
            }
        }
    }
}

/// Instantiates the policy state machine for a strategy.
pub fn build(kind: &StrategyKind) -> Box<dyn Policy> {
    match kind {
        StrategyKind::EagerAlwaysOn => Box::new(always_on::AlwaysOn::default()),
        StrategyKind::EagerServerless => Box::new(eager::EagerServerless::default()),
        StrategyKind::BatchedServerless(k) => Box::new(batched::Batched::new(*k)),
        StrategyKind::Lazy => Box::new(lazy::LazyPolicy::default()),
        StrategyKind::Jit => Box::new(jit::JitScheduler::default()),
    }
}
