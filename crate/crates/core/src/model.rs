//! Domain types for jobs, parties and updates, plus the coordinate-wise
//! fusion engine shared by every aggregation strategy.
//!
//! A model update is a flattened list of one-dimensional layer vectors. Fusion
//! keeps a running *weighted sum* together with the total weight rather than a
//! running mean, so partial aggregates add associatively: any fold order over
//! the same multiset of updates produces the same result (up to float
//! reassociation), and a checkpointed partial can be resumed after preemption
//! without caring which updates were absorbed first.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::SimDuration;
use crate::units::SimTime;

/// Opaque job identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JobId(pub String);

/// Opaque party identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PartyId(pub String);

impl std::fmt::Display for JobId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::fmt::Display for PartyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// How often parties synchronize with the aggregator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AggFrequency {
    /// Fuse once per local epoch.
    PerEpoch,
    /// Fuse every N minibatches.
    EveryMinibatches(u32),
}

/// Coordinate-wise fusion function applied when a round finalizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FusionKind {
    /// Divide by the total sample weight (federated averaging).
    WeightedMean,
    /// Divide by the number of absorbed updates.
    Mean,
}

/// One federated-learning job as submitted to the aggregation service.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FLJobSpec {
    pub job_id: JobId,
    /// Serialized model size in bytes (drives transfer-time estimates).
    pub model_size: u64,
    pub agg_frequency: AggFrequency,
    /// Round wait window for intermittent parties.
    pub t_wait: Option<SimDuration>,
    /// Minimum number of party updates for a successful round.
    pub quorum: usize,
    pub num_rounds: usize,
    pub fusion_kind: FusionKind,
}

impl FLJobSpec {
    /// Checks the job-level invariants against its party roster.
    pub fn validate(&self, parties: &[PartyProfile]) -> Result<()> {
        if self.model_size == 0 {
            return Err(Error::Config(format!("job {}: model_size must be > 0", self.job_id)));
        }
        if self.num_rounds == 0 {
            return Err(Error::Config(format!("job {}: num_rounds must be >= 1", self.job_id)));
        }
        if self.quorum == 0 || self.quorum > parties.len() {
            return Err(Error::Config(format!(
                "job {}: quorum {} out of range 1..={}",
                self.job_id,
                self.quorum,
                parties.len()
            )));
        }
        let any_intermittent = parties.iter().any(|p| p.mode == ParticipationMode::Intermittent);
        if any_intermittent {
            match self.t_wait {
                Some(w) if !w.is_zero() => {}
                _ => {
                    return Err(Error::Config(format!(
                        "job {}: t_wait must be > 0 when any party is intermittent",
                        self.job_id
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Whether a party responds promptly each round or trains at its convenience.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParticipationMode {
    Active,
    Intermittent,
}

/// How a party's local training time is known to the scheduler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PartyTiming {
    /// The party reports its measured epoch time directly.
    EpochTime(SimDuration),
    /// The party reports its measured per-minibatch time.
    MinibatchTime(SimDuration),
    /// Only the hardware is known; epoch time comes from calibration.
    Hardware { vcpus: u32, ram_gb: u32 },
}

/// One participant in an FL job.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartyProfile {
    pub party_id: PartyId,
    pub mode: ParticipationMode,
    pub timing: PartyTiming,
    /// Number of local training samples.
    pub dataset_size: u64,
    /// Aggregator -> party bandwidth, bytes per second.
    pub bw_down: f64,
    /// Party -> aggregator bandwidth, bytes per second.
    pub bw_up: f64,
}

impl PartyProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.bw_down > 0.0) || !(self.bw_up > 0.0) {
            return Err(Error::Config(format!(
                "party {}: bandwidths must be > 0",
                self.party_id
            )));
        }
        if self.dataset_size == 0 {
            return Err(Error::Config(format!(
                "party {}: dataset_size must be > 0",
                self.party_id
            )));
        }
        match self.timing {
            PartyTiming::EpochTime(d) | PartyTiming::MinibatchTime(d) if d.is_zero() => {
                Err(Error::Config(format!(
                    "party {}: timing durations must be > 0",
                    self.party_id
                )))
            }
            PartyTiming::Hardware { vcpus, ram_gb } if !(1..=2).contains(&vcpus) || ![2, 4, 6, 8].contains(&ram_gb) => {
                Err(Error::Config(format!(
                    "party {}: hardware descriptor must be 1-2 vCPUs with 2/4/6/8 GB RAM",
                    self.party_id
                )))
            }
            _ => Ok(()),
        }
    }
}

/// A flattened weight update produced by one party in one round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelUpdate {
    pub party_id: PartyId,
    pub round: usize,
    pub layers: Vec<Vec<f64>>,
    /// Number of local samples behind this update; must be positive.
    pub sample_weight: f64,
    pub arrival_time: SimTime,
}

/// Checkpointable intermediate fusion state: a weighted sum of updates plus
/// the total weight, so fusion stays associative and order-independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialAggregate {
    pub weighted_sum: Vec<Vec<f64>>,
    pub total_weight: f64,
    pub updates_absorbed: usize,
}

/// The fused model produced when a round completes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalModel {
    pub layers: Vec<Vec<f64>>,
    pub round: usize,
    pub contributing_parties: usize,
}

impl PartialAggregate {
    /// The identity element for `fuse_pair`: no layers, zero weight.
    pub fn empty() -> Self {
        PartialAggregate {
            weighted_sum: Vec::new(),
            total_weight: 0.0,
            updates_absorbed: 0,
        }
    }

    /// An all-zero aggregate of the given shape; also fuses as identity.
    pub fn zeros(shape: &[usize]) -> Self {
        PartialAggregate {
            weighted_sum: shape.iter().map(|&n| vec![0.0; n]).collect(),
            total_weight: 0.0,
            updates_absorbed: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.updates_absorbed == 0
    }

    pub fn shape(&self) -> Vec<usize> {
        self.weighted_sum.iter().map(Vec::len).collect()
    }
}

/// Lifts a model update into a single-element partial aggregate.
pub fn lift(u: &ModelUpdate) -> PartialAggregate {
    let weighted_sum = u
        .layers
        .iter()
        .map(|layer| layer.iter().map(|x| x * u.sample_weight).collect())
        .collect();
    PartialAggregate {
        weighted_sum,
        total_weight: u.sample_weight,
        updates_absorbed: 1,
    }
}

/// Component-wise fusion of two partial aggregates.
///
/// Weighted sums add element-wise, weights and counts add. Fusing with an
/// empty aggregate returns the other side unchanged, so the empty aggregate
/// is an exact identity.
pub fn fuse_pair(a: &PartialAggregate, b: &PartialAggregate) -> Result<PartialAggregate> {
    if a.is_empty() {
        return Ok(b.clone());
    }
    if b.is_empty() {
        return Ok(a.clone());
    }
    if a.weighted_sum.len() != b.weighted_sum.len() {
        let layer = a.weighted_sum.len().min(b.weighted_sum.len());
        return Err(Error::ShapeMismatch {
            layer,
            left: a.weighted_sum.get(layer).map_or(0, Vec::len),
            right: b.weighted_sum.get(layer).map_or(0, Vec::len),
        });
    }
    let mut weighted_sum = Vec::with_capacity(a.weighted_sum.len());
    for (i, (la, lb)) in a.weighted_sum.iter().zip(&b.weighted_sum).enumerate() {
        if la.len() != lb.len() {
            return Err(Error::ShapeMismatch {
                layer: i,
                left: la.len(),
                right: lb.len(),
            });
        }
        weighted_sum.push(la.iter().zip(lb).map(|(x, y)| x + y).collect());
    }
    Ok(PartialAggregate {
        weighted_sum,
        total_weight: a.total_weight + b.total_weight,
        updates_absorbed: a.updates_absorbed + b.updates_absorbed,
    })
}

/// Turns a completed partial aggregate into the round's global model.
pub fn finalize(p: &PartialAggregate, fusion_kind: FusionKind, round: usize) -> Result<GlobalModel> {
    if p.updates_absorbed == 0 {
        return Err(Error::EmptyAggregate);
    }
    let divisor = match fusion_kind {
        FusionKind::WeightedMean => p.total_weight,
        FusionKind::Mean => p.updates_absorbed as f64,
    };
    let layers = p
        .weighted_sum
        .iter()
        .map(|layer| layer.iter().map(|x| x / divisor).collect())
        .collect();
    Ok(GlobalModel {
        layers,
        round,
        contributing_parties: p.updates_absorbed,
    })
}

/// Fills layer vectors with uniform values in [-1, 1].
pub fn random_layers<R: Rng>(shape: &[usize], rng: &mut R) -> Vec<Vec<f64>> {
    shape
        .iter()
        .map(|&n| (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        .collect()
}

/// Minimum trial count `microbench_t_pair` accepts.
pub const MIN_BENCH_TRIALS: usize = 11;

/// Measures the wall-clock time to fuse one pair of freshly generated random
/// updates of the given shape; returns the median over `trials` runs.
///
/// Up to `cores` worker threads split the trials between them; the call
/// blocks until all are done. The result is what scenario configs feed in as
/// `t_pair`.
pub fn microbench_t_pair(model_shape: &[usize], cores: usize, trials: usize) -> Result<SimDuration> {
    if model_shape.is_empty() {
        return Err(Error::Config("microbenchmark shape must be nonempty".into()));
    }
    if cores == 0 {
        return Err(Error::Config("microbenchmark needs at least one core".into()));
    }
    if trials < MIN_BENCH_TRIALS {
        return Err(Error::TooFewTrials {
            min: MIN_BENCH_TRIALS,
            got: trials,
        });
    }

    let workers = cores.min(trials);
    let mut samples: Vec<u64> = Vec::with_capacity(trials);
    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(workers);
        for w in 0..workers {
            let share = trials / workers + usize::from(w < trials % workers);
            handles.push(scope.spawn(move || run_bench_trials(model_shape, share, w as u64)));
        }
        for h in handles {
            samples.extend(h.join().expect("bench worker panicked"));
        }
    });
    samples.sort_unstable();
    Ok(SimDuration::from_micros(samples[samples.len() / 2]))
}

fn run_bench_trials(shape: &[usize], trials: usize, worker: u64) -> Vec<u64> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x7061_6972 ^ worker);
    let mut out = Vec::with_capacity(trials);
    // Two untimed warm-up fusions per worker absorb first-touch page faults
    // and frequency ramp-up.
    for _ in 0..2 {
        let a = PartialAggregate {
            weighted_sum: random_layers(shape, &mut rng),
            total_weight: 1.0,
            updates_absorbed: 1,
        };
        let _ = std::hint::black_box(fuse_pair(&a, &a));
    }
    for _ in 0..trials {
        let a = PartialAggregate {
            weighted_sum: random_layers(shape, &mut rng),
            total_weight: 1.0,
            updates_absorbed: 1,
        };
        let b = PartialAggregate {
            weighted_sum: random_layers(shape, &mut rng),
            total_weight: 1.0,
            updates_absorbed: 1,
        };
        let start = std::time::Instant::now();
        let fused = std::hint::black_box(fuse_pair(&a, &b).expect("bench shapes always match"));
        let elapsed = start.elapsed();
        drop(fused);
        out.push(elapsed.as_micros() as u64);
    }
    out
}
