//! Scenario construction: seeded party populations, arrival sampling, and
//! scenario validation. Everything here is pure generation; the same seed
//! always produces the same scenario, byte for byte.

pub mod builders;
pub mod config;
pub mod presets;

use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimator::{estimate_comm_time, estimate_round, CalibrationSet, ClusterConfig};
use crate::model::{
    FLJobSpec, ParticipationMode, PartyId, PartyProfile, PartyTiming,
};
use crate::strategies::StrategyKind;
use crate::units::{SimDuration, SimTime};

pub use presets::{preset_by_name, WorkloadPreset, ALL_PRESETS};

/// One job plus everything the engine needs to simulate it.
#[derive(Debug, Clone)]
pub struct JobSetup {
    pub spec: FLJobSpec,
    pub parties: Vec<PartyProfile>,
    /// Layer lengths of the vectors actually fused in simulation.
    pub model_shape: Vec<usize>,
    /// Explicit actual arrival offsets from round start, per party; entry
    /// `round % len` is used, so a one-element list repeats every round.
    /// Overrides the timing-derived arrival model (used by contrived tests).
    pub arrival_offsets: Option<Vec<Vec<SimDuration>>>,
    /// Per-party label distribution metadata (non-IID skew). Recorded only;
    /// timing derives from dataset sizes and hardware alone.
    pub label_skew: Option<Vec<Vec<f64>>>,
}

/// A fully specified simulation run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub strategy: StrategyKind,
    pub cluster: ClusterConfig,
    pub jobs: Vec<JobSetup>,
    pub calibration: Option<CalibrationSet>,
    /// Relative estimate error injected into the scheduler's stored per-party
    /// estimates (actual arrivals are untouched).
    pub estimate_noise: Option<f64>,
}

impl Scenario {
    pub fn with_strategy(mut self, strategy: StrategyKind) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.estimate_noise = Some(noise);
        self
    }

    pub fn zero_overheads(mut self) -> Self {
        self.cluster.deploy_overhead = SimDuration::ZERO;
        self.cluster.checkpoint_overhead = SimDuration::ZERO;
        self
    }

    pub fn total_parties(&self) -> usize {
        self.jobs.iter().map(|j| j.parties.len()).sum()
    }
}

// ---------------------------------------------------------------------------
// Seed derivation
// ---------------------------------------------------------------------------

/// Splitmix64-style stream derivation: one scenario seed fans out into
/// independent deterministic streams keyed by purpose tags.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut z = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &t in tags {
        z = z.wrapping_add(t).wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

/// Stable hash of an identifier, for keying seed streams by job/party name
/// rather than by position (so subsetting a scenario keeps streams intact).
pub fn hash_id(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

// ---------------------------------------------------------------------------
// Party population generation
// ---------------------------------------------------------------------------

/// The three party-population recipes used across evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Population {
    /// Identical parties: 2 vCPUs, 4 GB, equal slices, equal bandwidth.
    ActiveHomog,
    /// Active parties with randomized hardware (1-2 vCPUs, 2-8 GB RAM).
    ActiveHeterog,
    /// Heterogeneous parties reporting at a random time inside the window.
    IntermittentHeterog,
}

impl FromStr for Population {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "active_homog" => Ok(Population::ActiveHomog),
            "active_heterog" => Ok(Population::ActiveHeterog),
            "intermittent_heterog" => Ok(Population::IntermittentHeterog),
            other => Err(Error::Parse(format!(
                "unknown population '{other}' (expected active_homog | active_heterog | \
                 intermittent_heterog)"
            ))),
        }
    }
}

impl std::fmt::Display for Population {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Population::ActiveHomog => "active_homog",
            Population::ActiveHeterog => "active_heterog",
            Population::IntermittentHeterog => "intermittent_heterog",
        })
    }
}

/// Fixed or per-party-drawn bandwidth, bytes per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BwSpec {
    Fixed(f64),
    Range(f64, f64),
}

impl BwSpec {
    fn draw<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            BwSpec::Fixed(v) => v,
            BwSpec::Range(lo, hi) => rng.gen_range(lo..=hi),
        }
    }
}

/// Knobs for party generation beyond the population recipe itself.
#[derive(Debug, Clone, Copy)]
pub struct GenOptions {
    pub bw_down: BwSpec,
    pub bw_up: BwSpec,
}

impl GenOptions {
    /// Population defaults: homogeneous parties share one link speed;
    /// heterogeneous parties draw per-party bandwidths (parties sit in
    /// different locations, so their links differ).
    pub fn defaults_for(population: Population) -> Self {
        match population {
            Population::ActiveHomog => GenOptions {
                bw_down: BwSpec::Fixed(1.25e8),
                bw_up: BwSpec::Fixed(1.25e8),
            },
            Population::ActiveHeterog | Population::IntermittentHeterog => GenOptions {
                bw_down: BwSpec::Range(5e6, 5e7),
                bw_up: BwSpec::Range(5e6, 5e7),
            },
        }
    }
}

/// Generates a seeded party roster for one job.
pub fn generate_parties(
    n: usize,
    population: Population,
    preset: &WorkloadPreset,
    seed: u64,
) -> Result<Vec<PartyProfile>> {
    generate_parties_with(n, population, preset, seed, GenOptions::defaults_for(population))
}

/// As [`generate_parties`] with explicit bandwidth behavior.
pub fn generate_parties_with(
    n: usize,
    population: Population,
    preset: &WorkloadPreset,
    seed: u64,
    options: GenOptions,
) -> Result<Vec<PartyProfile>> {
    if n == 0 {
        return Err(Error::Config("party count must be >= 1".into()));
    }
    let slice = (preset.total_samples / n as u64).max(1);
    let mut parties = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x706f70, i as u64]));
        let (mode, timing) = match population {
            Population::ActiveHomog => (
                ParticipationMode::Active,
                PartyTiming::EpochTime(SimDuration::from_secs_f64(preset.epoch_time_s(slice))),
            ),
            Population::ActiveHeterog => {
                let vcpus = if rng.gen_bool(0.5) { 1 } else { 2 };
                let ram_gb = *[2u32, 4, 6, 8].get(rng.gen_range(0..4)).expect("in range");
                (ParticipationMode::Active, PartyTiming::Hardware { vcpus, ram_gb })
            }
            Population::IntermittentHeterog => {
                let vcpus = if rng.gen_bool(0.5) { 1 } else { 2 };
                let ram_gb = *[2u32, 4, 6, 8].get(rng.gen_range(0..4)).expect("in range");
                (
                    ParticipationMode::Intermittent,
                    PartyTiming::Hardware { vcpus, ram_gb },
                )
            }
        };
        let bw_down = options.bw_down.draw(&mut rng);
        let bw_up = options.bw_up.draw(&mut rng);
        parties.push(PartyProfile {
            party_id: PartyId(format!("p{i:05}")),
            mode,
            timing,
            dataset_size: slice,
            bw_down,
            bw_up,
        });
    }
    Ok(parties)
}

/// Per-party label distributions (symmetric Dirichlet over `n_labels`),
/// recorded as non-IID metadata. Timing never reads these.
pub fn sample_label_skew(n_parties: usize, n_labels: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..n_parties)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x736b65, i as u64]));
            let mut weights: Vec<f64> = (0..n_labels)
                .map(|_| -(1.0 - rng.gen::<f64>()).ln())
                .collect();
            let total: f64 = weights.iter().sum();
            for w in weights.iter_mut() {
                *w /= total;
            }
            weights
        })
        .collect()
}

/// Epoch-time calibration derived from a preset's baseline rate: exact
/// (dataset size, epoch time) points for the 2-vCPU class, fit by least
/// squares. Hardware-described parties in other classes fall back to this
/// model scaled by the core-count ratio.
pub fn calibration_for(preset: &WorkloadPreset) -> CalibrationSet {
    let points: Vec<(f64, f64)> = [500u64, 1000, 2000, 4000, 8000]
        .iter()
        .map(|&s| (s as f64, preset.epoch_time_s(s)))
        .collect();
    let model = crate::estimator::fit_linear(&points).expect("distinct x values");
    let mut cal = CalibrationSet::new(2);
    cal.models.insert(2, model);
    cal
}

// ---------------------------------------------------------------------------
// Arrival sampling
// ---------------------------------------------------------------------------

/// Draws an intermittent party's report time for one round: uniform over
/// `[round_start + t_comm, round_start + t_wait]`, both bounds inclusive.
///
/// A party whose transfer alone exceeds the window can never make the
/// cutoff; it reports at `round_start + t_comm` and is dropped on arrival
/// (scenario validation warns about such parties).
pub fn sample_intermittent_arrival<R: Rng>(
    t_comm: SimDuration,
    round_start: SimTime,
    t_wait: SimDuration,
    rng: &mut R,
) -> SimTime {
    if t_comm > t_wait {
        return round_start + t_comm;
    }
    let lo = t_comm.as_micros();
    let hi = t_wait.as_micros();
    round_start + SimDuration::from_micros(rng.gen_range(lo..=hi))
}

// ---------------------------------------------------------------------------
// Batched-trigger sizing
// ---------------------------------------------------------------------------

/// Batch trigger size for a party count: the reference points are
/// 10 -> 2, 100 -> 10, 1000 -> 100 and 10000 -> 100; other counts use
/// n/10 (rounded down) with a floor of 2.
pub fn batch_trigger_for(n_parties: usize) -> usize {
    match n_parties {
        10 => 2,
        100 => 10,
        1000 | 10000 => 100,
        n => (n / 10).max(2),
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Checks every scenario invariant; returns human-readable warnings for
/// conditions that are legal but worth flagging in reports.
pub fn validate(sc: &Scenario) -> Result<Vec<String>> {
    sc.cluster.validate()?;
    if let Some(f) = sc.estimate_noise {
        if !(0.0..1.0).contains(&f) {
            return Err(Error::Config(format!(
                "estimate_noise must be in [0, 1), got {f}"
            )));
        }
    }
    if sc.strategy == StrategyKind::EagerAlwaysOn && sc.jobs.len() > sc.cluster.n_agg {
        return Err(Error::Config(format!(
            "always-on holds one executor per job: {} jobs need more than {} executors",
            sc.jobs.len(),
            sc.cluster.n_agg
        )));
    }

    let mut warnings = Vec::new();
    let mut seen_ids = std::collections::BTreeSet::new();
    for setup in &sc.jobs {
        let spec = &setup.spec;
        if !seen_ids.insert(spec.job_id.0.clone()) {
            return Err(Error::Config(format!("duplicate job id {}", spec.job_id)));
        }
        spec.validate(&setup.parties)?;
        if setup.model_shape.is_empty() {
            return Err(Error::Config(format!("job {}: empty model shape", spec.job_id)));
        }
        for p in &setup.parties {
            p.validate()?;
            if let PartyTiming::Hardware { ram_gb, .. } = p.timing {
                if u64::from(ram_gb) * (1 << 30) < spec.model_size {
                    warnings.push(format!(
                        "job {} party {}: model ({} bytes) exceeds party RAM ({} GB)",
                        spec.job_id, p.party_id, spec.model_size, ram_gb
                    ));
                }
            }
            if p.mode == ParticipationMode::Intermittent {
                let t_comm = estimate_comm_time(p, spec.model_size)?;
                let t_wait = spec.t_wait.expect("checked by spec.validate");
                if t_comm > t_wait {
                    warnings.push(format!(
                        "job {} party {}: transfer time {:.1}s exceeds the {:.1}s wait window; \
                         its updates always drop",
                        spec.job_id,
                        p.party_id,
                        t_comm.as_secs_f64(),
                        t_wait.as_secs_f64()
                    ));
                }
            }
        }
        if let Some(offsets) = &setup.arrival_offsets {
            if offsets.len() != setup.parties.len() {
                return Err(Error::Config(format!(
                    "job {}: arrival offsets for {} parties but roster has {}",
                    spec.job_id,
                    offsets.len(),
                    setup.parties.len()
                )));
            }
            if offsets.iter().any(Vec::is_empty) {
                return Err(Error::Config(format!(
                    "job {}: every party needs at least one arrival offset",
                    spec.job_id
                )));
            }
        }
        // Estimation must be possible up front; this surfaces missing
        // calibration and frequency/timing mismatches before a run.
        estimate_round(spec, &setup.parties, &sc.cluster, sc.calibration.as_ref())?;
    }
    Ok(warnings)
}
