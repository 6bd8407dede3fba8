//! Canonical scenario constructors: the six-party analytical scenario, the
//! seeded evaluation matrix, and the contrived preemption workload.

use crate::estimator::ClusterConfig;
use crate::model::{
    AggFrequency, FLJobSpec, FusionKind, JobId, ParticipationMode, PartyId, PartyProfile,
    PartyTiming,
};
use crate::strategies::StrategyKind;
use crate::units::SimDuration;

use super::presets::{WorkloadPreset, ALL_PRESETS};
use super::{
    batch_trigger_for, calibration_for, generate_parties_with, sample_label_skew, BwSpec,
    GenOptions, JobSetup, Population, Scenario,
};

fn secs(s: f64) -> SimDuration {
    SimDuration::from_secs_f64(s)
}

/// The canonical six-party round: updates land at t = 2, 6, 10, 13, 17, 20 s,
/// pairwise fusion takes 1 s on the single executor, and there are no
/// deployment overheads. Always-on finishes at t = 21 having idled 71.4% of
/// the round; lazy finishes at 26; the just-in-time deadline is t = 14.
pub fn fig2_scenario(strategy: StrategyKind) -> Scenario {
    let arrivals = [2.0, 6.0, 10.0, 13.0, 17.0, 20.0];
    let parties: Vec<PartyProfile> = arrivals
        .iter()
        .enumerate()
        .map(|(i, &t)| PartyProfile {
            party_id: PartyId(format!("P{}", i + 1)),
            mode: ParticipationMode::Active,
            // Declared epoch time matches the actual arrival: estimates are
            // exact, and the huge link speed makes transfer time vanish.
            timing: PartyTiming::EpochTime(secs(t)),
            dataset_size: 100,
            bw_down: 1e15,
            bw_up: 1e15,
        })
        .collect();
    let spec = FLJobSpec {
        job_id: JobId("fig2".into()),
        model_size: 1_000,
        agg_frequency: AggFrequency::PerEpoch,
        t_wait: None,
        quorum: 6,
        num_rounds: 1,
        fusion_kind: FusionKind::WeightedMean,
    };
    Scenario {
        name: "fig2_canonical".into(),
        seed: 42,
        strategy,
        cluster: ClusterConfig {
            n_agg: 1,
            cores_per_agg: 1,
            bw_dc: 1e15,
            t_pair: secs(1.0),
            delta: secs(1.0),
            deploy_overhead: SimDuration::ZERO,
            checkpoint_overhead: SimDuration::ZERO,
        },
        jobs: vec![JobSetup {
            spec,
            parties,
            model_shape: vec![8, 8],
            arrival_offsets: None,
            label_skew: None,
        }],
        calibration: None,
        estimate_noise: None,
    }
}

/// Cluster used across the evaluation matrix: one dynamic executor with two
/// usable cores, half-second scheduling interval and half-second deploy and
/// checkpoint overheads.
pub fn matrix_cluster() -> ClusterConfig {
    ClusterConfig {
        n_agg: 1,
        cores_per_agg: 2,
        bw_dc: 1e9,
        t_pair: secs(0.05),
        delta: secs(0.5),
        deploy_overhead: secs(0.5),
        checkpoint_overhead: secs(0.5),
    }
}

/// One evaluation-matrix scenario: `n` parties of the given population
/// training the preset's workload for `rounds` synchronization rounds.
///
/// All populations draw per-party link bandwidths (parties are spread across
/// sites), which also spreads active-party arrivals across each round.
pub fn matrix_scenario(
    n: usize,
    population: Population,
    preset: &WorkloadPreset,
    rounds: usize,
    strategy: StrategyKind,
    seed: u64,
) -> Scenario {
    let options = GenOptions {
        bw_down: BwSpec::Range(5e6, 5e7),
        bw_up: BwSpec::Range(5e6, 5e7),
    };
    let parties =
        generate_parties_with(n, population, preset, seed, options).expect("n >= 1");
    let t_wait = (population == Population::IntermittentHeterog).then(|| secs(preset.t_wait_s));
    let spec = FLJobSpec {
        job_id: JobId(format!("{}_{}p_{}", preset.name, n, population)),
        model_size: preset.model_size(),
        agg_frequency: AggFrequency::PerEpoch,
        t_wait,
        quorum: n,
        num_rounds: rounds,
        fusion_kind: preset.fusion_kind,
    };
    let label_skew = sample_label_skew(n, 16, super::derive_seed(seed, &[0x6c6273]));
    Scenario {
        name: format!("{}_{}p_{}", preset.name, n, population),
        seed,
        strategy,
        cluster: matrix_cluster(),
        jobs: vec![JobSetup {
            spec,
            parties,
            model_shape: preset.sim_shape.to_vec(),
            arrival_offsets: None,
            label_skew: Some(label_skew),
        }],
        calibration: Some(calibration_for(preset)),
        estimate_noise: None,
    }
}

/// The full seeded evaluation matrix: party counts x populations x presets.
/// 27 scenarios; pick the strategy per run with [`Scenario::with_strategy`].
pub fn reference_matrix(rounds: usize, seed: u64) -> Vec<Scenario> {
    let mut out = Vec::new();
    for &n in &[10usize, 100, 1000] {
        for population in [
            Population::ActiveHomog,
            Population::ActiveHeterog,
            Population::IntermittentHeterog,
        ] {
            for preset in ALL_PRESETS {
                out.push(matrix_scenario(
                    n,
                    population,
                    preset,
                    rounds,
                    StrategyKind::Jit,
                    seed,
                ));
            }
        }
    }
    out
}

/// The batch trigger the matrix pairs with a given scenario size.
pub fn matrix_batch_strategy(n_parties: usize) -> StrategyKind {
    StrategyKind::BatchedServerless(batch_trigger_for(n_parties))
}

/// Two jobs engineered to collide on a single executor several times:
///
/// * job `bulk`: twenty parties whose updates all land 40 s into each round,
///   well before its deadline (80 s), so the task starts early and is busy
///   fusing for ~20 s on the single core;
/// * job `spry`: three parties on a 50 s cadence whose deadline (47 s into
///   each of its rounds) falls inside the bulk job's busy window on every
///   other round.
///
/// Each time the spry job's timer fires mid-fusion it preempts the bulk task
/// (priority 47k < 80k+100k), forcing a checkpoint, and the bulk task
/// resumes from it afterwards. Three rounds of the bulk job produce three
/// preemptions.
pub fn preemption_scenario() -> Scenario {
    let bulk_parties: Vec<PartyProfile> = (0..20)
        .map(|i| PartyProfile {
            party_id: PartyId(format!("bulk{i:02}")),
            mode: ParticipationMode::Intermittent,
            timing: PartyTiming::EpochTime(secs(40.0)),
            dataset_size: 50 + i as u64,
            bw_down: 1e15,
            bw_up: 1e15,
        })
        .collect();
    let spry_parties: Vec<PartyProfile> = [44.0, 45.0, 49.0]
        .iter()
        .enumerate()
        .map(|(i, _)| PartyProfile {
            party_id: PartyId(format!("spry{i}")),
            mode: ParticipationMode::Intermittent,
            timing: PartyTiming::EpochTime(secs(40.0)),
            dataset_size: 30 + i as u64,
            bw_down: 1e15,
            bw_up: 1e15,
        })
        .collect();

    let bulk = JobSetup {
        spec: FLJobSpec {
            job_id: JobId("bulk".into()),
            model_size: 1_000,
            agg_frequency: AggFrequency::PerEpoch,
            t_wait: Some(secs(100.0)),
            quorum: 20,
            num_rounds: 3,
            fusion_kind: FusionKind::WeightedMean,
        },
        parties: bulk_parties,
        model_shape: vec![12, 4],
        arrival_offsets: Some(vec![vec![secs(40.0)]; 20]),
        label_skew: None,
    };
    let spry = JobSetup {
        spec: FLJobSpec {
            job_id: JobId("spry".into()),
            model_size: 1_000,
            agg_frequency: AggFrequency::PerEpoch,
            t_wait: Some(secs(50.0)),
            quorum: 3,
            num_rounds: 6,
            fusion_kind: FusionKind::WeightedMean,
        },
        parties: spry_parties,
        model_shape: vec![12, 4],
        arrival_offsets: Some(vec![vec![secs(44.0)], vec![secs(45.0)], vec![secs(49.0)]]),
        label_skew: None,
    };

    Scenario {
        name: "preemption_collider".into(),
        seed: 77,
        strategy: StrategyKind::Jit,
        cluster: ClusterConfig {
            n_agg: 1,
            cores_per_agg: 1,
            bw_dc: 1e15,
            t_pair: secs(1.0),
            delta: secs(0.5),
            deploy_overhead: secs(0.25),
            checkpoint_overhead: secs(0.25),
        },
        jobs: vec![bulk, spry],
        calibration: None,
        estimate_noise: None,
    }
}

/// Drops one job from a multi-job scenario, for isolation comparisons.
pub fn isolate_job(sc: &Scenario, job_idx: usize) -> Scenario {
    let mut out = sc.clone();
    out.name = format!("{}_only_{}", sc.name, sc.jobs[job_idx].spec.job_id);
    out.jobs = vec![sc.jobs[job_idx].clone()];
    out
}
