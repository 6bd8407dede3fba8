//! Arrival-time and aggregation-time prediction.
//!
//! Before a job's first round the scheduler estimates, per party, how long
//! local training takes (`t_train`) and how long the model transfer takes
//! (`t_comm`). Their sum `t_upd` predicts when that party's update arrives;
//! the maximum over parties is the round horizon `t_rnd`. Aggregation itself
//! is estimated as a compute term (pairwise fusions spread over the usable
//! cores) plus the time to move the model through the datacenter. Estimates
//! are made once per job and stored; there is no online re-estimation from
//! observed arrivals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AggFrequency, FLJobSpec, ParticipationMode, PartyProfile, PartyTiming};
use crate::units::SimDuration;

/// Aggregation-cluster description shared by all jobs in a scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Number of parallel aggregator nodes.
    pub n_agg: usize,
    /// Usable cores per aggregator node.
    pub cores_per_agg: usize,
    /// Intra-datacenter bandwidth in bytes per second.
    pub bw_dc: f64,
    /// Measured time to fuse one pair of updates on a single core.
    pub t_pair: SimDuration,
    /// Scheduling interval: how often the scheduler re-evaluates.
    pub delta: SimDuration,
    /// Serverless deployment overhead per dynamic instance.
    pub deploy_overhead: SimDuration,
    /// Checkpoint/teardown overhead per dynamic instance.
    pub checkpoint_overhead: SimDuration,
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agg == 0 || self.cores_per_agg == 0 {
            return Err(Error::Config("cluster: n_agg and cores_per_agg must be >= 1".into()));
        }
        if !(self.bw_dc > 0.0) {
            return Err(Error::Config("cluster: bw_dc must be > 0".into()));
        }
        if self.t_pair.is_zero() {
            return Err(Error::Config("cluster: t_pair must be > 0".into()));
        }
        if self.delta.is_zero() {
            return Err(Error::Config("cluster: delta must be > 0".into()));
        }
        // Deploy/checkpoint overheads may be zero: the always-on baseline and
        // the canonical analytical scenarios run without them.
        Ok(())
    }

    /// Total fusion parallelism assumed by the aggregation-time estimate.
    pub fn total_cores(&self) -> u64 {
        (self.n_agg * self.cores_per_agg) as u64
    }
}

/// Per-party arrival estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyEstimate {
    pub t_train: SimDuration,
    pub t_comm: SimDuration,
    pub t_upd: SimDuration,
}

/// Everything the scheduler stores for a job: per-party arrival predictions,
/// the round horizon, and the estimated aggregation time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateSet {
    pub per_party: Vec<PartyEstimate>,
    /// Round horizon: latest predicted update arrival.
    pub t_rnd: SimDuration,
    /// Estimated time to aggregate all updates.
    pub t_agg: SimDuration,
}

/// Ordinary least-squares line fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub n_points: usize,
}

impl RegressionModel {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Epoch-time calibration models keyed by vCPU class.
///
/// A party whose class has its own model uses it directly. A party with no
/// class model falls back to the baseline class scaled by
/// `baseline_vcpus / vcpus` (epoch time inversely proportional to core count).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationSet {
    pub baseline_vcpus: u32,
    pub models: BTreeMap<u32, RegressionModel>,
}

impl CalibrationSet {
    pub fn new(baseline_vcpus: u32) -> Self {
        CalibrationSet {
            baseline_vcpus,
            models: BTreeMap::new(),
        }
    }
}

/// Fits y = slope * x + intercept by ordinary least squares.
pub fn fit_linear(points: &[(f64, f64)]) -> Result<RegressionModel> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints(points.len()));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateDesign {
            n: points.len(),
            x: points[0].0,
        });
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum();
    Ok(RegressionModel {
        slope,
        intercept,
        residual_rms: (ss_res / n).sqrt(),
        n_points: points.len(),
    })
}

/// Predicts a party's epoch time from its hardware descriptor.
pub fn predict_from_hardware(p: &PartyProfile, calibration: &CalibrationSet) -> Result<SimDuration> {
    let PartyTiming::Hardware { vcpus, .. } = p.timing else {
        return Err(Error::Config(format!(
            "party {}: predict_from_hardware called without a hardware descriptor",
            p.party_id
        )));
    };
    let (model, factor) = match calibration.models.get(&vcpus) {
        Some(m) => (m, 1.0),
        None => match calibration.models.get(&calibration.baseline_vcpus) {
            Some(m) => (m, calibration.baseline_vcpus as f64 / vcpus as f64),
            None => {
                return Err(Error::MissingCalibration {
                    vcpus,
                    party: p.party_id.0.clone(),
                })
            }
        },
    };
    let secs = model.predict(p.dataset_size as f64) * factor;
    if !(secs >= 0.0) {
        return Err(Error::Config(format!(
            "party {}: calibration predicts negative epoch time {secs}",
            p.party_id
        )));
    }
    Ok(SimDuration::from_secs_f64(secs))
}

/// Expected local-training time for one party of one job.
///
/// Intermittent parties are pinned to the job's wait window: their update is
/// due within `t_wait` of round start or not at all, so no transfer time is
/// added on top.
pub fn estimate_train_time(
    p: &PartyProfile,
    job: &FLJobSpec,
    calibration: Option<&CalibrationSet>,
) -> Result<SimDuration> {
    if p.mode == ParticipationMode::Intermittent {
        return job.t_wait.ok_or_else(|| {
            Error::Config(format!(
                "job {}: intermittent party {} but no t_wait",
                job.job_id, p.party_id
            ))
        });
    }
    match (p.timing, job.agg_frequency) {
        (PartyTiming::EpochTime(t_ep), AggFrequency::PerEpoch) => Ok(t_ep),
        (PartyTiming::MinibatchTime(t_mb), AggFrequency::EveryMinibatches(n_mb)) => {
            Ok(t_mb * n_mb as u64)
        }
        (PartyTiming::MinibatchTime(_), AggFrequency::PerEpoch) => Err(Error::Config(format!(
            "party {}: minibatch time given but job {} fuses per epoch and the \
             minibatch count per epoch is unknown",
            p.party_id, job.job_id
        ))),
        (PartyTiming::EpochTime(_), AggFrequency::EveryMinibatches(_)) => Err(Error::Config(format!(
            "party {}: epoch time given but job {} fuses every few minibatches",
            p.party_id, job.job_id
        ))),
        (PartyTiming::Hardware { .. }, freq) => {
            let cal = calibration.ok_or_else(|| Error::Config(format!(
                "party {}: hardware descriptor given but no calibration loaded",
                p.party_id
            )))?;
            let epoch = predict_from_hardware(p, cal)?;
            match freq {
                AggFrequency::PerEpoch => Ok(epoch),
                AggFrequency::EveryMinibatches(_) => Err(Error::Config(format!(
                    "party {}: hardware calibration predicts epoch times, but job {} \
                     fuses on a minibatch schedule",
                    p.party_id, job.job_id
                ))),
            }
        }
    }
}

/// Round-trip model transfer time: download plus upload.
pub fn estimate_comm_time(p: &PartyProfile, model_size: u64) -> Result<SimDuration> {
    if !(p.bw_down > 0.0) || !(p.bw_up > 0.0) {
        return Err(Error::Config(format!(
            "party {}: bandwidths must be > 0",
            p.party_id
        )));
    }
    let secs = model_size as f64 / p.bw_down + model_size as f64 / p.bw_up;
    Ok(SimDuration::from_secs_f64(secs))
}

/// Estimated aggregation time: pairwise-fusion compute spread over the
/// cluster's usable cores, plus moving the model through the datacenter.
pub fn estimate_agg_time(n_parties: usize, model_size: u64, cluster: &ClusterConfig) -> SimDuration {
    let compute_us =
        ((n_parties as u64 * cluster.t_pair.as_micros()) as f64 / cluster.total_cores() as f64).round() as u64;
    let transfer_us = (model_size as f64 / cluster.bw_dc * 1e6).round() as u64;
    SimDuration::from_micros(compute_us + transfer_us)
}

/// Full per-round estimate for a job: per-party arrivals, horizon, t_agg.
pub fn estimate_round(
    job: &FLJobSpec,
    parties: &[PartyProfile],
    cluster: &ClusterConfig,
    calibration: Option<&CalibrationSet>,
) -> Result<EstimateSet> {
    if parties.is_empty() {
        return Err(Error::Config(format!("job {}: empty party list", job.job_id)));
    }
    let mut per_party = Vec::with_capacity(parties.len());
    for p in parties {
        let t_train = estimate_train_time(p, job, calibration)?;
        // For intermittent parties the wait window already bounds the
        // round-trip; adding comm time would predict arrivals past the cutoff.
        let t_comm = if p.mode == ParticipationMode::Intermittent {
            SimDuration::ZERO
        } else {
            estimate_comm_time(p, job.model_size)?
        };
        per_party.push(PartyEstimate {
            t_train,
            t_comm,
            t_upd: t_train + t_comm,
        });
    }
    let t_rnd = per_party.iter().map(|e| e.t_upd).max().expect("nonempty");
    let t_agg = estimate_agg_time(parties.len(), job.model_size, cluster);
    Ok(EstimateSet {
        per_party,
        t_rnd,
        t_agg,
    })
}
