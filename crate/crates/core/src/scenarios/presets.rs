//! Workload presets: named model/dataset combinations with timing and size
//! parameters. The neural networks themselves are represented only by their
//! parameter counts (for transfer sizes) and per-sample training rates; the
//! vectors actually fused in simulation use a small stand-in shape so runs
//! stay cheap while the arithmetic remains real and checkable.
//!
//! Parameter counts are documentation-sourced approximations; per-sample
//! times are free parameters with defaults in a plausible CPU-training
//! range. Both are overridable in scenario configs.

use crate::error::{Error, Result};
use crate::model::FusionKind;

#[derive(Debug, Clone)]
pub struct WorkloadPreset {
    pub name: &'static str,
    /// Trainable parameters; model bytes default to 4x this.
    pub param_count: u64,
    /// Total dataset size, split equally across parties.
    pub total_samples: u64,
    /// Seconds of local training per sample on the 2-vCPU baseline.
    pub time_per_sample_2vcpu: f64,
    /// Layer lengths of the stand-in vectors fused in simulation.
    pub sim_shape: &'static [usize],
    pub fusion_kind: FusionKind,
    /// Default round wait window for intermittent populations, seconds.
    pub t_wait_s: f64,
}

impl WorkloadPreset {
    pub fn model_size(&self) -> u64 {
        self.param_count * 4
    }

    /// Baseline (2-vCPU) epoch time for a party holding `samples` samples.
    pub fn epoch_time_s(&self, samples: u64) -> f64 {
        self.time_per_sample_2vcpu * samples as f64
    }
}

pub const EFFICIENTNET_CIFAR100: WorkloadPreset = WorkloadPreset {
    name: "efficientnet_cifar100",
    param_count: 66_000_000,
    total_samples: 50_000,
    time_per_sample_2vcpu: 0.02,
    sim_shape: &[64, 32],
    fusion_kind: FusionKind::WeightedMean,
    t_wait_s: 600.0,
};

pub const VGG16_RVLCDIP: WorkloadPreset = WorkloadPreset {
    name: "vgg16_rvlcdip",
    param_count: 138_000_000,
    total_samples: 320_000,
    time_per_sample_2vcpu: 0.005,
    sim_shape: &[64, 32],
    // FedSGD in the reference workload: plain coordinate-wise mean.
    fusion_kind: FusionKind::Mean,
    t_wait_s: 600.0,
};

pub const INCEPTIONV4_INATURALIST: WorkloadPreset = WorkloadPreset {
    name: "inceptionv4_inaturalist",
    param_count: 43_000_000,
    total_samples: 120_000,
    time_per_sample_2vcpu: 0.01,
    sim_shape: &[64, 32],
    fusion_kind: FusionKind::WeightedMean,
    t_wait_s: 600.0,
};

pub const ALL_PRESETS: [&WorkloadPreset; 3] = [
    &EFFICIENTNET_CIFAR100,
    &VGG16_RVLCDIP,
    &INCEPTIONV4_INATURALIST,
];

pub fn preset_by_name(name: &str) -> Result<&'static WorkloadPreset> {
    ALL_PRESETS
        .iter()
        .find(|p| p.name == name)
        .copied()
        .ok_or_else(|| {
            Error::Parse(format!(
                "unknown workload preset '{name}' (known: {})",
                ALL_PRESETS.map(|p| p.name).join(", ")
            ))
        })
}
