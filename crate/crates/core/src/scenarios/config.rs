//! Scenario and sweep files.
//!
//! A scenario file is TOML with a `[cluster]` block, one or more `[[jobs]]`
//! blocks (each with either an explicit `[[jobs.parties]]` roster or a
//! generated `[jobs.population]`), and optional `[calibration]` data as
//! (dataset_size, epoch_seconds) point lists per vCPU class. A sweep file
//! lists `[[runs]]` entries referencing scenario files with optional
//! strategy and seed overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::estimator::{fit_linear, CalibrationSet, ClusterConfig};
use crate::model::{
    AggFrequency, FLJobSpec, FusionKind, JobId, ParticipationMode, PartyId, PartyProfile,
    PartyTiming,
};
use crate::strategies::StrategyKind;
use crate::units::SimDuration;

use super::presets::preset_by_name;
use super::{
    derive_seed, generate_parties_with, sample_label_skew, BwSpec, GenOptions, JobSetup,
    Population, Scenario,
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    seed: u64,
    strategy: String,
    /// Default round count for jobs that do not set their own.
    rounds: Option<usize>,
    estimate_noise: Option<f64>,
    cluster: ClusterFile,
    jobs: Vec<JobFile>,
    calibration: Option<CalibrationFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClusterFile {
    n_agg: usize,
    cores_per_agg: usize,
    bw_dc: f64,
    t_pair_s: f64,
    delta_s: f64,
    #[serde(default)]
    deploy_overhead_s: f64,
    #[serde(default)]
    checkpoint_overhead_s: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JobFile {
    id: String,
    /// Layer lengths of the simulated update vectors.
    model_shape: Option<Vec<usize>>,
    model_size_bytes: Option<u64>,
    quorum: Option<usize>,
    rounds: Option<usize>,
    #[serde(default = "default_frequency")]
    agg_frequency: String,
    t_wait_s: Option<f64>,
    fusion: Option<String>,
    #[serde(default)]
    parties: Vec<PartyFile>,
    population: Option<PopulationFile>,
}

fn default_frequency() -> String {
    "per_epoch".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartyFile {
    id: String,
    #[serde(default = "default_mode")]
    mode: String,
    epoch_time_s: Option<f64>,
    minibatch_time_s: Option<f64>,
    vcpus: Option<u32>,
    ram_gb: Option<u32>,
    dataset_size: u64,
    bw_down: f64,
    bw_up: f64,
    /// Explicit actual arrival offsets from round start (testing hook);
    /// entry `round % len` applies.
    arrival_offsets_s: Option<Vec<f64>>,
}

fn default_mode() -> String {
    "active".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PopulationFile {
    count: usize,
    kind: String,
    preset: String,
    bw_down: Option<BwValue>,
    bw_up: Option<BwValue>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum BwValue {
    Fixed(f64),
    Range([f64; 2]),
}

impl BwValue {
    fn to_spec(&self) -> BwSpec {
        match self {
            BwValue::Fixed(v) => BwSpec::Fixed(*v),
            BwValue::Range([lo, hi]) => BwSpec::Range(*lo, *hi),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationFile {
    #[serde(default = "default_baseline_vcpus")]
    baseline_vcpus: u32,
    classes: Vec<CalibrationClassFile>,
}

fn default_baseline_vcpus() -> u32 {
    2
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationClassFile {
    vcpus: u32,
    /// (dataset_size, epoch_seconds) measurement points.
    points: Vec<[f64; 2]>,
}

/// Parses a scenario from TOML text.
pub fn parse_scenario(text: &str, fallback_name: &str) -> Result<Scenario> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| Error::Parse(format!("scenario: {e}")))?;
    let strategy: StrategyKind = file.strategy.parse()?;
    let cluster = ClusterConfig {
        n_agg: file.cluster.n_agg,
        cores_per_agg: file.cluster.cores_per_agg,
        bw_dc: file.cluster.bw_dc,
        t_pair: SimDuration::from_secs_f64(file.cluster.t_pair_s),
        delta: SimDuration::from_secs_f64(file.cluster.delta_s),
        deploy_overhead: SimDuration::from_secs_f64(file.cluster.deploy_overhead_s),
        checkpoint_overhead: SimDuration::from_secs_f64(file.cluster.checkpoint_overhead_s),
    };
    let default_rounds = file.rounds.unwrap_or(50);

    let mut jobs = Vec::with_capacity(file.jobs.len());
    let mut calibration = match &file.calibration {
        Some(c) => Some(parse_calibration(c)?),
        None => None,
    };
    for jf in &file.jobs {
        jobs.push(parse_job(jf, default_rounds, file.seed, &mut calibration)?);
    }
    Ok(Scenario {
        name: file.name.unwrap_or_else(|| fallback_name.to_string()),
        seed: file.seed,
        strategy,
        cluster,
        jobs,
        calibration,
        estimate_noise: file.estimate_noise,
    })
}

/// Loads a scenario file from disk.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario");
    parse_scenario(&text, name)
}

fn parse_calibration(c: &CalibrationFile) -> Result<CalibrationSet> {
    let mut cal = CalibrationSet::new(c.baseline_vcpus);
    for class in &c.classes {
        let points: Vec<(f64, f64)> = class.points.iter().map(|p| (p[0], p[1])).collect();
        cal.models.insert(class.vcpus, fit_linear(&points)?);
    }
    Ok(cal)
}

fn parse_job(
    jf: &JobFile,
    default_rounds: usize,
    seed: u64,
    calibration: &mut Option<CalibrationSet>,
) -> Result<JobSetup> {
    let fusion_default;
    let (parties, model_shape, model_size, label_skew) = match (&jf.population, jf.parties.is_empty())
    {
        (Some(pop), true) => {
            let preset = preset_by_name(&pop.preset)?;
            let kind: Population = pop.kind.parse()?;
            let defaults = GenOptions::defaults_for(kind);
            let options = GenOptions {
                bw_down: pop.bw_down.as_ref().map_or(defaults.bw_down, BwValue::to_spec),
                bw_up: pop.bw_up.as_ref().map_or(defaults.bw_up, BwValue::to_spec),
            };
            let parties = generate_parties_with(
                pop.count,
                kind,
                preset,
                derive_seed(seed, &[super::hash_id(&jf.id)]),
                options,
            )?;
            // Hardware-described parties need a calibration; derive it from
            // the preset when the file does not carry one.
            if calibration.is_none() && kind != Population::ActiveHomog {
                *calibration = Some(super::calibration_for(preset));
            }
            fusion_default = preset.fusion_kind;
            let skew = sample_label_skew(pop.count, 16, derive_seed(seed, &[0x6c6273]));
            (
                parties,
                preset.sim_shape.to_vec(),
                preset.model_size(),
                Some(skew),
            )
        }
        (None, false) => {
            fusion_default = FusionKind::WeightedMean;
            let parties = jf
                .parties
                .iter()
                .map(parse_party)
                .collect::<Result<Vec<_>>>()?;
            let shape = jf.model_shape.clone().unwrap_or_else(|| vec![16, 16]);
            let size = jf
                .model_size_bytes
                .unwrap_or_else(|| 4 * shape.iter().sum::<usize>() as u64);
            (parties, shape, size, None)
        }
        (Some(_), false) => {
            return Err(Error::Parse(format!(
                "job {}: give either an explicit party roster or a population, not both",
                jf.id
            )))
        }
        (None, true) => {
            return Err(Error::Parse(format!("job {}: no parties", jf.id)))
        }
    };

    let model_shape = jf.model_shape.clone().unwrap_or(model_shape);
    let model_size = jf.model_size_bytes.unwrap_or(model_size);
    let fusion_kind = match jf.fusion.as_deref() {
        None => fusion_default,
        Some("weighted_mean") => FusionKind::WeightedMean,
        Some("mean") => FusionKind::Mean,
        Some(other) => {
            return Err(Error::Parse(format!(
                "job {}: unknown fusion '{other}' (weighted_mean | mean)",
                jf.id
            )))
        }
    };
    let agg_frequency = parse_frequency(&jf.agg_frequency, &jf.id)?;

    let arrival_offsets = if jf.parties.iter().any(|p| p.arrival_offsets_s.is_some()) {
        let mut all = Vec::with_capacity(jf.parties.len());
        for p in &jf.parties {
            let offs = p.arrival_offsets_s.as_ref().ok_or_else(|| {
                Error::Parse(format!(
                    "job {}: arrival offsets must be given for all parties or none",
                    jf.id
                ))
            })?;
            all.push(offs.iter().map(|&s| SimDuration::from_secs_f64(s)).collect());
        }
        Some(all)
    } else {
        None
    };

    let spec = FLJobSpec {
        job_id: JobId(jf.id.clone()),
        model_size,
        agg_frequency,
        t_wait: jf.t_wait_s.map(SimDuration::from_secs_f64),
        quorum: jf.quorum.unwrap_or(parties.len()),
        num_rounds: jf.rounds.unwrap_or(default_rounds),
        fusion_kind,
    };
    Ok(JobSetup {
        spec,
        parties,
        model_shape,
        arrival_offsets,
        label_skew,
    })
}

fn parse_frequency(s: &str, job: &str) -> Result<AggFrequency> {
    if s == "per_epoch" {
        return Ok(AggFrequency::PerEpoch);
    }
    if let Some(n) = s.strip_prefix("minibatches:") {
        let n: u32 = n
            .parse()
            .map_err(|_| Error::Parse(format!("job {job}: bad minibatch count in '{s}'")))?;
        if n == 0 {
            return Err(Error::Parse(format!("job {job}: minibatch count must be >= 1")));
        }
        return Ok(AggFrequency::EveryMinibatches(n));
    }
    Err(Error::Parse(format!(
        "job {job}: unknown agg_frequency '{s}' (per_epoch | minibatches:<n>)"
    )))
}

fn parse_party(pf: &PartyFile) -> Result<PartyProfile> {
    let mode = match pf.mode.as_str() {
        "active" => ParticipationMode::Active,
        "intermittent" => ParticipationMode::Intermittent,
        other => {
            return Err(Error::Parse(format!(
                "party {}: unknown mode '{other}' (active | intermittent)",
                pf.id
            )))
        }
    };
    let timing = match (pf.epoch_time_s, pf.minibatch_time_s, pf.vcpus) {
        (Some(t), None, None) => PartyTiming::EpochTime(SimDuration::from_secs_f64(t)),
        (None, Some(t), None) => PartyTiming::MinibatchTime(SimDuration::from_secs_f64(t)),
        (None, None, Some(vcpus)) => PartyTiming::Hardware {
            vcpus,
            ram_gb: pf.ram_gb.unwrap_or(4),
        },
        _ => {
            return Err(Error::Parse(format!(
                "party {}: give exactly one of epoch_time_s, minibatch_time_s, or vcpus",
                pf.id
            )))
        }
    };
    Ok(PartyProfile {
        party_id: PartyId(pf.id.clone()),
        mode,
        timing,
        dataset_size: pf.dataset_size,
        bw_down: pf.bw_down,
        bw_up: pf.bw_up,
    })
}

// ---------------------------------------------------------------------------
// Sweep files
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    runs: Vec<SweepRun>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepRun {
    scenario: PathBuf,
    strategies: Option<Vec<String>>,
    seeds: Option<Vec<u64>>,
}

/// One resolved sweep entry: a scenario with its strategy and seed applied.
pub struct SweepEntry {
    pub scenario: Scenario,
}

/// Loads a sweep file and resolves each run into concrete scenarios.
/// Relative scenario paths resolve against the sweep file's directory.
pub fn load_sweep(path: &Path) -> Result<Vec<SweepEntry>> {
    let text = std::fs::read_to_string(path)?;
    let file: SweepFile = toml::from_str(&text).map_err(|e| Error::Parse(format!("sweep: {e}")))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut entries = Vec::new();
    let mut cache: BTreeMap<PathBuf, Scenario> = BTreeMap::new();
    for run in &file.runs {
        let full = if run.scenario.is_absolute() {
            run.scenario.clone()
        } else {
            base.join(&run.scenario)
        };
        if !cache.contains_key(&full) {
            cache.insert(full.clone(), load_scenario(&full)?);
        }
        let base_sc = &cache[&full];
        let strategies: Vec<StrategyKind> = match &run.strategies {
            Some(list) => list
                .iter()
                .map(|s| s.parse())
                .collect::<Result<Vec<_>>>()?,
            None => vec![base_sc.strategy],
        };
        let seeds = run.seeds.clone().unwrap_or_else(|| vec![base_sc.seed]);
        for &seed in &seeds {
            for &strategy in &strategies {
                entries.push(SweepEntry {
                    scenario: base_sc.clone().with_strategy(strategy).with_seed(seed),
                });
            }
        }
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        seed = 9
        strategy = "lazy"
        rounds = 2

        [cluster]
        n_agg = 1
        cores_per_agg = 1
        bw_dc = 1e12
        t_pair_s = 0.5
        delta_s = 1.0

        [[jobs]]
        id = "tiny"
        model_shape = [4]

        [[jobs.parties]]
        id = "a"
        epoch_time_s = 3.0
        dataset_size = 10
        bw_down = 1e6
        bw_up = 1e6

        [[jobs.parties]]
        id = "b"
        mode = "intermittent"
        epoch_time_s = 5.0
        dataset_size = 10
        bw_down = 1e6
        bw_up = 1e6
    "#;

    #[test]
    fn parses_explicit_roster() {
        let sc = parse_scenario(MINIMAL, "mini").unwrap();
        assert_eq!(sc.name, "mini");
        assert_eq!(sc.strategy, StrategyKind::Lazy);
        assert_eq!(sc.jobs.len(), 1);
        let job = &sc.jobs[0];
        assert_eq!(job.spec.num_rounds, 2);
        assert_eq!(job.spec.quorum, 2);
        assert_eq!(job.spec.model_size, 16);
        assert_eq!(job.parties[1].mode, ParticipationMode::Intermittent);
    }

    #[test]
    fn missing_t_wait_with_intermittent_fails_validation() {
        let sc = parse_scenario(MINIMAL, "mini").unwrap();
        assert!(matches!(super::super::validate(&sc), Err(Error::Config(_))));
    }

    #[test]
    fn parses_population_job() {
        let text = r#"
            seed = 4
            strategy = "batched:10"

            [cluster]
            n_agg = 1
            cores_per_agg = 2
            bw_dc = 1e9
            t_pair_s = 0.05
            delta_s = 0.5
            deploy_overhead_s = 0.5
            checkpoint_overhead_s = 0.5

            [[jobs]]
            id = "gen"
            rounds = 1
            t_wait_s = 600.0

            [jobs.population]
            count = 25
            kind = "intermittent_heterog"
            preset = "efficientnet_cifar100"
            bw_down = [5e6, 5e7]
            bw_up = 2.5e7
        "#;
        let sc = parse_scenario(text, "gen").unwrap();
        assert_eq!(sc.jobs[0].parties.len(), 25);
        assert_eq!(sc.strategy, StrategyKind::BatchedServerless(10));
        assert!(sc.calibration.is_some());
        assert!(sc.jobs[0].parties.iter().all(|p| p.bw_up == 2.5e7));
        super::super::validate(&sc).unwrap();
    }

    #[test]
    fn rejects_unknown_strategy_and_population() {
        assert!(parse_scenario(&MINIMAL.replace("lazy", "bogus"), "x").is_err());
        let bad_pop = r#"
            seed = 1
            strategy = "jit"
            [cluster]
            n_agg = 1
            cores_per_agg = 1
            bw_dc = 1e9
            t_pair_s = 0.1
            delta_s = 1.0
            [[jobs]]
            id = "j"
            [jobs.population]
            count = 3
            kind = "nope"
            preset = "efficientnet_cifar100"
        "#;
        assert!(parse_scenario(bad_pop, "x").is_err());
    }
}
