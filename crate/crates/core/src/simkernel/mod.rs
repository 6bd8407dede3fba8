//! Deterministic discrete-event engine.
//!
//! The engine owns the virtual clock, the event heap, the per-round update
//! queues, and the executor pool. Aggregation policies (the strategies
//! module) are state machines driven through the [`Policy`] trait: the engine
//! tells them what happened, they answer with [`Command`]s (deploy an
//! instance, preempt a slot, set a timer). The engine never decides *when*
//! to aggregate; policies never touch engine state directly.
//!
//! Fusion work is simulated from `t_pair`, not wall-clock time: a productive
//! instance absorbs queued updates in steps of `t_pair`, performing
//! `min(cores, floor(items / 2))` pair-reductions per step, where `items`
//! counts the running aggregate plus the updates it may still take. One core
//! therefore absorbs one update per step (N updates cost N steps, matching
//! the aggregation-time estimate), while C cores reduce a fully queued round
//! in near-log depth. The vector arithmetic itself is executed for real so
//! fused models can be checked against oracles; its wall time does not drive
//! the clock.

pub mod event;
pub mod pool;
pub mod queue;
pub mod trace;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimator::{estimate_comm_time, estimate_round, ClusterConfig, EstimateSet};
use crate::model::{finalize, random_layers, FLJobSpec, FusionKind, GlobalModel, ModelUpdate, ParticipationMode};
use crate::scenarios::{self, Scenario};
use crate::strategies::{self, StrategyKind};
use crate::units::{SimDuration, SimTime};

use event::{EventKind, EventQueue};
use pool::{AccountingMode, ExecutorPool};
use queue::{EnqueueOutcome, RoundQueue};
pub use trace::{Rec, SimTrace, TraceRecord};

/// Safety valve against runaway policies; generous for any sane scenario.
const MAX_EVENTS: u64 = 100_000_000;

// ---------------------------------------------------------------------------
// Policy interface
// ---------------------------------------------------------------------------

/// What a policy may ask the engine to do.
#[derive(Debug, Clone)]
pub enum Command {
    /// Deploy an aggregation instance for `job`'s current round on `slot`.
    /// `quota` caps how many updates the instance may absorb (batched mode).
    Deploy {
        slot: usize,
        job: usize,
        quota: Option<usize>,
    },
    /// Checkpoint and evict whatever runs on `slot`.
    Preempt { slot: usize },
    /// Schedule a `TimerAlert` for (job, round) at the given instant.
    SetTimer { job: usize, round: usize, at: SimTime },
    /// Append a record to the trace (task state transitions, warnings).
    Trace(Rec),
}

/// Answer to "your instance has nothing left to absorb right now".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Drain {
    /// Keep the instance deployed (and billed) waiting for more updates.
    Stay,
    /// Checkpoint and release the executor.
    Release,
}

/// An aggregation scheduling policy, driven by the engine event loop.
pub trait Policy {
    fn name(&self) -> &'static str;

    /// Whether the engine should run the periodic scheduler tick chain.
    fn wants_ticks(&self) -> bool {
        false
    }

    fn on_round_start(&mut self, _job: usize, _v: &View) -> Vec<Command> {
        Vec::new()
    }

    fn on_update_enqueued(&mut self, _job: usize, _v: &View) -> Vec<Command> {
        Vec::new()
    }

    fn on_cutoff(&mut self, _job: usize, _v: &View) -> Vec<Command> {
        Vec::new()
    }

    fn on_timer(&mut self, _job: usize, _round: usize, _v: &View) -> Vec<Command> {
        Vec::new()
    }

    fn on_tick(&mut self, _v: &View) -> Vec<Command> {
        Vec::new()
    }

    fn on_executor_freed(&mut self, _v: &View) -> Vec<Command> {
        Vec::new()
    }

    /// Called when a productive instance has an empty inbox and its round is
    /// not over.
    fn on_instance_drained(&mut self, _slot: usize, _job: usize, _v: &View) -> Drain {
        Drain::Release
    }

    fn on_round_ended(&mut self, _job: usize, _round: usize, _v: &View) -> Vec<Command> {
        Vec::new()
    }
}

// ---------------------------------------------------------------------------
// Read-only view handed to policies
// ---------------------------------------------------------------------------

/// Snapshot of one job's current round.
#[derive(Debug, Clone, Copy)]
pub struct RoundInfo {
    pub round: usize,
    pub started_at: SimTime,
    pub pending: usize,
    pub arrived: usize,
    pub accepted: usize,
    pub expected: usize,
    /// Every party reported or the wait cutoff passed.
    pub intake_closed: bool,
    pub ended: bool,
}

/// Read-only engine state exposed to policies.
pub struct View<'a> {
    pub now: SimTime,
    pub cluster: &'a ClusterConfig,
    jobs: &'a [JobRt],
    instances: &'a [Option<Instance>],
}

impl<'a> View<'a> {
    pub fn n_jobs(&self) -> usize {
        self.jobs.len()
    }

    pub fn spec(&self, job: usize) -> &FLJobSpec {
        &self.jobs[job].spec
    }

    /// The scheduler's stored estimates for a job (noise included, if any).
    pub fn estimates(&self, job: usize) -> &EstimateSet {
        &self.jobs[job].est_sched
    }

    pub fn round(&self, job: usize) -> RoundInfo {
        let j = &self.jobs[job];
        RoundInfo {
            round: j.q.round,
            started_at: j.q.started_at,
            pending: j.q.pending.len(),
            arrived: j.q.arrived,
            accepted: j.q.accepted,
            expected: j.q.expected,
            intake_closed: j.q.intake_closed(),
            ended: j.q.ended,
        }
    }

    pub fn job_done(&self, job: usize) -> bool {
        self.jobs[job].done
    }

    pub fn n_slots(&self) -> usize {
        self.instances.len()
    }

    /// Lowest-index slot with no instance at all.
    pub fn idle_slot(&self) -> Option<usize> {
        self.instances.iter().position(Option::is_none)
    }

    /// True when the slot has no instance (not even one tearing down).
    pub fn slot_free(&self, slot: usize) -> bool {
        self.instances[slot].is_none()
    }

    /// The (job, round) a slot is deploying or fusing for, if any.
    /// Tearing-down instances no longer count as occupants.
    pub fn occupant(&self, slot: usize) -> Option<(usize, usize)> {
        self.instances[slot].as_ref().and_then(|i| match i.phase {
            Phase::TearingDown => None,
            _ => Some((i.job, i.round)),
        })
    }

    /// Is an instance already live (deploying or productive) for this round?
    pub fn live_instance_for(&self, job: usize, round: usize) -> bool {
        (0..self.instances.len()).any(|s| self.occupant(s) == Some((job, round)))
    }
}

// ---------------------------------------------------------------------------
// Engine internals
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Deploying { ready: SimTime },
    Productive,
    TearingDown,
}

#[derive(Debug)]
struct InFlight {
    absorbs: usize,
    started: SimTime,
}

#[derive(Debug)]
struct Instance {
    job: usize,
    round: usize,
    gen: u64,
    phase: Phase,
    quota: Option<usize>,
    taken: usize,
    inflight: Option<InFlight>,
}

struct JobRt {
    spec: FLJobSpec,
    /// Stable per-job stream tag (hash of the job id), so a job's arrival
    /// draws and update vectors do not depend on its position in the
    /// scenario; running a job in isolation reproduces them exactly.
    tag: u64,
    model_shape: Vec<usize>,
    n_parties: usize,
    party_ids: Vec<String>,
    party_modes: Vec<ParticipationMode>,
    /// Exact per-party estimates; actual active arrivals follow these.
    est_true: EstimateSet,
    /// What the scheduler stored (per-party noise applied when configured).
    est_sched: EstimateSet,
    /// Actual transfer time per party, lower bound for intermittent arrivals.
    true_comm: Vec<SimDuration>,
    arrival_offsets: Option<Vec<Vec<SimDuration>>>,
    round: usize,
    q: RoundQueue,
    models: Vec<Option<GlobalModel>>,
    done: bool,
    ao_slot: Option<usize>,
}

impl JobRt {
    fn has_cutoff(&self) -> bool {
        self.party_modes.contains(&ParticipationMode::Intermittent) && self.spec.t_wait.is_some()
    }
}

/// Outcome of one simulation run.
pub struct SimResult {
    pub trace: SimTrace,
    /// Total billed container-seconds under the run's accounting mode.
    pub container_seconds: f64,
    /// Total productive fusion seconds.
    pub busy_seconds: f64,
    /// Final global model per job per round; `None` for incomplete rounds.
    pub models: Vec<Vec<Option<GlobalModel>>>,
}

struct Engine<'s> {
    scenario: &'s Scenario,
    now: SimTime,
    events: EventQueue,
    jobs: Vec<JobRt>,
    pool: ExecutorPool,
    instances: Vec<Option<Instance>>,
    gen_counter: u64,
    trace: SimTrace,
    unfinished: usize,
    events_seen: u64,
}

/// Runs a scenario to completion and returns its trace and accounting.
///
/// Identical `(scenario, seed)` pairs produce byte-identical traces: all
/// randomness is derived from the scenario seed and events are totally
/// ordered by `(time, insertion seq)`.
pub fn run(scenario: &Scenario) -> Result<SimResult> {
    let warnings = scenarios::validate(scenario)?;
    let mut policy = strategies::build(&scenario.strategy);
    let mode = match scenario.strategy {
        StrategyKind::EagerAlwaysOn => AccountingMode::AlwaysOn,
        _ => AccountingMode::Dynamic,
    };
    if mode == AccountingMode::AlwaysOn && scenario.jobs.len() > scenario.cluster.n_agg {
        return Err(Error::Config(format!(
            "always-on needs one executor per job: {} jobs > {} executors",
            scenario.jobs.len(),
            scenario.cluster.n_agg
        )));
    }

    let mut jobs = Vec::with_capacity(scenario.jobs.len());
    for setup in &scenario.jobs {
        let est_true = estimate_round(
            &setup.spec,
            &setup.parties,
            &scenario.cluster,
            scenario.calibration.as_ref(),
        )?;
        let tag = scenarios::hash_id(&setup.spec.job_id.0);
        let est_sched = match scenario.estimate_noise {
            Some(f) => perturb_estimates(&est_true, f, scenario.seed, tag),
            None => est_true.clone(),
        };
        let true_comm = setup
            .parties
            .iter()
            .map(|p| estimate_comm_time(p, setup.spec.model_size))
            .collect::<Result<Vec<_>>>()?;
        let rounds = setup.spec.num_rounds;
        jobs.push(JobRt {
            tag,
            n_parties: setup.parties.len(),
            party_ids: setup.parties.iter().map(|p| p.party_id.0.clone()).collect(),
            party_modes: setup.parties.iter().map(|p| p.mode).collect(),
            est_true,
            est_sched,
            true_comm,
            arrival_offsets: setup.arrival_offsets.clone(),
            round: 0,
            q: RoundQueue::new(0, SimTime::ZERO, setup.parties.len(), None),
            models: vec![None; rounds],
            done: false,
            ao_slot: None,
            spec: setup.spec.clone(),
            model_shape: setup.model_shape.clone(),
        });
    }

    let n_jobs = jobs.len();
    let mut engine = Engine {
        scenario,
        now: SimTime::ZERO,
        events: EventQueue::new(),
        jobs,
        pool: ExecutorPool::new(
            scenario.cluster.n_agg,
            mode,
            scenario.cluster.deploy_overhead,
            scenario.cluster.checkpoint_overhead,
        ),
        instances: (0..scenario.cluster.n_agg).map(|_| None).collect(),
        gen_counter: 0,
        trace: SimTrace::default(),
        unfinished: n_jobs,
        events_seen: 0,
    };

    for w in warnings {
        engine.trace.push(SimTime::ZERO, Rec::Warn { text: w });
    }
    for job in 0..n_jobs {
        engine.events.push(SimTime::ZERO, EventKind::RoundStart { job, round: 0 });
    }
    if policy.wants_ticks() && engine.unfinished > 0 {
        engine.events.push(SimTime::ZERO, EventKind::SchedulerTick);
    }

    engine.event_loop(policy.as_mut())?;

    if engine.unfinished > 0 {
        let stuck: Vec<String> = engine
            .jobs
            .iter()
            .filter(|j| !j.done)
            .map(|j| {
                format!(
                    "job {} round {} (absorbed {}, quorum {}, pending {})",
                    j.spec.job_id, j.q.round, j.q.absorbed, j.spec.quorum, j.q.pending.len()
                )
            })
            .collect();
        return Err(Error::Deadlock(format!(
            "event queue drained with unsatisfied rounds: {}",
            stuck.join("; ")
        )));
    }

    Ok(SimResult {
        container_seconds: engine.pool.container_seconds(),
        busy_seconds: engine.pool.busy_seconds(),
        models: engine.jobs.into_iter().map(|j| j.models).collect(),
        trace: engine.trace,
    })
}

fn perturb_estimates(est: &EstimateSet, f: f64, seed: u64, job_tag: u64) -> EstimateSet {
    let mut per_party = Vec::with_capacity(est.per_party.len());
    for (i, e) in est.per_party.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(scenarios::derive_seed(seed, &[0x6e6f, job_tag, i as u64]));
        let ft: f64 = rng.gen_range(1.0 - f..=1.0 + f);
        let fc: f64 = rng.gen_range(1.0 - f..=1.0 + f);
        let t_train = SimDuration::from_secs_f64(e.t_train.as_secs_f64() * ft);
        let t_comm = SimDuration::from_secs_f64(e.t_comm.as_secs_f64() * fc);
        per_party.push(crate::estimator::PartyEstimate {
            t_train,
            t_comm,
            t_upd: t_train + t_comm,
        });
    }
    let t_rnd = per_party.iter().map(|e| e.t_upd).max().unwrap_or(SimDuration::ZERO);
    EstimateSet {
        per_party,
        t_rnd,
        t_agg: est.t_agg,
    }
}

impl<'s> Engine<'s> {
    fn view(&self) -> View<'_> {
        View {
            now: self.now,
            cluster: &self.scenario.cluster,
            jobs: &self.jobs,
            instances: &self.instances,
        }
    }

    fn event_loop(&mut self, policy: &mut dyn Policy) -> Result<()> {
        while let Some(ev) = self.events.pop() {
            debug_assert!(ev.time >= self.now, "virtual time went backwards");
            self.now = ev.time;
            self.events_seen += 1;
            if self.events_seen > MAX_EVENTS {
                return Err(Error::Deadlock(
                    "event budget exhausted; a policy is likely spinning".into(),
                ));
            }
            match ev.kind {
                EventKind::RoundStart { job, round } => self.on_round_start(job, round, policy),
                EventKind::UpdateArrived { job, round, party } => {
                    self.on_update_arrived(job, round, party, policy)
                }
                EventKind::WaitCutoff { job, round } => self.on_wait_cutoff(job, round, policy),
                EventKind::TimerAlert { job, round } => {
                    let cmds = policy.on_timer(job, round, &self.view());
                    self.apply(cmds, policy);
                }
                EventKind::SchedulerTick => {
                    let cmds = policy.on_tick(&self.view());
                    self.apply(cmds, policy);
                    if self.unfinished > 0 {
                        self.events
                            .push(self.now + self.scenario.cluster.delta, EventKind::SchedulerTick);
                    }
                }
                EventKind::DeployDone { slot, gen } => self.on_deploy_done(slot, gen, policy),
                EventKind::StepDone { slot, gen } => self.on_step_done(slot, gen, policy),
                EventKind::ExecutorFreed { slot, gen } => self.on_executor_freed(slot, gen, policy),
            }
        }
        Ok(())
    }

    // -- event handlers ----------------------------------------------------

    fn on_round_start(&mut self, job: usize, round: usize, policy: &mut dyn Policy) {
        debug_assert_eq!(self.jobs[job].round, round);
        let now = self.now;
        let j = &mut self.jobs[job];
        let cutoff = if j.has_cutoff() {
            Some(now + j.spec.t_wait.expect("validated"))
        } else {
            None
        };
        j.q = RoundQueue::new(round, now, j.n_parties, cutoff);
        self.trace.push(now, Rec::RoundStart { job, round });

        // Arrival schedule for this round; explicit offsets win, then the
        // party's own timing, then the seeded intermittent draw.
        for party in 0..self.jobs[job].n_parties {
            let at = self.arrival_time(job, round, party);
            self.events.push(at, EventKind::UpdateArrived { job, round, party });
        }
        if let Some(c) = cutoff {
            self.events.push(c, EventKind::WaitCutoff { job, round });
        }
        let cmds = policy.on_round_start(job, &self.view());
        self.apply(cmds, policy);
    }

    fn arrival_time(&self, job: usize, round: usize, party: usize) -> SimTime {
        let j = &self.jobs[job];
        let start = j.q.started_at;
        if let Some(offsets) = &j.arrival_offsets {
            let per_round = &offsets[party];
            return start + per_round[round % per_round.len()];
        }
        match j.party_modes[party] {
            ParticipationMode::Active => start + j.est_true.per_party[party].t_upd,
            ParticipationMode::Intermittent => {
                let mut rng = ChaCha8Rng::seed_from_u64(scenarios::derive_seed(
                    self.scenario.seed,
                    &[0x617272, j.tag, party as u64, round as u64],
                ));
                scenarios::sample_intermittent_arrival(
                    j.true_comm[party],
                    start,
                    j.spec.t_wait.expect("validated"),
                    &mut rng,
                )
            }
        }
    }

    fn on_update_arrived(&mut self, job: usize, round: usize, party: usize, policy: &mut dyn Policy) {
        let now = self.now;
        let stale = self.jobs[job].round != round || self.jobs[job].q.ended;
        let party_id = self.jobs[job].party_ids[party].clone();
        if stale {
            // The round closed before this update landed (post-cutoff
            // arrival); record the drop and move on.
            self.trace.push(
                now,
                Rec::Arrival { job, round, party: party_id, accepted: false },
            );
            return;
        }
        let update = self.materialize_update(job, round, party);
        let outcome = self.jobs[job].q.enqueue_update(update);
        let accepted = outcome == EnqueueOutcome::Accepted;
        self.trace.push(
            now,
            Rec::Arrival { job, round, party: party_id, accepted },
        );
        if accepted {
            // Wake an idle productive instance for this round.
            if let Some(slot) = self.productive_idle_slot_for(job, round) {
                self.poke_slot(slot, policy);
            }
        }
        let cmds = policy.on_update_enqueued(job, &self.view());
        self.apply(cmds, policy);
        self.check_round_end(job, policy);
    }

    fn materialize_update(&self, job: usize, round: usize, party: usize) -> ModelUpdate {
        let j = &self.jobs[job];
        let mut rng = ChaCha8Rng::seed_from_u64(scenarios::derive_seed(
            self.scenario.seed,
            &[0x757064, j.tag, party as u64, round as u64],
        ));
        let layers = random_layers(&j.model_shape, &mut rng);
        let sample_weight = match j.spec.fusion_kind {
            FusionKind::WeightedMean => self.scenario.jobs[job].parties[party].dataset_size as f64,
            FusionKind::Mean => 1.0,
        };
        ModelUpdate {
            party_id: self.scenario.jobs[job].parties[party].party_id.clone(),
            round,
            layers,
            sample_weight,
            arrival_time: self.now,
        }
    }

    fn on_wait_cutoff(&mut self, job: usize, round: usize, policy: &mut dyn Policy) {
        if self.jobs[job].round != round || self.jobs[job].q.ended {
            return;
        }
        self.jobs[job].q.cutoff_passed = true;
        self.trace.push(self.now, Rec::Cutoff { job, round });
        let cmds = policy.on_cutoff(job, &self.view());
        self.apply(cmds, policy);
        self.check_round_end(job, policy);
    }

    fn on_deploy_done(&mut self, slot: usize, gen: u64, policy: &mut dyn Policy) {
        let Some(inst) = self.instances[slot].as_mut() else { return };
        if inst.gen != gen || !matches!(inst.phase, Phase::Deploying { .. }) {
            return;
        }
        inst.phase = Phase::Productive;
        self.poke_slot(slot, policy);
    }

    fn on_step_done(&mut self, slot: usize, gen: u64, policy: &mut dyn Policy) {
        let Some(inst) = self.instances[slot].as_mut() else { return };
        if inst.gen != gen || inst.phase != Phase::Productive {
            return;
        }
        let Some(fl) = inst.inflight.take() else { return };
        let (job, round) = (inst.job, inst.round);
        inst.taken += fl.absorbs;
        let absorbed = self.jobs[job].q.absorb(fl.absorbs);
        debug_assert_eq!(absorbed, fl.absorbs);
        self.pool.record_busy(slot, fl.started, self.now);
        self.trace.push(
            self.now,
            Rec::Step {
                slot,
                job,
                round,
                absorbed,
                pending_left: self.jobs[job].q.pending.len(),
            },
        );
        if !self.check_round_end(job, policy) {
            self.poke_slot(slot, policy);
        }
    }

    fn on_executor_freed(&mut self, slot: usize, gen: u64, policy: &mut dyn Policy) {
        let Some(inst) = self.instances[slot].as_ref() else { return };
        if inst.gen != gen || inst.phase != Phase::TearingDown {
            return;
        }
        let iv = self.pool.close(slot, self.now);
        self.trace.push(self.now, Rec::Bill { slot, start: iv.start, end: iv.end });
        self.instances[slot] = None;
        let cmds = policy.on_executor_freed(&self.view());
        self.apply(cmds, policy);
    }

    // -- instance mechanics --------------------------------------------------

    fn productive_idle_slot_for(&self, job: usize, round: usize) -> Option<usize> {
        self.instances.iter().position(|i| {
            i.as_ref().is_some_and(|i| {
                i.job == job && i.round == round && i.phase == Phase::Productive && i.inflight.is_none()
            })
        })
    }

    /// Gives a productive, step-free instance something to do: start the next
    /// fusion step, or handle an empty inbox.
    fn poke_slot(&mut self, slot: usize, policy: &mut dyn Policy) {
        let Some(inst) = self.instances[slot].as_ref() else { return };
        if inst.phase != Phase::Productive || inst.inflight.is_some() {
            return;
        }
        let (job, round) = (inst.job, inst.round);
        let j = &self.jobs[job];
        if j.q.ended || j.q.round != round {
            return;
        }
        let cap = inst.quota.map_or(usize::MAX, |q| q.saturating_sub(inst.taken));
        let take = j.q.pending.len().min(cap);
        if take > 0 {
            // One tree round of pairwise fusions: the running aggregate plus
            // `take` loose updates reduce by min(cores, floor(items/2)).
            let items = take + 1;
            let absorbs = (items / 2).min(self.scenario.cluster.cores_per_agg);
            let inst = self.instances[slot].as_mut().expect("checked above");
            inst.inflight = Some(InFlight { absorbs, started: self.now });
            self.events.push(
                self.now + self.scenario.cluster.t_pair,
                EventKind::StepDone { slot, gen: inst.gen },
            );
            return;
        }
        if cap == 0 {
            // Batch quota exhausted; this instance's work is done.
            self.teardown(slot);
            return;
        }
        if self.pool.mode() == AccountingMode::AlwaysOn {
            return; // always-on instances idle in place
        }
        match policy.on_instance_drained(slot, job, &self.view()) {
            Drain::Stay => {}
            Drain::Release => self.teardown(slot),
        }
    }

    fn teardown(&mut self, slot: usize) {
        let inst = self.instances[slot].as_mut().expect("teardown of empty slot");
        debug_assert!(inst.phase != Phase::TearingDown);
        inst.phase = Phase::TearingDown;
        inst.inflight = None;
        self.trace.push(
            self.now,
            Rec::Teardown { slot, job: inst.job, round: inst.round },
        );
        let gen = inst.gen;
        self.events.push(
            self.now + self.scenario.cluster.checkpoint_overhead,
            EventKind::ExecutorFreed { slot, gen },
        );
    }

    /// Closes the round when everything accepted is absorbed and intake is
    /// over. Returns true if the round ended here.
    fn check_round_end(&mut self, job: usize, policy: &mut dyn Policy) -> bool {
        let j = &self.jobs[job];
        if j.q.ended || !j.q.pending.is_empty() || !j.q.intake_closed() {
            return false;
        }
        let round = j.q.round;
        let absorbed = j.q.absorbed;
        let quorum = j.spec.quorum;
        let complete = absorbed >= quorum;

        let j = &mut self.jobs[job];
        j.q.ended = true;
        if complete {
            let model = finalize(&j.q.checkpoint, j.spec.fusion_kind, round)
                .expect("absorbed >= quorum >= 1 implies nonempty aggregate");
            let contributing = model.contributing_parties;
            j.models[round] = Some(model);
            self.trace.push(self.now, Rec::ModelReady { job, round, contributing });
            self.trace.push(self.now, Rec::RoundComplete { job, round, absorbed });
        } else {
            self.trace.push(
                self.now,
                Rec::RoundIncomplete { job, round, absorbed, quorum },
            );
        }

        let cmds = policy.on_round_ended(job, round, &self.view());
        self.apply(cmds, policy);

        // Retire dynamic instances serving this round; always-on carries over.
        if self.pool.mode() == AccountingMode::Dynamic {
            for slot in 0..self.instances.len() {
                let serving = self.instances[slot]
                    .as_ref()
                    .is_some_and(|i| i.job == job && i.round == round && i.phase != Phase::TearingDown);
                if serving {
                    self.teardown(slot);
                }
            }
        }

        self.advance_job(job);
        true
    }

    fn advance_job(&mut self, job: usize) {
        let j = &mut self.jobs[job];
        j.round += 1;
        if j.round >= j.spec.num_rounds {
            j.done = true;
            self.unfinished -= 1;
            self.trace.push(self.now, Rec::JobEnd { job });
            if let Some(slot) = j.ao_slot.take() {
                let iv = self.pool.close(slot, self.now);
                self.instances[slot] = None;
                self.trace.push(self.now, Rec::Bill { slot, start: iv.start, end: iv.end });
            }
            return;
        }
        let next_round = j.round;
        let next_start = if j.has_cutoff() {
            // Intermittent rounds run on the agreed t_wait cadence.
            let cadence = j.q.started_at + j.spec.t_wait.expect("validated");
            cadence.max(self.now)
        } else {
            self.now
        };
        // An always-on instance rolls straight into the next round.
        if let Some(slot) = j.ao_slot {
            if let Some(inst) = self.instances[slot].as_mut() {
                inst.round = next_round;
            }
        }
        self.events
            .push(next_start, EventKind::RoundStart { job, round: next_round });
    }

    // -- command application -------------------------------------------------

    fn apply(&mut self, cmds: Vec<Command>, policy: &mut dyn Policy) {
        for cmd in cmds {
            match cmd {
                Command::Deploy { slot, job, quota } => self.deploy(slot, job, quota, policy),
                Command::Preempt { slot } => self.preempt(slot),
                Command::SetTimer { job, round, at } => {
                    self.events.push(at, EventKind::TimerAlert { job, round });
                }
                Command::Trace(rec) => self.trace.push(self.now, rec),
            }
        }
    }

    fn deploy(&mut self, slot: usize, job: usize, quota: Option<usize>, policy: &mut dyn Policy) {
        assert!(
            self.instances[slot].is_none(),
            "policy deployed onto occupied slot {slot}"
        );
        let round = self.jobs[job].round;
        self.gen_counter += 1;
        let gen = self.gen_counter;
        self.pool.open(slot, self.now);
        if self.pool.mode() == AccountingMode::AlwaysOn {
            self.jobs[job].ao_slot = Some(slot);
        }
        self.trace.push(self.now, Rec::Deploy { slot, job, round });

        let overhead = self.scenario.cluster.deploy_overhead;
        let instant = overhead.is_zero() || self.pool.mode() == AccountingMode::AlwaysOn;
        let phase = if instant {
            Phase::Productive
        } else {
            Phase::Deploying { ready: self.now + overhead }
        };
        self.instances[slot] = Some(Instance {
            job,
            round,
            gen,
            phase,
            quota,
            taken: 0,
            inflight: None,
        });
        if instant {
            self.poke_slot(slot, policy);
        } else {
            self.events
                .push(self.now + overhead, EventKind::DeployDone { slot, gen });
        }
    }

    fn preempt(&mut self, slot: usize) {
        let inst = self.instances[slot].as_mut().expect("preempt of empty slot");
        debug_assert!(inst.phase != Phase::TearingDown);
        inst.inflight = None; // in-flight step aborted, nothing committed
        inst.phase = Phase::TearingDown;
        let (job, round, gen) = (inst.job, inst.round, inst.gen);
        let absorbed = self.jobs[job].q.absorbed;
        self.trace.push(self.now, Rec::Preempt { slot, job, round, absorbed });
        self.events.push(
            self.now + self.scenario.cluster.checkpoint_overhead,
            EventKind::ExecutorFreed { slot, gen },
        );
    }
}
