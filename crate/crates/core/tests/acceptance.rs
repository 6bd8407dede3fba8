//! Acceptance suite: one test per gate criterion, each printing a pass line
//! with its measured numbers. Run with `cargo test --test acceptance`.

use std::time::Instant;

use aggsim_core::estimator::{estimate_round, fit_linear};
use aggsim_core::model::{finalize, fuse_pair, lift, random_layers, FusionKind, ModelUpdate, PartyId};
use aggsim_core::reporting::{metrics_from_trace, project_cost, DEFAULT_RATE_USD_PER_S};
use aggsim_core::scenarios::builders::{
    fig2_scenario, isolate_job, matrix_scenario, preemption_scenario, reference_matrix,
};
use aggsim_core::scenarios::{batch_trigger_for, presets, Population};
use aggsim_core::simkernel::{run, Rec, SimTrace};
use aggsim_core::{Scenario, SimDuration, SimTime, StrategyKind};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MATRIX_ROUNDS: usize = 50;
const MATRIX_SEED: u64 = 20240;

fn model_ready(trace: &SimTrace, job: usize, round: usize) -> Option<SimTime> {
    trace.iter().find_map(|r| match r.rec {
        Rec::ModelReady { job: j, round: rr, .. } if (j, rr) == (job, round) => Some(r.time),
        _ => None,
    })
}

/// Narrowest accepted-arrival span over a run's rounds, seconds.
fn min_round_arrival_span(trace: &SimTrace) -> f64 {
    use std::collections::BTreeMap;
    let mut spans: BTreeMap<(usize, usize), (SimTime, SimTime)> = BTreeMap::new();
    for r in trace.iter() {
        if let Rec::Arrival { job, round, accepted: true, .. } = r.rec {
            let e = spans.entry((job, round)).or_insert((r.time, r.time));
            e.0 = e.0.min(r.time);
            e.1 = e.1.max(r.time);
        }
    }
    spans
        .values()
        .map(|(a, b)| b.since(*a).as_secs_f64())
        .fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------------------

#[test]
fn c1_canonical_six_party_timeline() {
    let started = Instant::now();

    let ao = run(&fig2_scenario(StrategyKind::EagerAlwaysOn)).unwrap();
    assert_eq!(model_ready(&ao.trace, 0, 0), Some(SimTime::from_secs_f64(21.0)));
    let idle = 1.0 - ao.busy_seconds / ao.container_seconds;
    assert!((idle - 0.714).abs() < 0.001, "always-on idle fraction {idle}");

    let lazy = run(&fig2_scenario(StrategyKind::Lazy)).unwrap();
    assert_eq!(model_ready(&lazy.trace, 0, 0), Some(SimTime::from_secs_f64(26.0)));

    let jit = run(&fig2_scenario(StrategyKind::Jit)).unwrap();
    let deadline = jit
        .trace
        .iter()
        .find_map(|r| match r.rec {
            Rec::Task { state: "pending", deadline, .. } => Some(deadline),
            _ => None,
        })
        .expect("jit task created");
    assert_eq!(deadline, SimTime::from_secs_f64(14.0));
    let done = model_ready(&jit.trace, 0, 0).unwrap().as_secs_f64();
    assert!((done - 21.0).abs() <= 1.0, "jit completion {done}");

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "acceptance c1 fig2-analytical: PASS (always_on done 21.0 idle {:.3}, lazy done 26.0, \
         jit deadline 14.0 done {done:.1}; {elapsed:?})",
        idle
    );
}

// ---------------------------------------------------------------------------

/// Direct-formula oracle: one loop accumulating sum(w_i x_i) and sum(w_i).
fn direct_weighted_mean(updates: &[ModelUpdate]) -> Vec<Vec<f64>> {
    let mut sums: Vec<Vec<f64>> = updates[0].layers.iter().map(|l| vec![0.0; l.len()]).collect();
    let mut total = 0.0;
    for u in updates {
        total += u.sample_weight;
        for (s, l) in sums.iter_mut().zip(&u.layers) {
            for (acc, x) in s.iter_mut().zip(l) {
                *acc += u.sample_weight * x;
            }
        }
    }
    for layer in sums.iter_mut() {
        for v in layer.iter_mut() {
            *v /= total;
        }
    }
    sums
}

fn random_fold(updates: &[ModelUpdate], rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    // Random fold order: shuffle, then reduce random adjacent pairs.
    let mut items: Vec<_> = updates.iter().map(lift).collect();
    while items.len() > 1 {
        let i = rng.gen_range(0..items.len() - 1);
        let merged = fuse_pair(&items[i], &items[i + 1]).unwrap();
        items[i] = merged;
        items.remove(i + 1);
    }
    finalize(&items[0], FusionKind::WeightedMean, 0).unwrap().layers
}

fn max_rel_err(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for (la, lb) in a.iter().zip(b) {
        for (x, y) in la.iter().zip(lb) {
            worst = worst.max((x - y).abs() / x.abs().max(y.abs()).max(1e-300));
        }
    }
    worst
}

#[test]
fn c2_fusion_matches_direct_formula_for_any_fold_order() {
    let started = Instant::now();
    let mut worst = 0.0f64;
    for case in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + case);
        let n_layers = rng.gen_range(2..=5);
        let shape: Vec<usize> = (0..n_layers).map(|_| rng.gen_range(1..=32)).collect();
        let n = rng.gen_range(1..=64);
        let updates: Vec<ModelUpdate> = (0..n)
            .map(|i| ModelUpdate {
                party_id: PartyId(format!("p{i}")),
                round: 0,
                layers: random_layers(&shape, &mut rng),
                sample_weight: rng.gen_range(0.25..50.0),
                arrival_time: SimTime::ZERO,
            })
            .collect();
        let oracle = direct_weighted_mean(&updates);
        for _ in 0..3 {
            let folded = random_fold(&updates, &mut rng);
            worst = worst.max(max_rel_err(&folded, &oracle));
        }
    }
    assert!(worst < 1e-9, "worst relative error {worst}");
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!(
        "acceptance c2 fusion-oracle: PASS (100 multisets x 3 fold orders, worst rel err {worst:.2e}; {elapsed:?})"
    );
}

// ---------------------------------------------------------------------------

struct MatrixRun {
    scenario: Scenario,
    jit: f64,
    batched: f64,
    eager: f64,
    always_on: f64,
    arrival_span_s: f64,
    t_agg_s: f64,
}

fn run_matrix() -> Vec<MatrixRun> {
    reference_matrix(MATRIX_ROUNDS, MATRIX_SEED)
        .into_iter()
        .map(|sc| {
            let n = sc.total_parties();
            let strategies = [
                StrategyKind::Jit,
                StrategyKind::BatchedServerless(batch_trigger_for(n)),
                StrategyKind::EagerServerless,
                StrategyKind::EagerAlwaysOn,
            ];
            let mut cs = [0.0f64; 4];
            let mut span = f64::INFINITY;
            for (i, s) in strategies.iter().enumerate() {
                let out = run(&sc.clone().with_strategy(*s)).expect("matrix run");
                cs[i] = out.container_seconds;
                if i == 0 {
                    span = min_round_arrival_span(&out.trace);
                }
            }
            let est = estimate_round(
                &sc.jobs[0].spec,
                &sc.jobs[0].parties,
                &sc.cluster,
                sc.calibration.as_ref(),
            )
            .unwrap();
            MatrixRun {
                jit: cs[0],
                batched: cs[1],
                eager: cs[2],
                always_on: cs[3],
                arrival_span_s: span,
                t_agg_s: est.t_agg.as_secs_f64(),
                scenario: sc,
            }
        })
        .collect()
}

#[test]
fn c3_container_second_ordering_across_matrix() {
    let started = Instant::now();
    let runs = run_matrix();
    assert!(runs.len() >= 24, "matrix has {} scenarios", runs.len());
    for r in &runs {
        let name = &r.scenario.name;
        let strict = r.arrival_span_s > r.t_agg_s;
        let ordered = if strict {
            r.jit < r.batched && r.batched < r.eager && r.eager < r.always_on
        } else {
            r.jit <= r.batched && r.batched <= r.eager && r.eager <= r.always_on
        };
        assert!(
            ordered,
            "{name}: jit {:.1} | batched {:.1} | eager {:.1} | always_on {:.1} \
             (span {:.1}s, t_agg {:.2}s, strict {strict})",
            r.jit, r.batched, r.eager, r.always_on, r.arrival_span_s, r.t_agg_s
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "acceptance c3 resource-ordering: PASS ({} scenarios x 4 strategies, \
         jit <= batched <= eager_serverless <= always_on everywhere; {elapsed:?})",
        runs.len()
    );
}

// ---------------------------------------------------------------------------

/// First time each jit task reached running or done, against its deadline.
fn assert_deadline_safety(trace: &SimTrace, checkpoint_overhead: SimDuration) {
    use std::collections::BTreeMap;
    let mut deadline: BTreeMap<(usize, usize), SimTime> = BTreeMap::new();
    let mut started: BTreeMap<(usize, usize), SimTime> = BTreeMap::new();
    for r in trace.iter() {
        if let Rec::Task { job, round, state, deadline: d, .. } = r.rec {
            match state {
                "pending" => {
                    deadline.entry((job, round)).or_insert(d);
                }
                "running" | "done" => {
                    started.entry((job, round)).or_insert(r.time);
                }
                _ => {}
            }
        }
    }
    for (key, d) in &deadline {
        let bound = *d + checkpoint_overhead;
        let s = started
            .get(key)
            .unwrap_or_else(|| panic!("task {key:?} never ran"));
        assert!(
            *s <= bound,
            "task {key:?} first ran at {s}, after deadline {d} + checkpoint"
        );
    }
}

#[test]
fn c4_latency_parity_and_noise_bound() {
    let started = Instant::now();

    // Exact estimates, zero overheads, active populations: the mean jit
    // latency may exceed always-on by at most one t_pair.
    let mut parity_checked = 0;
    let mut worst_gap = f64::NEG_INFINITY;
    for population in [Population::ActiveHomog, Population::ActiveHeterog] {
        for &n in &[10usize, 100, 1000] {
            for preset in presets::ALL_PRESETS {
                let sc = matrix_scenario(n, population, preset, MATRIX_ROUNDS, StrategyKind::Jit, MATRIX_SEED)
                    .zero_overheads();
                let t_pair = sc.cluster.t_pair.as_secs_f64();
                let jit = run(&sc).unwrap();
                let ao = run(&sc.clone().with_strategy(StrategyKind::EagerAlwaysOn)).unwrap();
                let jit_mean = metrics_from_trace(&sc, &jit).mean_latency_s;
                let ao_sc = sc.clone().with_strategy(StrategyKind::EagerAlwaysOn);
                let ao_mean = metrics_from_trace(&ao_sc, &ao).mean_latency_s;
                let gap = jit_mean - ao_mean;
                worst_gap = worst_gap.max(gap);
                assert!(
                    gap <= t_pair + 1e-9,
                    "{}: jit mean {jit_mean:.3}s vs always_on {ao_mean:.3}s",
                    sc.name
                );
                parity_checked += 1;
            }
        }
    }

    // +-20% estimate noise: forced triggering keeps every round's latency
    // within t_agg + checkpoint_overhead, and every task starts by its
    // deadline plus one checkpoint.
    let mut noise_checked = 0;
    for sc in reference_matrix(MATRIX_ROUNDS, MATRIX_SEED) {
        let sc = sc.with_noise(0.2);
        let est = estimate_round(
            &sc.jobs[0].spec,
            &sc.jobs[0].parties,
            &sc.cluster,
            sc.calibration.as_ref(),
        )
        .unwrap();
        let bound = est.t_agg.as_secs_f64() + sc.cluster.checkpoint_overhead.as_secs_f64();
        let out = run(&sc).unwrap();
        let metrics = metrics_from_trace(&sc, &out);
        for (i, lat) in metrics.round_latencies_s.iter().enumerate() {
            let lat = lat.expect("rounds complete");
            assert!(
                lat <= bound + 1e-9,
                "{} round {i}: latency {lat:.3}s exceeds t_agg + checkpoint = {bound:.3}s",
                sc.name
            );
        }
        assert_deadline_safety(&out.trace, sc.cluster.checkpoint_overhead);
        noise_checked += 1;
    }

    let elapsed = started.elapsed();
    println!(
        "acceptance c4 latency-parity: PASS ({parity_checked} exact/zero-overhead scenarios, \
         worst jit-vs-always-on gap {worst_gap:.4}s <= one t_pair; {noise_checked} noisy scenarios \
         within t_agg + checkpoint with deadline safety; {elapsed:?})"
    );
}

// ---------------------------------------------------------------------------

#[test]
fn c5_savings_on_spread_hundred_party_round() {
    let started = Instant::now();
    let preset = &presets::EFFICIENTNET_CIFAR100;
    let sc = matrix_scenario(
        100,
        Population::ActiveHomog,
        preset,
        MATRIX_ROUNDS,
        StrategyKind::Jit,
        MATRIX_SEED,
    );
    let jit = run(&sc).unwrap().container_seconds;
    let eager = run(&sc.clone().with_strategy(StrategyKind::EagerServerless))
        .unwrap()
        .container_seconds;
    let always_on = run(&sc.clone().with_strategy(StrategyKind::EagerAlwaysOn))
        .unwrap()
        .container_seconds;
    let vs_eager = (eager - jit) / eager * 100.0;
    let vs_ao = (always_on - jit) / always_on * 100.0;
    assert!(vs_eager >= 50.0, "savings vs eager serverless {vs_eager:.1}%");
    assert!(vs_ao >= 85.0, "savings vs always-on {vs_ao:.1}%");
    let elapsed = started.elapsed();
    println!(
        "acceptance c5 savings-magnitude: PASS (jit {jit:.0}cs vs eager {eager:.0}cs = {vs_eager:.1}% \
         saved, vs always_on {always_on:.0}cs = {vs_ao:.1}% saved; {elapsed:?})"
    );
}

// ---------------------------------------------------------------------------

#[test]
fn c6_estimator_recovers_lines_and_fig2_t_agg() {
    // Exact line.
    let exact: Vec<(f64, f64)> = (0..40).map(|i| (i as f64, 3.0 * i as f64 + 5.0)).collect();
    let m = fit_linear(&exact).unwrap();
    assert!((m.slope - 3.0).abs() < 1e-9, "slope {}", m.slope);
    assert!((m.intercept - 5.0).abs() < 1e-9, "intercept {}", m.intercept);
    assert!(m.residual_rms < 1e-9);

    // Noisy line: 200 points, sigma = 0.01 Gaussian noise, fixed seed.
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let noisy: Vec<(f64, f64)> = (0..200)
        .map(|i| {
            let x = i as f64 / 10.0;
            let noise: f64 = rand_distr::Distribution::sample(
                &rand_distr::Normal::new(0.0, 0.01).unwrap(),
                &mut rng,
            );
            (x, 3.0 * x + 5.0 + noise)
        })
        .collect();
    let m = fit_linear(&noisy).unwrap();
    assert!((m.slope - 3.0).abs() / 3.0 < 0.01, "noisy slope {}", m.slope);
    assert!((m.intercept - 5.0).abs() / 5.0 < 0.01, "noisy intercept {}", m.intercept);

    // Canonical six-party inputs: t_agg exactly six seconds.
    let sc = fig2_scenario(StrategyKind::Jit);
    let est = estimate_round(&sc.jobs[0].spec, &sc.jobs[0].parties, &sc.cluster, None).unwrap();
    assert_eq!(est.t_agg, SimDuration::from_secs_f64(6.0));
    assert_eq!(est.t_rnd, SimDuration::from_secs_f64(20.0));

    println!(
        "acceptance c6 estimator-correctness: PASS (exact fit to 1e-9, noisy fit slope {:.4}, \
         fig2 t_agg = 6s exactly)",
        m.slope
    );
}

// ---------------------------------------------------------------------------

#[test]
fn c7_identical_seeds_give_byte_identical_traces_and_reports() {
    let started = Instant::now();
    let scenarios = vec![
        fig2_scenario(StrategyKind::Jit),
        matrix_scenario(
            100,
            Population::IntermittentHeterog,
            &presets::VGG16_RVLCDIP,
            5,
            StrategyKind::Jit,
            9,
        ),
        matrix_scenario(
            10,
            Population::ActiveHeterog,
            &presets::INCEPTIONV4_INATURALIST,
            5,
            StrategyKind::BatchedServerless(2),
            9,
        ),
    ];
    for sc in scenarios {
        let a = run(&sc).unwrap();
        let b = run(&sc).unwrap();
        assert_eq!(a.trace.export(), b.trace.export(), "{}: trace drift", sc.name);
        let ra = serde_json::to_string(&metrics_from_trace(&sc, &a)).unwrap();
        let rb = serde_json::to_string(&metrics_from_trace(&sc, &b)).unwrap();
        assert_eq!(ra, rb, "{}: report drift", sc.name);
    }
    println!(
        "acceptance c7 determinism: PASS (3 scenarios run twice, traces and reports byte-identical; {:?})",
        started.elapsed()
    );
}

// ---------------------------------------------------------------------------

#[test]
fn c8_preemption_preserves_final_models() {
    let started = Instant::now();
    let sc = preemption_scenario();
    let out = run(&sc).unwrap();
    let preempts = out
        .trace
        .iter()
        .filter(|r| matches!(r.rec, Rec::Preempt { .. }))
        .count();
    assert!(preempts >= 3, "saw only {preempts} preemptions");

    let mut worst = 0.0f64;
    for job in 0..sc.jobs.len() {
        let alone = run(&isolate_job(&sc, job)).unwrap();
        for (contended, isolated) in out.models[job].iter().zip(&alone.models[0]) {
            let (c, i) = (
                contended.as_ref().expect("round complete"),
                isolated.as_ref().expect("round complete"),
            );
            worst = worst.max(max_rel_err(&c.layers, &i.layers));
        }
    }
    assert!(worst < 1e-9, "model divergence {worst}");
    println!(
        "acceptance c8 preemption-equivalence: PASS ({preempts} preemptions, worst model \
         divergence {worst:.2e} vs isolated runs; {:?})",
        started.elapsed()
    );
}

// ---------------------------------------------------------------------------

#[test]
fn c9_cost_projection_reference_points() {
    let a = project_cost(179.0, DEFAULT_RATE_USD_PER_S);
    let b = project_cost(1723.0, DEFAULT_RATE_USD_PER_S);
    assert_eq!(a, 0.0482);
    assert_eq!(b, 0.4638);
    assert_eq!(format!("{a:.2}"), "0.05");
    assert_eq!(format!("{b:.2}"), "0.46");
    println!("acceptance c9 cost-projection: PASS (179cs -> ${a}, 1723cs -> ${b})");
}
