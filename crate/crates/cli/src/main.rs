use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use aggsim_core::model::microbench_t_pair;
use aggsim_core::reporting::{self, MetricsRecord, ReportFormat};
use aggsim_core::scenarios::{self, config};
use aggsim_core::simkernel;
use aggsim_core::StrategyKind;

#[derive(Parser)]
#[command(
    name = "aggsim",
    about = "Discrete-event simulator comparing federated-learning aggregation strategies",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario file and report its metrics.
    Run {
        scenario: PathBuf,
        /// Override the scenario's strategy
        /// (always_on | eager_serverless | batched:<k> | lazy | jit).
        #[arg(long)]
        strategy: Option<String>,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for report files (default: print to stdout only).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report format.
        #[arg(long, default_value = "table")]
        format: String,
        /// Also write the full event trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run every entry of a sweep file and emit one combined report.
    Sweep {
        sweep: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "table")]
        format: String,
    },
    /// Measure the pairwise fusion time for a model shape on this machine.
    BenchTpair {
        /// Comma-separated layer lengths, e.g. 1000,500,10.
        #[arg(long)]
        shape: String,
        /// Number of timing trials (minimum 11).
        #[arg(long, default_value_t = 21)]
        trials: usize,
        /// Worker threads used to run trials.
        #[arg(long, default_value_t = 1)]
        cores: usize,
    },
    /// Check a scenario file's invariants without running it.
    Validate { scenario: PathBuf },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Cmd::Run { scenario, strategy, seed, out, format, trace } => {
            let mut sc = config::load_scenario(&scenario)
                .with_context(|| format!("loading {}", scenario.display()))?;
            if let Some(s) = strategy {
                sc = sc.with_strategy(s.parse::<StrategyKind>()?);
            }
            if let Some(s) = seed {
                sc = sc.with_seed(s);
            }
            let format: ReportFormat = format.parse()?;
            let result = simkernel::run(&sc)?;
            if let Some(path) = trace {
                std::fs::write(&path, result.trace.export())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            let mut records = vec![reporting::metrics_from_trace(&sc, &result)];
            reporting::compare(&mut records);
            finish(&records, format, out)
        }
        Cmd::Sweep { sweep, out, format } => {
            let format: ReportFormat = format.parse()?;
            let entries = config::load_sweep(&sweep)
                .with_context(|| format!("loading {}", sweep.display()))?;
            if entries.is_empty() {
                bail!("sweep file has no runs");
            }
            let mut records: Vec<MetricsRecord> = Vec::with_capacity(entries.len());
            for entry in entries {
                let result = simkernel::run(&entry.scenario)?;
                records.push(reporting::metrics_from_trace(&entry.scenario, &result));
            }
            reporting::compare(&mut records);
            finish(&records, format, out)
        }
        Cmd::BenchTpair { shape, trials, cores } => {
            let shape: Vec<usize> = shape
                .split(',')
                .map(|s| s.trim().parse::<usize>().context("bad layer length"))
                .collect::<anyhow::Result<_>>()?;
            let t = microbench_t_pair(&shape, cores, trials)?;
            println!(
                "t_pair = {:.6} s  (median of {trials} trials, shape {shape:?}, {cores} worker(s))",
                t.as_secs_f64()
            );
            println!("cluster config line:  t_pair_s = {:.6}", t.as_secs_f64());
            Ok(())
        }
        Cmd::Validate { scenario } => {
            let sc = config::load_scenario(&scenario)
                .with_context(|| format!("loading {}", scenario.display()))?;
            let warnings = scenarios::validate(&sc)?;
            for w in &warnings {
                println!("warning: {w}");
            }
            println!(
                "ok: {} job(s), {} parties, strategy {}",
                sc.jobs.len(),
                sc.total_parties(),
                sc.strategy
            );
            Ok(())
        }
    }
}

fn finish(
    records: &[MetricsRecord],
    format: ReportFormat,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    if let Some(dir) = out {
        let path = reporting::emit_report(records, format, &dir)?;
        println!("wrote {}", path.display());
    } else {
        print!("{}", reporting::render(records, format));
    }
    Ok(())
}
