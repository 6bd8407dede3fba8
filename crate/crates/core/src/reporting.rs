//! Metrics, cost projection and report emission.
//!
//! Everything here is a pure function of the simulation trace: aggregation
//! latency is the gap between a round's last accepted update and the fused
//! model becoming available; container-seconds are summed from the billed
//! intervals; cost is container-seconds times a per-second container rate.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenarios::Scenario;
use crate::simkernel::{Rec, SimResult, SimTrace};
use crate::units::SimDuration;

/// Default container cost per second, USD.
pub const DEFAULT_RATE_USD_PER_S: f64 = 0.000_269_2;

/// Evaluation record for one (scenario, strategy) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub scenario: String,
    pub strategy: String,
    pub seed: u64,
    pub parties: usize,
    /// Aggregation latency per completed round (seconds), jobs concatenated
    /// in scenario order; `None` marks an incomplete round.
    pub round_latencies_s: Vec<Option<f64>>,
    /// Mean over completed rounds only.
    pub mean_latency_s: f64,
    /// Rounds that ended without reaching quorum; never averaged in.
    pub incomplete_rounds: usize,
    pub container_seconds: f64,
    pub cost_usd: f64,
    /// Percent container-second savings versus other strategies of the same
    /// scenario: (other - this) / other * 100.
    pub savings_vs: BTreeMap<String, f64>,
    /// Assumptions and warnings carried out of the run.
    pub notes: Vec<String>,
}

/// Latency of one round: fused-model availability minus the last accepted
/// update arrival. `None` when the round never completed.
pub fn aggregation_latency(trace: &SimTrace, job: usize, round: usize) -> Option<SimDuration> {
    let mut last_arrival = None;
    let mut ready = None;
    for r in trace.iter() {
        match &r.rec {
            Rec::Arrival { job: j, round: rr, accepted: true, .. } if (*j, *rr) == (job, round) => {
                last_arrival = Some(match last_arrival {
                    Some(t) if t > r.time => t,
                    _ => r.time,
                });
            }
            Rec::ModelReady { job: j, round: rr, .. } if (*j, *rr) == (job, round) => {
                ready = Some(r.time);
            }
            _ => {}
        }
    }
    Some(ready?.since(last_arrival?))
}

/// Projected cost of a run, rounded to four decimal places.
pub fn project_cost(container_seconds: f64, rate_usd_per_s: f64) -> f64 {
    assert!(container_seconds >= 0.0 && rate_usd_per_s >= 0.0);
    (container_seconds * rate_usd_per_s * 1e4).round() / 1e4
}

/// Builds the metrics record for a finished run.
pub fn metrics_from_trace(sc: &Scenario, result: &SimResult) -> MetricsRecord {
    // One pass over the trace collects per-round endpoints and the billing.
    let mut last_arrival: BTreeMap<(usize, usize), crate::units::SimTime> = BTreeMap::new();
    let mut ready: BTreeMap<(usize, usize), crate::units::SimTime> = BTreeMap::new();
    let mut incomplete: Vec<(usize, usize)> = Vec::new();
    let mut billed = 0.0f64;
    let mut notes = Vec::new();
    for r in result.trace.iter() {
        match &r.rec {
            Rec::Arrival { job, round, accepted: true, .. } => {
                let e = last_arrival.entry((*job, *round)).or_insert(r.time);
                if r.time > *e {
                    *e = r.time;
                }
            }
            Rec::ModelReady { job, round, .. } => {
                ready.insert((*job, *round), r.time);
            }
            Rec::RoundIncomplete { job, round, .. } => incomplete.push((*job, *round)),
            Rec::Bill { start, end, .. } => billed += end.since(*start).as_secs_f64(),
            Rec::Warn { text } => notes.push(text.clone()),
            _ => {}
        }
    }
    debug_assert!((billed - result.container_seconds).abs() < 1e-6);

    let mut round_latencies_s = Vec::new();
    for (job, setup) in sc.jobs.iter().enumerate() {
        for round in 0..setup.spec.num_rounds {
            let lat = ready
                .get(&(job, round))
                .and_then(|t| last_arrival.get(&(job, round)).map(|a| t.since(*a)));
            round_latencies_s.push(lat.map(SimDuration::as_secs_f64));
        }
    }
    let completed: Vec<f64> = round_latencies_s.iter().flatten().copied().collect();
    let mean_latency_s = if completed.is_empty() {
        0.0
    } else {
        completed.iter().sum::<f64>() / completed.len() as f64
    };
    if !sc.cluster.deploy_overhead.is_zero() || !sc.cluster.checkpoint_overhead.is_zero() {
        notes.push(format!(
            "assumed serverless overheads: deploy {:.3}s, checkpoint {:.3}s",
            sc.cluster.deploy_overhead.as_secs_f64(),
            sc.cluster.checkpoint_overhead.as_secs_f64()
        ));
    }

    MetricsRecord {
        scenario: sc.name.clone(),
        strategy: sc.strategy.to_string(),
        seed: sc.seed,
        parties: sc.total_parties(),
        round_latencies_s,
        mean_latency_s,
        incomplete_rounds: incomplete.len(),
        container_seconds: result.container_seconds,
        cost_usd: project_cost(result.container_seconds, DEFAULT_RATE_USD_PER_S),
        savings_vs: BTreeMap::new(),
        notes,
    }
}

/// Fills pairwise container-second savings across records of one scenario
/// and seed. Records from different scenarios are grouped by name first.
pub fn compare(records: &mut [MetricsRecord]) {
    let groups: BTreeMap<(String, u64), Vec<usize>> = {
        let mut g: BTreeMap<(String, u64), Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            g.entry((r.scenario.clone(), r.seed)).or_default().push(i);
        }
        g
    };
    for idxs in groups.values() {
        for &i in idxs {
            let mut savings = BTreeMap::new();
            for &o in idxs {
                if o == i || records[o].strategy == records[i].strategy {
                    continue;
                }
                let other = records[o].container_seconds;
                let this = records[i].container_seconds;
                if other == 0.0 {
                    if this == 0.0 {
                        savings.insert(records[o].strategy.clone(), 0.0);
                    }
                    continue;
                }
                savings.insert(records[o].strategy.clone(), (other - this) / other * 100.0);
            }
            records[i].savings_vs = savings;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Table,
    Plotdata,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "table" => Ok(ReportFormat::Table),
            "plotdata" => Ok(ReportFormat::Plotdata),
            other => Err(Error::Parse(format!(
                "unknown format '{other}' (csv | json | table | plotdata)"
            ))),
        }
    }
}

impl ReportFormat {
    pub fn file_name(self) -> &'static str {
        match self {
            ReportFormat::Csv => "report.csv",
            ReportFormat::Json => "report.json",
            ReportFormat::Table => "report.txt",
            ReportFormat::Plotdata => "plotdata.csv",
        }
    }
}

fn savings_columns(records: &[MetricsRecord]) -> Vec<String> {
    let mut cols: Vec<String> = records
        .iter()
        .flat_map(|r| r.savings_vs.keys().cloned())
        .collect();
    cols.sort();
    cols.dedup();
    cols
}

/// Renders records in the requested format.
pub fn render(records: &[MetricsRecord], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => render_csv(records),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(records).expect("records serialize");
            s.push('\n');
            s
        }
        ReportFormat::Table => render_table(records),
        ReportFormat::Plotdata => render_plotdata(records),
    }
}

/// Writes the rendered report into `out_dir`, returning the file path.
pub fn emit_report(
    records: &[MetricsRecord],
    format: ReportFormat,
    out_dir: &Path,
) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format.file_name());
    std::fs::write(&path, render(records, format))?;
    Ok(path)
}

fn cells(r: &MetricsRecord, savings_cols: &[String]) -> Vec<String> {
    let mut row = vec![
        r.scenario.clone(),
        r.strategy.clone(),
        r.parties.to_string(),
        format_f64(r.mean_latency_s),
        format_f64(r.container_seconds),
        format_f64(r.cost_usd),
    ];
    for col in savings_cols {
        row.push(
            r.savings_vs
                .get(col)
                .map(|v| format_f64(*v))
                .unwrap_or_default(),
        );
    }
    row.push(r.incomplete_rounds.to_string());
    row
}

fn header(savings_cols: &[String]) -> Vec<String> {
    let mut h = vec![
        "scenario".to_string(),
        "strategy".to_string(),
        "parties".to_string(),
        "mean_latency_s".to_string(),
        "container_seconds".to_string(),
        "cost_usd".to_string(),
    ];
    for col in savings_cols {
        h.push(format!("savings_vs_{}_pct", col.replace(':', "_")));
    }
    h.push("incomplete_rounds".to_string());
    h
}

fn format_f64(v: f64) -> String {
    // Shortest round-trip form, shared by CSV and the table so every format
    // carries identical numeric values.
    format!("{v}")
}

fn render_csv(records: &[MetricsRecord]) -> String {
    let cols = savings_columns(records);
    let mut out = String::new();
    let _ = writeln!(out, "{}", header(&cols).join(","));
    for r in records {
        let _ = writeln!(out, "{}", cells(r, &cols).join(","));
    }
    out
}

fn render_table(records: &[MetricsRecord]) -> String {
    let cols = savings_columns(records);
    let mut rows = vec![header(&cols)];
    rows.extend(records.iter().map(|r| cells(r, &cols)));
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", line.join("  "));
        if i == 0 {
            let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
        }
    }
    let notes: Vec<&String> = records.iter().flat_map(|r| r.notes.iter()).collect();
    if !notes.is_empty() {
        let _ = writeln!(out);
        let mut seen = std::collections::BTreeSet::new();
        for n in notes {
            if seen.insert(n) {
                let _ = writeln!(out, "note: {n}");
            }
        }
    }
    out
}

fn render_plotdata(records: &[MetricsRecord]) -> String {
    let mut out = String::from("metric,strategy,parties,value\n");
    for metric in ["mean_latency_s", "container_seconds", "cost_usd"] {
        for r in records {
            let v = match metric {
                "mean_latency_s" => r.mean_latency_s,
                "container_seconds" => r.container_seconds,
                _ => r.cost_usd,
            };
            let _ = writeln!(out, "{metric},{},{},{}", r.strategy, r.parties, format_f64(v));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(strategy: &str, cs: f64) -> MetricsRecord {
        MetricsRecord {
            scenario: "s".into(),
            strategy: strategy.into(),
            seed: 1,
            parties: 10,
            round_latencies_s: vec![Some(1.0), Some(2.0)],
            mean_latency_s: 1.5,
            incomplete_rounds: 0,
            container_seconds: cs,
            cost_usd: project_cost(cs, DEFAULT_RATE_USD_PER_S),
            savings_vs: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    #[test]
    fn latency_is_zero_when_model_ready_at_last_arrival() {
        use crate::simkernel::{Rec, SimTrace};
        use crate::units::SimTime;
        let mut trace = SimTrace::default();
        let t = SimTime::from_secs_f64(20.0);
        trace.push(
            t,
            Rec::Arrival { job: 0, round: 0, party: "p".into(), accepted: true },
        );
        trace.push(t, Rec::ModelReady { job: 0, round: 0, contributing: 1 });
        assert_eq!(aggregation_latency(&trace, 0, 0), Some(SimDuration::ZERO));
        // Incomplete rounds have no latency at all.
        assert_eq!(aggregation_latency(&trace, 0, 1), None);
    }

    #[test]
    fn cost_projection_reference_values() {
        assert_eq!(project_cost(179.0, DEFAULT_RATE_USD_PER_S), 0.0482);
        assert_eq!(project_cost(1723.0, DEFAULT_RATE_USD_PER_S), 0.4638);
        assert_eq!(project_cost(0.0, DEFAULT_RATE_USD_PER_S), 0.0);
        assert_eq!(format!("{:.2}", project_cost(179.0, DEFAULT_RATE_USD_PER_S)), "0.05");
        assert_eq!(format!("{:.2}", project_cost(1723.0, DEFAULT_RATE_USD_PER_S)), "0.46");
    }

    #[test]
    fn cost_is_linear() {
        let a = project_cost(100.0, 0.001);
        let b = project_cost(200.0, 0.001);
        let c = project_cost(100.0, 0.002);
        assert_eq!(b, 2.0 * a);
        assert_eq!(c, 2.0 * a);
    }

    #[test]
    fn savings_reference_values() {
        let mut records = vec![record("jit", 179.0), record("always_on", 1723.0)];
        compare(&mut records);
        let s = records[0].savings_vs["always_on"];
        assert!((s - 89.61).abs() < 0.01, "{s}");
        let reverse = records[1].savings_vs["jit"];
        assert!(reverse < 0.0);
    }

    #[test]
    fn savings_edge_cases() {
        let mut records = vec![record("jit", 5.0), record("lazy", 5.0)];
        compare(&mut records);
        assert_eq!(records[0].savings_vs["lazy"], 0.0);

        let mut records = vec![record("jit", 0.0), record("lazy", 7.0)];
        compare(&mut records);
        assert_eq!(records[0].savings_vs["lazy"], 100.0);
    }

    #[test]
    fn csv_has_header_plus_row_per_record() {
        let mut records = vec![record("jit", 1.0), record("lazy", 2.0)];
        compare(&mut records);
        let csv = render_csv(&records);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("scenario,strategy,parties,mean_latency_s,container_seconds,cost_usd,savings_vs_"));
    }

    #[test]
    fn json_round_trips() {
        let mut records = vec![record("jit", 1.5), record("always_on", 4.5)];
        compare(&mut records);
        let json = render(&records, ReportFormat::Json);
        let parsed: Vec<MetricsRecord> = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, records);
    }

    #[test]
    fn csv_and_json_carry_identical_numbers() {
        let mut records = vec![record("jit", 123.456789), record("lazy", 987.654321)];
        compare(&mut records);
        let csv = render(&records, ReportFormat::Csv);
        let json: Vec<MetricsRecord> =
            serde_json::from_str(&render(&records, ReportFormat::Json)).unwrap();
        for r in &json {
            assert!(csv.contains(&format_f64(r.container_seconds)));
            assert!(csv.contains(&format_f64(r.mean_latency_s)));
            assert!(csv.contains(&format_f64(r.cost_usd)));
        }
    }

    #[test]
    fn table_columns_fit_widest_cell() {
        let records = vec![record("jit", 1.0), record("a_rather_long_strategy_name", 2.0)];
        let table = render_table(&records);
        // Cells are padded to their column's widest value, so all data lines
        // share one length and the long strategy name appears unclipped.
        let lines: Vec<&str> = table.lines().take(4).collect();
        assert_eq!(lines[0].len(), lines[2].len());
        assert_eq!(lines[2].len(), lines[3].len());
        assert!(table.contains("a_rather_long_strategy_name"));
    }
}
