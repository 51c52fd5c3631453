//! CSV artifacts. Column order and float formatting are fixed so that a
//! given config and seed always produce the same bytes.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::config::Strategy;
use super::metrics::{Aggregate, RunMetrics};
use super::run::{CompareRow, EdgeRow, SweepPoint};
use super::HarnessError;
use crate::control::ControlTraceRow;
use crate::routing::DecisionRow;

#[derive(Serialize)]
struct RunRow {
    run_index: u32,
    strategy: Strategy,
    completion_time: u64,
    mean_travel_time: f64,
    median_travel_time: f64,
    switches: u64,
    truncated: bool,
}

#[derive(Serialize)]
struct SummaryRow {
    strategy: Strategy,
    runs: usize,
    completed: usize,
    completion_mean: f64,
    completion_std: f64,
    travel_mean: f64,
    travel_std: f64,
    median_travel_mean: f64,
    distance_mean: f64,
    switches_mean: f64,
}

#[derive(Serialize)]
struct SweepRow<'a> {
    param: &'a str,
    value: f64,
    strategy: Strategy,
    runs: usize,
    completed: usize,
    completion_mean: f64,
    completion_std: f64,
    travel_mean: f64,
    travel_std: f64,
    switches_mean: f64,
}

#[derive(Serialize)]
struct SweepRunRow<'a> {
    param: &'a str,
    value: f64,
    run_index: u32,
    strategy: Strategy,
    completion_time: u64,
    mean_travel_time: f64,
    median_travel_time: f64,
    switches: u64,
    truncated: bool,
}

#[derive(Serialize)]
struct DecisionCsvRow {
    run_index: u32,
    tick: u64,
    vehicle: u32,
    current_est: f64,
    best_alt_est: f64,
    recommended: bool,
    complied: bool,
}

#[derive(Serialize)]
struct ControlCsvRow<'a> {
    run_index: u32,
    tick: u64,
    controller: &'a str,
    kind: &'a str,
    action: &'a str,
    inputs_digest: &'a str,
}

fn write_rows<W: Write, T: Serialize>(out: W, rows: impl IntoIterator<Item = T>) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))
}

/// Header-only output still needs the header; csv writes it lazily.
fn write_rows_with_header<W: Write, T: Serialize>(mut out: W, header: &str, rows: Vec<T>) -> Result<(), HarnessError> {
    if rows.is_empty() {
        writeln!(out, "{header}").map_err(|e| HarnessError::Io(e.to_string()))?;
        return Ok(());
    }
    write_rows(out, rows)
}

pub const RUNS_HEADER: &str = "run_index,strategy,completion_time,mean_travel_time,median_travel_time,switches,truncated";

pub fn write_runs<W: Write>(out: W, runs: &[RunMetrics]) -> Result<(), HarnessError> {
    let rows: Vec<RunRow> = runs
        .iter()
        .map(|r| RunRow {
            run_index: r.run_index,
            strategy: r.strategy,
            completion_time: r.completion_time,
            mean_travel_time: r.mean_travel_time,
            median_travel_time: r.median_travel_time,
            switches: r.switches,
            truncated: r.truncated,
        })
        .collect();
    write_rows_with_header(out, RUNS_HEADER, rows)
}

pub fn write_summary<W: Write>(out: W, aggregates: &[Aggregate]) -> Result<(), HarnessError> {
    write_rows(
        out,
        aggregates.iter().map(|a| SummaryRow {
            strategy: a.strategy,
            runs: a.runs,
            completed: a.completed,
            completion_mean: a.completion_mean,
            completion_std: a.completion_std,
            travel_mean: a.travel_mean,
            travel_std: a.travel_std,
            median_travel_mean: a.median_travel_mean,
            distance_mean: a.distance_mean,
            switches_mean: a.switches_mean,
        }),
    )
}

pub fn write_compare<W: Write>(out: W, rows: &[CompareRow]) -> Result<(), HarnessError> {
    write_rows(out, rows)
}

pub fn write_sweep<W: Write>(out: W, param: &str, points: &[SweepPoint]) -> Result<(), HarnessError> {
    write_rows(
        out,
        points.iter().map(|p| {
            let a = &p.report.aggregate;
            SweepRow {
                param,
                value: p.value,
                strategy: a.strategy,
                runs: a.runs,
                completed: a.completed,
                completion_mean: a.completion_mean,
                completion_std: a.completion_std,
                travel_mean: a.travel_mean,
                travel_std: a.travel_std,
                switches_mean: a.switches_mean,
            }
        }),
    )
}

pub fn write_sweep_runs<W: Write>(out: W, param: &str, points: &[SweepPoint]) -> Result<(), HarnessError> {
    write_rows(
        out,
        points.iter().flat_map(|p| {
            p.report.runs.iter().map(move |r| SweepRunRow {
                param,
                value: p.value,
                run_index: r.run_index,
                strategy: r.strategy,
                completion_time: r.completion_time,
                mean_travel_time: r.mean_travel_time,
                median_travel_time: r.median_travel_time,
                switches: r.switches,
                truncated: r.truncated,
            })
        }),
    )
}

pub fn write_edges<W: Write>(out: W, rows: &[EdgeRow]) -> Result<(), HarnessError> {
    write_rows_with_header(out, "run_index,tick,edge_id,count", rows.iter().collect())
}

pub fn write_decisions<W: Write>(out: W, rows: &[(u32, DecisionRow)]) -> Result<(), HarnessError> {
    write_rows_with_header(
        out,
        "run_index,tick,vehicle,current_est,best_alt_est,recommended,complied",
        rows.iter()
            .map(|(run, d)| DecisionCsvRow {
                run_index: *run,
                tick: d.tick,
                vehicle: d.vehicle,
                current_est: d.current_est,
                best_alt_est: d.best_alt_est,
                recommended: d.recommended,
                complied: d.complied,
            })
            .collect(),
    )
}

pub fn write_control<W: Write>(out: W, rows: &[(u32, ControlTraceRow)]) -> Result<(), HarnessError> {
    write_rows_with_header(
        out,
        "run_index,tick,controller,kind,action,inputs_digest",
        rows.iter()
            .map(|(run, c)| ControlCsvRow {
                run_index: *run,
                tick: c.tick,
                controller: &c.controller,
                kind: &c.kind,
                action: &c.action,
                inputs_digest: &c.inputs_digest,
            })
            .collect(),
    )
}

/// Creates `dir/name` (and `dir`) for writing.
pub fn create(dir: &Path, name: &str) -> Result<File, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    File::create(&path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}
