//! Versioned file formats emitted by the harness.
//!
//! Every CSV starts with a `# schema: <name>/<version>` comment line
//! followed by a header row; floats are written with Rust's shortest
//! round-trip formatting, so identical data produces identical bytes.
//!
//! - `scalability.csv` (`scalability/1`): one row per bisection repeat of
//!   each (problem, mode, dimension) with the chosen population size, the
//!   corrected evaluation count, the success fraction, and one `r<i>`
//!   column per repeat holding the repeat's evaluation count, or `fail`.
//! - `bisection.json` (`bisection/1`): every probed size of every bisection
//!   with per-repeat outcomes plus the chosen size.
//! - `dsm_<problem>_<seed>.csv` (`dsm/1`): full-precision row-major strength
//!   matrix, one row per variable; `dsm_<problem>_<seed>.json` sidecar with
//!   generation, problem, and seed; `dsm_<problem>_avg.csv` for the
//!   element-wise mean over a run set.
//! - `stats.csv` (`stats/1`): pairwise Mann-Whitney table per problem and
//!   category (with/without a-priori VIG knowledge).
//! - `trace_*.csv` (`trace/1`): generation, best objective, evaluations.
//! - run result JSON (`run/1`): the full run outcome and its configuration.

use crate::bench::{BisectionTrace, StatRow};
use gomea_core::gomea::{EaConfig, RunResult};
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

/// One scalability record: the corrected metric at a population size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalabilityRecord {
    pub problem: String,
    pub mode: String,
    pub dimension: usize,
    pub population_size: usize,
    pub corrected_evaluations: f64,
    pub success_fraction: f64,
    pub repeat_evaluations: Vec<Option<f64>>,
}

fn fmt_float(value: f64) -> String {
    if value.is_infinite() {
        "inf".to_string()
    } else {
        format!("{value}")
    }
}

pub fn write_scalability_csv(path: &Path, records: &[ScalabilityRecord]) -> io::Result<()> {
    let repeats = records.iter().map(|r| r.repeat_evaluations.len()).max().unwrap_or(0);
    let mut out = String::from("# schema: scalability/1\n");
    out.push_str("problem,mode,dimension,population_size,corrected_evaluations,success_fraction");
    for i in 0..repeats {
        let _ = write!(out, ",r{i}");
    }
    out.push('\n');
    for r in records {
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            r.problem,
            r.mode,
            r.dimension,
            r.population_size,
            fmt_float(r.corrected_evaluations),
            fmt_float(r.success_fraction)
        );
        for i in 0..repeats {
            match r.repeat_evaluations.get(i).copied().flatten() {
                Some(evals) => {
                    let _ = write!(out, ",{}", fmt_float(evals));
                }
                None => out.push_str(",fail"),
            }
        }
        out.push('\n');
    }
    fs::write(path, out)
}

#[derive(Serialize)]
struct BisectionFile<'a> {
    schema: &'static str,
    master_seed: u64,
    traces: &'a [BisectionTrace],
}

pub fn write_bisection_json(
    path: &Path,
    master_seed: u64,
    traces: &[BisectionTrace],
) -> io::Result<()> {
    let file = BisectionFile { schema: "bisection/1", master_seed, traces };
    let json = serde_json::to_string_pretty(&file).expect("serializable");
    fs::write(path, json)
}

/// Sidecar metadata for one exported DSM.
#[derive(Debug, Clone, Serialize)]
pub struct DsmSidecar {
    pub schema: &'static str,
    pub problem: String,
    pub seed: u64,
    pub generation: u64,
    pub dimension: usize,
}

pub fn write_dsm_csv(path: &Path, dimension: usize, strengths: &[f64]) -> io::Result<()> {
    assert_eq!(strengths.len(), dimension * dimension);
    let mut out = String::from("# schema: dsm/1\n");
    for row in 0..dimension {
        for col in 0..dimension {
            if col > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", strengths[row * dimension + col]);
        }
        out.push('\n');
    }
    fs::write(path, out)
}

pub fn write_dsm_sidecar(path: &Path, sidecar: &DsmSidecar) -> io::Result<()> {
    fs::write(path, serde_json::to_string_pretty(sidecar).expect("serializable"))
}

pub fn write_stats_csv(path: &Path, rows: &[StatRow]) -> io::Result<()> {
    let mut out = String::from("# schema: stats/1\n");
    out.push_str(
        "problem,dimension,category,best_mode,other_mode,p_value,bonferroni_level,significant\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.problem,
            r.dimension,
            r.category,
            r.best_mode.name(),
            r.other_mode.name(),
            fmt_float(r.p_value),
            fmt_float(r.bonferroni_level),
            r.significant
        );
    }
    fs::write(path, out)
}

pub fn write_trace_csv(path: &Path, result: &RunResult) -> io::Result<()> {
    let mut out = String::from("# schema: trace/1\ngeneration,best_objective,evaluations\n");
    for point in &result.trace {
        let _ = writeln!(
            out,
            "{},{},{}",
            point.generation,
            fmt_float(point.best_objective),
            fmt_float(point.evaluations)
        );
    }
    fs::write(path, out)
}

#[derive(Serialize)]
struct RunFile<'a> {
    schema: &'static str,
    problem: &'a str,
    dimension: usize,
    config: &'a EaConfig,
    result: &'a RunResult,
}

pub fn write_run_json(
    path: &Path,
    problem: &str,
    dimension: usize,
    config: &EaConfig,
    result: &RunResult,
) -> io::Result<()> {
    let file = RunFile { schema: "run/1", problem, dimension, config, result };
    fs::write(path, serde_json::to_string_pretty(&file).expect("serializable"))
}
