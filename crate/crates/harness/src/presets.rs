//! Experiment presets and helpers shared by the CLI and the test suites.

use gomea_core::gomea::{DsmSnapshot, LinkageMode, RunResult};
use gomea_core::problems::compatible_dimensions;

/// Desk-scale preset: small dimensionalities and 10 repeats per size keep a
/// full matrix practical on a workstation; `full` mirrors the reference
/// setup (30 repeats, dimensionalities up to 80 before extrapolation).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Full,
}

impl Preset {
    pub fn parse(name: &str) -> Option<Preset> {
        match name {
            "desk" => Some(Preset::Desk),
            "full" => Some(Preset::Full),
            _ => None,
        }
    }

    pub fn repeats_per_size(&self) -> usize {
        match self {
            Preset::Desk => 10,
            Preset::Full => 30,
        }
    }

    pub fn dimensions(&self) -> Vec<usize> {
        match self {
            Preset::Desk => vec![10, 20],
            Preset::Full => vec![10, 20, 40, 80],
        }
    }
}

/// Closest dimension the problem accepts (ties resolved downward).
pub fn nearest_compatible_dimension(problem: &str, requested: usize) -> Option<usize> {
    let limit = requested * 2 + 64;
    let candidates = compatible_dimensions(problem, limit);
    candidates
        .into_iter()
        .min_by_key(|&l| (l.abs_diff(requested), l))
}

/// Picks the DSM to export for one run: the snapshot whose interaction
/// graph had the most edges (dependency accuracy deteriorates near
/// convergence, so the densest snapshot is the best pre-convergence proxy;
/// the latest such snapshot wins ties), falling back to the final matrix.
pub fn select_export_dsm(result: &RunResult) -> Option<DsmSnapshot> {
    let edge_count = |snapshot: &DsmSnapshot| -> usize {
        let n = snapshot.dimension;
        let mut count = 0;
        for i in 0..n {
            for j in i + 1..n {
                if snapshot.strengths[i * n + j] > 0.0 {
                    count += 1;
                }
            }
        }
        count
    };
    result
        .dsm_snapshots
        .iter()
        .enumerate()
        .max_by_key(|(index, s)| (edge_count(s), *index))
        .map(|(_, s)| s.clone())
        .or_else(|| result.final_dsm.clone())
}

/// Tuned population sizes for the solver-capability configurations (found
/// by bisection on this implementation; used when the caller does not ask
/// for a fresh bisection).
pub fn preset_population_size(
    problem: &str,
    mode: LinkageMode,
    dimension: usize,
) -> Option<usize> {
    use LinkageMode::*;
    let table: &[(&str, LinkageMode, usize, usize)] = &[
        ("reb2strong", FbMcondHgCs, 10, 40),
        ("reb2strong", FbMcondHgCs, 20, 56),
        ("reb5smalloverlap", FbMcondHgCs, 9, 40),
        ("reb5smalloverlap", FbMcondHgCs, 13, 48),
        ("reb5smalloverlap", FbMcondHgCs, 17, 56),
        ("rebgrid", FbMcondHgCs, 9, 48),
        ("rebgrid", FbMcondHgCs, 16, 56),
    ];
    table
        .iter()
        .find(|(p, m, d, _)| *p == problem && *m == mode && *d == dimension)
        .map(|&(_, _, _, n)| n)
}
