//! Experiment harness: corrected-evaluation metric, bisection population
//! sizing, log-log extrapolation, repeat management, DSM aggregation, and
//! Mann-Whitney U significance testing.
//!
//! All run seeds derive deterministically from the master seed and the
//! experiment coordinates, and repeat batches are reduced in repeat order
//! regardless of worker completion order, so re-running a matrix with the
//! same master seed reproduces artifacts byte for byte.

use gomea_core::gomea::{run_with_stop, EaConfig, LinkageMode, RunResult};
use gomea_core::problems::GrayBoxProblem;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::time::Instant;

/// Bisection search bounds and repeat counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisectionSpec {
    pub repeats_per_size: usize,
    pub bisection_repeats: usize,
    pub min_size: usize,
    pub max_size: usize,
    /// Refinement stops once the bracket ratio is at or below this value;
    /// 1.0 refines down to integer adjacency (exact argmin for a unimodal
    /// metric).
    pub bracket_ratio: f64,
}

impl Default for BisectionSpec {
    fn default() -> Self {
        BisectionSpec {
            repeats_per_size: 30,
            bisection_repeats: 5,
            min_size: 8,
            max_size: 2048,
            bracket_ratio: 1.0,
        }
    }
}

impl BisectionSpec {
    /// Starting population size: 17 + 3 * dimension^1.5, rounded and clamped
    /// into the search bounds.
    pub fn start_size(&self, dimension: usize) -> usize {
        let raw = (17.0 + 3.0 * (dimension as f64).powf(1.5)).round() as usize;
        raw.clamp(self.min_size, self.max_size)
    }
}

/// Mean evaluations over successful runs divided by the success fraction;
/// infinity when nothing succeeded.
pub fn corrected_metric<I: IntoIterator<Item = (bool, f64)>>(runs: I) -> f64 {
    let mut successes = 0usize;
    let mut total = 0usize;
    let mut sum = 0.0;
    for (success, evaluations) in runs {
        total += 1;
        if success {
            successes += 1;
            sum += evaluations;
        }
    }
    assert!(total > 0, "corrected_metric needs at least one run");
    if successes == 0 {
        return f64::INFINITY;
    }
    let mean = sum / successes as f64;
    let fraction = successes as f64 / total as f64;
    mean / fraction
}

/// Stable seed derivation (FNV-1a over the experiment coordinates).
pub fn derive_seed(
    master_seed: u64,
    problem: &str,
    mode: &str,
    dimension: usize,
    population_size: usize,
    repeat_index: usize,
) -> u64 {
    const OFFSET: u64 = 0xcbf29ce484222325;
    const PRIME: u64 = 0x100000001b3;
    let mut hash = OFFSET;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= b as u64;
            hash = hash.wrapping_mul(PRIME);
        }
    };
    eat(&master_seed.to_le_bytes());
    eat(problem.as_bytes());
    eat(&[0]);
    eat(mode.as_bytes());
    eat(&[0]);
    eat(&(dimension as u64).to_le_bytes());
    eat(&(population_size as u64).to_le_bytes());
    eat(&(repeat_index as u64).to_le_bytes());
    hash
}

/// Everything needed to run one seeded repeat batch.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub mode: LinkageMode,
    pub budget: f64,
    pub vtr: f64,
    pub master_seed: u64,
    pub wall_clock_limit_secs: Option<f64>,
    /// Optional EA overrides applied to every run.
    pub tweak: EaTweaks,
}

/// Optional overrides for the EA constants exposed in the config.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EaTweaks {
    pub tau: Option<f64>,
    pub p_accept: Option<f64>,
    pub ams_multiplier: Option<f64>,
    pub avs_decay: Option<f64>,
    pub sdr_threshold: Option<f64>,
    pub fi_shrink: Option<f64>,
    pub max_element_size: Option<usize>,
    pub pause_window: Option<usize>,
    pub pause_generations: Option<u64>,
    pub tests_per_generation: Option<usize>,
    pub max_generations: Option<u64>,
}

impl EaTweaks {
    pub fn apply(&self, cfg: &mut EaConfig) {
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(v) = self.p_accept {
            cfg.p_accept = v;
        }
        if let Some(v) = self.ams_multiplier {
            cfg.ams_multiplier = v;
        }
        if let Some(v) = self.avs_decay {
            cfg.avs_decay = v;
        }
        if let Some(v) = self.sdr_threshold {
            cfg.sdr_threshold = v;
        }
        if let Some(v) = self.fi_shrink {
            cfg.fi_shrink = v;
        }
        if let Some(v) = self.max_element_size {
            cfg.max_element_size = Some(v);
        }
        if let Some(v) = self.pause_window {
            cfg.pause_window = v;
        }
        if let Some(v) = self.pause_generations {
            cfg.pause_generations = v;
        }
        if let Some(v) = self.tests_per_generation {
            cfg.tests_per_generation = Some(v);
        }
        if let Some(v) = self.max_generations {
            cfg.max_generations = Some(v);
        }
    }
}

impl RunSetup {
    pub fn config(&self, population_size: usize, seed: u64) -> EaConfig {
        let mut cfg = EaConfig::new(self.mode, population_size, seed);
        cfg.budget = self.budget;
        cfg.vtr = self.vtr;
        cfg.wall_clock_limit_secs = self.wall_clock_limit_secs;
        self.tweak.apply(&mut cfg);
        cfg
    }
}

/// Runs one seeded repeat, enforcing the wall-clock limit via the stop hook.
pub fn run_once(problem: &GrayBoxProblem, setup: &RunSetup, population_size: usize, seed: u64) -> RunResult {
    let cfg = setup.config(population_size, seed);
    let started = Instant::now();
    let limit = setup.wall_clock_limit_secs;
    run_with_stop(problem, &cfg, move || {
        limit.is_some_and(|secs| started.elapsed().as_secs_f64() >= secs)
    })
    .expect("validated configuration")
}

/// Runs `repeats` seeded repeats in parallel; results are ordered by repeat
/// index regardless of completion order.
pub fn run_repeats(
    problem: &GrayBoxProblem,
    setup: &RunSetup,
    population_size: usize,
    repeats: usize,
) -> Vec<RunResult> {
    (0..repeats)
        .into_par_iter()
        .map(|repeat| {
            let seed = derive_seed(
                setup.master_seed,
                problem.name(),
                setup.mode.name(),
                problem.dimension(),
                population_size,
                repeat,
            );
            run_once(problem, setup, population_size, seed)
        })
        .collect()
}

/// One probed population size inside a bisection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRecord {
    pub size: usize,
    pub corrected_evaluations: f64,
    pub success_fraction: f64,
    pub repeats: Vec<RepeatRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeatRecord {
    pub success: bool,
    pub evaluations: f64,
}

/// Full trace of one bisection search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisectionTrace {
    pub problem: String,
    pub mode: LinkageMode,
    pub dimension: usize,
    pub bisection_index: usize,
    pub probes: Vec<ProbeRecord>,
    pub best_size: usize,
    pub best_metric: f64,
}

/// Bisection over the integer population-size axis against an arbitrary
/// metric provider (lower is better; infinity means total failure).
///
/// Starting at the guideline size, the size is halved while the metric
/// keeps strictly decreasing, forming a bracket; geometric-midpoint
/// refinement then narrows the bracket around the incumbent until no
/// unprobed integer midpoints remain (or the bracket ratio reaches the
/// configured threshold). Returns the best probed size with every probe.
pub fn bisect_with(
    spec: &BisectionSpec,
    dimension: usize,
    mut metric_of: impl FnMut(usize) -> f64,
) -> (usize, f64, Vec<(usize, f64)>) {
    let mut cache: BTreeMap<usize, f64> = BTreeMap::new();
    let mut order: Vec<usize> = Vec::new();
    let mut probe = |size: usize, cache: &mut BTreeMap<usize, f64>, order: &mut Vec<usize>| {
        if let Some(&m) = cache.get(&size) {
            return m;
        }
        let m = metric_of(size);
        cache.insert(size, m);
        order.push(size);
        m
    };

    let start = spec.start_size(dimension);
    let mut best = start;
    let mut best_metric = probe(start, &mut cache, &mut order);
    let mut lo = start;
    let mut hi = start;
    // exponential descent while the metric strictly decreases
    while best > spec.min_size {
        let next = (best / 2).max(spec.min_size);
        let m = probe(next, &mut cache, &mut order);
        if m < best_metric {
            hi = best;
            best = next;
            best_metric = m;
            lo = next;
        } else {
            lo = next;
            break;
        }
    }
    // geometric-midpoint refinement around the incumbent
    let geometric_mid = |a: usize, b: usize| -> usize {
        ((a as f64 * b as f64).sqrt()).round() as usize
    };
    let mut left_open = lo < best;
    let mut right_open = hi > best;
    while (left_open || right_open)
        && (hi as f64 / lo as f64) > spec.bracket_ratio
    {
        let left_gap = best as f64 / lo as f64;
        let right_gap = hi as f64 / best as f64;
        let go_left = left_open && (!right_open || left_gap >= right_gap);
        if go_left {
            let mid = geometric_mid(lo, best).clamp(lo, best);
            if mid == lo || mid == best || cache.contains_key(&mid) {
                left_open = false;
                continue;
            }
            let m = probe(mid, &mut cache, &mut order);
            if m < best_metric {
                hi = best;
                best = mid;
                best_metric = m;
                right_open = true;
            } else {
                lo = mid;
            }
            left_open = lo < best;
        } else if right_open {
            let mid = geometric_mid(best, hi).clamp(best, hi);
            if mid == hi || mid == best || cache.contains_key(&mid) {
                right_open = false;
                continue;
            }
            let m = probe(mid, &mut cache, &mut order);
            if m < best_metric {
                lo = best;
                best = mid;
                best_metric = m;
                left_open = true;
            } else {
                hi = mid;
            }
            right_open = hi > best;
        } else {
            break;
        }
    }
    let probes: Vec<(usize, f64)> = order.iter().map(|&s| (s, cache[&s])).collect();
    (best, best_metric, probes)
}

/// One full bisection search over real runs.
pub fn bisect_population_size(
    problem: &GrayBoxProblem,
    setup: &RunSetup,
    spec: &BisectionSpec,
    bisection_index: usize,
) -> BisectionTrace {
    let mut records: BTreeMap<usize, ProbeRecord> = BTreeMap::new();
    // fold the bisection repeat index into the master seed so the five
    // repeated bisections draw independent run batches
    let mut setup = setup.clone();
    setup.master_seed = derive_seed(
        setup.master_seed,
        problem.name(),
        setup.mode.name(),
        problem.dimension(),
        0,
        bisection_index,
    );
    let (best_size, best_metric, _probes) = bisect_with(spec, problem.dimension(), |size| {
        let results = run_repeats(problem, &setup, size, spec.repeats_per_size);
        let metric =
            corrected_metric(results.iter().map(|r| (r.success, r.evaluations_spent)));
        let successes = results.iter().filter(|r| r.success).count();
        records.insert(
            size,
            ProbeRecord {
                size,
                corrected_evaluations: metric,
                success_fraction: successes as f64 / results.len() as f64,
                repeats: results
                    .iter()
                    .map(|r| RepeatRecord {
                        success: r.success,
                        evaluations: r.evaluations_spent,
                    })
                    .collect(),
            },
        );
        metric
    });
    BisectionTrace {
        problem: problem.name().to_string(),
        mode: setup.mode,
        dimension: problem.dimension(),
        bisection_index,
        probes: records.into_values().collect(),
        best_size,
        best_metric,
    }
}

/// Least-squares power-law fit of population size against dimension with a
/// non-negative slope; predicts sizes for larger dimensions.
pub fn extrapolate_sizes(
    known: &[(usize, usize)],
    targets: &[usize],
) -> Result<Vec<(usize, usize)>, String> {
    if known.len() < 2 {
        return Err("extrapolation needs at least two (dimension, size) points".into());
    }
    let points: Vec<(f64, f64)> = known
        .iter()
        .map(|&(l, n)| ((l as f64).ln(), (n as f64).ln()))
        .collect();
    let count = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { (sxy / sxx).max(0.0) };
    let intercept = mean_y - slope * mean_x;
    Ok(targets
        .iter()
        .map(|&l| {
            let predicted = (intercept + slope * (l as f64).ln()).exp();
            (l, predicted.round() as usize)
        })
        .collect())
}

/// Two-sided Mann-Whitney U p-value: exact permutation enumeration when both
/// sides have at most eight observations, tie-corrected normal approximation
/// otherwise.
pub fn mann_whitney_u(sample_a: &[f64], sample_b: &[f64]) -> f64 {
    assert!(!sample_a.is_empty() && !sample_b.is_empty(), "samples must be nonempty");
    let na = sample_a.len();
    let nb = sample_b.len();
    let mut pooled: Vec<f64> = sample_a.iter().chain(sample_b.iter()).copied().collect();
    let ranks = midranks(&mut pooled, sample_a, sample_b);
    let ra: f64 = ranks[..na].iter().sum();
    let u_a = ra - (na * (na + 1)) as f64 / 2.0;
    let mid = (na * nb) as f64 / 2.0;
    let observed_dev = (u_a - mid).abs();

    if na <= 8 && nb <= 8 {
        // exact permutation test on the midranks
        let n = na + nb;
        let mut chosen: Vec<usize> = (0..na).collect();
        let mut qualifying = 0usize;
        let mut total = 0usize;
        loop {
            total += 1;
            let r: f64 = chosen.iter().map(|&i| ranks[i]).sum();
            let u = r - (na * (na + 1)) as f64 / 2.0;
            if (u - mid).abs() >= observed_dev - 1e-9 {
                qualifying += 1;
            }
            // next combination in lexicographic order
            let mut i = na;
            loop {
                if i == 0 {
                    return qualifying as f64 / total as f64;
                }
                i -= 1;
                if chosen[i] != i + n - na {
                    break;
                }
            }
            chosen[i] += 1;
            for j in i + 1..na {
                chosen[j] = chosen[j - 1] + 1;
            }
        }
    }

    // normal approximation with tie correction
    let n = (na + nb) as f64;
    let mut tie_term = 0.0;
    let mut sorted = ranks.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let variance = (na * nb) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if variance <= 0.0 {
        return 1.0;
    }
    let z = observed_dev / variance.sqrt();
    libm::erfc(z / core::f64::consts::SQRT_2)
}

fn midranks(pooled: &mut [f64], a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = pooled.len();
    let mut indexed: Vec<(f64, usize)> =
        a.iter().chain(b.iter()).copied().zip(0..n).collect();
    indexed.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && indexed[j].0 == indexed[i].0 {
            j += 1;
        }
        let rank = (i + 1 + j) as f64 / 2.0;
        for k in i..j {
            ranks[indexed[k].1] = rank;
        }
        i = j;
    }
    pooled.sort_by(f64::total_cmp);
    ranks
}

/// Element-wise mean of equally sized DSM strength matrices.
pub fn aggregate_dsms(dsms: &[Vec<f64>], dimension: usize) -> Result<Vec<f64>, String> {
    if dsms.is_empty() {
        return Err("aggregate_dsms needs at least one matrix".into());
    }
    let cells = dimension * dimension;
    if dsms.iter().any(|d| d.len() != cells) {
        return Err(format!("dimension mismatch: expected {cells} cells"));
    }
    let mut mean = vec![0.0; cells];
    for dsm in dsms {
        for (m, &x) in mean.iter_mut().zip(dsm) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= dsms.len() as f64;
    }
    Ok(mean)
}

/// Whether a linkage mode received VIG knowledge a priori (significance
/// tests compare models within these two categories).
pub fn has_vig_knowledge(mode: LinkageMode) -> bool {
    mode.needs_analytic_vig()
}

/// One row of the pairwise significance table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatRow {
    pub problem: String,
    pub dimension: usize,
    pub category: &'static str,
    pub best_mode: LinkageMode,
    pub other_mode: LinkageMode,
    pub p_value: f64,
    pub bonferroni_level: f64,
    pub significant: bool,
}

/// Builds the per-category significance table: within each category the
/// mode with the best median metric is compared against every other mode by
/// a two-sided Mann-Whitney U test at a Bonferroni-adjusted 0.05 level.
pub fn significance_table(
    problem: &str,
    dimension: usize,
    metrics_by_mode: &BTreeMap<LinkageMode, Vec<f64>>,
) -> Vec<StatRow> {
    let mut rows = Vec::new();
    for (category, with_vig) in [("with_vig", true), ("without_vig", false)] {
        let modes: Vec<LinkageMode> = metrics_by_mode
            .keys()
            .copied()
            .filter(|m| has_vig_knowledge(*m) == with_vig)
            .collect();
        if modes.len() < 2 {
            continue;
        }
        let median = |values: &[f64]| -> f64 {
            let mut v = values.to_vec();
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        let best = *modes
            .iter()
            .min_by(|a, b| {
                median(&metrics_by_mode[a]).total_cmp(&median(&metrics_by_mode[b]))
            })
            .unwrap();
        let tests = modes.len() - 1;
        let level = 0.05 / tests as f64;
        for &other in modes.iter().filter(|&&m| m != best) {
            let p = mann_whitney_u(&metrics_by_mode[&best], &metrics_by_mode[&other]);
            rows.push(StatRow {
                problem: problem.to_string(),
                dimension,
                category,
                best_mode: best,
                other_mode: other,
                p_value: p,
                bonferroni_level: level,
                significant: p < level,
            });
        }
    }
    rows
}
