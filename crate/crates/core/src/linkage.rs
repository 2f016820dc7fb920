//! Fitness-based linkage learning.
//!
//! Pairwise dependency strengths are measured with four-point fitness probes
//! around a base solution and collected incrementally in a dependency
//! strength matrix (DSM). Nonzero strengths define the edges of the variable
//! interaction graph. A schedule spreads the probes across generations and
//! pauses after a sustained stretch of zero discoveries; the short
//! zero-found-this-iteration exponential pause is deliberately absent, only
//! the long-interval rule is applied.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // used by the no_std build for float intrinsics
use num_traits::Float;
use rand::Rng;

use crate::problems::{EvaluationLedger, GrayBoxProblem, Solution};
use crate::vig::Vig;

/// Strength cut-off: anything below is stored as exactly zero.
pub const DEFAULT_ETA: f64 = 1e-6;
/// Relative presence threshold factor on |delta_i - delta_ij|.
pub const DEFAULT_EPSILON_REL: f64 = 1e-9;
/// Iterations of zero discoveries that trigger the long-interval pause.
pub const DEFAULT_PAUSE_WINDOW: usize = 5;
/// Generations a pause lasts.
pub const DEFAULT_PAUSE_GENERATIONS: u64 = 10;

/// Symmetric matrix of learned pairwise dependency strengths.
#[derive(Debug, Clone, PartialEq)]
pub struct DependencyMatrix {
    n: usize,
    strengths: Vec<f64>,
    tested: Vec<bool>,
    pub epsilon_rel: f64,
    pub eta: f64,
    changed_this_generation: bool,
}

impl DependencyMatrix {
    pub fn new(n: usize) -> Self {
        DependencyMatrix {
            n,
            strengths: vec![0.0; n * n],
            tested: vec![false; n * n],
            epsilon_rel: DEFAULT_EPSILON_REL,
            eta: DEFAULT_ETA,
            changed_this_generation: false,
        }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn strength(&self, i: usize, j: usize) -> f64 {
        self.strengths[i * self.n + j]
    }

    /// Stores a strength in both symmetric cells, applying the eta cut-off.
    /// Marks the matrix changed when the stored value actually changes.
    pub fn set_strength(&mut self, i: usize, j: usize, strength: f64) {
        let value = if strength < self.eta { 0.0 } else { strength.min(1.0) };
        if self.strengths[i * self.n + j] != value {
            self.changed_this_generation = true;
        }
        self.strengths[i * self.n + j] = value;
        self.strengths[j * self.n + i] = value;
    }

    pub fn is_tested(&self, i: usize, j: usize) -> bool {
        self.tested[i * self.n + j]
    }

    pub fn mark_tested(&mut self, i: usize, j: usize) {
        self.tested[i * self.n + j] = true;
        self.tested[j * self.n + i] = true;
    }

    pub fn tested_pairs(&self) -> usize {
        let mut count = 0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.is_tested(i, j) {
                    count += 1;
                }
            }
        }
        count
    }

    pub fn changed_this_generation(&self) -> bool {
        self.changed_this_generation
    }

    /// Row-major copy of the strengths (for export and snapshots).
    pub fn strengths_row_major(&self) -> Vec<f64> {
        self.strengths.clone()
    }
}

/// Builds the VIG: an edge wherever the learned strength is nonzero.
pub fn derive_vig(dsm: &DependencyMatrix) -> Vig {
    let n = dsm.dimension();
    let mut vig = Vig::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if dsm.strength(i, j) > 0.0 {
                vig.add_edge(i, j);
            }
        }
    }
    vig
}

/// Returns a fresh VIG only when the DSM changed since the last rebuild, and
/// resets the change flag.
pub fn maybe_rebuild(dsm: &mut DependencyMatrix) -> Option<Vig> {
    if dsm.changed_this_generation {
        dsm.changed_this_generation = false;
        Some(derive_vig(dsm))
    } else {
        None
    }
}

/// Population statistics needed to place dependency probes: the base
/// solution to probe around, per-variable spread, and the population
/// bounding box (inflated by 10% when clamping probes).
pub struct ProbeContext<'a> {
    pub base: &'a Solution,
    pub sigma: &'a [f64],
    pub box_lower: &'a [f64],
    pub box_upper: &'a [f64],
}

/// The probe produced a non-finite objective; the pair is re-queued.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestDiscarded;

/// Four-point fitness dependency test between variables `i` and `j`.
///
/// The pair is canonicalized to (min, max) so argument order cannot change
/// the outcome. Perturbation magnitudes are drawn uniformly from
/// [1.0 sigma, 3.0 sigma] with random sign, and probes are clamped to the
/// population bounding box inflated by 10%. Probes use partial evaluations
/// from the cached base solution, so for additively separable pairs the two
/// deltas cancel bit for bit and the strength is exactly zero.
pub fn dependency_test<R: Rng>(
    problem: &GrayBoxProblem,
    ctx: &ProbeContext<'_>,
    i: usize,
    j: usize,
    epsilon_rel: f64,
    eta: f64,
    ledger: &mut EvaluationLedger,
    rng: &mut R,
) -> Result<f64, TestDiscarded> {
    assert!(i != j, "dependency test needs two distinct variables");
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    let probe_i = draw_probe(ctx, i, rng);
    let probe_j = draw_probe(ctx, j, rng);

    // The four probe corners are reached by partial evaluations from the
    // cached base, and the deltas are read from the touched sub-function
    // sums. This keeps them at sub-function scale: a difference of total
    // objectives would carry cancellation noise at the magnitude of the
    // full objective, which on problems mixing strong and weak blocks can
    // exceed the relative presence threshold and fabricate dependencies.
    //
    //   d_i  = f10 - f00   (move x_i at the base)
    //   d_j  = f01 - f00   (move x_j at the base)
    //   d2   = f11 - f10   (move x_j after x_i)
    //
    // delta_i = f00 - f10 = -d_i, and
    // delta_ij = f01 - f11 = -(d_i + (d2 - d_j)); for additively separable
    // pairs d2 is computed from bit-identical sub-function values as d_j,
    // so the interaction term (d2 - d_j) vanishes exactly.
    let mut moved_i = ctx.base.clone();
    let undo_i = problem
        .apply_partial(&mut moved_i, &[i], &[probe_i], ledger)
        .map_err(|_| TestDiscarded)?;
    let mut moved_j = ctx.base.clone();
    let undo_j = problem
        .apply_partial(&mut moved_j, &[j], &[probe_j], ledger)
        .map_err(|_| TestDiscarded)?;
    let undo_second = problem
        .apply_partial(&mut moved_i, &[j], &[probe_j], ledger)
        .map_err(|_| TestDiscarded)?;

    if !(moved_i.objective.is_finite() && moved_j.objective.is_finite()) {
        return Err(TestDiscarded);
    }

    let d_i = undo_i.objective_delta();
    let d_j = undo_j.objective_delta();
    let interaction = undo_second.objective_delta() - d_j;
    // the same four corners support both orderings of the case split
    // (delta_j = f00 - f01, delta_ji = f10 - f11 share the interaction
    // term); a dependency between a stiff and a soft variable is far
    // easier to resolve relative to the soft variable's delta, so the
    // stronger of the two readings is kept
    let forward = strength_from_deltas(-d_i, -(d_i + interaction), epsilon_rel, eta);
    let swapped = strength_from_deltas(-d_j, -(d_j + interaction), epsilon_rel, eta);
    Ok(forward.max(swapped))
}

/// The case split is applied to the delta magnitudes: the smaller-magnitude
/// delta is divided by the larger, which keeps the strength in [0, 1] also
/// when both deltas are negative (probing a near-elitist base typically
/// worsens the objective). A sign flip between the two deltas means maximal
/// interaction and saturates at 1.
pub fn strength_from_deltas(delta_i: f64, delta_ij: f64, epsilon_rel: f64, eta: f64) -> f64 {
    let epsilon = epsilon_rel * delta_i.abs().max(delta_ij.abs()).max(1.0);
    if (delta_i - delta_ij).abs() < epsilon {
        return 0.0;
    }
    let (small, large) = if delta_i.abs() >= delta_ij.abs() {
        (delta_ij, delta_i)
    } else {
        (delta_i, delta_ij)
    };
    let strength = if large == 0.0 { 1.0 } else { (1.0 - small / large).clamp(0.0, 1.0) };
    if strength < eta {
        0.0
    } else {
        strength
    }
}

fn draw_probe<R: Rng>(ctx: &ProbeContext<'_>, var: usize, rng: &mut R) -> f64 {
    let sigma = ctx.sigma[var].max(1e-8);
    let magnitude = rng.random_range(1.0 * sigma..=3.0 * sigma);
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let base = ctx.base.genotype[var];
    let range = (ctx.box_upper[var] - ctx.box_lower[var]).max(1e-8);
    let lo = ctx.box_lower[var] - 0.1 * range;
    let hi = ctx.box_upper[var] + 0.1 * range;
    let probe = (base + sign * magnitude).clamp(lo, hi);
    if probe == base {
        base + sign * 1e-8
    } else {
        probe
    }
}

/// One executed dependency test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecutedTest {
    pub i: usize,
    pub j: usize,
    pub strength: f64,
}

/// Incremental test schedule.
///
/// Pairs are visited in a random permutation, one iteration (a budget of
/// tests) per generation; the permutation constitutes one learning epoch in
/// which each unordered pair is tested at most once. When an epoch is
/// exhausted the schedule reopens with a fresh permutation, since dependency
/// strengths drift as the population converges and pairs that fell below the
/// cut-off earlier can become measurable later. The long-interval pause rule
/// keeps the steady-state overhead down once discoveries dry up.
#[derive(Debug, Clone)]
pub struct TestSchedule {
    pending: VecDeque<(usize, usize)>,
    n: usize,
    pub per_generation_budget: usize,
    window_found: VecDeque<usize>,
    pub window_len: usize,
    pub pause_generations: u64,
    pub paused_until: u64,
    epochs_completed: u64,
}

impl TestSchedule {
    /// The per-generation budget defaults to one iteration of `n` tests.
    pub fn new<R: Rng>(n: usize, per_generation_budget: usize, rng: &mut R) -> Self {
        let mut schedule = TestSchedule {
            pending: VecDeque::new(),
            n,
            per_generation_budget,
            window_found: VecDeque::new(),
            window_len: DEFAULT_PAUSE_WINDOW,
            pause_generations: DEFAULT_PAUSE_GENERATIONS,
            paused_until: 0,
            epochs_completed: 0,
        };
        schedule.refill(rng);
        schedule
    }

    fn refill<R: Rng>(&mut self, rng: &mut R) {
        let n = self.n;
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                pairs.push((i, j));
            }
        }
        use rand::seq::SliceRandom;
        pairs.shuffle(rng);
        self.pending = pairs.into();
    }

    /// True when the current epoch has visited every pair.
    pub fn epoch_complete(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn epochs_completed(&self) -> u64 {
        self.epochs_completed
    }

    pub fn pending_pairs(&self) -> usize {
        self.pending.len()
    }

    pub fn is_paused(&self, generation: u64) -> bool {
        generation < self.paused_until
    }

    /// Runs up to one iteration of dependency tests for this generation and
    /// records results into the DSM. Applies only the long-interval pause
    /// rule: when the last `window_len` iterations all found zero new
    /// dependencies, testing pauses for `pause_generations` generations and
    /// the window is cleared. The short zero-found exponential pause is
    /// intentionally not applied.
    pub fn run_generation<R: Rng>(
        &mut self,
        dsm: &mut DependencyMatrix,
        problem: &GrayBoxProblem,
        ctx: &ProbeContext<'_>,
        generation: u64,
        ledger: &mut EvaluationLedger,
        rng: &mut R,
    ) -> Vec<ExecutedTest> {
        if self.is_paused(generation) {
            return Vec::new();
        }
        if self.epoch_complete() {
            self.epochs_completed += 1;
            self.refill(rng);
        }
        let mut executed = Vec::new();
        let mut found = 0usize;
        for _ in 0..self.per_generation_budget {
            let Some((i, j)) = self.pending.pop_front() else { break };
            match dependency_test(problem, ctx, i, j, dsm.epsilon_rel, dsm.eta, ledger, rng) {
                Ok(strength) => {
                    let was_zero = dsm.strength(i, j) == 0.0;
                    // a dependency proven in an earlier epoch is not
                    // forgotten when a later probe fails to resolve it;
                    // nonzero re-measurements still refresh the value
                    if strength > 0.0 || was_zero {
                        dsm.set_strength(i, j, strength);
                    }
                    dsm.mark_tested(i, j);
                    if was_zero && dsm.strength(i, j) > 0.0 {
                        found += 1;
                    }
                    executed.push(ExecutedTest { i, j, strength });
                }
                Err(TestDiscarded) => {
                    self.pending.push_back((i, j));
                }
            }
        }
        self.window_found.push_back(found);
        while self.window_found.len() > self.window_len {
            self.window_found.pop_front();
        }
        if self.window_found.len() == self.window_len
            && self.window_found.iter().all(|&c| c == 0)
        {
            self.paused_until = generation + 1 + self.pause_generations;
            self.window_found.clear();
        }
        executed
    }
}
