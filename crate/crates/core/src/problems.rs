//! Gray-box benchmark problems with partial evaluations.
//!
//! An objective decomposes into sub-functions over known index sets; the sum
//! of all sub-function values is the objective. Re-evaluating a solution
//! after changing a variable subset only touches the sub-functions whose
//! index sets intersect the change, and charges the ledger the fractional
//! cost `sum(|I_j|) / dimension` over the touched sub-functions.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)] // used by the no_std build for float intrinsics
use num_traits::Float;
use core::time::Duration;

use serde::Serialize;

use crate::vig::Vig;

/// Value-to-reach used by the whole benchmark suite.
pub const DEFAULT_VTR: f64 = 1e-10;
/// Default evaluation budget in full-evaluation units.
pub const DEFAULT_BUDGET: f64 = 1e7;
/// Uniform initialization range shared by all benchmarks.
pub const INIT_LOWER: f64 = -115.0;
pub const INIT_UPPER: f64 = -110.0;

/// Registry names accepted by [`make_problem`].
pub const PROBLEM_NAMES: [&str; 12] = [
    "sphere",
    "rosenbrock",
    "reb2weak",
    "reb2strong",
    "reb2alternating",
    "reb5noverlap",
    "reb5smalloverlap",
    "reb5largeoverlap",
    "reb5alternating",
    "reb5disjointpairs",
    "osoreb",
    "rebgrid",
];

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemError {
    UnknownProblem {
        name: String,
    },
    /// Requested dimension does not admit a full sub-function cover; the
    /// nearest compatible dimensions are reported.
    IncompatibleDimension {
        name: String,
        requested: usize,
        nearest_below: Option<usize>,
        nearest_above: Option<usize>,
    },
    DimensionMismatch {
        expected: usize,
        got: usize,
    },
    InconsistentCache {
        objective: f64,
        cache_sum: f64,
    },
}

impl fmt::Display for ProblemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemError::UnknownProblem { name } => {
                write!(f, "unknown problem '{name}', valid names: {PROBLEM_NAMES:?}")
            }
            ProblemError::IncompatibleDimension {
                name,
                requested,
                nearest_below,
                nearest_above,
            } => {
                write!(f, "dimension {requested} is incompatible with '{name}'")?;
                match (nearest_below, nearest_above) {
                    (Some(b), Some(a)) => write!(f, "; nearest compatible: {b} or {a}"),
                    (Some(b), None) => write!(f, "; nearest compatible: {b}"),
                    (None, Some(a)) => write!(f, "; nearest compatible: {a}"),
                    (None, None) => Ok(()),
                }
            }
            ProblemError::DimensionMismatch { expected, got } => {
                write!(f, "genotype length {got} does not match dimension {expected}")
            }
            ProblemError::InconsistentCache { objective, cache_sum } => write!(
                f,
                "cached objective {objective} disagrees with sub-function sum {cache_sum}"
            ),
        }
    }
}

/// Rotates `vector` counter-clockwise by `theta_degrees`.
///
/// For blocks larger than two, the rotation is the composition of plane
/// rotations applied to consecutive coordinate planes (0,1), (1,2), ...,
/// in that order; it reduces to the plain 2-D rotation for length two and
/// preserves the Euclidean norm for any length.
pub fn rotate_block(vector: &[f64], theta_degrees: f64) -> Vec<f64> {
    let mut out = vector.to_owned();
    let (sin_t, cos_t) = theta_degrees.to_radians().sin_cos();
    rotate_in_place(&mut out, sin_t, cos_t);
    out
}

#[inline]
fn rotate_in_place(block: &mut [f64], sin_t: f64, cos_t: f64) {
    for p in 1..block.len() {
        let a = block[p - 1];
        let b = block[p];
        block[p - 1] = a * cos_t - b * sin_t;
        block[p] = a * sin_t + b * cos_t;
    }
}

/// Evaluation rule of one sub-function.
#[derive(Debug, Clone, PartialEq)]
pub enum SubFunctionKind {
    /// `x^2` over a single variable.
    Square,
    /// `100 (x1 - x0^2)^2 + (1 - x0)^2` over a consecutive pair.
    RosenbrockPair,
    /// Ellipsoid applied to the block rotated by `theta_deg`: the i-th
    /// rotated coordinate is weighted `10^(c * i / (k - 1))`.
    RotatedEllipsoid { condition: f64, theta_deg: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubFunction {
    /// Distinct variable indices, ascending.
    pub index_set: Vec<usize>,
    pub kind: SubFunctionKind,
    /// Precomputed ellipsoid weights (empty for non-ellipsoid kinds).
    weights: Vec<f64>,
    /// Precomputed (sin, cos) of the rotation angle.
    rotation: (f64, f64),
}

impl SubFunction {
    pub fn new(index_set: Vec<usize>, kind: SubFunctionKind) -> Self {
        let (weights, rotation) = match &kind {
            SubFunctionKind::RotatedEllipsoid { condition, theta_deg } => {
                let k = index_set.len();
                let weights = (0..k)
                    .map(|i| {
                        if k == 1 {
                            1.0
                        } else {
                            10.0f64.powf(condition * i as f64 / (k - 1) as f64)
                        }
                    })
                    .collect();
                (weights, theta_deg.to_radians().sin_cos())
            }
            _ => (Vec::new(), (0.0, 1.0)),
        };
        SubFunction { index_set, kind, weights, rotation }
    }

    /// Evaluates this sub-function on the full genotype.
    pub fn evaluate(&self, genotype: &[f64]) -> f64 {
        match &self.kind {
            SubFunctionKind::Square => {
                let x = genotype[self.index_set[0]];
                x * x
            }
            SubFunctionKind::RosenbrockPair => {
                let x0 = genotype[self.index_set[0]];
                let x1 = genotype[self.index_set[1]];
                let a = x1 - x0 * x0;
                let b = 1.0 - x0;
                100.0 * a * a + b * b
            }
            SubFunctionKind::RotatedEllipsoid { .. } => {
                let k = self.index_set.len();
                let mut buf = [0.0f64; 8];
                if k <= buf.len() {
                    for (slot, &idx) in buf[..k].iter_mut().zip(&self.index_set) {
                        *slot = genotype[idx];
                    }
                    self.rotated_ellipsoid(&mut buf[..k])
                } else {
                    let mut block: Vec<f64> =
                        self.index_set.iter().map(|&i| genotype[i]).collect();
                    self.rotated_ellipsoid(&mut block)
                }
            }
        }
    }

    fn rotated_ellipsoid(&self, block: &mut [f64]) -> f64 {
        let (sin_t, cos_t) = self.rotation;
        rotate_in_place(block, sin_t, cos_t);
        block
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * x * x)
            .sum()
    }
}

/// A candidate solution with cached evaluation state.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub genotype: Vec<f64>,
    /// Cached total objective (sum of the cached sub-function values).
    pub objective: f64,
    pub subfunction_values: Vec<f64>,
    /// No-improvement stretch counter.
    pub nis: u32,
}

/// Evaluation budget accounting in full-evaluation units.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationLedger {
    spent: f64,
    pub budget: f64,
    pub wall_clock_limit: Option<Duration>,
}

impl EvaluationLedger {
    pub fn new(budget: f64) -> Self {
        EvaluationLedger { spent: 0.0, budget, wall_clock_limit: None }
    }

    pub fn spent(&self) -> f64 {
        self.spent
    }

    pub fn exhausted(&self) -> bool {
        self.spent >= self.budget
    }

    pub fn charge_full(&mut self) {
        self.spent += 1.0;
    }

    pub fn charge(&mut self, cost: f64) {
        debug_assert!(cost >= 0.0);
        self.spent += cost;
    }
}

/// Undo record produced by a partial evaluation; restores the previous
/// solution state bit for bit.
#[derive(Debug, Clone)]
pub struct PartialUndo {
    old_genotype: Vec<(usize, f64)>,
    old_subfn: Vec<(usize, f64)>,
    old_objective: f64,
    delta: f64,
}

impl PartialUndo {
    /// Objective change of the evaluation this record undoes, accumulated
    /// at sub-function scale (sum of new-minus-old over the touched
    /// sub-functions). Unlike a difference of cached objectives this does
    /// not inherit cancellation noise from the total objective's magnitude.
    pub fn objective_delta(&self) -> f64 {
        self.delta
    }
}

impl Solution {
    /// Reverts a partial evaluation exactly.
    pub fn revert(&mut self, undo: &PartialUndo) {
        for &(i, x) in &undo.old_genotype {
            self.genotype[i] = x;
        }
        for &(j, v) in &undo.old_subfn {
            self.subfunction_values[j] = v;
        }
        self.objective = undo.old_objective;
    }

    /// Checks the objective-versus-cache invariant (relative 1e-9).
    pub fn verify_consistency(&self) -> Result<(), ProblemError> {
        let sum: f64 = self.subfunction_values.iter().sum();
        let tol = 1e-9 * self.objective.abs().max(1.0);
        if (sum - self.objective).abs() <= tol {
            Ok(())
        } else {
            Err(ProblemError::InconsistentCache { objective: self.objective, cache_sum: sum })
        }
    }
}

/// A gray-box problem: dimension, sub-function decomposition, initialization
/// range, and value-to-reach. Immutable after construction.
#[derive(Debug, Clone)]
pub struct GrayBoxProblem {
    name: String,
    dimension: usize,
    subfunctions: Vec<SubFunction>,
    pub lower_init: f64,
    pub upper_init: f64,
    pub vtr: f64,
    analytic_vig: Option<Vig>,
    var_to_subfns: Vec<Vec<usize>>,
}

impl GrayBoxProblem {
    /// Builds a problem from its sub-function decomposition and derives the
    /// analytic VIG from pairwise co-occurrence.
    pub fn new(name: &str, dimension: usize, subfunctions: Vec<SubFunction>) -> Self {
        assert!(!subfunctions.is_empty(), "at least one sub-function required");
        let mut var_to_subfns = vec![Vec::new(); dimension];
        let mut vig = Vig::new(dimension);
        for (j, sf) in subfunctions.iter().enumerate() {
            assert!(!sf.index_set.is_empty(), "empty sub-function index set");
            let mut seen = BTreeSet::new();
            for &i in &sf.index_set {
                assert!(i < dimension, "index out of range");
                assert!(seen.insert(i), "duplicate index in sub-function");
                var_to_subfns[i].push(j);
            }
            for (a, &u) in sf.index_set.iter().enumerate() {
                for &v in &sf.index_set[a + 1..] {
                    vig.add_edge(u, v);
                }
            }
        }
        assert!(
            var_to_subfns.iter().all(|s| !s.is_empty()),
            "every variable must appear in at least one sub-function"
        );
        GrayBoxProblem {
            name: name.to_owned(),
            dimension,
            subfunctions,
            lower_init: INIT_LOWER,
            upper_init: INIT_UPPER,
            vtr: DEFAULT_VTR,
            analytic_vig: Some(vig),
            var_to_subfns,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn subfunctions(&self) -> &[SubFunction] {
        &self.subfunctions
    }

    pub fn analytic_vig(&self) -> Option<&Vig> {
        self.analytic_vig.as_ref()
    }

    /// Drops the analytic VIG; used to prove that learning modes never read it.
    pub fn strip_analytic_vig(&mut self) {
        self.analytic_vig = None;
    }

    /// Fractional cost of re-evaluating sub-function `j`.
    pub fn subfunction_cost(&self, j: usize) -> f64 {
        self.subfunctions[j].index_set.len() as f64 / self.dimension as f64
    }

    /// Indices of sub-functions that contain variable `i`, ascending.
    pub fn subfunctions_of(&self, i: usize) -> &[usize] {
        &self.var_to_subfns[i]
    }

    /// Sorted sub-function indices touched by changing the given variables.
    pub fn touched_subfunctions(&self, changed: &[usize]) -> Vec<usize> {
        let mut touched: Vec<usize> = changed
            .iter()
            .flat_map(|&i| self.var_to_subfns[i].iter().copied())
            .collect();
        touched.sort_unstable();
        touched.dedup();
        touched
    }

    /// Analytic ledger charge for a touched set, summed in ascending index
    /// order.
    pub fn partial_cost(&self, touched: &[usize]) -> f64 {
        touched.iter().map(|&j| self.subfunction_cost(j)).sum()
    }

    /// Evaluates the full objective, charging the ledger one unit.
    pub fn evaluate_full(
        &self,
        genotype: &[f64],
        ledger: &mut EvaluationLedger,
    ) -> Result<Solution, ProblemError> {
        if genotype.len() != self.dimension {
            return Err(ProblemError::DimensionMismatch {
                expected: self.dimension,
                got: genotype.len(),
            });
        }
        let subfunction_values: Vec<f64> =
            self.subfunctions.iter().map(|sf| sf.evaluate(genotype)).collect();
        let objective = subfunction_values.iter().sum();
        ledger.charge_full();
        Ok(Solution { genotype: genotype.to_owned(), objective, subfunction_values, nis: 0 })
    }

    /// Writes `new_values` into the changed variables and recomputes exactly
    /// the touched sub-functions, charging the ledger their fractional cost.
    /// Returns an undo record that restores the previous state exactly.
    pub fn apply_partial(
        &self,
        solution: &mut Solution,
        changed: &[usize],
        new_values: &[f64],
        ledger: &mut EvaluationLedger,
    ) -> Result<PartialUndo, ProblemError> {
        if changed.len() != new_values.len() || solution.genotype.len() != self.dimension {
            return Err(ProblemError::DimensionMismatch {
                expected: self.dimension,
                got: solution.genotype.len(),
            });
        }
        #[cfg(debug_assertions)]
        solution.verify_consistency()?;
        let touched = self.touched_subfunctions(changed);
        let old_genotype: Vec<(usize, f64)> =
            changed.iter().map(|&i| (i, solution.genotype[i])).collect();
        for (&i, &x) in changed.iter().zip(new_values) {
            solution.genotype[i] = x;
        }
        let mut old_subfn = Vec::with_capacity(touched.len());
        let mut delta = 0.0;
        for &j in &touched {
            let old = solution.subfunction_values[j];
            let new = self.subfunctions[j].evaluate(&solution.genotype);
            old_subfn.push((j, old));
            solution.subfunction_values[j] = new;
            delta += new - old;
        }
        let old_objective = solution.objective;
        solution.objective += delta;
        ledger.charge(self.partial_cost(&touched));
        Ok(PartialUndo { old_genotype, old_subfn, old_objective, delta })
    }

    /// Partial evaluation returning an updated copy (the non-mutating form).
    pub fn evaluate_partial(
        &self,
        solution: &Solution,
        changed: &[usize],
        new_values: &[f64],
        ledger: &mut EvaluationLedger,
    ) -> Result<Solution, ProblemError> {
        let mut out = solution.clone();
        self.apply_partial(&mut out, changed, new_values, ledger)?;
        Ok(out)
    }

    /// Replaces variables and re-evaluates via the cheaper of a partial or a
    /// full evaluation (a full evaluation always costs exactly one unit).
    pub fn replace_and_evaluate(
        &self,
        solution: &mut Solution,
        changed: &[usize],
        new_values: &[f64],
        ledger: &mut EvaluationLedger,
    ) -> Result<PartialUndo, ProblemError> {
        let touched = self.touched_subfunctions(changed);
        if self.partial_cost(&touched) < 1.0 {
            return self.apply_partial(solution, changed, new_values, ledger);
        }
        let old_genotype: Vec<(usize, f64)> =
            changed.iter().map(|&i| (i, solution.genotype[i])).collect();
        for (&i, &x) in changed.iter().zip(new_values) {
            solution.genotype[i] = x;
        }
        let old_objective = solution.objective;
        let mut old_subfn = Vec::with_capacity(self.subfunctions.len());
        let mut objective = 0.0;
        let mut delta = 0.0;
        for (j, sf) in self.subfunctions.iter().enumerate() {
            let new = sf.evaluate(&solution.genotype);
            old_subfn.push((j, solution.subfunction_values[j]));
            delta += new - solution.subfunction_values[j];
            solution.subfunction_values[j] = new;
            objective += new;
        }
        solution.objective = objective;
        ledger.charge_full();
        Ok(PartialUndo { old_genotype, old_subfn, old_objective, delta })
    }

    /// Audit form for JSON export.
    pub fn audit(&self) -> ProblemAudit {
        ProblemAudit {
            schema: "problem/1",
            name: self.name.clone(),
            dimension: self.dimension,
            lower_init: self.lower_init,
            upper_init: self.upper_init,
            vtr: self.vtr,
            subfunctions: self
                .subfunctions
                .iter()
                .map(|sf| {
                    let (kind, condition, theta_deg) = match sf.kind {
                        SubFunctionKind::Square => ("square", None, None),
                        SubFunctionKind::RosenbrockPair => ("rosenbrock_pair", None, None),
                        SubFunctionKind::RotatedEllipsoid { condition, theta_deg } => {
                            ("rotated_ellipsoid", Some(condition), Some(theta_deg))
                        }
                    };
                    SubFunctionAudit { index_set: sf.index_set.clone(), kind, condition, theta_deg }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemAudit {
    pub schema: &'static str,
    pub name: String,
    pub dimension: usize,
    pub lower_init: f64,
    pub upper_init: f64,
    pub vtr: f64,
    pub subfunctions: Vec<SubFunctionAudit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubFunctionAudit {
    pub index_set: Vec<usize>,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<f64>,
}

fn ellipsoid_block(indices: Vec<usize>, condition: f64, theta_deg: f64) -> SubFunction {
    SubFunction::new(indices, SubFunctionKind::RotatedEllipsoid { condition, theta_deg })
}

/// Uniform-stride REB block placement: blocks of size `k` start at
/// 0, s, 2s, ... and must end exactly at the last variable so that every
/// variable is covered.
fn reb_blocks(
    name: &str,
    dimension: usize,
    k: usize,
    s: usize,
    params: impl Fn(usize) -> (f64, f64),
) -> Result<Vec<SubFunction>, ProblemError> {
    let compatible = |l: usize| l >= k && (l - k) % s == 0;
    if !compatible(dimension) {
        return Err(incompatible(name, dimension, compatible));
    }
    let blocks = (dimension - k) / s + 1;
    Ok((0..blocks)
        .map(|i| {
            let (c, theta) = params(i);
            ellipsoid_block((i * s..i * s + k).collect(), c, theta)
        })
        .collect())
}

fn incompatible(
    name: &str,
    requested: usize,
    compatible: impl Fn(usize) -> bool,
) -> ProblemError {
    let nearest_below = (1..requested).rev().find(|&l| compatible(l));
    let nearest_above = (requested + 1..requested + 64).find(|&l| compatible(l));
    ProblemError::IncompatibleDimension {
        name: name.to_owned(),
        requested,
        nearest_below,
        nearest_above,
    }
}

/// REB with alternating strides 4, 5, 4, 5, ...: pairs of 5-blocks overlap in
/// one variable and distinct pairs are disjoint. Compatible dimensions are
/// those where the last placed block ends exactly at the last variable.
fn disjoint_pair_blocks(name: &str, dimension: usize) -> Result<Vec<SubFunction>, ProblemError> {
    let k = 5;
    let placements = |l: usize| -> (Vec<usize>, bool) {
        let mut starts = Vec::new();
        let mut pos = 0;
        let mut i = 0usize;
        while pos + k <= l {
            starts.push(pos);
            pos += if i % 2 == 0 { 4 } else { 5 };
            i += 1;
        }
        let exact = starts.last().is_some_and(|&p| p + k == l);
        (starts, exact)
    };
    let (starts, exact) = placements(dimension);
    if !exact {
        return Err(incompatible(name, dimension, |l| placements(l).1));
    }
    Ok(starts
        .into_iter()
        .map(|p| ellipsoid_block((p..p + k).collect(), 6.0, 45.0))
        .collect())
}

fn rebgrid_blocks(name: &str, dimension: usize) -> Result<Vec<SubFunction>, ProblemError> {
    let side = |l: usize| -> Option<usize> {
        let g = (l as f64).sqrt().round() as usize;
        (g >= 2 && g * g == l).then_some(g)
    };
    let Some(g) = side(dimension) else {
        return Err(incompatible(name, dimension, |l| side(l).is_some()));
    };
    let mut subfns = Vec::with_capacity(dimension);
    for r in 0..g {
        for c in 0..g {
            let v = r * g + c;
            let mut star = vec![v];
            if r > 0 {
                star.push(v - g);
            }
            if r + 1 < g {
                star.push(v + g);
            }
            if c > 0 {
                star.push(v - 1);
            }
            if c + 1 < g {
                star.push(v + 1);
            }
            star.sort_unstable();
            subfns.push(ellipsoid_block(star, 6.0, 45.0));
        }
    }
    Ok(subfns)
}

/// REB block function with explicit parameters, uniform stride.
pub fn make_reb(
    dimension: usize,
    condition: f64,
    theta_deg: f64,
    k: usize,
    s: usize,
) -> Result<GrayBoxProblem, ProblemError> {
    let name = format!("reb_c{condition}_t{theta_deg}_k{k}_s{s}");
    let blocks = reb_blocks(&name, dimension, k, s, |_| (condition, theta_deg))?;
    Ok(GrayBoxProblem::new(&name, dimension, blocks))
}

/// Constructs a benchmark problem by registry name.
pub fn make_problem(name: &str, dimension: usize) -> Result<GrayBoxProblem, ProblemError> {
    let alternating = |i: usize| if i % 2 == 0 { (1.0, 5.0) } else { (6.0, 45.0) };
    let subfns = match name {
        "sphere" => {
            if dimension == 0 {
                return Err(incompatible(name, dimension, |l| l >= 1));
            }
            (0..dimension)
                .map(|i| SubFunction::new(vec![i], SubFunctionKind::Square))
                .collect()
        }
        "rosenbrock" => {
            if dimension < 2 {
                return Err(incompatible(name, dimension, |l| l >= 2));
            }
            (0..dimension - 1)
                .map(|i| SubFunction::new(vec![i, i + 1], SubFunctionKind::RosenbrockPair))
                .collect()
        }
        "reb2weak" => reb_blocks(name, dimension, 2, 1, |_| (1.0, 5.0))?,
        "reb2strong" => reb_blocks(name, dimension, 2, 1, |_| (6.0, 45.0))?,
        "reb2alternating" => reb_blocks(name, dimension, 2, 1, alternating)?,
        "reb5noverlap" => reb_blocks(name, dimension, 5, 5, |_| (6.0, 45.0))?,
        "reb5smalloverlap" => reb_blocks(name, dimension, 5, 4, |_| (6.0, 45.0))?,
        "reb5largeoverlap" => reb_blocks(name, dimension, 5, 1, |_| (6.0, 45.0))?,
        "reb5alternating" => reb_blocks(name, dimension, 5, 4, alternating)?,
        "reb5disjointpairs" => disjoint_pair_blocks(name, dimension)?,
        "osoreb" => {
            // First term: 5-blocks with stride 4 over all variables. Second
            // term: 2-blocks with stride 5 over the tail slice starting at
            // index 4 (inclusive), shifted to global indices.
            let first = reb_blocks(name, dimension, 5, 4, |_| (6.0, 45.0))?;
            if dimension < 6 {
                return Err(incompatible(name, dimension, |l| {
                    l >= 6 && (l - 5) % 4 == 0 && (l - 4 - 2) % 5 == 0
                }));
            }
            let tail = dimension - 4;
            let second_ok = |m: usize| m >= 2 && (m - 2) % 5 == 0;
            if !second_ok(tail) {
                return Err(incompatible(name, dimension, |l| {
                    l >= 6 && (l - 5) % 4 == 0 && second_ok(l - 4)
                }));
            }
            let second_blocks = (tail - 2) / 5 + 1;
            let mut subfns = first;
            subfns.extend((0..second_blocks).map(|i| {
                let p = 4 + i * 5;
                ellipsoid_block(vec![p, p + 1], 6.0, 45.0)
            }));
            subfns
        }
        "rebgrid" => rebgrid_blocks(name, dimension)?,
        other => return Err(ProblemError::UnknownProblem { name: other.to_owned() }),
    };
    Ok(GrayBoxProblem::new(name, dimension, subfns))
}

/// Compatible dimensions for a named problem within `[1, limit]`.
pub fn compatible_dimensions(name: &str, limit: usize) -> Vec<usize> {
    (1..=limit).filter(|&l| make_problem(name, l).is_ok()).collect()
}
