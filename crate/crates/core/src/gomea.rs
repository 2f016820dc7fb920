//! The RV-GOMEA optimizer loop.
//!
//! Each generation preserves the elitist, applies gene-pool optimal mixing
//! per FOS element (hybrid conditional models run the generational
//! full-forward-sampling element first, then the factorized elements in
//! random order), then the anticipated mean shift and forced improvement.
//! Learning modes interleave dependency tests and rebuild the interaction
//! graph and linkage model whenever the dependency matrix changes. Premature
//! convergence restarts the population at the same size; budgets are
//! accounted in full-evaluation units through the ledger.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)] // used by the no_std build for float intrinsics
use num_traits::Float;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::conditional::{clique_seed, factorize, FactorizationKind};
use crate::fos::{build_linkage_tree, build_static, FosElement, FosKind, FosModel};
use crate::linkage::{maybe_rebuild, DependencyMatrix, ProbeContext, TestSchedule};
use crate::problems::{EvaluationLedger, GrayBoxProblem, Solution};
use crate::sampler::{
    adapt_variance, apply_ams, estimate, forward_sample_with_z, AmsState, AvsState,
    ElementSampler, SdrAccumulator,
};
use crate::vig::Vig;

/// The compared linkage models: generic baselines, static (pre-defined VIG)
/// conditional models, and fitness-based (learned) models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkageMode {
    Univariate,
    Full,
    StaticUcondHg,
    StaticMcondHg,
    StaticMcondHgCs,
    FbLt,
    FbUcondHg,
    FbMcondHg,
    FbMcondHgCs,
}

pub const ALL_MODES: [LinkageMode; 9] = [
    LinkageMode::Univariate,
    LinkageMode::Full,
    LinkageMode::StaticUcondHg,
    LinkageMode::StaticMcondHg,
    LinkageMode::StaticMcondHgCs,
    LinkageMode::FbLt,
    LinkageMode::FbUcondHg,
    LinkageMode::FbMcondHg,
    LinkageMode::FbMcondHgCs,
];

impl LinkageMode {
    pub fn name(&self) -> &'static str {
        match self {
            LinkageMode::Univariate => "univariate",
            LinkageMode::Full => "full",
            LinkageMode::StaticUcondHg => "static_ucond_hg",
            LinkageMode::StaticMcondHg => "static_mcond_hg",
            LinkageMode::StaticMcondHgCs => "static_mcond_hg_cs",
            LinkageMode::FbLt => "fb_lt",
            LinkageMode::FbUcondHg => "fb_ucond_hg",
            LinkageMode::FbMcondHg => "fb_mcond_hg",
            LinkageMode::FbMcondHgCs => "fb_mcond_hg_cs",
        }
    }

    pub fn parse(name: &str) -> Option<LinkageMode> {
        ALL_MODES.into_iter().find(|m| m.name() == name)
    }

    /// Learns the structure with fitness dependency tests during the run.
    pub fn is_fitness_based(&self) -> bool {
        matches!(
            self,
            LinkageMode::FbLt
                | LinkageMode::FbUcondHg
                | LinkageMode::FbMcondHg
                | LinkageMode::FbMcondHgCs
        )
    }

    /// Uses a conditional (hybrid GOM) model derived from a VIG.
    pub fn is_conditional(&self) -> bool {
        matches!(
            self,
            LinkageMode::StaticUcondHg
                | LinkageMode::StaticMcondHg
                | LinkageMode::StaticMcondHgCs
                | LinkageMode::FbUcondHg
                | LinkageMode::FbMcondHg
                | LinkageMode::FbMcondHgCs
        )
    }

    /// Requires the problem's analytic VIG at construction time.
    pub fn needs_analytic_vig(&self) -> bool {
        matches!(
            self,
            LinkageMode::StaticUcondHg
                | LinkageMode::StaticMcondHg
                | LinkageMode::StaticMcondHgCs
        )
    }

    fn factorization_kind(&self) -> Option<FactorizationKind> {
        match self {
            LinkageMode::StaticUcondHg | LinkageMode::FbUcondHg => {
                Some(FactorizationKind::UCond)
            }
            LinkageMode::StaticMcondHg
            | LinkageMode::StaticMcondHgCs
            | LinkageMode::FbMcondHg
            | LinkageMode::FbMcondHgCs => Some(FactorizationKind::MCond),
            _ => None,
        }
    }

    fn uses_clique_seeding(&self) -> bool {
        matches!(self, LinkageMode::StaticMcondHgCs | LinkageMode::FbMcondHgCs)
    }
}

impl fmt::Display for LinkageMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Run configuration. Defaults mirror the experimental setup: selection
/// fraction 0.35, budget 1e7 full evaluations, value-to-reach 1e-10,
/// AMaLGaM-family adaptation constants. Random acceptance of worse GOM
/// steps is kept as a mechanism but defaults to probability zero: with
/// per-element application, even a few percent of randomly accepted
/// deteriorations keeps re-injecting large marginal-resample jumps and
/// measurably cripples conditional models on strongly coupled problems.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EaConfig {
    pub population_size: usize,
    pub tau: f64,
    pub p_accept: f64,
    pub linkage_mode: LinkageMode,
    pub budget: f64,
    pub vtr: f64,
    /// Enforced by the caller through a stop hook (the core has no clock);
    /// carried here so run artifacts record it.
    pub wall_clock_limit_secs: Option<f64>,
    pub seed: u64,
    pub max_generations: Option<u64>,
    pub ams_multiplier: f64,
    pub avs_decay: f64,
    pub sdr_threshold: f64,
    pub fi_shrink: f64,
    /// None: min(dimension, 100).
    pub max_element_size: Option<usize>,
    pub dsm_epsilon_rel: f64,
    pub dsm_eta: f64,
    pub pause_window: usize,
    pub pause_generations: u64,
    /// None: one iteration of `dimension` tests per generation.
    pub tests_per_generation: Option<usize>,
    pub fitness_variance_tolerance: f64,
    pub fitness_gap_tolerance: f64,
    /// Record a DSM snapshot whenever the learned VIG's edge set changes.
    pub snapshot_dsms: bool,
    /// Record one (generation, best, evaluations) trace point per generation.
    pub record_trace: bool,
}

impl EaConfig {
    pub fn new(linkage_mode: LinkageMode, population_size: usize, seed: u64) -> Self {
        EaConfig {
            population_size,
            tau: 0.35,
            p_accept: 0.0,
            linkage_mode,
            budget: crate::problems::DEFAULT_BUDGET,
            vtr: crate::problems::DEFAULT_VTR,
            wall_clock_limit_secs: None,
            seed,
            max_generations: None,
            ams_multiplier: 2.0,
            avs_decay: crate::sampler::DEFAULT_AVS_DECAY,
            sdr_threshold: crate::sampler::DEFAULT_SDR_THRESHOLD,
            fi_shrink: 0.5,
            max_element_size: None,
            dsm_epsilon_rel: crate::linkage::DEFAULT_EPSILON_REL,
            dsm_eta: crate::linkage::DEFAULT_ETA,
            pause_window: crate::linkage::DEFAULT_PAUSE_WINDOW,
            pause_generations: crate::linkage::DEFAULT_PAUSE_GENERATIONS,
            tests_per_generation: None,
            fitness_variance_tolerance: 1e-30,
            fitness_gap_tolerance: 1e-13,
            snapshot_dsms: false,
            record_trace: false,
        }
    }

    pub fn nis_max(&self) -> u32 {
        1 + (self.population_size as f64).log10().floor() as u32
    }

    pub fn selection_size(&self) -> usize {
        (self.tau * self.population_size as f64).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    PopulationTooSmall { got: usize },
    SelectionTooSmall { got: usize },
    InvalidFraction { name: &'static str, got: f64 },
    AnalyticVigRequired { mode: LinkageMode },
    ZeroDimension,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::PopulationTooSmall { got } => {
                write!(f, "population size {got} is below the minimum of 8")
            }
            RunError::SelectionTooSmall { got } => {
                write!(f, "selection size {got} is below 2; raise tau or the population size")
            }
            RunError::InvalidFraction { name, got } => {
                write!(f, "{name} = {got} is outside its valid range")
            }
            RunError::AnalyticVigRequired { mode } => {
                write!(f, "mode {mode} needs a problem with an analytic interaction graph")
            }
            RunError::ZeroDimension => write!(f, "problem dimension must be positive"),
        }
    }
}

/// DSM snapshot attached to run results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DsmSnapshot {
    pub generation: u64,
    pub dimension: usize,
    /// Row-major `dimension * dimension` strengths.
    pub strengths: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub generation: u64,
    pub best_objective: f64,
    pub evaluations: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub success: bool,
    pub evaluations_spent: f64,
    pub generations: u64,
    pub restarts: u64,
    pub best_objective: f64,
    pub best_genotype: Vec<f64>,
    pub dsm_snapshots: Vec<DsmSnapshot>,
    pub final_dsm: Option<DsmSnapshot>,
    pub trace: Vec<TracePoint>,
}

/// Per-generation observer payload (diagnostics and tests).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationInfo<'a> {
    pub generation: u64,
    pub elitist_objective: f64,
    pub population_best: f64,
    pub population_worst: f64,
    pub evaluations: f64,
    pub multipliers: &'a [f64],
}

/// Runs the optimizer to termination (value-to-reach, budget, generation
/// cap, or stop hook).
pub fn run(problem: &GrayBoxProblem, config: &EaConfig) -> Result<RunResult, RunError> {
    run_with_stop(problem, config, || false)
}

/// `run` with an external stop hook, checked once per generation; the
/// harness wires wall-clock limits through it.
pub fn run_with_stop(
    problem: &GrayBoxProblem,
    config: &EaConfig,
    stop: impl FnMut() -> bool,
) -> Result<RunResult, RunError> {
    run_with_hooks(problem, config, stop, |_| {})
}

/// `run_with_stop` plus a per-generation observer.
pub fn run_with_hooks(
    problem: &GrayBoxProblem,
    config: &EaConfig,
    mut stop: impl FnMut() -> bool,
    mut observe: impl FnMut(GenerationInfo<'_>),
) -> Result<RunResult, RunError> {
    validate(problem, config)?;
    let mut machine = Machine::new(problem, config);
    machine.initialize_segment();
    loop {
        machine.record_trace_point();
        machine.observe(&mut observe);
        if machine.best.objective <= config.vtr && machine.evaluated_any {
            return Ok(machine.finish(true));
        }
        if machine.ledger.exhausted() || stop() {
            return Ok(machine.finish(false));
        }
        if let Some(cap) = config.max_generations {
            if machine.generation >= cap {
                return Ok(machine.finish(false));
            }
        }
        machine.run_generation();
    }
}

fn validate(problem: &GrayBoxProblem, config: &EaConfig) -> Result<(), RunError> {
    if problem.dimension() == 0 {
        return Err(RunError::ZeroDimension);
    }
    if config.population_size < 8 {
        return Err(RunError::PopulationTooSmall { got: config.population_size });
    }
    if !(config.tau > 0.0 && config.tau < 1.0) {
        return Err(RunError::InvalidFraction { name: "tau", got: config.tau });
    }
    if !(0.0..1.0).contains(&config.p_accept) {
        return Err(RunError::InvalidFraction { name: "p_accept", got: config.p_accept });
    }
    if config.selection_size() < 2 {
        return Err(RunError::SelectionTooSmall { got: config.selection_size() });
    }
    if config.linkage_mode.needs_analytic_vig() && problem.analytic_vig().is_none() {
        return Err(RunError::AnalyticVigRequired { mode: config.linkage_mode });
    }
    Ok(())
}

/// GOM application units in visiting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GomUnit {
    /// One full forward-sampling pass over the factorization.
    Generational,
    /// Index into the model's element list.
    Element(usize),
}

/// Visiting order for one generation: hybrid models always run the
/// generational element first, all other elements in a fresh random
/// permutation.
pub fn element_order<R: Rng>(model: &FosModel, rng: &mut R) -> Vec<GomUnit> {
    use rand::seq::SliceRandom;
    let mut elements: Vec<GomUnit> =
        (0..model.elements.len()).map(GomUnit::Element).collect();
    elements.shuffle(rng);
    let mut order = Vec::with_capacity(elements.len() + 1);
    if model.factorization.is_some() {
        order.push(GomUnit::Generational);
    }
    order.extend(elements);
    order
}

/// Outcome of a single GOM step.
#[derive(Debug, Clone, PartialEq)]
pub struct GomOutcome {
    pub accepted: bool,
    pub improved: bool,
    /// Standard-normal draw behind the sampled values (empty when sampling
    /// failed).
    pub z: Vec<f64>,
}

/// One gene-pool optimal mixing step: sample the element's variables
/// (conditioning values read from the solution itself), insert, evaluate
/// via the cheaper of a partial or full evaluation, and accept on
/// improvement or with probability `p_accept`; otherwise restore the
/// previous state exactly.
pub fn gom_step<R: Rng>(
    problem: &GrayBoxProblem,
    solution: &mut Solution,
    element: &FosElement,
    sampler: &ElementSampler,
    multiplier: f64,
    p_accept: f64,
    ledger: &mut EvaluationLedger,
    rng: &mut R,
) -> GomOutcome {
    let parent_values: Vec<f64> =
        element.parents.iter().map(|&p| solution.genotype[p]).collect();
    let Ok((values, z)) =
        sampler.sample_conditional_with_z(&parent_values, multiplier, rng)
    else {
        return GomOutcome { accepted: false, improved: false, z: Vec::new() };
    };
    let old_objective = solution.objective;
    let Ok(undo) =
        problem.replace_and_evaluate(solution, &element.variables, &values, ledger)
    else {
        return GomOutcome { accepted: false, improved: false, z };
    };
    let improved = solution.objective < old_objective;
    if improved || rng.random_range(0.0..1.0) < p_accept {
        GomOutcome { accepted: true, improved, z }
    } else {
        solution.revert(&undo);
        GomOutcome { accepted: false, improved: false, z }
    }
}

/// Moves a stagnated solution toward the elitist element by element with the
/// configured shrink factor, keeping improving moves; when a full pass
/// yields no improvement the solution is overwritten with the elitist. The
/// no-improvement stretch is reset either way.
pub fn forced_improvement(
    problem: &GrayBoxProblem,
    solution: &mut Solution,
    elitist: &Solution,
    elements: &[FosElement],
    fi_shrink: f64,
    ledger: &mut EvaluationLedger,
) -> bool {
    let mut improved_any = false;
    for element in elements {
        let targets: Vec<f64> = element
            .variables
            .iter()
            .map(|&v| {
                let x = solution.genotype[v];
                x + fi_shrink * (elitist.genotype[v] - x)
            })
            .collect();
        let old_objective = solution.objective;
        let Ok(undo) =
            problem.replace_and_evaluate(solution, &element.variables, &targets, ledger)
        else {
            continue;
        };
        if solution.objective < old_objective {
            improved_any = true;
        } else {
            solution.revert(&undo);
        }
    }
    if !improved_any {
        *solution = elitist.clone();
    }
    solution.nis = 0;
    improved_any
}

/// Spread-based premature-convergence trigger: the population's objective
/// variance or its best-worst gap has collapsed.
pub fn detect_premature_convergence(
    population: &[Solution],
    fitness_variance_tolerance: f64,
    fitness_gap_tolerance: f64,
) -> bool {
    if population.len() < 2 {
        return true;
    }
    let n = population.len() as f64;
    let mean: f64 = population.iter().map(|s| s.objective).sum::<f64>() / n;
    let variance: f64 =
        population.iter().map(|s| (s.objective - mean).powi(2)).sum::<f64>() / n;
    let best = population.iter().map(|s| s.objective).fold(f64::INFINITY, f64::min);
    let worst = population.iter().map(|s| s.objective).fold(f64::NEG_INFINITY, f64::max);
    variance < fitness_variance_tolerance
        || (worst - best) < fitness_gap_tolerance * (1.0 + best.abs())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum AvsKey {
    Generational,
    Element(Vec<usize>, Vec<usize>),
}

struct Machine<'a> {
    problem: &'a GrayBoxProblem,
    cfg: &'a EaConfig,
    rng: ChaCha12Rng,
    ledger: EvaluationLedger,
    population: Vec<Solution>,
    elitist: Solution,
    best: Solution,
    evaluated_any: bool,
    fos: FosModel,
    vig: Option<Vig>,
    dsm: Option<DependencyMatrix>,
    schedule: Option<TestSchedule>,
    avs: BTreeMap<AvsKey, AvsState>,
    ams: AmsState,
    prev_selection_mean: Option<Vec<f64>>,
    improved_this_generation: Vec<bool>,
    generation: u64,
    restarts: u64,
    elitist_improved_this_generation: bool,
    stagnant_generations: u32,
    snapshots: Vec<DsmSnapshot>,
    trace: Vec<TracePoint>,
    max_element_size: usize,
}

impl<'a> Machine<'a> {
    fn new(problem: &'a GrayBoxProblem, cfg: &'a EaConfig) -> Self {
        let dim = problem.dimension();
        let placeholder = Solution {
            genotype: vec![0.0; dim],
            objective: f64::INFINITY,
            subfunction_values: Vec::new(),
            nis: 0,
        };
        let mut ledger = EvaluationLedger::new(cfg.budget);
        ledger.wall_clock_limit = cfg
            .wall_clock_limit_secs
            .map(core::time::Duration::from_secs_f64);
        Machine {
            problem,
            cfg,
            rng: ChaCha12Rng::seed_from_u64(cfg.seed),
            ledger,
            population: Vec::new(),
            elitist: placeholder.clone(),
            best: placeholder,
            evaluated_any: false,
            fos: build_static(FosKind::Univariate, dim),
            vig: None,
            dsm: None,
            schedule: None,
            avs: BTreeMap::new(),
            ams: AmsState::new(dim, 0.5 * cfg.tau, cfg.ams_multiplier),
            prev_selection_mean: None,
            improved_this_generation: vec![false; cfg.population_size],
            generation: 0,
            restarts: 0,
            elitist_improved_this_generation: false,
            stagnant_generations: 0,
            snapshots: Vec::new(),
            trace: Vec::new(),
            max_element_size: cfg.max_element_size.unwrap_or(100).min(dim.max(1)),
        }
    }

    /// Uniform initialization, model reset, fresh elitist; used at the start
    /// of the run and after every restart.
    fn initialize_segment(&mut self) {
        let dim = self.problem.dimension();
        let n = self.cfg.population_size;
        self.population.clear();
        for _ in 0..n {
            if self.ledger.exhausted() {
                break;
            }
            let genotype: Vec<f64> = (0..dim)
                .map(|_| {
                    self.rng
                        .random_range(self.problem.lower_init..self.problem.upper_init)
                })
                .collect();
            let solution = self
                .problem
                .evaluate_full(&genotype, &mut self.ledger)
                .expect("genotype length matches dimension");
            self.population.push(solution);
        }
        if let Some(best) = self
            .population
            .iter()
            .min_by(|a, b| a.objective.total_cmp(&b.objective))
        {
            self.elitist = best.clone();
            self.evaluated_any = true;
            if self.elitist.objective < self.best.objective {
                self.best = self.elitist.clone();
            }
        }
        self.avs.clear();
        self.ams = AmsState::new(dim, 0.5 * self.cfg.tau, self.cfg.ams_multiplier);
        self.prev_selection_mean = None;
        self.stagnant_generations = 0;
        if self.cfg.linkage_mode.is_fitness_based() {
            let mut dsm = DependencyMatrix::new(dim);
            dsm.epsilon_rel = self.cfg.dsm_epsilon_rel;
            dsm.eta = self.cfg.dsm_eta;
            self.dsm = Some(dsm);
            let budget = self.cfg.tests_per_generation.unwrap_or(dim);
            let mut schedule = TestSchedule::new(dim, budget, &mut self.rng);
            schedule.window_len = self.cfg.pause_window;
            schedule.pause_generations = self.cfg.pause_generations;
            self.schedule = Some(schedule);
            self.vig = Some(Vig::new(dim));
        } else if self.cfg.linkage_mode.needs_analytic_vig() {
            self.vig = self.problem.analytic_vig().cloned();
        }
        self.rebuild_model();
    }

    fn rebuild_model(&mut self) {
        let dim = self.problem.dimension();
        let mode = self.cfg.linkage_mode;
        self.fos = match mode {
            LinkageMode::Univariate => build_static(FosKind::Univariate, dim),
            LinkageMode::Full => build_static(FosKind::Full, dim),
            LinkageMode::FbLt => {
                let dsm = self.dsm.as_ref().expect("learning mode has a DSM");
                build_linkage_tree(dsm, self.max_element_size)
            }
            _ => {
                let vig = self.vig.as_ref().expect("conditional mode has a VIG");
                let kind = mode.factorization_kind().expect("conditional mode");
                let start = self.rng.random_range(0..dim);
                let factorization = factorize(vig, kind, start);
                if mode.uses_clique_seeding() {
                    let cliques = clique_seed(vig).cliques;
                    crate::conditional::compose_hg(
                        factorization,
                        cliques,
                        FosKind::CliqueSeeded,
                    )
                } else {
                    let elements = factorization.factors.clone();
                    let kind = match kind {
                        FactorizationKind::UCond => FosKind::UCond,
                        FactorizationKind::MCond => FosKind::MCond,
                    };
                    crate::conditional::compose_hg(factorization, elements, kind)
                }
            }
        };
    }

    fn record_trace_point(&mut self) {
        if self.cfg.record_trace {
            self.trace.push(TracePoint {
                generation: self.generation,
                best_objective: self.best.objective,
                evaluations: self.ledger.spent(),
            });
        }
    }

    fn observe(&self, observe: &mut impl FnMut(GenerationInfo<'_>)) {
        let multipliers: Vec<f64> = self.avs.values().map(|s| s.multiplier).collect();
        let best = self
            .population
            .iter()
            .map(|s| s.objective)
            .fold(f64::INFINITY, f64::min);
        let worst = self
            .population
            .iter()
            .map(|s| s.objective)
            .fold(f64::NEG_INFINITY, f64::max);
        observe(GenerationInfo {
            generation: self.generation,
            elitist_objective: self.elitist.objective,
            population_best: best,
            population_worst: worst,
            evaluations: self.ledger.spent(),
            multipliers: &multipliers,
        });
    }

    fn done(&self) -> bool {
        self.ledger.exhausted()
            || (self.best.objective <= self.cfg.vtr && self.evaluated_any)
    }

    fn selection_indices(&self) -> Vec<usize> {
        let mut indices: Vec<usize> = (0..self.population.len()).collect();
        indices.sort_by(|&a, &b| {
            self.population[a]
                .objective
                .total_cmp(&self.population[b].objective)
                .then(a.cmp(&b))
        });
        indices.truncate(self.cfg.selection_size());
        indices
    }

    fn selection_mean(&self) -> Vec<f64> {
        let indices = self.selection_indices();
        let dim = self.problem.dimension();
        let mut mean = vec![0.0; dim];
        for &i in &indices {
            for (m, &x) in mean.iter_mut().zip(&self.population[i].genotype) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= indices.len() as f64;
        }
        mean
    }

    fn estimate_for(&self, element: &FosElement) -> Option<ElementSampler> {
        let indices = self.selection_indices();
        let selection: Vec<&[f64]> = indices
            .iter()
            .map(|&i| self.population[i].genotype.as_slice())
            .collect();
        estimate(&selection, &element.variables, &element.parents).ok()
    }

    fn note_improvement(&mut self, slot: usize) {
        self.improved_this_generation[slot] = true;
        if self.population[slot].objective < self.elitist.objective {
            self.elitist_improved_this_generation = true;
            self.elitist = self.population[slot].clone();
            if self.elitist.objective < self.best.objective {
                self.best = self.elitist.clone();
            }
        }
    }

    fn multiplier_for(&self, key: &AvsKey) -> f64 {
        self.avs.get(key).map(|s| s.multiplier).unwrap_or(1.0)
    }

    fn mean_multiplier(&self) -> f64 {
        if self.avs.is_empty() {
            1.0
        } else {
            self.avs.values().map(|s| s.multiplier).sum::<f64>() / self.avs.len() as f64
        }
    }

    /// One iteration of dependency tests followed by a model rebuild when
    /// the DSM changed. A snapshot is recorded whenever the learned edge set
    /// changes.
    fn learning_step(&mut self) {
        let Some(schedule) = self.schedule.as_mut() else { return };
        let Some(dsm) = self.dsm.as_mut() else { return };
        let dim = self.problem.dimension();
        let mut lower = vec![f64::INFINITY; dim];
        let mut upper = vec![f64::NEG_INFINITY; dim];
        let mut mean = vec![0.0; dim];
        for solution in &self.population {
            for (v, &x) in solution.genotype.iter().enumerate() {
                lower[v] = lower[v].min(x);
                upper[v] = upper[v].max(x);
                mean[v] += x;
            }
        }
        let count = self.population.len() as f64;
        for m in &mut mean {
            *m /= count;
        }
        let mut sigma = vec![0.0; dim];
        for solution in &self.population {
            for (v, &x) in solution.genotype.iter().enumerate() {
                sigma[v] += (x - mean[v]).powi(2);
            }
        }
        for s in &mut sigma {
            *s = (*s / count).sqrt();
        }
        let ctx = ProbeContext {
            base: &self.elitist,
            sigma: &sigma,
            box_lower: &lower,
            box_upper: &upper,
        };
        schedule.run_generation(
            dsm,
            self.problem,
            &ctx,
            self.generation,
            &mut self.ledger,
            &mut self.rng,
        );
        if let Some(new_vig) = maybe_rebuild(dsm) {
            let support_changed = self.vig.as_ref() != Some(&new_vig);
            if support_changed && self.cfg.snapshot_dsms {
                self.snapshots.push(DsmSnapshot {
                    generation: self.generation,
                    dimension: dim,
                    strengths: dsm.strengths_row_major(),
                });
            }
            self.vig = Some(new_vig);
            self.rebuild_model();
        }
    }

    fn run_generation(&mut self) {
        let n = self.population.len();
        self.population[0] = self.elitist.clone();
        self.improved_this_generation = vec![false; n];
        self.elitist_improved_this_generation = false;
        if self.cfg.linkage_mode.is_fitness_based() {
            self.learning_step();
        }
        if self.cfg.linkage_mode.is_conditional() {
            // re-derive the factorization from a fresh random start vertex
            // every generation, rotating the conditioning direction
            self.rebuild_model();
        }
        let order = element_order(&self.fos, &mut self.rng);
        for unit in order {
            if self.done() {
                break;
            }
            match unit {
                GomUnit::Generational => self.generational_pass(),
                GomUnit::Element(index) => self.element_pass(index),
            }
        }
        if !self.done() {
            self.ams_pass();
        }
        if !self.done() {
            self.forced_improvement_pass();
        }
        for i in 1..n {
            if self.improved_this_generation[i] {
                self.population[i].nis = 0;
            } else {
                self.population[i].nis = self.population[i].nis.saturating_add(1);
            }
        }
        let current_mean = self.selection_mean();
        if let Some(prev) = self.prev_selection_mean.take() {
            self.ams.update(&prev, &current_mean);
        }
        self.prev_selection_mean = Some(current_mean);
        if self.elitist_improved_this_generation {
            self.stagnant_generations = 0;
        } else {
            self.stagnant_generations += 1;
        }
        self.generation += 1;
        // restart only when the spread has collapsed AND the elitist has
        // stopped moving; a contracted population that still improves every
        // generation is in its endgame, not prematurely converged
        if !self.done()
            && self.stagnant_generations >= 1
            && detect_premature_convergence(
                &self.population,
                self.cfg.fitness_variance_tolerance,
                self.cfg.fitness_gap_tolerance,
            )
        {
            self.restarts += 1;
            self.initialize_segment();
        }
    }

    /// The generational element: full forward sampling over the
    /// factorization, one full evaluation per solution, improve-or-restore acceptance.
    fn generational_pass(&mut self) {
        let Some(factorization) = self.fos.factorization.clone() else { return };
        let samplers: Option<Vec<ElementSampler>> =
            factorization.factors.iter().map(|f| self.estimate_for(f)).collect();
        let Some(samplers) = samplers else { return };
        let multiplier = self.multiplier_for(&AvsKey::Generational);
        let mut sdr = SdrAccumulator::default();
        let elitist_objective = self.elitist.objective;
        for slot in 1..self.population.len() {
            if self.done() {
                break;
            }
            let Ok((genotype, z)) = forward_sample_with_z(
                &factorization,
                &samplers,
                &self.population[slot].genotype,
                multiplier,
                &mut self.rng,
            ) else {
                continue;
            };
            let Ok(mut candidate) = self.problem.evaluate_full(&genotype, &mut self.ledger)
            else {
                continue;
            };
            candidate.nis = self.population[slot].nis;
            let improved = candidate.objective < self.population[slot].objective;
            if improved || self.rng.random_range(0.0..1.0) < self.cfg.p_accept {
                let beats_elitist = candidate.objective < elitist_objective;
                self.population[slot] = candidate;
                if improved {
                    self.note_improvement(slot);
                }
                if beats_elitist {
                    sdr.record(&z);
                }
            }
        }
        let info = sdr.improvement_info(self.cfg.sdr_threshold);
        let state = self.avs.entry(AvsKey::Generational).or_default();
        adapt_variance(state, info, self.cfg.avs_decay);
    }

    fn element_pass(&mut self, index: usize) {
        let element = self.fos.elements[index].clone();
        let Some(sampler) = self.estimate_for(&element) else { return };
        let key = AvsKey::Element(element.variables.clone(), element.parents.clone());
        let multiplier = self.multiplier_for(&key);
        let mut sdr = SdrAccumulator::default();
        let elitist_objective = self.elitist.objective;
        for slot in 1..self.population.len() {
            if self.done() {
                break;
            }
            let solution = &mut self.population[slot];
            let outcome = gom_step(
                self.problem,
                solution,
                &element,
                &sampler,
                multiplier,
                self.cfg.p_accept,
                &mut self.ledger,
                &mut self.rng,
            );
            if outcome.improved {
                let beats_elitist = self.population[slot].objective < elitist_objective;
                self.note_improvement(slot);
                if beats_elitist {
                    sdr.record(&outcome.z);
                }
            }
        }
        let info = sdr.improvement_info(self.cfg.sdr_threshold);
        let state = self.avs.entry(key).or_default();
        adapt_variance(state, info, self.cfg.avs_decay);
    }

    /// Anticipated mean shift on the leading fraction of non-elitist
    /// solutions, full evaluation and Alg.-2 acceptance per solution.
    fn ams_pass(&mut self) {
        if self.ams.is_zero() {
            return;
        }
        let count = self
            .ams
            .shift_count(self.population.len())
            .min(self.population.len().saturating_sub(1));
        let multiplier = self.mean_multiplier();
        for slot in 1..=count {
            if self.done() {
                break;
            }
            let mut genotype = self.population[slot].genotype.clone();
            apply_ams(&mut genotype, &self.ams, multiplier);
            let Ok(mut candidate) = self.problem.evaluate_full(&genotype, &mut self.ledger)
            else {
                continue;
            };
            candidate.nis = self.population[slot].nis;
            let improved = candidate.objective < self.population[slot].objective;
            if improved || self.rng.random_range(0.0..1.0) < self.cfg.p_accept {
                self.population[slot] = candidate;
                if improved {
                    self.note_improvement(slot);
                }
            }
        }
    }

    fn forced_improvement_pass(&mut self) {
        let nis_max = self.cfg.nis_max();
        let elements = self.fos.elements.clone();
        let elitist = self.elitist.clone();
        for slot in 1..self.population.len() {
            if self.done() {
                break;
            }
            if self.population[slot].nis <= nis_max {
                continue;
            }
            let improved = forced_improvement(
                self.problem,
                &mut self.population[slot],
                &elitist,
                &elements,
                self.cfg.fi_shrink,
                &mut self.ledger,
            );
            if improved {
                self.note_improvement(slot);
            }
        }
    }

    fn finish(mut self, success: bool) -> RunResult {
        let final_dsm = self.dsm.as_ref().map(|dsm| DsmSnapshot {
            generation: self.generation,
            dimension: dsm.dimension(),
            strengths: dsm.strengths_row_major(),
        });
        self.record_trace_point();
        RunResult {
            success,
            evaluations_spent: self.ledger.spent(),
            generations: self.generation,
            restarts: self.restarts,
            best_objective: self.best.objective,
            best_genotype: self.best.genotype,
            dsm_snapshots: self.snapshots,
            final_dsm,
            trace: self.trace,
        }
    }
}

/// Convenience: parse a mode list such as "univariate,fb_lt".
pub fn parse_modes(list: &str) -> Result<Vec<LinkageMode>, String> {
    list.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            LinkageMode::parse(s).ok_or_else(|| {
                let mut msg = String::from("unknown linkage mode '");
                msg.push_str(s);
                msg.push_str("', valid modes: ");
                for (i, m) in ALL_MODES.iter().enumerate() {
                    if i > 0 {
                        msg.push_str(", ");
                    }
                    msg.push_str(m.name());
                }
                msg
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_problem;

    fn quick_config(mode: LinkageMode, n: usize, seed: u64) -> EaConfig {
        let mut cfg = EaConfig::new(mode, n, seed);
        cfg.budget = 1e6;
        cfg
    }

    #[test]
    fn sphere_univariate_succeeds_in_all_seeds() {
        let problem = make_problem("sphere", 10).unwrap();
        for seed in 0..30 {
            let cfg = quick_config(LinkageMode::Univariate, 64, seed);
            let result = run(&problem, &cfg).unwrap();
            assert!(result.success, "seed {seed}: best {}", result.best_objective);
            assert!(result.best_objective <= cfg.vtr);
            assert!(result.evaluations_spent <= 1e6);
        }
    }

    #[test]
    fn zero_budget_fails_with_zero_evaluations() {
        let problem = make_problem("sphere", 5).unwrap();
        let mut cfg = quick_config(LinkageMode::Univariate, 16, 1);
        cfg.budget = 0.0;
        let result = run(&problem, &cfg).unwrap();
        assert!(!result.success);
        assert_eq!(result.evaluations_spent, 0.0);
        assert_eq!(result.generations, 0);
    }

    #[test]
    fn vtr_satisfied_by_initialization_terminates_within_n_evaluations() {
        let problem = make_problem("sphere", 4).unwrap();
        let mut cfg = quick_config(LinkageMode::Univariate, 16, 3);
        // every initial solution satisfies this target
        cfg.vtr = 1e12;
        let result = run(&problem, &cfg).unwrap();
        assert!(result.success);
        assert!(result.evaluations_spent <= 16.0);
    }

    #[test]
    fn determinism_same_seed_same_result() {
        let problem = make_problem("reb2weak", 8).unwrap();
        for mode in [LinkageMode::Univariate, LinkageMode::FbMcondHgCs, LinkageMode::FbLt] {
            let mut cfg = quick_config(mode, 32, 7);
            cfg.max_generations = Some(40);
            cfg.record_trace = true;
            let a = run(&problem, &cfg).unwrap();
            let b = run(&problem, &cfg).unwrap();
            assert_eq!(a, b, "mode {mode}");
        }
        let other = run(&problem, &quick_config(LinkageMode::Univariate, 32, 8)).unwrap();
        let base = run(&problem, &quick_config(LinkageMode::Univariate, 32, 7)).unwrap();
        assert_ne!(base.evaluations_spent, other.evaluations_spent);
    }

    #[test]
    fn budget_exactness_ledger_equals_result() {
        let problem = make_problem("reb2strong", 6).unwrap();
        let mut cfg = quick_config(LinkageMode::FbMcondHg, 16, 5);
        cfg.budget = 500.0;
        let result = run(&problem, &cfg).unwrap();
        assert!(!result.success);
        assert!(result.evaluations_spent >= 500.0);
        // overshoot is bounded by one element pass of full evaluations
        assert!(result.evaluations_spent < 500.0 + 20.0);
    }

    #[test]
    fn elitist_objective_is_monotone_within_a_segment() {
        let problem = make_problem("rosenbrock", 6).unwrap();
        let mut cfg = quick_config(LinkageMode::Univariate, 24, 11);
        cfg.max_generations = Some(60);
        cfg.record_trace = true;
        let result = run(&problem, &cfg).unwrap();
        let mut last = f64::INFINITY;
        for point in &result.trace {
            assert!(point.best_objective <= last + 1e-15);
            last = point.best_objective;
        }
    }

    #[test]
    fn static_modes_require_analytic_vig() {
        let mut problem = make_problem("rebgrid", 9).unwrap();
        problem.strip_analytic_vig();
        let cfg = quick_config(LinkageMode::StaticMcondHg, 16, 1);
        assert!(matches!(
            run(&problem, &cfg),
            Err(RunError::AnalyticVigRequired { .. })
        ));
    }

    #[test]
    fn fb_modes_never_read_the_analytic_vig() {
        // the problem value carries no analytic VIG at all, so any read
        // would fail loudly; learning modes must still run fine
        let mut problem = make_problem("rebgrid", 9).unwrap();
        problem.strip_analytic_vig();
        for mode in [LinkageMode::FbLt, LinkageMode::FbUcondHg, LinkageMode::FbMcondHgCs] {
            let mut cfg = quick_config(mode, 20, 9);
            cfg.max_generations = Some(12);
            let result = run(&problem, &cfg).unwrap();
            assert!(result.generations > 0, "mode {mode}");
        }
    }

    #[test]
    fn config_validation_errors() {
        let problem = make_problem("sphere", 4).unwrap();
        assert!(matches!(
            run(&problem, &quick_config(LinkageMode::Univariate, 4, 1)),
            Err(RunError::PopulationTooSmall { .. })
        ));
        let mut cfg = quick_config(LinkageMode::Univariate, 16, 1);
        cfg.tau = 1.4;
        assert!(matches!(
            run(&problem, &cfg),
            Err(RunError::InvalidFraction { name: "tau", .. })
        ));
        let mut cfg = quick_config(LinkageMode::Univariate, 16, 1);
        cfg.p_accept = 1.0;
        assert!(matches!(
            run(&problem, &cfg),
            Err(RunError::InvalidFraction { name: "p_accept", .. })
        ));
    }

    #[test]
    fn element_order_puts_generational_first_and_permutes_elements() {
        use crate::conditional::{compose_hg, factorize, FactorizationKind};
        use rand::SeedableRng;
        let problem = make_problem("rebgrid", 9).unwrap();
        let vig = problem.analytic_vig().unwrap();
        let f = factorize(vig, FactorizationKind::MCond, 8);
        let model = compose_hg(f.clone(), f.factors.clone(), FosKind::MCond);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let order = element_order(&model, &mut rng);
            assert_eq!(order[0], GomUnit::Generational);
            assert_eq!(order.len(), 7);
        }
        // single-element model
        let single = build_static(FosKind::Full, 9);
        assert_eq!(element_order(&single, &mut rng).len(), 1);
    }

    #[test]
    fn element_order_first_position_is_roughly_uniform() {
        use rand::SeedableRng;
        let model = build_static(FosKind::Univariate, 9);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1234);
        let trials = 9000usize;
        let mut counts = [0usize; 9];
        for _ in 0..trials {
            match element_order(&model, &mut rng)[0] {
                GomUnit::Element(i) => counts[i] += 1,
                GomUnit::Generational => panic!("no generational element here"),
            }
        }
        let expected = trials as f64 / 9.0;
        let chi2: f64 =
            counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // chi-square critical value, 8 degrees of freedom, alpha = 0.001
        assert!(chi2 < 26.125, "chi2 {chi2} with counts {counts:?}");
    }

    #[test]
    fn gom_step_rejection_restores_state_exactly() {
        use rand::SeedableRng;
        let problem = make_problem("reb2strong", 4).unwrap();
        let mut ledger = EvaluationLedger::new(1e6);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let mut solution =
            problem.evaluate_full(&[-111.0, -112.0, -113.0, -114.0], &mut ledger).unwrap();
        let element = FosElement::unconditional(vec![1, 2]);
        // a sampler centered far away almost always worsens the solution
        let mut cov = crate::linalg::SymMatrix::zeros(2);
        cov.set(0, 0, 1e-4);
        cov.set(1, 1, 1e-4);
        let sampler = ElementSampler::from_moments(
            vec![1, 2],
            vec![],
            vec![500.0, 500.0],
            cov,
        );
        let mut rejected = 0;
        for _ in 0..200 {
            let snapshot = solution.clone();
            let outcome = gom_step(
                &problem, &mut solution, &element, &sampler, 1.0, 0.05, &mut ledger,
                &mut rng,
            );
            if !outcome.accepted {
                assert_eq!(solution, snapshot);
                rejected += 1;
            } else {
                solution = snapshot; // reset for the next trial
            }
        }
        assert!(rejected > 100);
    }

    #[test]
    fn gom_step_acceptance_rate_is_at_least_p_accept() {
        use rand::SeedableRng;
        // wide Gaussian on a 1-D quadratic: acceptance must be at least the
        // random-acceptance floor
        let problem = make_problem("sphere", 1).unwrap();
        let mut ledger = EvaluationLedger::new(1e9);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(8);
        let element = FosElement::unconditional(vec![0]);
        let mut cov = crate::linalg::SymMatrix::zeros(1);
        cov.set(0, 0, 100.0);
        let sampler = ElementSampler::from_moments(vec![0], vec![], vec![0.0], cov);
        let mut accepted = 0usize;
        let trials = 10_000usize;
        let base = problem.evaluate_full(&[5.0], &mut ledger).unwrap();
        for _ in 0..trials {
            let mut solution = base.clone();
            let outcome = gom_step(
                &problem, &mut solution, &element, &sampler, 1.0, 0.05, &mut ledger,
                &mut rng,
            );
            if outcome.accepted {
                accepted += 1;
            }
        }
        let rate = accepted as f64 / trials as f64;
        assert!(rate >= 0.05, "acceptance rate {rate}");
    }

    #[test]
    fn forced_improvement_moves_toward_the_elitist() {
        let problem = make_problem("sphere", 4).unwrap();
        let mut ledger = EvaluationLedger::new(1e6);
        let elitist = problem.evaluate_full(&[0.0; 4], &mut ledger).unwrap();
        let mut solution = problem.evaluate_full(&[8.0; 4], &mut ledger).unwrap();
        solution.nis = 10;
        let elements: Vec<FosElement> =
            (0..4).map(|i| FosElement::unconditional(vec![i])).collect();
        let improved = forced_improvement(
            &problem, &mut solution, &elitist, &elements, 0.5, &mut ledger,
        );
        assert!(improved);
        assert_eq!(solution.nis, 0);
        for &x in &solution.genotype {
            assert!((x - 4.0).abs() < 1e-12, "expected halved distance, got {x}");
        }
        // already at the elitist: unchanged, stretch reset
        let mut clone = elitist.clone();
        clone.nis = 9;
        let improved =
            forced_improvement(&problem, &mut clone, &elitist, &elements, 0.5, &mut ledger);
        assert!(!improved);
        assert_eq!(clone.genotype, elitist.genotype);
        assert_eq!(clone.nis, 0);
    }

    #[test]
    fn premature_convergence_detection() {
        let problem = make_problem("sphere", 3).unwrap();
        let mut ledger = EvaluationLedger::new(1e6);
        let identical: Vec<Solution> =
            (0..5).map(|_| problem.evaluate_full(&[2.0; 3], &mut ledger).unwrap()).collect();
        assert!(detect_premature_convergence(&identical, 1e-30, 1e-13));
        let diverse: Vec<Solution> = (0..5)
            .map(|i| problem.evaluate_full(&[i as f64 + 1.0; 3], &mut ledger).unwrap())
            .collect();
        assert!(!detect_premature_convergence(&diverse, 1e-30, 1e-13));
        // tiny spread around a non-optimal value
        let tight: Vec<Solution> = (0..5)
            .map(|i| {
                let mut s = problem.evaluate_full(&[2.0; 3], &mut ledger).unwrap();
                s.objective += i as f64 * 1e-15;
                s
            })
            .collect();
        assert!(detect_premature_convergence(&tight, 1e-30, 1e-13));
    }

    #[test]
    fn restart_counter_increments_on_collapsed_population() {
        // unreachable target and a tiny population drive quick convergence
        let problem = make_problem("sphere", 3).unwrap();
        let mut cfg = quick_config(LinkageMode::Univariate, 8, 2);
        cfg.vtr = -1.0;
        cfg.max_generations = Some(4000);
        cfg.budget = 3e5;
        let result = run(&problem, &cfg).unwrap();
        assert!(!result.success);
        assert!(result.restarts > 0, "expected at least one restart");
    }

    #[test]
    fn mode_parsing_round_trips() {
        for mode in ALL_MODES {
            assert_eq!(LinkageMode::parse(mode.name()), Some(mode));
        }
        assert!(LinkageMode::parse("nosuch").is_none());
        assert_eq!(
            parse_modes("univariate, fb_lt").unwrap(),
            vec![LinkageMode::Univariate, LinkageMode::FbLt]
        );
        assert!(parse_modes("univariate,bogus").is_err());
    }

    #[test]
    fn all_modes_make_progress_on_rebgrid() {
        let problem = make_problem("rebgrid", 9).unwrap();
        for mode in ALL_MODES {
            let mut cfg = quick_config(mode, 32, 13);
            cfg.max_generations = Some(25);
            let result = run(&problem, &cfg).unwrap();
            let init_scale = 1e6 * 115.0f64.powi(2) * 9.0;
            assert!(
                result.best_objective < init_scale,
                "mode {mode} made no progress: {}",
                result.best_objective
            );
        }
    }
}
