//! `gomea` command-line front-end: single runs, bisection-based scalability
//! experiments, and DSM exports.
//!
//! Exit codes: 0 on success, 2 when a run finishes without reaching the
//! value-to-reach, 1 on usage or configuration errors.

use clap::{Args, Parser, Subcommand};
use gomea_core::gomea::{parse_modes, LinkageMode, ALL_MODES};
use gomea_core::problems::{make_problem, GrayBoxProblem, PROBLEM_NAMES};
use gomea_harness::bench::{
    bisect_population_size, corrected_metric, derive_seed, extrapolate_sizes, run_repeats,
    significance_table, BisectionSpec, BisectionTrace, RunSetup, StatRow,
};
use gomea_harness::config::ExperimentConfig;
use gomea_harness::files::{
    write_bisection_json, write_dsm_csv, write_dsm_sidecar, write_run_json,
    write_scalability_csv, write_stats_csv, write_trace_csv, DsmSidecar,
    ScalabilityRecord,
};
use gomea_harness::presets::{
    nearest_compatible_dimension, select_export_dsm, Preset,
};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "gomea",
    about = "Gray-box RV-GOMEA: benchmark runs, bisection scalability experiments, DSM exports",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one seeded run and write its trace CSV and result JSON.
    Run(RunArgs),
    /// Bisect population sizes over a problem/mode/dimension matrix and
    /// write scalability.csv, bisection.json, and stats.csv.
    Bisect(BisectArgs),
    /// Run a learning mode repeatedly and export per-run and averaged DSMs.
    Dsm(DsmArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON experiment config; explicit flags win over config values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Evaluation budget in full-evaluation units.
    #[arg(long)]
    budget: Option<f64>,
    /// Value-to-reach.
    #[arg(long)]
    vtr: Option<f64>,
    /// Master seed for run-seed derivation.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Wall-clock limit per run, in seconds.
    #[arg(long)]
    wall_clock_secs: Option<f64>,
    /// Generation cap per run.
    #[arg(long)]
    max_generations: Option<u64>,
    /// Worker threads (also capped by GOMEA_THREADS).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    problem: String,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    mode: String,
    /// Population size; defaults to the tuned preset for the
    /// configuration when one exists, else the bisection starting size.
    #[arg(long)]
    pop: Option<usize>,
    /// Summary format on stdout.
    #[arg(long, default_value = "json")]
    format: String,
    /// Also write the problem's JSON audit (name, dimension, sub-function
    /// index sets, parameters).
    #[arg(long, default_value_t = false)]
    dump_problem: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct BisectArgs {
    /// Comma-separated problem names (defaults to the full registry).
    #[arg(long)]
    problems: Option<String>,
    /// Comma-separated dimensionalities (defaults to the preset's).
    #[arg(long)]
    dims: Option<String>,
    /// Comma-separated linkage modes (defaults to all).
    #[arg(long)]
    modes: Option<String>,
    /// desk (10 repeats, small dimensions) or full (30 repeats).
    #[arg(long, default_value = "desk")]
    preset: String,
    /// Repeats per probed population size.
    #[arg(long)]
    repeats: Option<usize>,
    /// Independent bisections per configuration (median is reported).
    #[arg(long)]
    bisection_repeats: Option<usize>,
    #[arg(long)]
    min_pop: Option<usize>,
    #[arg(long)]
    max_pop: Option<usize>,
    /// Larger dimensionalities whose population sizes are estimated by
    /// log-log extrapolation of the bisected sizes and then run with
    /// fixed-size repeat sets.
    #[arg(long)]
    extrapolate_dims: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct DsmArgs {
    #[arg(long)]
    problem: String,
    #[arg(long)]
    dim: usize,
    /// A learning (fb_*) mode; static modes learn no DSM.
    #[arg(long, default_value = "fb_mcond_hg_cs")]
    mode: String,
    /// Seeded runs to export and average.
    #[arg(long, default_value_t = 30)]
    runs: usize,
    /// Population size per run.
    #[arg(long, default_value_t = 40)]
    pop: usize,
    #[command(flatten)]
    common: CommonArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap help/version requests are not usage errors
            use clap::error::ErrorKind;
            let _ = err.print();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let code = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Bisect(args) => cmd_bisect(args),
        Command::Dsm(args) => cmd_dsm(args),
    };
    match code {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

/// Config-file values merged under explicit flags.
struct Merged {
    config: ExperimentConfig,
    out_dir: PathBuf,
}

fn merge_common(common: &CommonArgs) -> Result<Merged, String> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(budget) = common.budget {
        config.budget = budget;
    }
    if let Some(vtr) = common.vtr {
        config.vtr = vtr;
    }
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    if let Some(secs) = common.wall_clock_secs {
        config.wall_clock_limit_secs = Some(secs);
    }
    if let Some(cap) = common.max_generations {
        config.tweaks.max_generations = Some(cap);
    }
    if let Some(threads) = common.threads {
        config.threads = Some(threads);
    }
    let out_dir = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(config.output_dir.clone()));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| format!("cannot create {}: {e}", out_dir.display()))?;
    init_thread_pool(config.threads);
    Ok(Merged { config, out_dir })
}

fn init_thread_pool(configured: Option<usize>) {
    let env_cap = std::env::var("GOMEA_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    let threads = match (configured, env_cap) {
        (Some(t), Some(cap)) => t.min(cap),
        (Some(t), None) => t,
        (None, Some(cap)) => cap,
        (None, None) => return,
    };
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build_global();
}

fn load_problem(name: &str, dim: usize) -> Result<GrayBoxProblem, String> {
    make_problem(name, dim).map_err(|e| e.to_string())
}

fn parse_mode(name: &str) -> Result<LinkageMode, String> {
    LinkageMode::parse(name).ok_or_else(|| {
        format!(
            "unknown linkage mode '{name}', valid modes: {}",
            ALL_MODES.map(|m| m.name()).join(", ")
        )
    })
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, String> {
    let merged = merge_common(&args.common)?;
    let config = &merged.config;
    let problem = load_problem(&args.problem, args.dim)?;
    let mode = parse_mode(&args.mode)?;
    let population = args.pop.unwrap_or_else(|| {
        gomea_harness::presets::preset_population_size(problem.name(), mode, args.dim)
            .unwrap_or_else(|| {
                BisectionSpec {
                    min_size: config.min_population,
                    max_size: config.max_population,
                    ..BisectionSpec::default()
                }
                .start_size(args.dim)
            })
    });
    if args.dump_problem {
        let audit = serde_json::to_string_pretty(&problem.audit()).expect("serializable");
        let path = merged
            .out_dir
            .join(format!("problem_{}_d{}.json", problem.name(), args.dim));
        std::fs::write(&path, audit).map_err(|e| e.to_string())?;
    }
    let setup = RunSetup {
        mode,
        budget: config.budget,
        vtr: config.vtr,
        master_seed: config.master_seed,
        wall_clock_limit_secs: config.wall_clock_limit_secs,
        tweak: config.tweaks.to_tweaks(),
    };
    let seed = derive_seed(
        config.master_seed,
        problem.name(),
        mode.name(),
        problem.dimension(),
        population,
        0,
    );
    let mut ea_config = setup.config(population, seed);
    ea_config.record_trace = true;
    let started = std::time::Instant::now();
    let limit = config.wall_clock_limit_secs;
    let result = gomea_core::gomea::run_with_stop(&problem, &ea_config, move || {
        limit.is_some_and(|secs| started.elapsed().as_secs_f64() >= secs)
    })
    .map_err(|e| e.to_string())?;

    let stem = format!("{}_{}_d{}_s{}", problem.name(), mode.name(), args.dim, config.master_seed);
    write_trace_csv(&merged.out_dir.join(format!("trace_{stem}.csv")), &result)
        .map_err(|e| e.to_string())?;
    write_run_json(
        &merged.out_dir.join(format!("run_{stem}.json")),
        problem.name(),
        problem.dimension(),
        &ea_config,
        &result,
    )
    .map_err(|e| e.to_string())?;

    match args.format.as_str() {
        "json" => println!(
            "{}",
            serde_json::json!({
                "problem": problem.name(),
                "mode": mode.name(),
                "dimension": problem.dimension(),
                "population_size": population,
                "success": result.success,
                "best_objective": result.best_objective,
                "evaluations": result.evaluations_spent,
                "generations": result.generations,
                "restarts": result.restarts,
            })
        ),
        "csv" => {
            println!("problem,mode,dimension,population_size,success,best_objective,evaluations,generations,restarts");
            println!(
                "{},{},{},{},{},{},{},{},{}",
                problem.name(),
                mode.name(),
                problem.dimension(),
                population,
                result.success,
                result.best_objective,
                result.evaluations_spent,
                result.generations,
                result.restarts
            );
        }
        other => return Err(format!("unknown format '{other}' (expected json or csv)")),
    }
    Ok(if result.success { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_bisect(args: BisectArgs) -> Result<ExitCode, String> {
    let merged = merge_common(&args.common)?;
    let mut config = merged.config.clone();
    let preset = Preset::parse(&args.preset)
        .ok_or_else(|| format!("unknown preset '{}' (expected desk or full)", args.preset))?;

    let problems: Vec<String> = match &args.problems {
        Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
        None if !config.problems.is_empty() => config.problems.clone(),
        None => PROBLEM_NAMES.iter().map(|s| s.to_string()).collect(),
    };
    let dims: Vec<usize> = match &args.dims {
        Some(list) => list
            .split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|e| format!("bad dimension: {e}")))
            .collect::<Result<_, _>>()?,
        None if !config.dimensions.is_empty() => config.dimensions.clone(),
        None => preset.dimensions(),
    };
    let modes: Vec<LinkageMode> = match &args.modes {
        Some(list) => parse_modes(list)?,
        None if !config.modes.is_empty() => {
            parse_modes(&config.modes.join(","))?
        }
        None => ALL_MODES.to_vec(),
    };
    config.repeats_per_size = args.repeats.unwrap_or(preset.repeats_per_size());
    if let Some(k) = args.bisection_repeats {
        config.bisection_repeats = k;
    }
    if let Some(m) = args.min_pop {
        config.min_population = m;
    }
    if let Some(m) = args.max_pop {
        config.max_population = m;
    }

    let spec = BisectionSpec {
        repeats_per_size: config.repeats_per_size,
        bisection_repeats: config.bisection_repeats,
        min_size: config.min_population,
        max_size: config.max_population,
        ..BisectionSpec::default()
    };

    let extrapolate_dims: Vec<usize> = match &args.extrapolate_dims {
        Some(list) => list
            .split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|e| format!("bad dimension: {e}")))
            .collect::<Result<_, _>>()?,
        None => Vec::new(),
    };
    let mut records: Vec<ScalabilityRecord> = Vec::new();
    let mut traces: Vec<BisectionTrace> = Vec::new();
    let mut stats: Vec<StatRow> = Vec::new();
    let mut best_sizes: BTreeMap<(String, LinkageMode), Vec<(usize, Vec<usize>)>> =
        BTreeMap::new();
    for requested_dim in &dims {
        for problem_name in &problems {
            let Some(dim) = nearest_compatible_dimension(problem_name, *requested_dim)
            else {
                return Err(format!(
                    "unknown problem '{problem_name}', valid names: {}",
                    PROBLEM_NAMES.join(", ")
                ));
            };
            if dim != *requested_dim {
                eprintln!(
                    "note: {problem_name} does not accept dimension {requested_dim}; using {dim}"
                );
            }
            let problem = load_problem(problem_name, dim)?;
            let mut metrics_by_mode: BTreeMap<LinkageMode, Vec<f64>> = BTreeMap::new();
            for &mode in &modes {
                if mode.needs_analytic_vig() && problem.analytic_vig().is_none() {
                    continue;
                }
                let setup = RunSetup {
                    mode,
                    budget: config.budget,
                    vtr: config.vtr,
                    master_seed: config.master_seed,
                    wall_clock_limit_secs: config.wall_clock_limit_secs,
                    tweak: config.tweaks.to_tweaks(),
                };
                let mut sizes = Vec::with_capacity(config.bisection_repeats);
                for index in 0..config.bisection_repeats {
                    let trace = bisect_population_size(&problem, &setup, &spec, index);
                    let chosen = trace
                        .probes
                        .iter()
                        .find(|p| p.size == trace.best_size)
                        .expect("chosen size was probed");
                    records.push(ScalabilityRecord {
                        problem: problem_name.clone(),
                        mode: mode.name().to_string(),
                        dimension: dim,
                        population_size: trace.best_size,
                        corrected_evaluations: trace.best_metric,
                        success_fraction: chosen.success_fraction,
                        repeat_evaluations: chosen
                            .repeats
                            .iter()
                            .map(|r| r.success.then_some(r.evaluations))
                            .collect(),
                    });
                    metrics_by_mode.entry(mode).or_default().push(trace.best_metric);
                    sizes.push(trace.best_size);
                    traces.push(trace);
                }
                best_sizes
                    .entry((problem_name.clone(), mode))
                    .or_default()
                    .push((dim, sizes));
            }
            stats.extend(significance_table(problem_name, dim, &metrics_by_mode));
        }
    }

    // extrapolated dimensionalities: fit the bisected median sizes on a
    // log-log scale and execute fixed-size repeat sets at the predictions
    if !extrapolate_dims.is_empty() {
        for ((problem_name, mode), dim_sizes) in &best_sizes {
            let known: Vec<(usize, usize)> = dim_sizes
                .iter()
                .map(|(dim, sizes)| {
                    let mut sorted = sizes.clone();
                    sorted.sort_unstable();
                    (*dim, sorted[sorted.len() / 2])
                })
                .collect();
            if known.len() < 2 {
                eprintln!(
                    "note: skipping extrapolation for {problem_name}/{} (needs two dimensionalities)",
                    mode.name()
                );
                continue;
            }
            let targets: Vec<usize> = extrapolate_dims
                .iter()
                .filter_map(|&d| nearest_compatible_dimension(problem_name, d))
                .collect();
            let predictions = extrapolate_sizes(&known, &targets)?;
            for (dim, size) in predictions {
                let problem = load_problem(problem_name, dim)?;
                let setup = RunSetup {
                    mode: *mode,
                    budget: config.budget,
                    vtr: config.vtr,
                    master_seed: config.master_seed,
                    wall_clock_limit_secs: config.wall_clock_limit_secs,
                    tweak: config.tweaks.to_tweaks(),
                };
                for set_index in 0..config.bisection_repeats {
                    let mut set = setup.clone();
                    set.master_seed = derive_seed(
                        setup.master_seed,
                        problem.name(),
                        mode.name(),
                        dim,
                        size,
                        set_index,
                    );
                    let results = run_repeats(&problem, &set, size, config.repeats_per_size);
                    let successes = results.iter().filter(|r| r.success).count();
                    records.push(ScalabilityRecord {
                        problem: problem_name.clone(),
                        mode: mode.name().to_string(),
                        dimension: dim,
                        population_size: size,
                        corrected_evaluations: corrected_metric(
                            results.iter().map(|r| (r.success, r.evaluations_spent)),
                        ),
                        success_fraction: successes as f64 / results.len() as f64,
                        repeat_evaluations: results
                            .iter()
                            .map(|r| r.success.then_some(r.evaluations_spent))
                            .collect(),
                    });
                }
            }
        }
    }

    write_scalability_csv(&merged.out_dir.join("scalability.csv"), &records)
        .map_err(|e| e.to_string())?;
    write_bisection_json(&merged.out_dir.join("bisection.json"), config.master_seed, &traces)
        .map_err(|e| e.to_string())?;
    write_stats_csv(&merged.out_dir.join("stats.csv"), &stats).map_err(|e| e.to_string())?;
    println!(
        "wrote {} scalability records, {} bisection traces, {} significance rows to {}",
        records.len(),
        traces.len(),
        stats.len(),
        merged.out_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_dsm(args: DsmArgs) -> Result<ExitCode, String> {
    let merged = merge_common(&args.common)?;
    let config = &merged.config;
    let mode = parse_mode(&args.mode)?;
    if !mode.is_fitness_based() {
        return Err(format!(
            "mode {} learns no DSM; pick one of: fb_lt, fb_ucond_hg, fb_mcond_hg, fb_mcond_hg_cs",
            mode.name()
        ));
    }
    let problem = load_problem(&args.problem, args.dim)?;
    if args.runs == 0 {
        return Err("--runs must be positive".into());
    }
    let setup = RunSetup {
        mode,
        budget: config.budget,
        vtr: config.vtr,
        master_seed: config.master_seed,
        wall_clock_limit_secs: config.wall_clock_limit_secs,
        tweak: config.tweaks.to_tweaks(),
    };
    use rayon::prelude::*;
    let runs: Vec<(u64, gomea_core::gomea::RunResult)> = (0..args.runs)
        .into_par_iter()
        .map(|repeat| {
            let seed = derive_seed(
                config.master_seed,
                problem.name(),
                mode.name(),
                problem.dimension(),
                args.pop,
                repeat,
            );
            let mut ea_config = setup.config(args.pop, seed);
            ea_config.snapshot_dsms = true;
            let result = gomea_core::gomea::run(&problem, &ea_config)
                .expect("validated configuration");
            (seed, result)
        })
        .collect();

    let mut matrices = Vec::new();
    for (seed, result) in &runs {
        let snapshot = select_export_dsm(result)
            .ok_or_else(|| "run produced no DSM".to_string())?;
        let stem = format!("dsm_{}_{}", problem.name(), seed);
        write_dsm_csv(
            &merged.out_dir.join(format!("{stem}.csv")),
            snapshot.dimension,
            &snapshot.strengths,
        )
        .map_err(|e| e.to_string())?;
        write_dsm_sidecar(
            &merged.out_dir.join(format!("{stem}.json")),
            &DsmSidecar {
                schema: "dsm/1",
                problem: problem.name().to_string(),
                seed: *seed,
                generation: snapshot.generation,
                dimension: snapshot.dimension,
            },
        )
        .map_err(|e| e.to_string())?;
        matrices.push(snapshot.strengths);
    }
    let mean = gomea_harness::bench::aggregate_dsms(&matrices, problem.dimension())?;
    write_dsm_csv(
        &merged.out_dir.join(format!("dsm_{}_avg.csv", problem.name())),
        problem.dimension(),
        &mean,
    )
    .map_err(|e| e.to_string())?;
    write_dsm_sidecar(
        &merged.out_dir.join(format!("dsm_{}_avg.json", problem.name())),
        &DsmSidecar {
            schema: "dsm/1",
            problem: problem.name().to_string(),
            seed: config.master_seed,
            generation: 0,
            dimension: problem.dimension(),
        },
    )
    .map_err(|e| e.to_string())?;
    let successes = runs.iter().filter(|(_, r)| r.success).count();
    println!(
        "wrote {} per-run DSMs and the average to {} ({}/{} successes, corrected metric {})",
        runs.len(),
        merged.out_dir.display(),
        successes,
        args.runs,
        corrected_metric(runs.iter().map(|(_, r)| (r.success, r.evaluations_spent)))
    );
    Ok(ExitCode::SUCCESS)
}
