//! Internal diagnostics: per-generation dump of one run, with key=value
//! overrides for the EA constants.

use gomea_core::gomea::{run_with_hooks, EaConfig, LinkageMode};
use gomea_core::problems::make_problem;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let problem = make_problem(&args[1], args[2].parse().unwrap()).unwrap();
    let mode = LinkageMode::parse(&args[3]).unwrap();
    let pop: usize = args[4].parse().unwrap();
    let mut cfg = EaConfig::new(mode, pop, 5);
    cfg.budget = 3e5;
    let mut every: u64 = 50;
    for arg in &args[5..] {
        let (key, value) = arg.split_once('=').expect("key=value");
        match key {
            "seed" => cfg.seed = value.parse().unwrap(),
            "budget" => cfg.budget = value.parse().unwrap(),
            "every" => every = value.parse().unwrap(),
            "tau" => cfg.tau = value.parse().unwrap(),
            "p_accept" => cfg.p_accept = value.parse().unwrap(),
            "ams" => cfg.ams_multiplier = value.parse().unwrap(),
            "sdr" => cfg.sdr_threshold = value.parse().unwrap(),
            "decay" => cfg.avs_decay = value.parse().unwrap(),
            "gens" => cfg.max_generations = Some(value.parse().unwrap()),
            "fi" => cfg.fi_shrink = value.parse().unwrap(),
            other => panic!("unknown key {other}"),
        }
    }
    let result = run_with_hooks(&problem, &cfg, || false, |info| {
        if info.generation % every == 0 {
            let min_m = info.multipliers.iter().cloned().fold(f64::INFINITY, f64::min);
            let max_m = info.multipliers.iter().cloned().fold(0.0f64, f64::max);
            println!(
                "gen {:6} evals {:10.0} elitist {:13.4e} pop [{:11.4e}, {:11.4e}] mult [{:8.2e}, {:8.2e}]",
                info.generation, info.evaluations, info.elitist_objective,
                info.population_best, info.population_worst, min_m, max_m
            );
        }
    })
    .unwrap();
    println!(
        "done: success={} evals={:.0} gens={} restarts={} best={:.3e}",
        result.success, result.evaluations_spent, result.generations, result.restarts,
        result.best_objective
    );
}
