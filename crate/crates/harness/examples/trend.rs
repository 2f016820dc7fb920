//! Reproduces the linkage-tree versus conditional-model trend measurement.

use gomea_core::gomea::LinkageMode;
use gomea_core::problems::make_reb;
use gomea_harness::bench::{bisect_population_size, BisectionSpec, RunSetup, EaTweaks};

fn main() {
    let budget: f64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(4e5);
    let settings = [(1.0, 5.0), (3.0, 25.0), (6.0, 45.0)];
    let spec = BisectionSpec {
        repeats_per_size: 10,
        bisection_repeats: 5,
        bracket_ratio: 1.1,
        ..BisectionSpec::default()
    };
    for mode in [LinkageMode::FbMcondHg, LinkageMode::FbLt] {
        for (c, theta) in settings {
            let problem = make_reb(20, c, theta, 2, 1).unwrap();
            let setup = RunSetup {
                mode,
                budget,
                vtr: 1e-10,
                master_seed: 2024,
                wall_clock_limit_secs: None,
                tweak: EaTweaks::default(),
            };
            let started = std::time::Instant::now();
            let mut metrics: Vec<f64> = (0..spec.bisection_repeats)
                .map(|i| bisect_population_size(&problem, &setup, &spec, i))
                .map(|t| {
                    eprintln!("  {} ({c},{theta}) bisection: best n={} metric={:.0}", mode.name(), t.best_size, t.best_metric);
                    t.best_metric
                })
                .collect();
            metrics.sort_by(f64::total_cmp);
            println!(
                "{} (c={c}, theta={theta}): median corrected evals = {:.0}  [{:.1?} s]",
                mode.name(),
                metrics[metrics.len() / 2],
                started.elapsed().as_secs_f64()
            );
        }
    }
}
