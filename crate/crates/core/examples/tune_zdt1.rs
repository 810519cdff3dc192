//! Tunes the 8-dimensional ZDT1 problem with the adaptive-uncertainty loop
//! and prints the Pareto front it found.
//!
//! `cargo run --release --example tune_zdt1 -- [seed]`

use motune::evaluator::{BuiltinProblem, EvaluatorSpec};
use motune::optimizer::{run, Algorithm, TunerConfig};

fn main() -> motune::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let problem = BuiltinProblem::Zdt1;
    let space = problem.default_space(8);
    let mut evaluator = EvaluatorSpec::builtin(problem);
    let config = TunerConfig::new(Algorithm::Adumbo, seed);

    let result = run(&space, &mut evaluator, &config)?;

    println!("{} evaluations, final HV {:.4}", result.dataset.len(), result.final_hv());
    println!("{:>10} {:>10}", "f1", "f2");
    for e in result.archive.sorted_entries() {
        println!("{:>10.4} {:>10.4}", e.objectives[0], e.objectives[1]);
    }
    let mean_score = result.chosen_metric_trace.iter().sum::<f64>() / result.chosen_metric_trace.len() as f64;
    println!("mean selection score {mean_score:.4}");
    Ok(())
}
