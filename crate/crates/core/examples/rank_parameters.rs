//! Finds the parameters that matter on the mixed-stack problem, where only
//! `batch` and `freq` drive time and energy and six nuisance knobs do not.
//!
//! `cargo run --release --example rank_parameters`

use motune::evaluator::{BuiltinProblem, EvaluatorSpec};
use motune::forest::ForestConfig;
use motune::mopir;
use motune::optimizer::{run, Algorithm, TunerConfig};

fn main() -> motune::Result<()> {
    let problem = BuiltinProblem::MixedStack;
    let space = problem.default_space(0);
    let mut evaluator = EvaluatorSpec::builtin(problem).with_noise_seed(1);
    let sampling = TunerConfig {
        max_iterations: 500,
        ..TunerConfig::new(Algorithm::Random, 1)
    };
    let dataset = run(&space, &mut evaluator, &sampling)?.dataset;

    let report = mopir::rank(&dataset, &ForestConfig::default(), 2)?;
    print!("{report}");
    Ok(())
}
