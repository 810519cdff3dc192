//! Compares the tuning algorithms on ZDT1 over several seeds.
//!
//! `cargo run --release --example compare_algorithms -- [seeds] [dim]`

use motune::benchmark::{run_benchmark, BenchmarkPlan};
use motune::evaluator::{BuiltinProblem, EvaluatorSpec};
use motune::optimizer::{Algorithm, TunerConfig};

fn main() -> motune::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let dim: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(8);

    let problem = BuiltinProblem::Zdt1;
    let space = problem.default_space(dim);
    let evaluator = EvaluatorSpec::builtin(problem);
    let plan = BenchmarkPlan {
        algorithms: vec![Algorithm::Random, Algorithm::Usemo, Algorithm::Adumbo],
        seeds: (0..seeds).collect(),
        base: TunerConfig::default(),
        reference: None,
    };
    let report = run_benchmark(&space, |_| evaluator.clone(), &plan)?;

    for a in &report.summary().algorithms {
        println!(
            "{:<8} median HV {:.4}  IQR {:.4}  ({} runs, {} failed)",
            a.algorithm,
            a.median_hv.unwrap_or(f64::NAN),
            a.iqr_hv.unwrap_or(f64::NAN),
            a.runs,
            a.failed
        );
    }
    report.write_csv(std::io::stdout())?;
    Ok(())
}
