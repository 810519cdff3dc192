//! Streams observations to a JSONL log, stops early, then resumes the run
//! from the log and checks the result matches an uninterrupted run.
//!
//! `cargo run --release --example persist_and_resume`

use motune::dataset::{JsonlSink, ObservationDataset};
use motune::evaluator::{BuiltinProblem, EvaluatorSpec};
use motune::optimizer::{run, Algorithm, Tuner, TunerConfig};

fn main() -> motune::Result<()> {
    let problem = BuiltinProblem::Dtlz2;
    let space = problem.default_space(5);
    let mut evaluator = EvaluatorSpec::builtin(problem);
    let dir = std::env::temp_dir().join("motune-resume-example");
    std::fs::create_dir_all(&dir)?;
    let log = dir.join("observations.jsonl");

    let short = TunerConfig {
        max_iterations: 15,
        ..TunerConfig::new(Algorithm::Usemo, 4)
    };
    let mut sink = JsonlSink::create(&log)?;
    Tuner::new(&space, &short).on_row(|ds, obs| sink.write(ds, obs)).run(&mut evaluator)?;
    println!("first session logged 15 rows to {}", log.display());

    let full = TunerConfig {
        max_iterations: 25,
        ..short.clone()
    };
    let logged = ObservationDataset::load_jsonl(&log, &space, &problem.objective_names())?;
    let mut sink = JsonlSink::append_to(&log)?;
    let resumed = Tuner::new(&space, &full)
        .resume_from(logged)
        .on_row(|ds, obs| sink.write(ds, obs))
        .run(&mut evaluator)?;

    let straight = run(&space, &mut evaluator, &full)?;
    println!(
        "resumed run has {} rows; identical to an uninterrupted run: {}",
        resumed.dataset.len(),
        resumed.dataset == straight.dataset
    );
    Ok(())
}
