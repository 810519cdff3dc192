//! Tunes an external program through the line protocol: each evaluation sends
//! `{"config":{...},"repetition":r}` on stdin and reads `{"objectives":[...]}`.
//!
//! The example re-runs its own binary with `--serve` as that program.
//!
//! `cargo run --release --example command_evaluator`

use std::io::{self, BufRead};

use motune::evaluator::EvaluatorSpec;
use motune::optimizer::{run, Algorithm, TunerConfig};
use motune::space::{ParameterSpace, ParameterSpec};
use serde_json::{json, Value};

/// A fake service: latency falls with more threads and a bigger cache, cost rises.
fn serve() -> io::Result<()> {
    let mut line = String::new();
    io::stdin().lock().read_line(&mut line)?;
    let request: Value = serde_json::from_str(&line)?;
    let c = &request["config"];
    let threads = c["threads"].as_f64().unwrap_or(1.0);
    let cache_mb = c["cache_mb"].as_f64().unwrap_or(1.0);
    let compress = c["compression"].as_str() == Some("on");
    let latency = 100.0 / threads + 400.0 / cache_mb.sqrt() + if compress { 5.0 } else { 20.0 };
    let cost = threads * 2.0 + cache_mb / 64.0 + if compress { 3.0 } else { 0.0 };
    println!("{}", json!({ "objectives": [latency, cost] }));
    Ok(())
}

fn main() -> motune::Result<()> {
    if std::env::args().nth(1).as_deref() == Some("--serve") {
        return Ok(serve()?);
    }
    let space = ParameterSpace::new(vec![
        ParameterSpec::integer("threads", 1, 32),
        ParameterSpec::log_continuous("cache_mb", 16.0, 4096.0),
        ParameterSpec::categorical("compression", ["on", "off"]),
    ])?;
    let exe = std::env::current_exe()?.to_string_lossy().into_owned();
    let mut evaluator = EvaluatorSpec::command(vec![exe, "--serve".into()]);
    let config = TunerConfig {
        max_iterations: 30,
        init_samples: 8,
        ..TunerConfig::new(Algorithm::Adumbo, 0)
    };
    let result = run(&space, &mut evaluator, &config)?;
    println!("latency_ms,cost,config");
    for e in result.archive.sorted_entries() {
        let cfg = serde_json::to_string(&space.config_to_json(&e.config))?;
        println!("{:.2},{:.2},{cfg}", e.objectives[0], e.objectives[1]);
    }
    Ok(())
}
