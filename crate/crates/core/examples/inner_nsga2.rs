//! Runs NSGA-II directly on ZDT1 and reports how close the final population
//! gets to the true front.
//!
//! `cargo run --release --example inner_nsga2 -- [generations]`

use motune::cheapmoo::{nsga2, Nsga2Config};
use motune::evaluator::zdt1;
use motune::pareto::hypervolume_2d;
use motune::rng;

fn main() -> motune::Result<()> {
    let generations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(250);
    let config = Nsga2Config {
        generations,
        ..Nsga2Config::default()
    };
    // NSGA-II here maximises, so minimised objectives are negated on the way in and out
    let front = nsga2(|u: &[f64]| zdt1(u).iter().map(|v| -v).collect(), 8, &config, &mut rng::seeded(0))?;
    let points: Vec<Vec<f64>> = front.iter().map(|i| i.values.iter().map(|v| -v).collect()).collect();
    let worst_gap = points
        .iter()
        .map(|p| p[1] - (1.0 - p[0].sqrt()))
        .fold(0.0, f64::max);
    println!("{} non-dominated individuals after {generations} generations", points.len());
    println!("HV {:.5} (true front 1.10667)", hypervolume_2d(&points, [1.2, 1.2]));
    println!("largest distance above the true front: {worst_gap:.2e}");
    Ok(())
}
