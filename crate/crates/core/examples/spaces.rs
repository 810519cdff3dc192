//! Loads a parameter space, samples from it and shows the unit-cube embedding.
//!
//! `cargo run --example spaces -- [space.json]`

use motune::space::ParameterSpace;
use motune::rng;

fn main() -> motune::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/spaces/tf-crosslayer.json").into());
    let space = ParameterSpace::from_file(&path)?;
    println!("{path}: {} parameters, log|X| = {:.2}", space.dim(), space.log_cardinality(100));

    let config = space.sample_random(&mut rng::seeded(3));
    let unit = space.encode(&config)?;
    for ((name, value), u) in space.names().zip(&config.values).zip(&unit) {
        println!("{name:<28} {value:<10} {u:.3}");
    }
    assert_eq!(space.decode(&unit), config);
    println!("{}", serde_json::to_string(&space.config_to_json(&config))?);
    Ok(())
}
