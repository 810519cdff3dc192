//! Pareto filtering, the archive and hypervolume in two and three objectives.
//!
//! `cargo run --example hypervolume`

use motune::pareto::{dominates, hypervolume_2d, hypervolume_mc, pareto_front, ParetoArchive};
use motune::space::{Configuration, ParamValue};

fn main() -> motune::Result<()> {
    let points = vec![
        vec![0.2, 0.7],
        vec![0.7, 0.2],
        vec![0.5, 0.5],
        vec![0.6, 0.6],
        vec![0.9, 0.1],
    ];
    println!("(0.5,0.5) dominates (0.6,0.6): {}", dominates(&points[2], &points[3])?);
    let front: Vec<Vec<f64>> = pareto_front(&points).into_iter().map(|i| points[i].clone()).collect();
    println!("front: {front:?}");
    println!("exact HV at (1.2, 1.2): {:.6}", hypervolume_2d(&front, [1.2, 1.2]));
    println!("Monte Carlo HV:         {:.6}", hypervolume_mc(&front, &[1.2, 1.2], 100_000, 0));

    let mut archive = ParetoArchive::new();
    for (i, p) in points.iter().enumerate() {
        let config = Configuration::new(vec![ParamValue::Integer(i as i64)]);
        let kept = archive.insert(config, p.clone());
        println!("insert {p:?}: {}", if kept { "kept" } else { "dominated" });
    }
    println!("archive holds {} points", archive.len());

    let front3 = vec![vec![0.1, 0.5, 0.9], vec![0.5, 0.1, 0.5], vec![0.9, 0.9, 0.1]];
    println!("3-objective HV: {:.4}", hypervolume_mc(&front3, &[1.2, 1.2, 1.2], 200_000, 7));
    Ok(())
}
