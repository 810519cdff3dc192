//! Fits a Gaussian process to a 1-D function and prints its predictions,
//! the expected improvement and the confidence-bound schedule.
//!
//! `cargo run --example gp_surrogate`

use motune::acquisition::{expected_improvement, lcb, BetaSchedule};
use motune::surrogate::{FitOptions, GpModel};

fn main() -> motune::Result<()> {
    let f = |x: f64| (8.0 * x).sin() + 0.5 * x;
    let x: Vec<Vec<f64>> = [0.05, 0.2, 0.45, 0.6, 0.9].iter().map(|&v| vec![v]).collect();
    let y: Vec<f64> = x.iter().map(|p| f(p[0])).collect();
    let gp = GpModel::fit(&x, &y, &FitOptions::default())?;
    println!("kernel {:?}, log marginal likelihood {:.3}", gp.kernel, gp.log_marginal_likelihood());

    let best = y.iter().copied().fold(f64::INFINITY, f64::min);
    let beta = BetaSchedule::new(100f64.ln(), 0.1)?.beta(1);
    println!("{:>5} {:>8} {:>8} {:>8} {:>8} {:>8}", "x", "f(x)", "mean", "sd", "EI", "LCB");
    for i in 0..=20 {
        let q = [i as f64 / 20.0];
        let (mu, sigma) = gp.predict(&q)?;
        println!(
            "{:>5.2} {:>8.3} {:>8.3} {:>8.3} {:>8.4} {:>8.3}",
            q[0],
            f(q[0]),
            mu,
            sigma,
            expected_improvement(&gp, &q, best)?,
            lcb(&gp, &q, beta)?
        );
    }
    Ok(())
}
