//! Per-objective acquisition functions and the `beta_t` schedule.

use std::f64::consts::PI;

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::surrogate::GpModel;

pub const DEFAULT_DELTA: f64 = 0.1;

/// `beta_t = 2 log(|X| pi^2 t^2 / (6 delta))`, evaluated in the log domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSchedule {
    pub log_cardinality: f64,
    pub delta: f64,
}

impl BetaSchedule {
    pub fn new(log_cardinality: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self {
            log_cardinality,
            delta,
        })
    }

    pub fn beta(&self, t: u64) -> f64 {
        assert!(t >= 1, "t counts from 1");
        let b = 2.0 * (self.log_cardinality + 2.0 * (t as f64).ln() + (PI * PI / (6.0 * self.delta)).ln());
        b.max(0.0)
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Expected improvement below `best_y` for a Gaussian prediction.
pub fn expected_improvement_from(mu: f64, sigma: f64, best_y: f64) -> f64 {
    let gap = best_y - mu;
    if sigma < 1e-12 {
        return gap.max(0.0);
    }
    let z = gap / sigma;
    let n = std_normal();
    (gap * n.cdf(z) + sigma * n.pdf(z)).max(0.0)
}

pub fn expected_improvement(model: &GpModel, x: &[f64], best_y: f64) -> Result<f64> {
    let (mu, sigma) = model.predict(x)?;
    Ok(expected_improvement_from(mu, sigma, best_y))
}

pub fn lcb_from(mu: f64, sigma: f64, beta: f64) -> f64 {
    mu - beta.sqrt() * sigma
}

pub fn ucb_from(mu: f64, sigma: f64, beta: f64) -> f64 {
    mu + beta.sqrt() * sigma
}

pub fn lcb(model: &GpModel, x: &[f64], beta: f64) -> Result<f64> {
    let (mu, sigma) = model.predict(x)?;
    Ok(lcb_from(mu, sigma, beta))
}

pub fn ucb(model: &GpModel, x: &[f64], beta: f64) -> Result<f64> {
    let (mu, sigma) = model.predict(x)?;
    Ok(ucb_from(mu, sigma, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::surrogate::{FitOptions, GpModel};
    use rand::Rng;

    #[test]
    fn beta_values() {
        let s = BetaSchedule::new(1000f64.ln(), 0.1).unwrap();
        // direct: 2 ln(1000 pi^2 t^2 / 0.6)
        let direct = |t: f64| 2.0 * (1000.0 * PI * PI * t * t / 0.6).ln();
        assert!((s.beta(1) - direct(1.0)).abs() < 1e-10);
        assert!((s.beta(2) - direct(2.0)).abs() < 1e-10);
        assert!((s.beta(1) - 19.42).abs() < 1e-2);
        assert!((s.beta(2) - 22.19).abs() < 1e-2);
        for t in 1..100 {
            assert!(s.beta(t + 1) >= s.beta(t));
        }
    }

    #[test]
    fn beta_does_not_overflow() {
        let s = BetaSchedule::new(1e6, 0.1).unwrap();
        assert!(s.beta(1_000_000).is_finite());
        assert!(BetaSchedule::new(1.0, 1.0).is_err());
        assert!(BetaSchedule::new(1.0, 0.0).is_err());
    }

    #[test]
    fn ei_examples() {
        assert_eq!(expected_improvement_from(1.0, 0.0, 1.0), 0.0);
        assert_eq!(expected_improvement_from(0.25, 0.0, 1.0), 0.75);
        let phi0 = 1.0 / (2.0 * PI).sqrt();
        assert!((expected_improvement_from(2.0, 1.0, 2.0) - phi0).abs() < 1e-12);
        assert!((expected_improvement_from(2.0, 1.0, 2.0) - 0.39894).abs() < 1e-5);
    }

    #[test]
    fn ei_bounds() {
        let mut r = rng::seeded(5);
        for _ in 0..1000 {
            let mu: f64 = r.random_range(-3.0..3.0);
            let sigma: f64 = r.random_range(0.0..2.0);
            let best: f64 = r.random_range(-3.0..3.0);
            let ei = expected_improvement_from(mu, sigma, best);
            assert!(ei >= 0.0);
            assert!(ei <= (best - mu).max(0.0) + sigma * 0.4 + 1e-12);
            // translation consistency
            let c = r.random_range(-100.0..100.0);
            assert!((expected_improvement_from(mu + c, sigma, best + c) - ei).abs() < 1e-9);
        }
    }

    #[test]
    fn confidence_bounds() {
        assert_eq!((lcb_from(1.0, 0.5, 4.0), ucb_from(1.0, 0.5, 4.0)), (0.0, 2.0));
        assert_eq!((lcb_from(3.0, 0.0, 9.0), ucb_from(3.0, 0.0, 9.0)), (3.0, 3.0));
        assert_eq!((lcb_from(3.0, 2.0, 0.0), ucb_from(3.0, 2.0, 0.0)), (3.0, 3.0));
        for beta in [0.5, 2.0, 8.0] {
            let w = ucb_from(1.0, 0.3, beta) - lcb_from(1.0, 0.3, beta);
            assert!((w - 2.0 * beta.sqrt() * 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn model_wrappers_agree() {
        let x = vec![vec![0.1], vec![0.4], vec![0.9]];
        let m = GpModel::fit(&x, &[1.0, 0.2, 0.7], &FitOptions::default()).unwrap();
        let (mu, sigma) = m.predict(&[0.6]).unwrap();
        assert_eq!(expected_improvement(&m, &[0.6], 0.2).unwrap(), expected_improvement_from(mu, sigma, 0.2));
        assert_eq!(lcb(&m, &[0.6], 2.0).unwrap(), lcb_from(mu, sigma, 2.0));
        assert_eq!(ucb(&m, &[0.6], 2.0).unwrap(), ucb_from(mu, sigma, 2.0));
    }
}
