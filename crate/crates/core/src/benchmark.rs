//! Multi-seed algorithm comparison.
//!
//! Every `(algorithm, seed)` pair runs independently. Final hypervolumes are
//! computed after all runs finish, on objectives normalised by the union of
//! every successful run's bounds, so the numbers are comparable across runs.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use statrs::statistics::{Data, OrderStatistics};

use crate::dataset::{normalize_with, objective_bounds, Bounds};
use crate::error::{Error, Result};
use crate::evaluator::Evaluator;
use crate::optimizer::{default_reference, run, Algorithm, TunerConfig, TunerResult};
use crate::pareto::{hypervolume, pareto_front};
use crate::space::ParameterSpace;

#[derive(Debug, Clone)]
pub struct BenchmarkPlan {
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    /// Shared settings; `algorithm` and `seed` are overridden per run.
    pub base: TunerConfig,
    /// Hypervolume reference point; `1.2` per objective when `None`.
    pub reference: Option<Vec<f64>>,
}

#[derive(Debug)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub outcome: std::result::Result<TunerResult, Error>,
    pub final_hv: Option<f64>,
    pub wall_time_s: f64,
}

impl RunRecord {
    pub fn status(&self) -> String {
        match &self.outcome {
            Ok(_) => "ok".into(),
            Err(e) => format!("failed: {e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub runs: usize,
    pub failed: usize,
    pub median_hv: Option<f64>,
    pub q1_hv: Option<f64>,
    pub q3_hv: Option<f64>,
    pub iqr_hv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkSummary {
    pub reference: Vec<f64>,
    pub bounds: Vec<[f64; 2]>,
    pub algorithms: Vec<AlgorithmSummary>,
}

#[derive(Debug)]
pub struct BenchmarkReport {
    pub runs: Vec<RunRecord>,
    pub bounds: Bounds,
    pub reference: Vec<f64>,
}

impl BenchmarkReport {
    pub fn all_failed(&self) -> bool {
        self.runs.iter().all(|r| r.outcome.is_err())
    }

    pub fn final_hvs(&self, algorithm: Algorithm) -> Vec<f64> {
        self.runs
            .iter()
            .filter(|r| r.algorithm == algorithm)
            .filter_map(|r| r.final_hv)
            .collect()
    }

    /// Median and interquartile range of final HV per algorithm.
    pub fn summary(&self) -> BenchmarkSummary {
        let mut seen: Vec<Algorithm> = Vec::new();
        for r in &self.runs {
            if !seen.contains(&r.algorithm) {
                seen.push(r.algorithm);
            }
        }
        let algorithms = seen
            .into_iter()
            .map(|a| {
                let hvs = self.final_hvs(a);
                let runs = self.runs.iter().filter(|r| r.algorithm == a).count();
                let (median, q1, q3) = if hvs.is_empty() {
                    (None, None, None)
                } else {
                    let mut d = Data::new(hvs.clone());
                    (Some(d.median()), Some(d.lower_quartile()), Some(d.upper_quartile()))
                };
                AlgorithmSummary {
                    algorithm: a.name().to_string(),
                    runs,
                    failed: runs - hvs.len(),
                    median_hv: median,
                    q1_hv: q1,
                    q3_hv: q3,
                    iqr_hv: q1.zip(q3).map(|(l, h)| h - l),
                }
            })
            .collect();
        BenchmarkSummary {
            reference: self.reference.clone(),
            bounds: self.bounds.iter().map(|&(l, h)| [l, h]).collect(),
            algorithms,
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["algorithm", "seed", "final_hv", "wall_time_s", "status"])?;
        for r in &self.runs {
            w.write_record([
                r.algorithm.name().to_string(),
                r.seed.to_string(),
                r.final_hv.map(|v| v.to_string()).unwrap_or_default(),
                r.wall_time_s.to_string(),
                r.status(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs every `(algorithm, seed)` pair in parallel; `make_evaluator(seed)`
/// supplies a fresh evaluator per run.
pub fn run_benchmark<E, F>(space: &ParameterSpace, make_evaluator: F, plan: &BenchmarkPlan) -> Result<BenchmarkReport>
where
    E: Evaluator,
    F: Fn(u64) -> E + Sync,
{
    if plan.algorithms.is_empty() || plan.seeds.is_empty() {
        return Err(Error::Config("benchmark needs at least one algorithm and one seed".into()));
    }
    plan.base.validate()?;
    let pairs: Vec<(Algorithm, u64)> = plan
        .algorithms
        .iter()
        .flat_map(|&a| plan.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let mut runs: Vec<RunRecord> = pairs
        .into_par_iter()
        .map(|(algorithm, seed)| {
            let cfg = TunerConfig {
                algorithm,
                seed,
                ..plan.base.clone()
            };
            let start = Instant::now();
            let mut ev = make_evaluator(seed);
            let outcome = run(space, &mut ev, &cfg);
            if let Err(e) = &outcome {
                log::warn!("{algorithm} seed {seed} failed: {e}");
            }
            RunRecord {
                algorithm,
                seed,
                outcome,
                final_hv: None,
                wall_time_s: start.elapsed().as_secs_f64(),
            }
        })
        .collect();

    let all_rows: Vec<Vec<f64>> = runs
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok())
        .flat_map(|res| res.dataset.objectives())
        .collect();
    let bounds = objective_bounds(&all_rows);
    let m = bounds.len();
    let reference = match &plan.reference {
        Some(r) if m > 0 && r.len() != m => {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: r.len(),
            })
        }
        Some(r) => r.clone(),
        None => default_reference(m),
    };
    for r in &mut runs {
        if let Ok(res) = &r.outcome {
            r.final_hv = Some(final_hv(res, &bounds, &reference));
        }
    }
    Ok(BenchmarkReport {
        runs,
        bounds,
        reference,
    })
}

/// HV of a run's Pareto front after normalising with externally supplied bounds.
pub fn final_hv(res: &TunerResult, bounds: &[(f64, f64)], reference: &[f64]) -> f64 {
    let y = normalize_with(&res.dataset.objectives(), bounds);
    let front: Vec<Vec<f64>> = pareto_front(&y).into_iter().map(|i| y[i].clone()).collect();
    hypervolume(&front, reference, 0)
}
