//! Tuning loops: adaptive-uncertainty MOBO, the uncertainty-only variant it
//! extends, random search and single-objective BO.
//!
//! Model-based iterations fit one GP per objective, solve the inner
//! multi-objective problem over the per-objective expected improvements with
//! NSGA-II and evaluate the candidate of highest selection score:
//!
//! * `adumbo`: `sqrt(beta_t) * prod(mu_hat) + prod(sigma_hat)`
//! * `usemo`: `prod(sqrt(beta_t) * sigma_hat)`
//!
//! where `mu_hat`, `sigma_hat` are GP predictions rescaled by the current
//! per-objective bounds of the observations.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::acquisition::{expected_improvement_from, BetaSchedule, DEFAULT_DELTA};
use crate::cheapmoo::{nsga2, Nsga2Config};
use crate::dataset::{normalize_with, Observation, ObservationDataset};
use crate::error::{Error, Result};
use crate::evaluator::Evaluator;
use crate::pareto::{hypervolume, ParetoArchive, DEFAULT_REFERENCE};
use crate::rng;
use crate::space::{Configuration, ParameterSpace, DEFAULT_RESOLUTION};
use crate::surrogate::{FitOptions, GpModel};

const MU_HAT_FLOOR: f64 = 1e-6;
const MU_HAT_CEIL: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Adumbo,
    Usemo,
    Random,
    BoSingle,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Adumbo => "adumbo",
            Self::Usemo => "usemo",
            Self::Random => "random",
            Self::BoSingle => "bo-single",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::Adumbo, Self::Usemo, Self::Random, Self::BoSingle]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

/// How predicted means enter the adaptive metric. `Verbatim` multiplies the
/// normalised means as they are; `Negated` flips them so that lower predicted
/// objectives score higher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanDirection {
    #[default]
    Verbatim,
    Negated,
}

impl FromStr for MeanDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "verbatim" => Ok(Self::Verbatim),
            "negated" => Ok(Self::Negated),
            _ => Err(Error::Config(format!("unknown mean direction `{s}`"))),
        }
    }
}

impl fmt::Display for MeanDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Verbatim => "verbatim",
            Self::Negated => "negated",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TunerConfig {
    pub algorithm: Algorithm,
    /// Total evaluation budget, initial samples included.
    pub max_iterations: usize,
    pub init_samples: usize,
    pub seed: u64,
    pub delta: f64,
    pub inner: Nsga2Config,
    pub adu_mean_direction: MeanDirection,
    pub bo_objective_index: usize,
    pub dedup_epsilon: f64,
    pub resolution: u32,
    pub fit: FitOptions,
}

impl Default for TunerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Adumbo,
            max_iterations: 70,
            init_samples: 10,
            seed: 0,
            delta: DEFAULT_DELTA,
            inner: Nsga2Config::default(),
            adu_mean_direction: MeanDirection::Verbatim,
            bo_objective_index: 0,
            dedup_epsilon: 1e-9,
            resolution: DEFAULT_RESOLUTION,
            fit: FitOptions::default(),
        }
    }
}

impl TunerConfig {
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        Self {
            algorithm,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.init_samples < 2 {
            return Err(Error::Config("init samples must be at least 2".into()));
        }
        if self.max_iterations <= self.init_samples {
            return Err(Error::Config(format!(
                "max iterations ({}) must exceed init samples ({})",
                self.max_iterations, self.init_samples
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        self.inner.validate()
    }
}

/// Rescales a prediction by the objective's `(min, max)`.
pub fn normalized_prediction(mu: f64, sigma: f64, (lo, hi): (f64, f64)) -> (f64, f64) {
    if hi > lo {
        let range = hi - lo;
        (((mu - lo) / range).clamp(MU_HAT_FLOOR, MU_HAT_CEIL), sigma / range)
    } else {
        (0.5, sigma)
    }
}

pub fn adu_from_normalized(mu_hat: &[f64], sigma_hat: &[f64], beta: f64, direction: MeanDirection) -> f64 {
    let mean_term: f64 = mu_hat
        .iter()
        .map(|&m| match direction {
            MeanDirection::Verbatim => m,
            MeanDirection::Negated => (1.0 + MU_HAT_FLOOR - m).max(MU_HAT_FLOOR),
        })
        .product();
    beta.sqrt() * mean_term + sigma_hat.iter().product::<f64>()
}

pub fn usemo_from_normalized(sigma_hat: &[f64], beta: f64) -> f64 {
    sigma_hat.iter().map(|s| beta.sqrt() * s).product()
}

fn normalized_predictions(models: &[GpModel], x: &[f64], bounds: &[(f64, f64)]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut mu_hat = Vec::with_capacity(models.len());
    let mut sigma_hat = Vec::with_capacity(models.len());
    for (m, &b) in models.iter().zip(bounds) {
        let (mu, sigma) = m.predict(x)?;
        let (mh, sh) = normalized_prediction(mu, sigma, b);
        mu_hat.push(mh);
        sigma_hat.push(sh);
    }
    Ok((mu_hat, sigma_hat))
}

/// Adaptive uncertainty of `x` under per-objective `models`.
pub fn compute_adu(models: &[GpModel], x: &[f64], beta: f64, bounds: &[(f64, f64)], direction: MeanDirection) -> Result<f64> {
    let (mu_hat, sigma_hat) = normalized_predictions(models, x, bounds)?;
    Ok(adu_from_normalized(&mu_hat, &sigma_hat, beta, direction))
}

/// Volume of the normalised confidence hyper-rectangle of `x`.
pub fn compute_usemo_u(models: &[GpModel], x: &[f64], beta: f64, bounds: &[(f64, f64)]) -> Result<f64> {
    let (_, sigma_hat) = normalized_predictions(models, x, bounds)?;
    Ok(usemo_from_normalized(&sigma_hat, beta))
}

/// Record of one model-based selection.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub iteration: usize,
    pub t: u64,
    pub beta: f64,
    /// Score of each inner-solver candidate; `None` for skipped duplicates.
    pub scores: Vec<Option<f64>>,
    pub chosen: Option<usize>,
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct TunerResult {
    pub dataset: ObservationDataset,
    pub archive: ParetoArchive,
    pub hv_trace: Vec<f64>,
    /// Selection score of every model-chosen candidate, in order.
    pub chosen_metric_trace: Vec<f64>,
    pub iterations: Vec<IterationTrace>,
}

/// Outcome of one tuning run, as written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub algorithm: String,
    pub seed: u64,
    #[serde(rename = "T_max")]
    pub max_iterations: usize,
    pub final_hv: f64,
    pub bounds: Vec<[f64; 2]>,
    pub wall_time_s: f64,
}

impl TunerResult {
    pub fn final_hv(&self) -> f64 {
        self.hv_trace.last().copied().unwrap_or(0.0)
    }

    pub fn summary(&self, config: &TunerConfig, wall_time_s: f64) -> RunSummary {
        RunSummary {
            algorithm: config.algorithm.name().to_string(),
            seed: config.seed,
            max_iterations: config.max_iterations,
            final_hv: self.final_hv(),
            bounds: self.dataset.bounds().iter().map(|&(l, h)| [l, h]).collect(),
            wall_time_s,
        }
    }
}

/// Hypervolume of the running Pareto front, normalised by the bounds of all rows.
pub fn hv_trace(ds: &ObservationDataset, reference: &[f64]) -> Vec<f64> {
    if ds.is_empty() {
        return Vec::new();
    }
    let y = normalize_with(&ds.objectives(), &ds.bounds());
    let mut front = ParetoArchive::new();
    let mut trace = Vec::with_capacity(y.len());
    let mut last = 0.0;
    for (i, row) in y.iter().enumerate() {
        if front.insert(ds.rows[i].config.clone(), row.clone()) {
            last = hypervolume(&front.objectives(), reference, 0);
        }
        trace.push(last);
    }
    trace
}

pub fn default_reference(m: usize) -> Vec<f64> {
    vec![DEFAULT_REFERENCE; m]
}

fn default_names(m: usize) -> Vec<String> {
    (1..=m).map(|i| format!("f{i}")).collect()
}

pub fn archive_of(ds: &ObservationDataset) -> ParetoArchive {
    let mut a = ParetoArchive::new();
    for r in &ds.rows {
        a.insert(r.config.clone(), r.objectives.clone());
    }
    a
}

/// Runs a fresh tuning session.
pub fn run(space: &ParameterSpace, evaluator: &mut dyn Evaluator, config: &TunerConfig) -> Result<TunerResult> {
    Tuner::new(space, config).run(evaluator)
}

type RowSink<'a> = Box<dyn FnMut(&ObservationDataset, &Observation) -> Result<()> + 'a>;

/// A tuning session with optional resume state and a per-row callback.
pub struct Tuner<'a> {
    space: &'a ParameterSpace,
    config: &'a TunerConfig,
    resume: Option<ObservationDataset>,
    sink: Option<RowSink<'a>>,
}

impl<'a> Tuner<'a> {
    pub fn new(space: &'a ParameterSpace, config: &'a TunerConfig) -> Self {
        Self {
            space,
            config,
            resume: None,
            sink: None,
        }
    }

    /// Continues from previously logged rows.
    pub fn resume_from(mut self, ds: ObservationDataset) -> Self {
        self.resume = Some(ds);
        self
    }

    /// Called after every appended row, before the next evaluation starts.
    pub fn on_row(mut self, f: impl FnMut(&ObservationDataset, &Observation) -> Result<()> + 'a) -> Self {
        self.sink = Some(Box::new(f));
        self
    }

    pub fn run(mut self, evaluator: &mut dyn Evaluator) -> Result<TunerResult> {
        let cfg = self.config;
        cfg.validate()?;
        let space = self.space;
        let schedule = BetaSchedule::new(space.log_cardinality(cfg.resolution), cfg.delta)?;
        let mut ds = self.resume.take();
        if let Some(d) = &ds {
            if d.space != *space {
                return Err(Error::Config("resumed dataset uses a different space".into()));
            }
        }
        let mut iterations = Vec::new();
        let mut chosen_metric_trace = Vec::new();

        while ds.as_ref().map_or(0, ObservationDataset::len) < cfg.max_iterations {
            let iteration = ds.as_ref().map_or(0, ObservationDataset::next_iteration);
            let mut r = rng::stream(cfg.seed, iteration as u64);
            let model_based = cfg.algorithm != Algorithm::Random && iteration >= cfg.init_samples;
            let config = match (&ds, model_based) {
                (Some(d), true) => {
                    let t = (iteration - cfg.init_samples + 1) as u64;
                    let (choice, trace) = self.propose(d, t, schedule.beta(t), iteration, &mut r)?;
                    if let (Some(i), Some(score)) = (trace.chosen, trace.chosen.and_then(|i| trace.scores[i])) {
                        debug_assert_eq!(Some(i), trace.chosen);
                        chosen_metric_trace.push(score);
                    }
                    iterations.push(trace);
                    choice
                }
                _ => space.sample_random(&mut r),
            };

            let result = evaluator.evaluate(space, &config);
            if let crate::evaluator::Status::Failed(reason) = &result.status {
                return Err(Error::Evaluation(format!("iteration {iteration}: {reason}")));
            }
            let d = ds.get_or_insert_with(|| {
                let names = evaluator
                    .objective_names()
                    .unwrap_or_else(|| default_names(result.objectives.len()));
                ObservationDataset::new(space.clone(), names)
            });
            if cfg.algorithm == Algorithm::BoSingle && cfg.bo_objective_index >= d.num_objectives() {
                return Err(Error::Config(format!(
                    "bo objective index {} out of range for {} objectives",
                    cfg.bo_objective_index,
                    d.num_objectives()
                )));
            }
            let obs = Observation {
                config,
                objectives: result.objectives,
                repetitions: result.per_rep.len() as u32,
                iteration,
                algorithm: cfg.algorithm.name().to_string(),
                wall_time_s: result.wall_time_s,
            };
            d.append(obs.clone())
                .map_err(|e| Error::Evaluation(format!("iteration {iteration}: {e}")))?;
            if let Some(sink) = self.sink.as_mut() {
                sink(d, &obs)?;
            }
        }

        let dataset = ds.expect("budget is positive");
        let reference = default_reference(dataset.num_objectives());
        Ok(TunerResult {
            archive: archive_of(&dataset),
            hv_trace: hv_trace(&dataset, &reference),
            dataset,
            chosen_metric_trace,
            iterations,
        })
    }

    fn propose(&self, ds: &ObservationDataset, t: u64, beta: f64, iteration: usize, r: &mut rng::Rng) -> Result<(Configuration, IterationTrace)> {
        let cfg = self.config;
        let space = self.space;
        let (x, y) = ds.to_training_matrices();
        let objectives: Vec<usize> = match cfg.algorithm {
            Algorithm::BoSingle => vec![cfg.bo_objective_index],
            _ => (0..ds.num_objectives()).collect(),
        };
        let fitted: Result<Vec<GpModel>> = objectives
            .par_iter()
            .map(|&j| {
                let col: Vec<f64> = y.iter().map(|row| row[j]).collect();
                GpModel::fit(&x, &col, &cfg.fit)
            })
            .collect();
        let mut trace = IterationTrace {
            iteration,
            t,
            beta,
            scores: Vec::new(),
            chosen: None,
            fallback: false,
        };
        let models = match fitted {
            Ok(m) => m,
            Err(e) => {
                log::warn!("iteration {iteration}: surrogate fit failed ({e}); sampling at random");
                trace.fallback = true;
                return Ok((space.sample_random(r), trace));
            }
        };
        let incumbents: Vec<f64> = objectives
            .iter()
            .map(|&j| y.iter().map(|row| row[j]).fold(f64::INFINITY, f64::min))
            .collect();
        let bounds: Vec<(f64, f64)> = {
            let all = ds.bounds();
            objectives.iter().map(|&j| all[j]).collect()
        };

        let acquisition = |u: &[f64]| -> Vec<f64> {
            models
                .iter()
                .zip(&incumbents)
                .map(|(m, &best)| match m.predict(u) {
                    Ok((mu, sigma)) => expected_improvement_from(mu, sigma, best),
                    Err(_) => 0.0,
                })
                .collect()
        };
        let candidates = nsga2(acquisition, space.dim(), &cfg.inner, r)?;

        let mut best: Option<(usize, f64)> = None;
        for (i, cand) in candidates.iter().enumerate() {
            let snapped = space.snap(&cand.genome);
            let seen = x.iter().any(|row| {
                row.iter()
                    .zip(&snapped)
                    .all(|(a, b)| (a - b).abs() <= cfg.dedup_epsilon)
            });
            if seen {
                trace.scores.push(None);
                continue;
            }
            let score = match cfg.algorithm {
                Algorithm::Adumbo => compute_adu(&models, &snapped, beta, &bounds, cfg.adu_mean_direction)?,
                Algorithm::Usemo => compute_usemo_u(&models, &snapped, beta, &bounds)?,
                _ => {
                    let (mu, sigma) = models[0].predict(&snapped)?;
                    expected_improvement_from(mu, sigma, incumbents[0])
                }
            };
            trace.scores.push(Some(score));
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((i, score));
            }
        }
        match best {
            Some((i, _)) => {
                trace.chosen = Some(i);
                Ok((space.decode(&candidates[i].genome), trace))
            }
            None => {
                trace.fallback = true;
                Ok((space.sample_random(r), trace))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::{zdt1, BuiltinProblem, EvaluatorSpec, FnEvaluator};
    use crate::pareto::pareto_front;
    use crate::space::ParameterSpec;
    use crate::surrogate::{KernelConfig, KernelFamily};

    fn small(algorithm: Algorithm, seed: u64, max_iterations: usize) -> TunerConfig {
        TunerConfig {
            algorithm,
            seed,
            max_iterations,
            init_samples: 5,
            inner: Nsga2Config {
                population: 20,
                generations: 10,
                ..Nsga2Config::default()
            },
            ..TunerConfig::default()
        }
    }

    fn zdt(dim: usize) -> (ParameterSpace, EvaluatorSpec) {
        (
            BuiltinProblem::Zdt1.default_space(dim),
            EvaluatorSpec::builtin(BuiltinProblem::Zdt1),
        )
    }

    #[test]
    fn adu_examples() {
        assert_eq!(adu_from_normalized(&[0.5, 0.5], &[0.0, 0.0], 4.0, MeanDirection::Verbatim), 0.5);
        let v = adu_from_normalized(&[0.5, 0.75], &[0.5, 0.4], 4.0, MeanDirection::Verbatim);
        assert!((v - 0.95).abs() < 1e-12);
        let v = adu_from_normalized(&[0.5, 0.75], &[0.5, 0.4], 0.0, MeanDirection::Verbatim);
        assert!((v - 0.2).abs() < 1e-12);
        let v = adu_from_normalized(&[0.25, 1.0], &[0.0, 0.0], 1.0, MeanDirection::Negated);
        assert!((v - (0.75 + 1e-6) * 1e-6).abs() < 1e-15);
    }

    #[test]
    fn usemo_examples() {
        assert!((usemo_from_normalized(&[0.5, 0.4], 4.0) - 0.8).abs() < 1e-12);
        assert_eq!(usemo_from_normalized(&[0.0, 0.4], 4.0), 0.0);
        let c = 3.0;
        let a = usemo_from_normalized(&[0.2, 0.7], 2.0);
        let b = usemo_from_normalized(&[0.2 * c, 0.7 * c], 2.0);
        assert!((b - c * c * a).abs() < 1e-12);
    }

    #[test]
    fn prediction_normalisation() {
        assert_eq!(normalized_prediction(15.0, 5.0, (10.0, 30.0)), (0.25, 0.25));
        assert_eq!(normalized_prediction(0.0, 1.0, (10.0, 30.0)).0, MU_HAT_FLOOR);
        assert_eq!(normalized_prediction(100.0, 1.0, (10.0, 30.0)).0, MU_HAT_CEIL);
        assert_eq!(normalized_prediction(3.0, 0.4, (7.0, 7.0)), (0.5, 0.4));
    }

    #[test]
    fn metrics_compose_with_models() {
        let x = vec![vec![0.1], vec![0.5], vec![0.9]];
        let k = KernelConfig::new(KernelFamily::Matern52, 0.3, 1.0, 1e-4);
        let a = GpModel::fit_with_kernel(&x, &[1.0, 2.0, 4.0], k).unwrap();
        let b = GpModel::fit_with_kernel(&x, &[3.0, 1.0, 0.5], k).unwrap();
        let bounds = [(1.0, 4.0), (0.5, 3.0)];
        let u = [0.7];
        let (ma, sa) = a.predict(&u).unwrap();
        let (mb, sb) = b.predict(&u).unwrap();
        let (ma, sa) = ((ma - 1.0) / 3.0, sa / 3.0);
        let (mb, sb) = ((mb - 0.5) / 2.5, sb / 2.5);
        let beta = 9.0;
        let adu = compute_adu(&[a.clone(), b.clone()], &u, beta, &bounds, MeanDirection::Verbatim).unwrap();
        assert!((adu - (3.0 * ma * mb + sa * sb)).abs() < 1e-12);
        let usemo = compute_usemo_u(&[a, b], &u, beta, &bounds).unwrap();
        assert!((usemo - 9.0 * sa * sb).abs() < 1e-12);
    }

    #[test]
    fn random_search_budget_and_archive() {
        let (space, mut ev) = zdt(8);
        let res = run(&space, &mut ev, &TunerConfig {
            max_iterations: 20,
            ..TunerConfig::new(Algorithm::Random, 7)
        })
        .unwrap();
        assert_eq!(res.dataset.len(), 20);
        let y = res.dataset.objectives();
        let mut expected: Vec<Vec<f64>> = pareto_front(&y).into_iter().map(|i| y[i].clone()).collect();
        expected.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let got: Vec<Vec<f64>> = res.archive.sorted_entries().iter().map(|e| e.objectives.clone()).collect();
        assert_eq!(got, expected);
        assert!(res.hv_trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn model_based_runs_spend_exact_budget() {
        for algorithm in [Algorithm::Adumbo, Algorithm::Usemo, Algorithm::BoSingle] {
            let (space, ev) = zdt(3);
            let mut calls = 0;
            let mut counting = FnEvaluator::new(vec!["f1".into(), "f2".into()], |u: &[f64]| {
                calls += 1;
                zdt1(u).to_vec()
            });
            let _ = ev;
            let res = run(&space, &mut counting, &small(algorithm, 3, 12)).unwrap();
            assert_eq!(res.dataset.len(), 12);
            assert_eq!(calls, 12);
            assert_eq!(res.iterations.len(), 7);
            // the chosen candidate scores at least as high as every other non-skipped one
            for it in &res.iterations {
                if let Some(c) = it.chosen {
                    let best = it.scores[c].unwrap();
                    assert!(it.scores.iter().flatten().all(|&s| s <= best));
                }
            }
        }
    }

    #[test]
    fn shared_initialisation() {
        let (space, mut ev) = zdt(4);
        let a = run(&space, &mut ev, &small(Algorithm::Adumbo, 11, 9)).unwrap();
        let b = run(&space, &mut ev, &small(Algorithm::Usemo, 11, 9)).unwrap();
        for i in 0..5 {
            assert_eq!(a.dataset.rows[i].config, b.dataset.rows[i].config);
            assert_eq!(a.dataset.rows[i].objectives, b.dataset.rows[i].objectives);
        }
    }

    #[test]
    fn collapsed_candidates_fall_back_to_random() {
        let space = ParameterSpace::new(vec![ParameterSpec::categorical("mode", ["a", "b"])]).unwrap();
        let mut ev = FnEvaluator::new(vec!["f1".into(), "f2".into()], |u: &[f64]| vec![u[0], 1.0 - u[0]]);
        let cfg = TunerConfig {
            init_samples: 2,
            ..small(Algorithm::Adumbo, 1, 8)
        };
        let res = run(&space, &mut ev, &cfg).unwrap();
        assert_eq!(res.dataset.len(), 8);
        assert!(res.iterations.iter().filter(|i| i.fallback).count() >= 5);
    }

    #[test]
    fn deterministic_given_seed() {
        let (space, mut ev) = zdt(3);
        let a = run(&space, &mut ev, &small(Algorithm::Adumbo, 5, 10)).unwrap();
        let b = run(&space, &mut ev, &small(Algorithm::Adumbo, 5, 10)).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.chosen_metric_trace, b.chosen_metric_trace);
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let (space, mut ev) = zdt(3);
        let cfg = small(Algorithm::Usemo, 9, 11);
        let full = run(&space, &mut ev, &cfg).unwrap();
        let mut partial = full.dataset.clone();
        partial.rows.truncate(7);
        let resumed = Tuner::new(&space, &cfg).resume_from(partial).run(&mut ev).unwrap();
        assert_eq!(resumed.dataset, full.dataset);
    }

    #[test]
    fn evaluator_failure_aborts_with_rows_streamed() {
        let space = BuiltinProblem::Zdt1.default_space(3);
        let mut n = 0;
        let mut ev = FnEvaluator::new(vec!["f1".into(), "f2".into()], |u: &[f64]| {
            n += 1;
            if n > 4 {
                vec![f64::NAN, 0.0]
            } else {
                zdt1(u).to_vec()
            }
        });
        let mut streamed = 0;
        let cfg = small(Algorithm::Random, 0, 10);
        let err = Tuner::new(&space, &cfg)
            .on_row(|_, _| {
                streamed += 1;
                Ok(())
            })
            .run(&mut ev)
            .unwrap_err();
        assert!(matches!(err, Error::Evaluation(_)), "{err}");
        assert_eq!(streamed, 4);
    }

    #[test]
    fn config_validation() {
        let bad = TunerConfig {
            init_samples: 1,
            ..TunerConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TunerConfig {
            max_iterations: 10,
            init_samples: 10,
            ..TunerConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!("bo-single".parse::<Algorithm>().unwrap(), Algorithm::BoSingle);
        assert!("pabo".parse::<Algorithm>().is_err());
    }

    #[test]
    fn hv_trace_properties() {
        let (space, mut ev) = zdt(4);
        let res = run(&space, &mut ev, &TunerConfig {
            max_iterations: 30,
            ..TunerConfig::new(Algorithm::Random, 2)
        })
        .unwrap();
        let trace = hv_trace(&res.dataset, &[1.2, 1.2]);
        assert_eq!(trace, res.hv_trace);
        assert!(trace.windows(2).all(|w| w[1] >= w[0]));

        let mut one = res.dataset.clone();
        one.rows.truncate(1);
        assert_eq!(hv_trace(&one, &[1.2, 1.2]), vec![hypervolume(&[vec![0.5, 0.5]], &[1.2, 1.2], 0)]);

        // a row dominated by an earlier one leaves the trace flat
        let mut ds = res.dataset.clone();
        ds.rows.truncate(10);
        let (lo, hi) = (ds.bounds()[0], ds.bounds()[1]);
        let mut worst = ds.rows[0].clone();
        worst.objectives = vec![ds.rows[0].objectives[0].max(lo.0), ds.rows[0].objectives[1].max(hi.0)];
        worst.objectives = worst.objectives.iter().map(|v| v + 1e-9).collect();
        worst.objectives[0] = worst.objectives[0].min(lo.1);
        worst.objectives[1] = worst.objectives[1].min(hi.1);
        if ds.rows.iter().any(|r| crate::pareto::dominates_unchecked(&r.objectives, &worst.objectives)) {
            let before = hv_trace(&ds, &[1.2, 1.2]);
            ds.rows.push(worst);
            let after = hv_trace(&ds, &[1.2, 1.2]);
            assert_eq!(after[after.len() - 1], before[before.len() - 1]);
        }
    }

    #[test]
    fn adu_argmax_survives_objective_rescale() {
        let (space, mut ev) = zdt(3);
        let res = run(&space, &mut ev, &small(Algorithm::Random, 4, 15)).unwrap();
        let (x, y) = res.dataset.to_training_matrices();
        let fit = |scale: f64| -> Vec<GpModel> {
            (0..2)
                .map(|j| {
                    let col: Vec<f64> = y.iter().map(|r| scale * r[j]).collect();
                    GpModel::fit(&x, &col, &FitOptions::default()).unwrap()
                })
                .collect()
        };
        let (raw, scaled) = (fit(1.0), fit(1000.0));
        let bounds = |s: f64| -> Vec<(f64, f64)> {
            res.dataset.bounds().iter().map(|&(l, h)| (s * l, s * h)).collect()
        };
        let mut r = rng::seeded(1);
        let cands: Vec<Vec<f64>> = (0..50).map(|_| space.encode(&space.sample_random(&mut r)).unwrap()).collect();
        for direction in [MeanDirection::Verbatim, MeanDirection::Negated] {
            let argmax = |models: &[GpModel], b: &[(f64, f64)]| {
                cands
                    .iter()
                    .map(|c| compute_adu(models, c, 20.0, b, direction).unwrap())
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, s)| if s > acc.1 { (i, s) } else { acc })
                    .0
            };
            assert_eq!(argmax(&raw, &bounds(1.0)), argmax(&scaled, &bounds(1000.0)));
        }
    }
}
