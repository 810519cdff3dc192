//! Multi-objective black-box configuration tuning.
//!
//! The crate is organised around the pieces of a tuning loop:
//!
//! * [`space`]: mixed categorical/integer/continuous parameter spaces and
//!   their unit-hypercube embedding.
//! * [`dataset`]: evaluated observations with JSONL persistence.
//! * [`surrogate`]: exact Gaussian-process regression per objective.
//! * [`acquisition`]: expected improvement, confidence bounds and the
//!   `beta_t` exploration schedule.
//! * [`cheapmoo`]: NSGA-II for the inner problem over acquisition values.
//! * [`pareto`]: dominance, archives and hypervolume.
//! * [`mopir`]: multi-objective parameter importance ranking.
//! * [`optimizer`]: the adaptive-uncertainty loop and its baselines.
//! * [`benchmark`]: multi-seed comparisons of tuning algorithms.
//! * [`evaluator`]: builtin benchmark problems and the external command
//!   protocol.
//! * [`cli`]: the `motune` command line.
//!
//! Every objective is minimised.

pub mod acquisition;
pub mod benchmark;
pub mod cheapmoo;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod evaluator;
pub mod forest;
pub mod mopir;
pub mod optimizer;
pub mod pareto;
pub mod rng;
pub mod space;
pub mod surrogate;

pub use error::{Error, Result};
