//! Multi-objective parameter importance ranking.
//!
//! 1. Per objective, fit a random forest on the encoded configurations and take
//!    its impurity importances (one column of the [`ImportanceTable`]).
//! 2. Rank parameters by non-dominated sorting of their importance vectors,
//!    higher importance being better.
//! 3. Select whole ranks in order; a rank that has to be split is ordered by the
//!    parameter's largest importance over all objectives, then by name.

use std::fmt;

use serde::Serialize;

use crate::cheapmoo::{fast_non_dominated_sort, Sense};
use crate::dataset::ObservationDataset;
use crate::error::{Error, Result};
use crate::forest::{ForestConfig, RandomForest};

pub const MIN_ROWS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Importances {
    pub values: Vec<f64>,
    /// Set when the objective was constant and importances fell back to `1/D`.
    pub degenerate: bool,
}

pub fn gini_importance(ds: &ObservationDataset, objective: usize, forest: &ForestConfig) -> Result<Importances> {
    if ds.len() < MIN_ROWS {
        return Err(Error::InsufficientData {
            needed: MIN_ROWS,
            have: ds.len(),
        });
    }
    if objective >= ds.num_objectives() {
        return Err(Error::DimensionMismatch {
            expected: ds.num_objectives(),
            got: objective + 1,
        });
    }
    let (x, y) = ds.to_training_matrices();
    let d = ds.space.dim();
    let mut rows: Vec<(Vec<f64>, f64)> = x.into_iter().zip(y.into_iter().map(|r| r[objective])).collect();
    // canonical row order, so bootstrap draws do not depend on how the log was ordered
    rows.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.total_cmp(&b.1))
    });
    let (x, y): (Vec<Vec<f64>>, Vec<f64>) = rows.into_iter().unzip();

    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let uniform = || Importances {
        values: vec![1.0 / d as f64; d],
        degenerate: true,
    };
    if hi <= lo {
        log::warn!("objective `{}` is constant; importances are uniform", ds.objective_names[objective]);
        return Ok(uniform());
    }
    let values = RandomForest::fit(&x, &y, forest).importances();
    if values.iter().sum::<f64>() <= 0.0 {
        return Ok(uniform());
    }
    Ok(Importances {
        values,
        degenerate: false,
    })
}

/// Importances per parameter (rows) and objective (columns); columns sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceTable {
    pub param_names: Vec<String>,
    pub objective_names: Vec<String>,
    pub gini: Vec<Vec<f64>>,
}

impl ImportanceTable {
    pub fn from_dataset(ds: &ObservationDataset, forest: &ForestConfig) -> Result<Self> {
        let columns = (0..ds.num_objectives())
            .map(|m| gini_importance(ds, m, forest).map(|imp| imp.values))
            .collect::<Result<Vec<_>>>()?;
        let d = ds.space.dim();
        let gini = (0..d).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
        Ok(Self {
            param_names: ds.space.names().map(str::to_string).collect(),
            objective_names: ds.objective_names.clone(),
            gini,
        })
    }

    pub fn max_importance(&self, param: usize) -> f64 {
        self.gini[param].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParetoRankTable {
    pub ranks: Vec<usize>,
}

pub fn pareto_rank_parameters(table: &ImportanceTable) -> ParetoRankTable {
    ParetoRankTable {
        ranks: fast_non_dominated_sort(&table.gini, Sense::Maximize),
    }
}

/// The `d` most important parameter names, in selection order.
pub fn select_top(table: &ImportanceTable, ranks: &ParetoRankTable, d: usize) -> Result<Vec<String>> {
    let total = table.param_names.len();
    if d == 0 || d > total {
        return Err(Error::Config(format!("top-d must lie in 1..={total}, got {d}")));
    }
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| {
        ranks.ranks[a]
            .cmp(&ranks.ranks[b])
            .then(table.max_importance(b).total_cmp(&table.max_importance(a)))
            .then(table.param_names[a].cmp(&table.param_names[b]))
    });
    Ok(order.into_iter().take(d).map(|i| table.param_names[i].clone()).collect())
}

/// Ranking outcome as written by `motune rank`.
#[derive(Debug, Clone, Serialize)]
pub struct RankReport {
    pub objectives: Vec<String>,
    pub params: Vec<RankedParam>,
    pub selected: Vec<String>,
    pub forest: ForestSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankedParam {
    pub name: String,
    pub gini: Vec<f64>,
    pub rank: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ForestSummary {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

pub fn rank(ds: &ObservationDataset, forest: &ForestConfig, top: usize) -> Result<RankReport> {
    if top == 0 || top > ds.space.dim() {
        return Err(Error::Config(format!(
            "top-d must lie in 1..={}, got {top}",
            ds.space.dim()
        )));
    }
    let table = ImportanceTable::from_dataset(ds, forest)?;
    let ranks = pareto_rank_parameters(&table);
    let selected = select_top(&table, &ranks, top)?;
    let params = table
        .param_names
        .iter()
        .zip(&table.gini)
        .zip(&ranks.ranks)
        .map(|((name, gini), &rank)| RankedParam {
            name: name.clone(),
            gini: gini.clone(),
            rank,
        })
        .collect();
    Ok(RankReport {
        objectives: table.objective_names,
        params,
        selected,
        forest: ForestSummary {
            trees: forest.trees,
            max_depth: forest.max_depth,
            min_leaf: forest.min_leaf,
            seed: forest.seed,
        },
    })
}

impl fmt::Display for RankReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.params.iter().map(|p| p.name.len()).max().unwrap_or(4).max(9);
        write!(f, "{:<width$}  {:>4}", "parameter", "rank")?;
        for o in &self.objectives {
            write!(f, "  {o:>10}")?;
        }
        writeln!(f)?;
        let mut rows: Vec<&RankedParam> = self.params.iter().collect();
        rows.sort_by_key(|p| p.rank);
        for p in rows {
            let mark = if self.selected.contains(&p.name) { "*" } else { " " };
            write!(f, "{:<width$}  {:>4}", p.name, p.rank)?;
            for g in &p.gini {
                write!(f, "  {g:>10.4}")?;
            }
            writeln!(f, " {mark}")?;
        }
        writeln!(f, "selected: {}", self.selected.join(", "))
    }
}
