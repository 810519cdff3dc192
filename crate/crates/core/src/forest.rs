//! Random-forest regression with impurity (variance-reduction) importances.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
    /// Candidate features per split; `None` means `floor(sqrt(D))`.
    pub max_features: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 100,
            max_depth: 8,
            min_leaf: 2,
            seed: 0,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    /// Unnormalised SSE reduction per feature.
    importance: Vec<f64>,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    cfg: &'a ForestConfig,
    mtry: usize,
    rng: rng::Rng,
    nodes: Vec<Node>,
    importance: Vec<f64>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
    pos: usize,
}

impl Builder<'_> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let n = idx.len();
        let sum: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let mean = sum / n as f64;
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(mean));
        if depth >= self.cfg.max_depth || n < 2 * self.cfg.min_leaf {
            return id;
        }
        let Some(best) = self.best_split(idx) else {
            return id;
        };
        idx.sort_by(|&a, &b| self.x[a][best.feature].total_cmp(&self.x[b][best.feature]));
        self.importance[best.feature] += best.gain;
        let (l, r) = idx.split_at_mut(best.pos);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<BestSplit> {
        let d = self.x[0].len();
        let n = idx.len();
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let base = total * total / n as f64;
        let mut best: Option<BestSplit> = None;
        let mut order = idx.to_vec();
        for feature in sample(&mut self.rng, d, self.mtry.min(d)) {
            order.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]));
            let mut left_sum = 0.0;
            for pos in 1..n {
                left_sum += self.y[order[pos - 1]];
                let (xa, xb) = (self.x[order[pos - 1]][feature], self.x[order[pos]][feature]);
                if pos < self.cfg.min_leaf || n - pos < self.cfg.min_leaf || xa == xb {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / pos as f64 + right_sum * right_sum / (n - pos) as f64 - base;
                if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit {
                        feature,
                        threshold: 0.5 * (xa + xb),
                        gain,
                        pos,
                    });
                }
            }
        }
        best
    }
}

impl RegressionTree {
    fn fit(x: &[Vec<f64>], y: &[f64], rows: &mut [usize], cfg: &ForestConfig, mtry: usize, rng: rng::Rng) -> Self {
        let mut b = Builder {
            x,
            y,
            cfg,
            mtry,
            rng,
            nodes: Vec::new(),
            importance: vec![0.0; x[0].len()],
        };
        b.build(rows, 0);
        Self {
            nodes: b.nodes,
            importance: b.importance,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(v) => return *v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomForest {
    pub trees: Vec<RegressionTree>,
    dim: usize,
}

impl RandomForest {
    /// Bootstrapped trees, each with its own rng stream.
    pub fn fit(x: &[Vec<f64>], y: &[f64], cfg: &ForestConfig) -> Self {
        assert!(!x.is_empty() && x.len() == y.len());
        let dim = x[0].len();
        let mtry = cfg
            .max_features
            .unwrap_or_else(|| ((dim as f64).sqrt().floor() as usize).max(1));
        let n = x.len();
        let trees = (0..cfg.trees)
            .into_par_iter()
            .map(|t| {
                let mut r = rng::stream(cfg.seed, t as u64);
                let mut rows: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
                RegressionTree::fit(x, y, &mut rows, cfg, mtry, r)
            })
            .collect();
        Self { trees, dim }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    /// Per-tree importances normalised to 1, averaged, then renormalised.
    /// All zeros when no tree found a split.
    pub fn importances(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        for t in &self.trees {
            let total: f64 = t.importance.iter().sum();
            if total > 0.0 {
                for (a, v) in acc.iter_mut().zip(&t.importance) {
                    *a += v / total;
                }
            }
        }
        let total: f64 = acc.iter().sum();
        if total > 0.0 {
            acc.iter_mut().for_each(|a| *a /= total);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut r = rng::seeded(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| r.random::<f64>()).collect()).collect();
        let y = x.iter().map(|p| 3.0 * p[1] + (p[2] > 0.5) as u8 as f64).collect();
        (x, y)
    }

    #[test]
    fn informative_features_dominate() {
        let (x, y) = data(400, 1);
        let f = RandomForest::fit(&x, &y, &ForestConfig::default());
        let imp = f.importances();
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(imp[1] > imp[0] && imp[1] > imp[3]);
        assert!(imp[2] > imp[0] && imp[2] > imp[3]);
    }

    #[test]
    fn predictions_track_target() {
        let (x, y) = data(400, 2);
        let f = RandomForest::fit(&x, &y, &ForestConfig::default());
        let mse: f64 = x.iter().zip(&y).map(|(p, t)| (f.predict(p) - t).powi(2)).sum::<f64>() / x.len() as f64;
        assert!(mse < 0.05, "{mse}");
    }

    #[test]
    fn constant_target_has_no_splits() {
        let (x, _) = data(50, 3);
        let f = RandomForest::fit(&x, &vec![2.0; 50], &ForestConfig::default());
        assert!(f.importances().iter().all(|&v| v == 0.0));
        assert_eq!(f.predict(&x[0]), 2.0);
    }

    #[test]
    fn leaves_respect_min_leaf_and_depth() {
        let (x, y) = data(200, 4);
        let cfg = ForestConfig {
            trees: 5,
            max_depth: 2,
            min_leaf: 30,
            ..Default::default()
        };
        let f = RandomForest::fit(&x, &y, &cfg);
        for t in &f.trees {
            // depth 2 means at most 3 internal nodes and 4 leaves
            assert!(t.nodes.len() <= 7);
        }
    }
}
