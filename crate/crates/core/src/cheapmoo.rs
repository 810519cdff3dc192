//! NSGA-II over the unit hypercube, used for the inner problem on acquisition values.

use std::cmp::Ordering;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

fn better_or_equal(a: f64, b: f64, sense: Sense) -> Ordering {
    match sense {
        Sense::Minimize => b.total_cmp(&a),
        Sense::Maximize => a.total_cmp(&b),
    }
}

fn dominates_in(a: &[f64], b: &[f64], sense: Sense) -> bool {
    let mut strict = false;
    for (&x, &y) in a.iter().zip(b) {
        match better_or_equal(x, y, sense) {
            Ordering::Less => return false,
            Ordering::Greater => strict = true,
            Ordering::Equal => {}
        }
    }
    strict
}

/// Deb's fast non-dominated sort; returns 1-based front ranks.
pub fn fast_non_dominated_sort(values: &[Vec<f64>], sense: Sense) -> Vec<usize> {
    let n = values.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates_in(&values[i], &values[j], sense) {
                dominates_list[i].push(j);
                dominated_by_count[j] += 1;
            } else if dominates_in(&values[j], &values[i], sense) {
                dominates_list[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }
    let mut ranks = vec![0usize; n];
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    let mut rank = 1;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            ranks[i] = rank;
            for &j in &dominates_list[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        current = next;
        rank += 1;
    }
    ranks
}

/// Crowding distance within one front; boundary points get `+inf`.
pub fn crowding_distance(front: &[Vec<f64>]) -> Vec<f64> {
    let k = front.len();
    if k <= 2 {
        return vec![f64::INFINITY; k];
    }
    let m = front[0].len();
    let mut dist = vec![0.0; k];
    let mut order: Vec<usize> = (0..k).collect();
    for obj in 0..m {
        order.sort_by(|&a, &b| front[a][obj].total_cmp(&front[b][obj]).then(a.cmp(&b)));
        let lo = front[order[0]][obj];
        let hi = front[order[k - 1]][obj];
        dist[order[0]] = f64::INFINITY;
        dist[order[k - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in 1..k - 1 {
            let gap = front[order[w + 1]][obj] - front[order[w - 1]][obj];
            dist[order[w]] += gap / range;
        }
    }
    dist
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nsga2Config {
    pub population: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub sbx_eta: f64,
    /// Per-gene mutation probability; `None` means `1 / D`.
    pub mutation_prob: Option<f64>,
    pub pm_eta: f64,
}

impl Default for Nsga2Config {
    fn default() -> Self {
        Self {
            population: 100,
            generations: 50,
            crossover_prob: 0.9,
            sbx_eta: 15.0,
            mutation_prob: None,
            pm_eta: 20.0,
        }
    }
}

impl Nsga2Config {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 || !self.population.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "population must be even and at least 4, got {}",
                self.population
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Vec<f64>,
    /// Objective values, maximised.
    pub values: Vec<f64>,
    pub rank: usize,
    pub crowding: f64,
}

fn evaluate_all<F>(genomes: Vec<Vec<f64>>, evaluate: &F) -> Result<Vec<Individual>>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    genomes
        .into_par_iter()
        .map(|genome| {
            let values = evaluate(&genome);
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "objective returned {values:?} at genome {genome:?}"
                )));
            }
            Ok(Individual {
                genome,
                values,
                rank: 0,
                crowding: 0.0,
            })
        })
        .collect()
}

/// Assigns rank and crowding to every individual.
fn assign_fitness(pop: &mut [Individual]) {
    let values: Vec<Vec<f64>> = pop.iter().map(|i| i.values.clone()).collect();
    let ranks = fast_non_dominated_sort(&values, Sense::Maximize);
    let max_rank = ranks.iter().copied().max().unwrap_or(0);
    for r in 1..=max_rank {
        let members: Vec<usize> = (0..pop.len()).filter(|&i| ranks[i] == r).collect();
        let front: Vec<Vec<f64>> = members.iter().map(|&i| values[i].clone()).collect();
        for (&i, d) in members.iter().zip(crowding_distance(&front)) {
            pop[i].rank = r;
            pop[i].crowding = d;
        }
    }
}

fn crowded_better(a: &Individual, b: &Individual) -> bool {
    a.rank < b.rank || (a.rank == b.rank && a.crowding > b.crowding)
}

fn tournament<'a>(pop: &'a [Individual], rng: &mut rng::Rng) -> &'a Individual {
    let a = &pop[rng.random_range(0..pop.len())];
    let b = &pop[rng.random_range(0..pop.len())];
    if crowded_better(b, a) {
        b
    } else {
        a
    }
}

/// Simulated binary crossover on `[0, 1]` (bounded form), children clamped to the cube.
fn sbx(p1: &[f64], p2: &[f64], eta: f64, rng: &mut rng::Rng) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    for i in 0..p1.len() {
        if rng.random::<f64>() > 0.5 || (p1[i] - p2[i]).abs() <= 1e-14 {
            continue;
        }
        let (y1, y2) = if p1[i] < p2[i] { (p1[i], p2[i]) } else { (p2[i], p1[i]) };
        let u: f64 = rng.random();
        let spread = |beta: f64| {
            let alpha = 2.0 - beta.powf(-(eta + 1.0));
            if u <= 1.0 / alpha {
                (u * alpha).powf(1.0 / (eta + 1.0))
            } else {
                (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
            }
        };
        let beta_lo = 1.0 + 2.0 * y1 / (y2 - y1);
        let beta_hi = 1.0 + 2.0 * (1.0 - y2) / (y2 - y1);
        let lo = 0.5 * ((y1 + y2) - spread(beta_lo) * (y2 - y1));
        let hi = 0.5 * ((y1 + y2) + spread(beta_hi) * (y2 - y1));
        let (lo, hi) = (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0));
        if rng.random::<bool>() {
            c1[i] = hi;
            c2[i] = lo;
        } else {
            c1[i] = lo;
            c2[i] = hi;
        }
    }
    (c1, c2)
}

/// Polynomial mutation on `[0, 1]`.
fn mutate(genome: &mut [f64], prob: f64, eta: f64, rng: &mut rng::Rng) {
    for g in genome.iter_mut() {
        if rng.random::<f64>() >= prob {
            continue;
        }
        let y = *g;
        let u: f64 = rng.random();
        let pow = 1.0 / (eta + 1.0);
        let delta = if u < 0.5 {
            let xy = 1.0 - y;
            let val = 2.0 * u + (1.0 - 2.0 * u) * xy.powf(eta + 1.0);
            val.powf(pow) - 1.0
        } else {
            let xy = y;
            let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy.powf(eta + 1.0);
            1.0 - val.powf(pow)
        };
        *g = (y + delta).clamp(0.0, 1.0);
    }
}

/// Elitist environmental selection of `size` survivors from `pool`.
fn select_survivors(mut pool: Vec<Individual>, size: usize) -> Vec<Individual> {
    assign_fitness(&mut pool);
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    idx.sort_by(|&a, &b| {
        pool[a]
            .rank
            .cmp(&pool[b].rank)
            .then(pool[b].crowding.total_cmp(&pool[a].crowding))
            .then(a.cmp(&b))
    });
    idx.truncate(size);
    idx.sort_unstable();
    let mut keep = vec![false; pool.len()];
    for i in idx {
        keep[i] = true;
    }
    let mut survivors: Vec<Individual> = pool
        .into_iter()
        .zip(keep)
        .filter_map(|(ind, k)| k.then_some(ind))
        .collect();
    assign_fitness(&mut survivors);
    survivors
}

/// Runs NSGA-II maximising every component of `evaluate` over `[0, 1]^dim`.
///
/// Returns the rank-1 individuals of the final population, with genomes closer
/// than `1e-9` (L-infinity) merged.
pub fn nsga2<F>(evaluate: F, dim: usize, config: &Nsga2Config, rng: &mut rng::Rng) -> Result<Vec<Individual>>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    config.validate()?;
    if dim == 0 {
        return Err(Error::Config("dimension must be at least 1".into()));
    }
    let n = config.population;
    let pm = config.mutation_prob.unwrap_or(1.0 / dim as f64);
    let init: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut pop = evaluate_all(init, &evaluate)?;
    assign_fitness(&mut pop);

    for _ in 0..config.generations {
        let mut children = Vec::with_capacity(n);
        while children.len() < n {
            let p1 = tournament(&pop, rng).genome.clone();
            let p2 = tournament(&pop, rng).genome.clone();
            let (mut c1, mut c2) = if rng.random::<f64>() < config.crossover_prob {
                sbx(&p1, &p2, config.sbx_eta, rng)
            } else {
                (p1, p2)
            };
            mutate(&mut c1, pm, config.pm_eta, rng);
            mutate(&mut c2, pm, config.pm_eta, rng);
            children.push(c1);
            children.push(c2);
        }
        let offspring = evaluate_all(children, &evaluate)?;
        pop.extend(offspring);
        pop = select_survivors(pop, n);
    }

    let mut best: Vec<Individual> = Vec::new();
    for ind in pop.into_iter().filter(|i| i.rank == 1) {
        let dup = best.iter().any(|b| {
            b.genome
                .iter()
                .zip(&ind.genome)
                .all(|(x, y)| (x - y).abs() <= 1e-9)
        });
        if !dup {
            best.push(ind);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pareto::hypervolume_2d;
    use crate::rng;
    use proptest::prelude::*;

    fn brute_rank1(values: &[Vec<f64>], sense: Sense) -> Vec<usize> {
        (0..values.len())
            .filter(|&i| !values.iter().any(|q| dominates_in(q, &values[i], sense)))
            .collect()
    }

    pub(crate) fn zdt1(x: &[f64]) -> [f64; 2] {
        let g = 1.0 + 9.0 * x[1..].iter().sum::<f64>() / (x.len() - 1) as f64;
        [x[0], g * (1.0 - (x[0] / g).sqrt())]
    }

    #[test]
    fn sort_examples() {
        let max = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        assert_eq!(fast_non_dominated_sort(&max, Sense::Maximize), vec![2, 1]);
        let min = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![1.5, 0.5]];
        assert_eq!(fast_non_dominated_sort(&min, Sense::Minimize), vec![1, 2, 1]);
        let same = vec![vec![0.3, 0.3]; 5];
        assert_eq!(fast_non_dominated_sort(&same, Sense::Minimize), vec![1; 5]);
    }

    #[test]
    fn crowding_examples() {
        assert_eq!(crowding_distance(&[vec![0.0, 1.0], vec![1.0, 0.0]]), vec![f64::INFINITY; 2]);
        let d = crowding_distance(&[vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]);
        assert_eq!(d, vec![f64::INFINITY, 2.0, f64::INFINITY]);
        let front = vec![vec![0.0, 1.0], vec![0.2, 0.8], vec![0.7, 0.3], vec![1.0, 0.0]];
        let d = crowding_distance(&front);
        let mut rev = front.clone();
        rev.reverse();
        let mut dr = crowding_distance(&rev);
        dr.reverse();
        assert_eq!(d, dr);
    }

    #[test]
    fn zdt1_front_quality() {
        let cfg = Nsga2Config {
            generations: 250,
            ..Nsga2Config::default()
        };
        let out = nsga2(|x| zdt1(x).iter().map(|v| -v).collect(), 8, &cfg, &mut rng::seeded(1)).unwrap();
        let front: Vec<Vec<f64>> = out.iter().map(|i| i.values.iter().map(|v| -v).collect()).collect();
        let hv = hypervolume_2d(&front, [1.2, 1.2]);
        assert!(hv >= 0.98 * (0.2 + 2.0 / 3.0 + 0.24), "hv {hv}");
        assert!(out.len() <= cfg.population);
    }

    #[test]
    fn degenerate_single_objective_finds_maximiser() {
        let bowl = |x: &[f64]| vec![-(x[0] - 0.37) * (x[0] - 0.37), 1.0];
        // grid oracle for the maximiser
        let grid_best = (0..=10_000)
            .map(|i| i as f64 / 10_000.0)
            .max_by(|a, b| bowl(&[*a])[0].total_cmp(&bowl(&[*b])[0]))
            .unwrap();
        let out = nsga2(bowl, 1, &Nsga2Config::default(), &mut rng::seeded(3)).unwrap();
        assert!(out.iter().all(|i| (i.genome[0] - grid_best).abs() <= 1e-2), "{out:?}");
    }

    #[test]
    fn deterministic_given_seed() {
        let f = |x: &[f64]| zdt1(x).iter().map(|v| -v).collect();
        let a = nsga2(f, 4, &Nsga2Config::default(), &mut rng::seeded(9)).unwrap();
        let b = nsga2(f, 4, &Nsga2Config::default(), &mut rng::seeded(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_non_finite_objectives() {
        let err = nsga2(|_| vec![f64::NAN, 0.0], 2, &Nsga2Config::default(), &mut rng::seeded(0)).unwrap_err();
        assert!(err.to_string().contains("genome"));
        let odd = Nsga2Config {
            population: 7,
            ..Nsga2Config::default()
        };
        assert!(nsga2(|x| x.to_vec(), 2, &odd, &mut rng::seeded(0)).is_err());
    }

    #[test]
    fn output_is_mutually_non_dominated_and_in_cube() {
        let f = |x: &[f64]| vec![x[0] * x[1], (1.0 - x[0]) * (1.0 - x[2]), x[1] - x[2]];
        let cfg = Nsga2Config {
            population: 40,
            generations: 30,
            ..Nsga2Config::default()
        };
        let out = nsga2(f, 3, &cfg, &mut rng::seeded(4)).unwrap();
        for a in &out {
            assert!(a.genome.iter().all(|g| (0.0..=1.0).contains(g)));
            assert!(!out.iter().any(|b| dominates_in(&b.values, &a.values, Sense::Maximize)));
        }
    }

    proptest! {
        #[test]
        fn rank1_matches_brute_force(
            pts in proptest::collection::vec(proptest::collection::vec((0u8..6).prop_map(f64::from), 2..=3), 1..80),
        ) {
            let m = pts[0].len();
            let pts: Vec<Vec<f64>> = pts.into_iter().filter(|p| p.len() == m).collect();
            for sense in [Sense::Minimize, Sense::Maximize] {
                let ranks = fast_non_dominated_sort(&pts, sense);
                let got: Vec<usize> = (0..pts.len()).filter(|&i| ranks[i] == 1).collect();
                prop_assert_eq!(got, brute_rank1(&pts, sense));
                // each rank-r point is dominated by some rank-(r-1) point
                for i in 0..pts.len() {
                    if ranks[i] > 1 {
                        prop_assert!((0..pts.len()).any(|j| ranks[j] == ranks[i] - 1 && dominates_in(&pts[j], &pts[i], sense)));
                    }
                }
            }
        }
    }
}
