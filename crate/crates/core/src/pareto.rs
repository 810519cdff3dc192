//! Pareto dominance, archives and the hypervolume indicator (all minimisation).

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::space::{Configuration, ParameterSpace};

pub const DEFAULT_REFERENCE: f64 = 1.2;
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

/// `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(dominates_unchecked(a, b))
}

pub(crate) fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Indices of the non-dominated points, in input order. Duplicates are all kept.
///
/// Points are visited in lexicographic order, so a point can only be dominated by
/// one visited earlier; each candidate is compared against the current front only.
pub fn pareto_front(points: &[Vec<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| lex_cmp(&points[i], &points[j]).then(i.cmp(&j)));
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        if !front.iter().any(|&j| dominates_unchecked(&points[j], &points[i])) {
            front.push(i);
        }
    }
    front.sort_unstable();
    front
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveEntry {
    pub config: Configuration,
    pub objectives: Vec<f64>,
}

/// Mutually non-dominated set of evaluated configurations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParetoArchive {
    pub entries: Vec<ArchiveEntry>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Returns whether the point was accepted. Dominated points and exact
    /// duplicates of an entry are rejected.
    pub fn insert(&mut self, config: Configuration, objectives: Vec<f64>) -> bool {
        if let Some(first) = self.entries.first() {
            assert_eq!(first.objectives.len(), objectives.len(), "objective count changed");
        }
        if self
            .entries
            .iter()
            .any(|e| e.objectives == objectives || dominates_unchecked(&e.objectives, &objectives))
        {
            return false;
        }
        self.entries
            .retain(|e| !dominates_unchecked(&objectives, &e.objectives));
        self.entries.push(ArchiveEntry { config, objectives });
        true
    }

    pub fn objectives(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(|e| e.objectives.clone()).collect()
    }

    /// Entries sorted by first objective (then the rest) ascending.
    pub fn sorted_entries(&self) -> Vec<&ArchiveEntry> {
        let mut out: Vec<_> = self.entries.iter().collect();
        out.sort_by(|a, b| lex_cmp(&a.objectives, &b.objectives));
        out
    }

    /// Front CSV: parameter columns then objective columns, sorted by first objective.
    pub fn write_csv<W: Write>(&self, out: W, space: &ParameterSpace, objective_names: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<&str> = space
            .names()
            .chain(objective_names.iter().map(String::as_str))
            .collect();
        w.write_record(&header)?;
        for e in self.sorted_entries() {
            let row: Vec<String> = e
                .config
                .values
                .iter()
                .map(ToString::to_string)
                .chain(e.objectives.iter().map(ToString::to_string))
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, space: &ParameterSpace, objective_names: &[String]) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?, space, objective_names)
    }
}

fn clip_to_reference(front: &[Vec<f64>], reference: &[f64]) -> Vec<Vec<f64>> {
    front
        .iter()
        .filter(|p| p.iter().zip(reference).all(|(x, r)| x < r))
        .cloned()
        .collect()
}

/// Exact two-objective hypervolume by a staircase sweep.
pub fn hypervolume_2d(front: &[Vec<f64>], reference: [f64; 2]) -> f64 {
    let mut pts = clip_to_reference(front, &reference);
    pts.sort_by(|a, b| lex_cmp(a, b));
    let mut area = 0.0;
    // ascending x; keep a point only if it lowers the running y minimum
    let mut stairs: Vec<(f64, f64)> = Vec::new();
    for p in &pts {
        if stairs.last().is_none_or(|&(_, y)| p[1] < y) {
            stairs.push((p[0], p[1]));
        }
    }
    for (i, &(x, y)) in stairs.iter().enumerate() {
        let next_x = stairs.get(i + 1).map_or(reference[0], |s| s.0);
        area += (next_x - x) * (reference[1] - y);
    }
    area
}

/// Monte-Carlo hypervolume over the box `[componentwise min of the front, reference]`.
pub fn hypervolume_mc(front: &[Vec<f64>], reference: &[f64], samples: usize, seed: u64) -> f64 {
    let pts = clip_to_reference(front, reference);
    if pts.is_empty() || samples == 0 {
        return 0.0;
    }
    let m = reference.len();
    let lower: Vec<f64> = (0..m)
        .map(|j| pts.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min))
        .collect();
    let volume: f64 = lower.iter().zip(reference).map(|(l, r)| r - l).product();
    let mut r = rng::seeded(seed);
    let mut sample = vec![0.0; m];
    let mut hits = 0usize;
    for _ in 0..samples {
        for j in 0..m {
            sample[j] = lower[j] + r.random::<f64>() * (reference[j] - lower[j]);
        }
        if pts
            .iter()
            .any(|p| p.iter().zip(&sample).all(|(a, s)| a <= s))
        {
            hits += 1;
        }
    }
    volume * hits as f64 / samples as f64
}

/// Exact for two objectives, Monte Carlo otherwise.
pub fn hypervolume(front: &[Vec<f64>], reference: &[f64], seed: u64) -> f64 {
    if reference.len() == 2 {
        hypervolume_2d(front, [reference[0], reference[1]])
    } else {
        hypervolume_mc(front, reference, DEFAULT_MC_SAMPLES, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ParamValue;
    use proptest::prelude::*;

    fn brute_force(points: &[Vec<f64>]) -> Vec<usize> {
        (0..points.len())
            .filter(|&i| !points.iter().any(|q| dominates_unchecked(q, &points[i])))
            .collect()
    }

    fn cfg(i: i64) -> Configuration {
        Configuration::new(vec![ParamValue::Integer(i)])
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&[1.0, 2.0], &[2.0, 3.0]).unwrap());
        assert!(!dominates(&[1.0, 2.0], &[2.0, 1.0]).unwrap());
        assert!(!dominates(&[1.0, 2.0], &[1.0, 2.0]).unwrap());
        assert!(dominates(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn archive_examples() {
        let mut a = ParetoArchive::new();
        assert!(a.insert(cfg(0), vec![2.0, 2.0]));
        assert!(a.insert(cfg(1), vec![1.0, 1.0]));
        assert_eq!(a.objectives(), vec![vec![1.0, 1.0]]);
        assert!(!a.insert(cfg(2), vec![3.0, 3.0]));
        assert!(a.insert(cfg(3), vec![0.0, 3.0]));
        assert_eq!(a.objectives(), vec![vec![1.0, 1.0], vec![0.0, 3.0]]);
        assert!(!a.insert(cfg(4), vec![0.0, 3.0]));
    }

    #[test]
    fn hypervolume_examples() {
        let r = [1.2, 1.2];
        assert!((hypervolume_2d(&[vec![0.2, 0.2]], r) - 1.0).abs() < 1e-12);
        assert!((hypervolume_2d(&[vec![0.2, 0.7], vec![0.7, 0.2]], r) - 0.75).abs() < 1e-12);
        assert_eq!(hypervolume_2d(&[], r), 0.0);
        assert_eq!(hypervolume_2d(&[vec![1.3, 0.1], vec![0.1, 1.2]], r), 0.0);
    }

    #[test]
    fn mc_examples() {
        let r = [1.2, 1.2];
        let v = hypervolume_mc(&[vec![0.2, 0.2]], &r, DEFAULT_MC_SAMPLES, 1);
        assert!((v - 1.0).abs() <= 0.01);
        // the front holds the ideal corner, so every sample is dominated
        let front = vec![vec![0.1, 0.1, 0.1], vec![0.5, 0.2, 0.9], vec![0.3, 0.1, 0.4]];
        let v = hypervolume_mc(&front, &[1.0, 1.0, 1.0], 1000, 3);
        assert_eq!(v, 0.9f64 * 0.9 * 0.9);
    }

    #[test]
    fn mc_variance_halves_with_doubled_samples() {
        let front = vec![vec![0.1, 0.8], vec![0.4, 0.4], vec![0.8, 0.1]];
        let r = [1.2, 1.2];
        let variance = |n: usize, base: u64| {
            let vals: Vec<f64> = (0..2000).map(|s| hypervolume_mc(&front, &r, n, base + s)).collect();
            let mean = vals.iter().sum::<f64>() / 2000.0;
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 1999.0
        };
        let ratio = variance(200, 0) / variance(400, 10_000);
        assert!((1.6..=2.4).contains(&ratio), "variance ratio {ratio}");
    }

    #[test]
    fn csv_rows_sorted_by_first_objective() {
        let space = ParameterSpace::new(vec![crate::space::ParameterSpec::integer("n", 0, 9)]).unwrap();
        let mut a = ParetoArchive::new();
        a.insert(cfg(1), vec![0.9, 0.1]);
        a.insert(cfg(2), vec![0.1, 0.9]);
        let mut buf = Vec::new();
        a.write_csv(&mut buf, &space, &["f1".into(), "f2".into()]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n,f1,f2\n2,0.1,0.9\n1,0.9,0.1\n");
    }

    fn points(m: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        // coarse grid so ties and duplicates occur
        proptest::collection::vec(proptest::collection::vec((0u8..8).prop_map(|v| v as f64 / 8.0), m), 0..60)
    }

    proptest! {
        #[test]
        fn front_matches_brute_force(pts in points(2)) {
            prop_assert_eq!(pareto_front(&pts), brute_force(&pts));
        }

        #[test]
        fn front_matches_brute_force_3d(pts in points(3)) {
            prop_assert_eq!(pareto_front(&pts), brute_force(&pts));
        }

        #[test]
        fn dominance_irreflexive_transitive(a in points(3), b in points(3), c in points(3)) {
            for ((x, y), z) in a.iter().zip(&b).zip(&c) {
                prop_assert!(!dominates_unchecked(x, x));
                if dominates_unchecked(x, y) && dominates_unchecked(y, z) {
                    prop_assert!(dominates_unchecked(x, z));
                }
            }
        }

        #[test]
        fn archive_equals_brute_force(pts in points(2)) {
            let mut a = ParetoArchive::new();
            for (i, p) in pts.iter().enumerate() {
                a.insert(cfg(i as i64), p.clone());
                let objs = a.objectives();
                for x in &objs {
                    prop_assert!(!objs.iter().any(|y| dominates_unchecked(y, x)));
                }
            }
            let mut expected: Vec<Vec<f64>> = brute_force(&pts).into_iter().map(|i| pts[i].clone()).collect();
            expected.sort_by(|a, b| lex_cmp(a, b));
            expected.dedup();
            let mut got = a.objectives();
            got.sort_by(|a, b| lex_cmp(a, b));
            prop_assert_eq!(got, expected);
        }

        #[test]
        fn hv_properties(pts in points(2), extra in points(2)) {
            let r = [1.2, 1.2];
            let base = hypervolume_2d(&pts, r);
            let mut rev = pts.clone();
            rev.reverse();
            prop_assert!((hypervolume_2d(&rev, r) - base).abs() < 1e-12);
            for e in &extra {
                let mut more = pts.clone();
                more.push(e.clone());
                let hv = hypervolume_2d(&more, r);
                prop_assert!(hv >= base - 1e-12);
                if pts.iter().any(|p| dominates_unchecked(p, e)) {
                    prop_assert!((hv - base).abs() < 1e-12);
                }
            }
        }
    }
}
