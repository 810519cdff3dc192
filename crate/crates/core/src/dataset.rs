//! Evaluated observations and their JSONL log.
//!
//! One record per line:
//!
//! ```text
//! {"iteration":0,"algorithm":"adumbo","config":{"x0":0.25,...},"objectives":[0.25,3.1],"repetitions":1,"wall_time_s":0.0}
//! ```
//!
//! Objectives are stored raw; normalisation is recomputed on demand.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::space::{Configuration, ParameterSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub config: Configuration,
    pub objectives: Vec<f64>,
    pub repetitions: u32,
    pub iteration: usize,
    pub algorithm: String,
    pub wall_time_s: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    iteration: usize,
    algorithm: String,
    config: Map<String, Value>,
    objectives: Vec<f64>,
    repetitions: u32,
    wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationDataset {
    pub space: ParameterSpace,
    pub objective_names: Vec<String>,
    pub rows: Vec<Observation>,
}

/// Per-objective `(min, max)` of a set of rows.
pub type Bounds = Vec<(f64, f64)>;

impl ObservationDataset {
    pub fn new(space: ParameterSpace, objective_names: Vec<String>) -> Self {
        assert!(!objective_names.is_empty(), "at least one objective");
        Self {
            space,
            objective_names,
            rows: Vec::new(),
        }
    }

    pub fn num_objectives(&self) -> usize {
        self.objective_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn append(&mut self, obs: Observation) -> Result<()> {
        if obs.objectives.len() != self.num_objectives() {
            return Err(Error::DimensionMismatch {
                expected: self.num_objectives(),
                got: obs.objectives.len(),
            });
        }
        if let Some(bad) = obs.objectives.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite objective {bad}")));
        }
        self.space.check(&obs.config)?;
        self.rows.push(obs);
        Ok(())
    }

    pub fn objectives(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.objectives.clone()).collect()
    }

    /// Encoded inputs (`N x D`, unit cube) and raw objectives (`N x M`), row order kept.
    pub fn to_training_matrices(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let x = self
            .rows
            .iter()
            .map(|r| {
                self.space
                    .encode(&r.config)
                    .expect("rows are validated on append")
            })
            .collect();
        (x, self.objectives())
    }

    pub fn bounds(&self) -> Bounds {
        objective_bounds(&self.objectives())
    }

    pub fn next_iteration(&self) -> usize {
        self.rows.iter().map(|r| r.iteration + 1).max().unwrap_or(0)
    }

    fn record(&self, obs: &Observation) -> Record {
        Record {
            iteration: obs.iteration,
            algorithm: obs.algorithm.clone(),
            config: self.space.config_to_json(&obs.config),
            objectives: obs.objectives.clone(),
            repetitions: obs.repetitions,
            wall_time_s: obs.wall_time_s,
        }
    }

    pub fn to_jsonl_line(&self, obs: &Observation) -> String {
        serde_json::to_string(&self.record(obs)).expect("records serialise")
    }

    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for obs in &self.rows {
            writeln!(w, "{}", self.to_jsonl_line(obs))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Loads a log written by [`save_jsonl`](Self::save_jsonl) or a [`JsonlSink`].
    pub fn load_jsonl(
        path: impl AsRef<Path>,
        space: &ParameterSpace,
        objective_names: &[String],
    ) -> Result<Self> {
        let path = path.as_ref();
        let mut ds = Self::new(space.clone(), objective_names.to_vec());
        let reader = BufReader::new(File::open(path)?);
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let err = |reason: String| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                reason,
            };
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
            let config = space
                .config_from_json(&rec.config)
                .map_err(|e| err(format!("space mismatch: {e}")))?;
            ds.append(Observation {
                config,
                objectives: rec.objectives,
                repetitions: rec.repetitions,
                iteration: rec.iteration,
                algorithm: rec.algorithm,
                wall_time_s: rec.wall_time_s,
            })
            .map_err(|e| err(e.to_string()))?;
        }
        Ok(ds)
    }

    /// Number of objectives in the first record of a log, if any.
    pub fn peek_num_objectives(path: impl AsRef<Path>) -> Result<Option<usize>> {
        let reader = BufReader::new(File::open(path)?);
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: Value = serde_json::from_str(&line)?;
            return Ok(v
                .get("objectives")
                .and_then(Value::as_array)
                .map(Vec::len));
        }
        Ok(None)
    }
}

/// Append-only log writer, flushed after every record.
pub struct JsonlSink {
    out: File,
}

impl JsonlSink {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self {
            out: File::create(path)?,
        })
    }

    pub fn append_to(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self {
            out: OpenOptions::new().create(true).append(true).open(path)?,
        })
    }

    pub fn write(&mut self, ds: &ObservationDataset, obs: &Observation) -> Result<()> {
        let line = ds.to_jsonl_line(obs);
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn objective_bounds(y: &[Vec<f64>]) -> Bounds {
    let m = y.first().map_or(0, Vec::len);
    (0..m)
        .map(|j| {
            y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), row| {
                (lo.min(row[j]), hi.max(row[j]))
            })
        })
        .collect()
}

/// Normalises `value` into `[0, 1]` against `(min, max)`; a degenerate range maps to 0.5.
pub fn normalize_value(value: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        (value - lo) / (hi - lo)
    } else {
        0.5
    }
}

pub fn normalize_with(y: &[Vec<f64>], bounds: &[(f64, f64)]) -> Vec<Vec<f64>> {
    y.iter()
        .map(|row| {
            row.iter()
                .zip(bounds)
                .map(|(&v, &b)| normalize_value(v, b))
                .collect()
        })
        .collect()
}

/// Column-wise min-max normalisation.
pub fn normalize_objectives(y: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Bounds)> {
    if y.is_empty() {
        return Err(Error::InsufficientData { needed: 1, have: 0 });
    }
    let m = y[0].len();
    for row in y {
        if row.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: row.len(),
            });
        }
        if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite objective {bad}")));
        }
    }
    let bounds = objective_bounds(y);
    Ok((normalize_with(y, &bounds), bounds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::space::{ParamValue, ParameterSpec};
    use proptest::prelude::*;

    fn space() -> ParameterSpace {
        ParameterSpace::new(vec![
            ParameterSpec::categorical("batch", ["32", "64", "96", "128"]),
            ParameterSpec::integer("threads", 1, 56),
            ParameterSpec::log_continuous("lr", 1e-5, 1e-2),
        ])
        .unwrap()
    }

    fn obs(space: &ParameterSpace, seed: u64, m: usize) -> Observation {
        let mut r = rng::seeded(seed);
        Observation {
            config: space.sample_random(&mut r),
            objectives: (0..m).map(|j| (seed as f64 + 1.0) / (j as f64 + 3.0)).collect(),
            repetitions: 1,
            iteration: seed as usize,
            algorithm: "random".into(),
            wall_time_s: 0.1 * seed as f64,
        }
    }

    fn names() -> Vec<String> {
        vec!["time".into(), "energy".into()]
    }

    #[test]
    fn append_grows_and_checks_dimension() {
        let s = space();
        let mut ds = ObservationDataset::new(s.clone(), names());
        ds.append(obs(&s, 0, 2)).unwrap();
        assert_eq!(ds.len(), 1);
        assert!(matches!(
            ds.append(obs(&s, 1, 3)),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
        ds.append(obs(&s, 0, 2)).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.rows[0], ds.rows[1]);
    }

    #[test]
    fn training_matrices_follow_rows() {
        let s = space();
        let mut ds = ObservationDataset::new(s.clone(), names());
        ds.append(obs(&s, 4, 2)).unwrap();
        let (x, y) = ds.to_training_matrices();
        assert_eq!((x.len(), x[0].len(), y.len(), y[0].len()), (1, 3, 1, 2));

        for seed in 5..40 {
            ds.append(obs(&s, seed, 2)).unwrap();
        }
        let (x, _) = ds.to_training_matrices();
        for (row, r) in x.iter().zip(&ds.rows) {
            assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            let back = s.decode(row);
            assert_eq!(back.values[0], r.config.values[0]);
            assert_eq!(back.values[1], r.config.values[1]);
        }
    }

    #[test]
    fn normalize_examples() {
        let col = |v: &[f64]| v.iter().map(|&x| vec![x]).collect::<Vec<_>>();
        let (n, b) = normalize_objectives(&col(&[10.0, 20.0, 30.0])).unwrap();
        assert_eq!(n, col(&[0.0, 0.5, 1.0]));
        assert_eq!(b, vec![(10.0, 30.0)]);

        let (n, _) = normalize_objectives(&col(&[7.0, 7.0, 7.0])).unwrap();
        assert_eq!(n, col(&[0.5, 0.5, 0.5]));

        // runtimes 16/41/22 s: (22 - 16) / (41 - 16) = 0.24
        let (n, _) = normalize_objectives(&col(&[16.0, 41.0, 22.0])).unwrap();
        assert_eq!(n[0][0], 0.0);
        assert_eq!(n[1][0], 1.0);
        assert!((n[2][0] - 0.24).abs() < 1e-12);

        assert!(normalize_objectives(&col(&[1.0, f64::NAN])).is_err());
    }

    #[test]
    fn empty_dataset_writes_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.jsonl");
        let ds = ObservationDataset::new(space(), names());
        ds.save_jsonl(&path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "");
        let back = ObservationDataset::load_jsonl(&path, &space(), &names()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn seventy_rows_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.jsonl");
        let s = space();
        let mut ds = ObservationDataset::new(s.clone(), names());
        for seed in 0..70 {
            let mut o = obs(&s, seed, 2);
            o.objectives[1] = std::f64::consts::PI * 1e-7 * seed as f64 + 1.0 / 3.0;
            ds.append(o).unwrap();
        }
        ds.save_jsonl(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 70);
        let back = ObservationDataset::load_jsonl(&path, &s, &names()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn truncated_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.jsonl");
        let s = space();
        let mut ds = ObservationDataset::new(s.clone(), names());
        for seed in 0..3 {
            ds.append(obs(&s, seed, 2)).unwrap();
        }
        ds.save_jsonl(&path).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.truncate(text.len() - 15);
        std::fs::write(&path, text).unwrap();
        let err = ObservationDataset::load_jsonl(&path, &s, &names()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn space_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.jsonl");
        let s = space();
        let mut ds = ObservationDataset::new(s.clone(), names());
        ds.append(obs(&s, 0, 2)).unwrap();
        ds.save_jsonl(&path).unwrap();
        let other = ParameterSpace::new(vec![ParameterSpec::continuous("x", 0.0, 1.0)]).unwrap();
        let err = ObservationDataset::load_jsonl(&path, &other, &names()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn sink_appends_one_line_per_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.jsonl");
        let s = space();
        let mut ds = ObservationDataset::new(s.clone(), names());
        let mut sink = JsonlSink::create(&path).unwrap();
        for seed in 0..4 {
            let o = obs(&s, seed, 2);
            ds.append(o.clone()).unwrap();
            sink.write(&ds, &o).unwrap();
        }
        let back = ObservationDataset::load_jsonl(&path, &s, &names()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(ds.next_iteration(), 4);
        assert_eq!(ObservationDataset::peek_num_objectives(&path).unwrap(), Some(2));
        let line = ds.to_jsonl_line(&ds.rows[0]);
        assert!(line.starts_with(r#"{"iteration":0,"algorithm":"random","config":{"batch":"#));
        assert!(matches!(ds.rows[0].config.values[1], ParamValue::Integer(_)));
    }

    proptest! {
        #[test]
        fn normalisation_is_affine_invariant(
            col in proptest::collection::vec(-10.0f64..10.0, 2..30),
            scale in 0.5f64..4.0,
            shift in -10.0f64..10.0,
        ) {
            let y: Vec<Vec<f64>> = col.iter().map(|&v| vec![v]).collect();
            let z: Vec<Vec<f64>> = col.iter().map(|&v| vec![scale * v + shift]).collect();
            let (a, _) = normalize_objectives(&y).unwrap();
            let (b, _) = normalize_objectives(&z).unwrap();
            let spread = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - col.iter().cloned().fold(f64::INFINITY, f64::min);
            for (ra, rb) in a.iter().zip(&b) {
                prop_assert!((0.0..=1.0).contains(&ra[0]));
                if spread > 1.0 {
                    prop_assert!((ra[0] - rb[0]).abs() <= 1e-12, "{} {}", ra[0], rb[0]);
                }
            }
        }
    }
}
