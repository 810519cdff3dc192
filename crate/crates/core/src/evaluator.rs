//! Objective evaluation backends.
//!
//! Two backends are provided: builtin synthetic problems and an external command.
//! The command receives one JSON line on stdin,
//!
//! ```text
//! {"config":{"batch":"64","freq":"2GHz",...},"repetition":0}
//! ```
//!
//! and must print `{"objectives":[...]}` on stdout and exit with status 0.
//! `TUNER_REPETITION` is also set in its environment.

use std::f64::consts::FRAC_PI_2;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::json;
use wait_timeout::ChildExt;

use crate::error::{Error, Result};
use crate::rng;
use crate::space::{Configuration, ParameterSpace, ParameterSpec};

pub const DEFAULT_TIMEOUT_S: f64 = 300.0;
pub const DEFAULT_RETRIES: u32 = 1;
pub const DEFAULT_BENCHMARK_DIM: usize = 8;

/// Processor frequency levels used as the `freq` categories of the mixed-stack problem.
pub const CPU_FREQ_LEVELS: [&str; 14] = [
    "800MHz", "900MHz", "1.1GHz", "1.2GHz", "1.4GHz", "1.5GHz", "1.7GHz", "1.8GHz", "2GHz", "2.2GHz",
    "2.4GHz", "2.6GHz", "2.7GHz", "2.9GHz",
];

pub fn zdt1(x: &[f64]) -> [f64; 2] {
    let g = zdt_g(x);
    [x[0], g * (1.0 - (x[0] / g).sqrt())]
}

pub fn zdt2(x: &[f64]) -> [f64; 2] {
    let g = zdt_g(x);
    [x[0], g * (1.0 - (x[0] / g).powi(2))]
}

fn zdt_g(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 1.0;
    }
    1.0 + 9.0 * x[1..].iter().sum::<f64>() / (x.len() - 1) as f64
}

/// Two-objective DTLZ2.
pub fn dtlz2(x: &[f64]) -> [f64; 2] {
    let g: f64 = x[1..].iter().map(|v| (v - 0.5) * (v - 0.5)).sum();
    let theta = x[0] * FRAC_PI_2;
    [(1.0 + g) * theta.cos(), (1.0 + g) * theta.sin()]
}

/// Noise-free `(time, energy)` of the mixed-stack problem from the encoded
/// batch (`u_b`) and frequency (`u_f`) coordinates.
pub fn mixed_stack(u_b: f64, u_f: f64) -> [f64; 2] {
    let time = 1.0 + 5.0 * (1.0 - u_f) + 2.0 * u_b;
    [time, time * (0.5 + 1.5 * u_f * u_f)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinProblem {
    Zdt1,
    Zdt2,
    Dtlz2,
    MixedStack,
}

impl BuiltinProblem {
    pub const ALL: [BuiltinProblem; 4] = [Self::Zdt1, Self::Zdt2, Self::Dtlz2, Self::MixedStack];

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown builtin problem `{name}`")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Zdt1 => "zdt1",
            Self::Zdt2 => "zdt2",
            Self::Dtlz2 => "dtlz2",
            Self::MixedStack => "mixed-stack",
        }
    }

    pub fn objective_names(self) -> Vec<String> {
        let names: [&str; 2] = match self {
            Self::MixedStack => ["time", "energy"],
            _ => ["f1", "f2"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    /// The canonical space: `dim` unit-interval reals, or the mixed-stack layout.
    pub fn default_space(self, dim: usize) -> ParameterSpace {
        let params = match self {
            Self::MixedStack => {
                let mut p = vec![
                    ParameterSpec::categorical("batch", ["32", "64", "96", "128"]),
                    ParameterSpec::categorical("freq", CPU_FREQ_LEVELS),
                ];
                p.extend((0..6).map(|i| ParameterSpec::continuous(&format!("nuisance_{i}"), 0.0, 1.0)));
                p
            }
            _ => (0..dim)
                .map(|i| ParameterSpec::continuous(&format!("x{i}"), 0.0, 1.0))
                .collect(),
        };
        ParameterSpace::new(params).expect("builtin spaces are valid")
    }

    /// Objectives for one repetition; noise only applies to the mixed-stack problem.
    pub fn evaluate(self, space: &ParameterSpace, config: &Configuration, rep: u32, noise_seed: Option<u64>) -> Result<Vec<f64>> {
        let u = space.encode(config)?;
        match self {
            Self::Zdt1 | Self::Zdt2 | Self::Dtlz2 => {
                if u.len() < 2 {
                    return Err(Error::Config(format!("{} needs at least 2 dimensions", self.name())));
                }
                let f = match self {
                    Self::Zdt1 => zdt1(&u),
                    Self::Zdt2 => zdt2(&u),
                    _ => dtlz2(&u),
                };
                Ok(f.to_vec())
            }
            Self::MixedStack => {
                let coord = |name: &str| {
                    space
                        .index_of(name)
                        .map(|i| u[i])
                        .ok_or_else(|| Error::Config(format!("mixed-stack needs a `{name}` parameter")))
                };
                let [time, energy] = mixed_stack(coord("batch")?, coord("freq")?);
                let Some(seed) = noise_seed else {
                    return Ok(vec![time, energy]);
                };
                let mut words: Vec<u64> = u.iter().map(|v| v.to_bits()).collect();
                words.push(seed);
                words.push(u64::from(rep));
                let mut r = rng::seeded(rng::mix(&words));
                let unit = Normal::new(0.0, 1.0).expect("unit normal");
                Ok(vec![
                    time + 0.01 * time * unit.sample(&mut r),
                    energy + 0.01 * energy * unit.sample(&mut r),
                ])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvaluatorKind {
    Builtin(BuiltinProblem),
    Command {
        argv: Vec<String>,
        timeout_s: f64,
        retries: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatorSpec {
    pub kind: EvaluatorKind,
    pub repetitions: u32,
    pub noise_seed: Option<u64>,
}

impl EvaluatorSpec {
    pub fn builtin(problem: BuiltinProblem) -> Self {
        Self {
            kind: EvaluatorKind::Builtin(problem),
            repetitions: 1,
            noise_seed: None,
        }
    }

    pub fn command(argv: Vec<String>) -> Self {
        Self {
            kind: EvaluatorKind::Command {
                argv,
                timeout_s: DEFAULT_TIMEOUT_S,
                retries: DEFAULT_RETRIES,
            },
            repetitions: 1,
            noise_seed: None,
        }
    }

    pub fn with_repetitions(mut self, repetitions: u32) -> Self {
        self.repetitions = repetitions;
        self
    }

    pub fn with_noise_seed(mut self, seed: u64) -> Self {
        self.noise_seed = Some(seed);
        self
    }

    /// Parses `builtin:NAME` or `cmd:ARGV` (ARGV split on whitespace).
    pub fn parse(s: &str) -> Result<Self> {
        if let Some(name) = s.strip_prefix("builtin:") {
            Ok(Self::builtin(BuiltinProblem::from_name(name)?))
        } else if let Some(cmd) = s.strip_prefix("cmd:") {
            let argv: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if argv.is_empty() {
                return Err(Error::Config("empty command".into()));
            }
            Ok(Self::command(argv))
        } else {
            Err(Error::Config(format!(
                "evaluator must be `builtin:NAME` or `cmd:ARGV`, got `{s}`"
            )))
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be positive".into()));
        }
        if let EvaluatorKind::Command { timeout_s, argv, .. } = &self.kind {
            if timeout_s.is_nan() || *timeout_s <= 0.0 {
                return Err(Error::Config("timeout must be positive".into()));
            }
            if argv.is_empty() {
                return Err(Error::Config("empty command".into()));
            }
        }
        Ok(())
    }

    /// Runs the backend `repetitions` times and averages the objectives.
    pub fn evaluate(&self, space: &ParameterSpace, config: &Configuration) -> EvaluationResult {
        let start = Instant::now();
        let mut per_rep = Vec::with_capacity(self.repetitions as usize);
        for rep in 0..self.repetitions {
            let outcome = match &self.kind {
                EvaluatorKind::Builtin(p) => p
                    .evaluate(space, config, rep, self.noise_seed)
                    .map_err(|e| e.to_string()),
                EvaluatorKind::Command {
                    argv,
                    timeout_s,
                    retries,
                } => {
                    let request = json!({"config": space.config_to_json(config), "repetition": rep}).to_string();
                    let timeout = Duration::from_secs_f64(*timeout_s);
                    let mut last = Err(String::new());
                    for attempt in 0..=*retries {
                        last = run_command(argv, &request, rep, timeout);
                        match &last {
                            Ok(_) => break,
                            Err(e) => log::warn!("evaluation attempt {} failed: {e}", attempt + 1),
                        }
                    }
                    last
                }
            };
            match outcome {
                Ok(v) => per_rep.push(v),
                Err(reason) => {
                    return EvaluationResult {
                        objectives: Vec::new(),
                        per_rep,
                        status: Status::Failed(format!("repetition {rep}: {reason}")),
                        wall_time_s: self.wall_time(start),
                    }
                }
            }
        }
        let m = per_rep[0].len();
        if per_rep.iter().any(|r| r.len() != m) {
            return EvaluationResult {
                objectives: Vec::new(),
                per_rep,
                status: Status::Failed("objective count differs between repetitions".into()),
                wall_time_s: self.wall_time(start),
            };
        }
        let objectives = (0..m)
            .map(|j| per_rep.iter().map(|r| r[j]).sum::<f64>() / per_rep.len() as f64)
            .collect();
        EvaluationResult {
            objectives,
            per_rep,
            status: Status::Ok,
            wall_time_s: self.wall_time(start),
        }
    }

    /// Builtin problems stand in for real workloads and report zero cost, which
    /// keeps their logs reproducible byte for byte.
    fn wall_time(&self, start: Instant) -> f64 {
        match self.kind {
            EvaluatorKind::Builtin(_) => 0.0,
            EvaluatorKind::Command { .. } => start.elapsed().as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationResult {
    /// Column means of `per_rep`; empty when failed.
    pub objectives: Vec<f64>,
    pub per_rep: Vec<Vec<f64>>,
    pub status: Status,
    pub wall_time_s: f64,
}

impl EvaluationResult {
    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct Response {
    objectives: Vec<f64>,
}

fn run_command(argv: &[String], request: &str, rep: u32, timeout: Duration) -> std::result::Result<Vec<f64>, String> {
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .env("TUNER_REPETITION", rep.to_string())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| format!("cannot start `{}`: {e}", argv[0]))?;

    let mut stdin = child.stdin.take().expect("piped stdin");
    let request = format!("{request}\n");
    // a child that never reads stdin must not block us
    thread::spawn(move || {
        let _ = stdin.write_all(request.as_bytes());
    });
    let (tx, rx) = mpsc::channel();
    let mut stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");
    let tx_err = tx.clone();
    thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        let _ = tx.send((true, s));
    });
    thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        let _ = tx_err.send((false, s));
    });

    let status = match child.wait_timeout(timeout).map_err(|e| e.to_string())? {
        Some(status) => status,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(format!("timed out after {:.1}s", timeout.as_secs_f64()));
        }
    };
    let (mut out, mut err) = (None, String::new());
    let deadline = Instant::now() + Duration::from_secs(1);
    while out.is_none() {
        let left = deadline.saturating_duration_since(Instant::now());
        match rx.recv_timeout(left) {
            Ok((true, s)) => out = Some(s),
            Ok((false, s)) => err = s,
            Err(_) => return Err("output pipe still open after exit".into()),
        }
    }
    let out = out.unwrap_or_default();
    if !status.success() {
        let tail: String = err.lines().last().unwrap_or("").chars().take(200).collect();
        return Err(format!("exited with {status} {tail}").trim().to_string());
    }
    let lines: Vec<&str> = out.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.len() != 1 {
        return Err(format!("expected one response line, got {}", lines.len()));
    }
    let resp: Response = serde_json::from_str(lines[0]).map_err(|e| format!("malformed response: {e}"))?;
    if resp.objectives.is_empty() || resp.objectives.iter().any(|v| !v.is_finite()) {
        return Err(format!("invalid objectives {:?}", resp.objectives));
    }
    Ok(resp.objectives)
}

/// Anything the tuning loop can ask for objective values.
pub trait Evaluator {
    /// Objective names, when known before the first evaluation.
    fn objective_names(&self) -> Option<Vec<String>>;

    fn evaluate(&mut self, space: &ParameterSpace, config: &Configuration) -> EvaluationResult;
}

impl Evaluator for EvaluatorSpec {
    fn objective_names(&self) -> Option<Vec<String>> {
        match &self.kind {
            EvaluatorKind::Builtin(p) => Some(p.objective_names()),
            EvaluatorKind::Command { .. } => None,
        }
    }

    fn evaluate(&mut self, space: &ParameterSpace, config: &Configuration) -> EvaluationResult {
        EvaluatorSpec::evaluate(self, space, config)
    }
}

/// Wraps a closure over the encoded unit vector.
pub struct FnEvaluator<F> {
    names: Vec<String>,
    f: F,
}

impl<F: FnMut(&[f64]) -> Vec<f64>> FnEvaluator<F> {
    pub fn new(names: Vec<String>, f: F) -> Self {
        Self { names, f }
    }
}

impl<F: FnMut(&[f64]) -> Vec<f64>> Evaluator for FnEvaluator<F> {
    fn objective_names(&self) -> Option<Vec<String>> {
        Some(self.names.clone())
    }

    fn evaluate(&mut self, space: &ParameterSpace, config: &Configuration) -> EvaluationResult {
        let status_err = |msg: String| EvaluationResult {
            objectives: Vec::new(),
            per_rep: Vec::new(),
            status: Status::Failed(msg),
            wall_time_s: 0.0,
        };
        let u = match space.encode(config) {
            Ok(u) => u,
            Err(e) => return status_err(e.to_string()),
        };
        let v = (self.f)(&u);
        if v.len() != self.names.len() || v.iter().any(|x| !x.is_finite()) {
            return status_err(format!("invalid objectives {v:?}"));
        }
        EvaluationResult {
            objectives: v.clone(),
            per_rep: vec![v],
            status: Status::Ok,
            wall_time_s: 0.0,
        }
    }
}
