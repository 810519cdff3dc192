//! The `motune` command line: `tune`, `rank`, `benchmark` and `report`.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 when an
//! evaluation aborts a run.

use std::ffi::OsString;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::benchmark::{run_benchmark, BenchmarkPlan};
use crate::cheapmoo::Nsga2Config;
use crate::dataset::{JsonlSink, ObservationDataset};
use crate::error::{Error, Result};
use crate::evaluator::{BuiltinProblem, Evaluator, EvaluatorKind, EvaluatorSpec};
use crate::forest::ForestConfig;
use crate::mopir;
use crate::optimizer::{archive_of, default_reference, hv_trace, Algorithm, MeanDirection, Tuner, TunerConfig};
use crate::space::ParameterSpace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const OBSERVATIONS: &str = "observations.jsonl";
pub const FRONT: &str = "front.csv";
pub const HV_TRACE: &str = "hv_trace.csv";
pub const SUMMARY: &str = "summary.json";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "motune", version, about = "Multi-objective configuration tuning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one tuning session.
    Tune(TuneArgs),
    /// Rank parameters by multi-objective importance.
    Rank(RankArgs),
    /// Compare algorithms over several seeds.
    Benchmark(BenchmarkArgs),
    /// Recompute front.csv and hv_trace.csv from an observation log.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct EvaluatorArgs {
    /// Parameter space JSON; builtin problems fall back to their own space.
    #[arg(long)]
    pub space: Option<PathBuf>,
    /// `builtin:NAME` (zdt1, zdt2, dtlz2, mixed-stack) or `cmd:ARGV`.
    #[arg(long)]
    pub evaluator: String,
    #[arg(long, default_value_t = 1)]
    pub reps: u32,
    /// Dimension of the builtin synthetic problems.
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long)]
    pub timeout_s: Option<f64>,
    #[arg(long)]
    pub retries: Option<u32>,
}

impl EvaluatorArgs {
    fn spec(&self) -> Result<EvaluatorSpec> {
        let mut spec = EvaluatorSpec::parse(&self.evaluator)?.with_repetitions(self.reps);
        if let EvaluatorKind::Command { timeout_s, retries, .. } = &mut spec.kind {
            if let Some(t) = self.timeout_s {
                *timeout_s = t;
            }
            if let Some(r) = self.retries {
                *retries = r;
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    fn space(&self, spec: &EvaluatorSpec) -> Result<ParameterSpace> {
        match (&self.space, &spec.kind) {
            (Some(path), _) => ParameterSpace::from_file(path),
            (None, EvaluatorKind::Builtin(p)) => {
                if self.dim == 0 {
                    return Err(Error::Config("--dim must be positive".into()));
                }
                Ok(p.default_space(self.dim))
            }
            (None, EvaluatorKind::Command { .. }) => Err(Error::Config("--space is required for command evaluators".into())),
        }
    }
}

#[derive(Debug, Args)]
pub struct LoopArgs {
    #[arg(long = "max-iters", default_value_t = 70)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 10)]
    pub init: usize,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = MeanDirection::Verbatim)]
    pub adu_mean_direction: MeanDirection,
    #[arg(long, default_value_t = 0)]
    pub bo_objective: usize,
    #[arg(long, default_value_t = 100)]
    pub inner_pop: usize,
    #[arg(long, default_value_t = 50)]
    pub inner_gens: usize,
}

impl LoopArgs {
    fn config(&self, algorithm: Algorithm, seed: u64) -> Result<TunerConfig> {
        let cfg = TunerConfig {
            algorithm,
            seed,
            max_iterations: self.max_iters,
            init_samples: self.init,
            delta: self.delta,
            adu_mean_direction: self.adu_mean_direction,
            bo_objective_index: self.bo_objective,
            inner: Nsga2Config {
                population: self.inner_pop,
                generations: self.inner_gens,
                ..Nsga2Config::default()
            },
            ..TunerConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub evaluator: EvaluatorArgs,
    #[command(flatten)]
    pub tuning: LoopArgs,
    #[arg(long, default_value_t = Algorithm::Adumbo)]
    pub algo: Algorithm,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Continue from an existing observations.jsonl in the output directory.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Defaults to the space recorded next to the dataset.
    #[arg(long)]
    pub space: Option<PathBuf>,
    #[arg(long)]
    pub top: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub evaluator: EvaluatorArgs,
    #[command(flatten)]
    pub tuning: LoopArgs,
    /// Comma-separated algorithm names.
    #[arg(long, default_value = "random,usemo,adumbo")]
    pub algos: String,
    /// Comma-separated seeds or an inclusive range such as `1..10`.
    #[arg(long, default_value = "0..9")]
    pub seeds: String,
    #[arg(long = "ref")]
    pub reference: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long = "ref")]
    pub reference: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to the space recorded next to the dataset.
    #[arg(long)]
    pub space: Option<PathBuf>,
}

/// What a tuning directory was produced from; lets `report` and `rank`
/// reload a log without the original flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub space_path: Option<PathBuf>,
    pub space: ParameterSpace,
    pub objective_names: Vec<String>,
    pub evaluator: String,
    pub repetitions: u32,
    pub algorithm: String,
    pub seed: u64,
    pub max_iterations: usize,
    pub init_samples: usize,
    pub delta: f64,
    pub adu_mean_direction: String,
    pub out: PathBuf,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut m: RunManifest = serde_json::from_str(&fs::read_to_string(path)?)?;
        m.space = ParameterSpace::new(m.space.params)?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

#[derive(Debug)]
enum Failure {
    Usage(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Evaluation(_) => Failure::Runtime(e),
            _ => Failure::Usage(e),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Tune(a) => cmd_tune(&a),
        Command::Rank(a) => cmd_rank(&a),
        Command::Benchmark(a) => cmd_benchmark(&a),
        Command::Report(a) => cmd_report(&a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

pub fn run_from_env() -> i32 {
    run_from(std::env::args_os())
}

fn parse_reference(s: Option<&str>, m: usize) -> Result<Vec<f64>> {
    let Some(s) = s else {
        return Ok(default_reference(m));
    };
    let r = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad reference value `{v}`"))))
        .collect::<Result<Vec<f64>>>()?;
    if r.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: r.len(),
        });
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("reference point must be finite".into()));
    }
    Ok(r)
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("bad seed list `{s}`"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect()
}

fn parse_algorithms(s: &str) -> Result<Vec<Algorithm>> {
    s.split(',').map(|a| a.trim().parse()).collect()
}

/// Writes `front.csv` and `hv_trace.csv` for `ds` into `dir`.
pub fn write_run_outputs(ds: &ObservationDataset, reference: &[f64], dir: &Path) -> Result<()> {
    archive_of(ds).save_csv(dir.join(FRONT), &ds.space, &ds.objective_names)?;
    let mut w = csv::Writer::from_path(dir.join(HV_TRACE))?;
    w.write_record(["iteration", "hv"])?;
    for (row, hv) in ds.rows.iter().zip(hv_trace(ds, reference)) {
        w.write_record([row.iteration.to_string(), hv.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Drops a partially written final line left behind by an interrupted run.
fn repair_log_tail(path: &Path) -> Result<()> {
    let mut f = OpenOptions::new().read(true).write(true).open(path)?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    log::warn!("{}: discarding {} bytes of an incomplete record", path.display(), bytes.len() - keep);
    f.set_len(keep as u64)?;
    f.seek(SeekFrom::End(0))?;
    Ok(())
}

fn default_objective_names(m: usize) -> Vec<String> {
    (1..=m).map(|i| format!("f{i}")).collect()
}

/// Loads a log, taking the space and objective names from `--space`, the
/// manifest beside the log, or defaults, in that order.
pub fn load_dataset(path: &Path, space: Option<&Path>) -> Result<ObservationDataset> {
    let manifest_path = path.parent().unwrap_or(Path::new(".")).join(MANIFEST);
    let manifest = if manifest_path.exists() {
        Some(RunManifest::load(&manifest_path)?)
    } else {
        None
    };
    let space = match (space, &manifest) {
        (Some(p), _) => ParameterSpace::from_file(p)?,
        (None, Some(m)) => m.space.clone(),
        (None, None) => return Err(Error::Config(format!("{}: no --space given and no {MANIFEST} beside it", path.display()))),
    };
    let names = match &manifest {
        Some(m) => m.objective_names.clone(),
        None => default_objective_names(ObservationDataset::peek_num_objectives(path)?.unwrap_or(0)),
    };
    ObservationDataset::load_jsonl(path, &space, &names)
}

fn cmd_tune(a: &TuneArgs) -> CmdResult {
    let mut spec = a.evaluator.spec()?;
    if matches!(spec.kind, EvaluatorKind::Builtin(BuiltinProblem::MixedStack)) {
        spec = spec.with_noise_seed(a.seed);
    }
    let space = a.evaluator.space(&spec)?;
    let cfg = a.tuning.config(a.algo, a.seed)?;
    fs::create_dir_all(&a.out).map_err(Error::from)?;
    let log_path = a.out.join(OBSERVATIONS);
    let manifest_path = a.out.join(MANIFEST);

    let mut tuner = Tuner::new(&space, &cfg);
    let mut sink = if a.resume && log_path.exists() {
        repair_log_tail(&log_path)?;
        let names = if manifest_path.exists() {
            RunManifest::load(&manifest_path)?.objective_names
        } else if let Some(n) = spec.objective_names() {
            n
        } else {
            default_objective_names(ObservationDataset::peek_num_objectives(&log_path)?.unwrap_or(0))
        };
        let ds = ObservationDataset::load_jsonl(&log_path, &space, &names)?;
        log::info!("resuming from {} rows", ds.len());
        tuner = tuner.resume_from(ds);
        JsonlSink::append_to(&log_path)?
    } else {
        JsonlSink::create(&log_path)?
    };

    let mut manifest = RunManifest {
        space_path: a.evaluator.space.clone(),
        space: space.clone(),
        objective_names: Vec::new(),
        evaluator: a.evaluator.evaluator.clone(),
        repetitions: a.evaluator.reps,
        algorithm: cfg.algorithm.name().into(),
        seed: cfg.seed,
        max_iterations: cfg.max_iterations,
        init_samples: cfg.init_samples,
        delta: cfg.delta,
        adu_mean_direction: cfg.adu_mean_direction.to_string(),
        out: a.out.clone(),
    };
    let mut manifest_written = false;
    let start = Instant::now();
    let outcome = tuner
        .on_row(|ds, obs| {
            sink.write(ds, obs)?;
            if !manifest_written {
                manifest.objective_names = ds.objective_names.clone();
                manifest.save(&manifest_path)?;
                manifest_written = true;
            }
            Ok(())
        })
        .run(&mut spec);

    match outcome {
        Ok(res) => {
            let reference = default_reference(res.dataset.num_objectives());
            write_run_outputs(&res.dataset, &reference, &a.out)?;
            let summary = res.summary(&cfg, start.elapsed().as_secs_f64());
            let mut f = File::create(a.out.join(SUMMARY)).map_err(Error::from)?;
            writeln!(f, "{}", serde_json::to_string_pretty(&summary).map_err(Error::from)?).map_err(Error::from)?;
            println!(
                "{} rows, {} Pareto-optimal, final HV {:.6}",
                res.dataset.len(),
                res.archive.len(),
                res.final_hv()
            );
            Ok(())
        }
        Err(e @ Error::Evaluation(_)) => {
            if let Ok(ds) = load_dataset(&log_path, a.evaluator.space.as_deref()).or_else(|_| {
                ObservationDataset::load_jsonl(&log_path, &space, &manifest.objective_names)
            }) {
                if !ds.is_empty() {
                    let _ = write_run_outputs(&ds, &default_reference(ds.num_objectives()), &a.out);
                }
            }
            Err(Failure::Runtime(e))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_rank(a: &RankArgs) -> CmdResult {
    let ds = load_dataset(&a.dataset, a.space.as_deref())?;
    let forest = ForestConfig {
        trees: a.trees,
        seed: a.seed,
        ..ForestConfig::default()
    };
    let report = mopir::rank(&ds, &forest, a.top)?;
    print!("{report}");
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::from)?;
    }
    fs::write(&a.out, serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n").map_err(Error::from)?;
    Ok(())
}

fn cmd_benchmark(a: &BenchmarkArgs) -> CmdResult {
    let spec = a.evaluator.spec()?;
    let space = a.evaluator.space(&spec)?;
    let algorithms = parse_algorithms(&a.algos)?;
    let seeds = parse_seeds(&a.seeds)?;
    let base = a.tuning.config(Algorithm::Adumbo, 0)?;
    let m = spec.objective_names().map(|n| n.len());
    let reference = match (&a.reference, m) {
        (Some(r), Some(m)) => Some(parse_reference(Some(r), m)?),
        (Some(r), None) => Some(
            r.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad reference value `{v}`"))))
                .collect::<Result<Vec<f64>>>()?,
        ),
        (None, _) => None,
    };
    let plan = BenchmarkPlan {
        algorithms,
        seeds,
        base,
        reference,
    };
    let noisy = matches!(spec.kind, EvaluatorKind::Builtin(BuiltinProblem::MixedStack));
    let report = run_benchmark(
        &space,
        |seed| if noisy { spec.clone().with_noise_seed(seed) } else { spec.clone() },
        &plan,
    )?;

    fs::create_dir_all(&a.out).map_err(Error::from)?;
    for r in &report.runs {
        if let Ok(res) = &r.outcome {
            let dir = a.out.join("runs").join(format!("{}-seed{}", r.algorithm, r.seed));
            fs::create_dir_all(&dir).map_err(Error::from)?;
            res.dataset.save_jsonl(dir.join(OBSERVATIONS))?;
            write_run_outputs(&res.dataset, &default_reference(res.dataset.num_objectives()), &dir)?;
        }
    }
    report.write_csv(File::create(a.out.join("benchmark.csv")).map_err(Error::from)?)?;
    let summary = report.summary();
    fs::write(
        a.out.join("benchmark_summary.json"),
        serde_json::to_string_pretty(&summary).map_err(Error::from)? + "\n",
    )
    .map_err(Error::from)?;
    for s in &summary.algorithms {
        println!(
            "{:<10} median HV {:>10.6}  IQR {:>10.6}  failed {}/{}",
            s.algorithm,
            s.median_hv.unwrap_or(f64::NAN),
            s.iqr_hv.unwrap_or(f64::NAN),
            s.failed,
            s.runs
        );
    }
    if report.all_failed() {
        return Err(Failure::Runtime(Error::Evaluation("every benchmark run failed".into())));
    }
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> CmdResult {
    let ds = load_dataset(&a.dataset, a.space.as_deref())?;
    if ds.is_empty() {
        return Err(Failure::Usage(Error::Config(format!("{}: dataset is empty", a.dataset.display()))));
    }
    let reference = parse_reference(a.reference.as_deref(), ds.num_objectives())?;
    fs::create_dir_all(&a.out).map_err(Error::from)?;
    write_run_outputs(&ds, &reference, &a.out)?;
    let hv = hv_trace(&ds, &reference).last().copied().unwrap_or(0.0);
    println!("{} rows, final HV {hv:.6}", ds.len());
    Ok(())
}
