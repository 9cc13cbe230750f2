//! Experiment orchestration: configs, runs, comparisons, sweeps and the artifacts they
//! leave on disk.
//!
//! A run directory holds
//!
//! * `config.toml`: the resolved experiment config,
//! * `trace.csv`, streamed while training, and `metrics.csv`, see [`output`],
//! * `y.ckpt`, `p.ckpt`, `u.ckpt`: the final networks of the method, and
//!   `checkpoints/<field>_<iteration>.ckpt` for every snapshot taken,
//! * `report.toml`: iterations, terminations and optimality gaps,
//! * `u.ppm`, `u_error.ppm`, `y.ppm` and `heatmaps.csv` with the color ranges,
//! * `interior.txt`, `boundary.txt` when the point-cloud dump is on.

mod config;
pub mod heatmap;
pub mod output;
pub mod selftest;

use std::fs::File;
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::{set_key, CompareConfig, EvaluationConfig, ExperimentConfig, OutputConfig, Precision, ProblemRef};
pub use output::{ComparisonRow, SweepRow, TraceRecord};
pub use selftest::{bound_suite, derivative_suite, BoundReport, DerivativeReport};

use crate::error::{Error, Result};
use crate::geometry::{sample_boundary, sample_interior};
use crate::loss::PointBlocks;
use crate::nn::checkpoint;
use crate::problems::{verify_manufactured, ConsistencyReport, ProblemSpec, BENCHMARKS};
use crate::scalar::Real;
use crate::solvers::{control_values, net_values, solve, Method, Metrics, Monitor, Snapshot, SolveReport, TraceRow};
pub use crate::solvers::{relative_error, Norm};

/// Environment variable naming the directory relative output paths are resolved against.
pub const OUTPUT_ROOT_VAR: &str = "CPINN_OUTPUT_ROOT";

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub output_root: PathBuf,
    pub seed: Option<u64>,
    pub precision: Option<Precision>,
}

impl RunOptions {
    /// Output root from the environment, the working directory otherwise.
    pub fn from_env() -> Self {
        Self {
            output_root: std::env::var_os(OUTPUT_ROOT_VAR)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(".")),
            ..Self::default()
        }
    }

    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.solver.seed = seed;
        }
        if let Some(p) = self.precision {
            cfg.precision = p;
        }
    }

    pub fn output_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.output_root.join(&cfg.output.dir)
    }

    fn load(&self, path: &Path) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(path)?;
        self.apply(&mut cfg);
        Ok(cfg)
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub method: Method,
    pub metrics: Metrics,
    pub iterations: usize,
}

pub fn run_experiment(config_path: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let cfg = opts.load(config_path)?;
    run_config(&cfg, &opts.output_dir(&cfg))
}

/// Runs `cfg` and writes its artifacts into `dir`.
pub fn run_config(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    let problem = cfg.validate()?;
    std::fs::create_dir_all(dir.join("checkpoints")).map_err(|e| Error::io(dir, e))?;
    write_text(&dir.join("config.toml"), &cfg.to_toml())?;
    match cfg.precision {
        Precision::Double => run_typed::<f64>(cfg, &problem, dir),
        Precision::Single => run_typed::<f32>(cfg, &problem, dir),
    }
}

fn run_typed<T: Real>(cfg: &ExperimentConfig, problem: &ProblemSpec, dir: &Path) -> Result<RunOutcome> {
    let solver = cfg.solver_config();
    let mut monitor = ArtifactMonitor::<T>::new(dir, cfg.output.wall_time)?;
    let report = solve::<T>(problem, &solver, &mut monitor)?;
    let metrics_path = dir.join("metrics.csv");
    output::write_rows(&metrics_path, &[report.metrics])?;
    write_text(&dir.join("report.toml"), &summary(&report))?;
    if cfg.output.heatmaps {
        write_heatmaps(problem, &report, dir, cfg.output.grid)?;
    }
    if cfg.output.point_cloud {
        sample_interior(&problem.domain, solver.n_interior, solver.seed).write_point_cloud(&dir.join("interior.txt"))?;
        sample_boundary(&problem.domain, solver.n_boundary, solver.seed).write_point_cloud(&dir.join("boundary.txt"))?;
    }
    log::info!(
        "{} on {}: e2_y {:.3e} e2_u {:.3e} J {:.4e} in {:.1}s",
        report.method.label(),
        problem.name,
        report.metrics.e2_y,
        report.metrics.e2_u,
        report.metrics.objective,
        report.metrics.time_s
    );
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        method: report.method,
        metrics: report.metrics,
        iterations: report.iterations,
    })
}

/// Streams trace rows to `trace.csv` and snapshots to checkpoint files.
struct ArtifactMonitor<T> {
    dir: PathBuf,
    trace_path: PathBuf,
    trace: csv::Writer<File>,
    wall_time: bool,
    _scalar: PhantomData<T>,
}

impl<T> ArtifactMonitor<T> {
    fn new(dir: &Path, wall_time: bool) -> Result<Self> {
        let trace_path = dir.join("trace.csv");
        Ok(Self {
            dir: dir.to_path_buf(),
            trace: output::create_writer(&trace_path)?,
            trace_path,
            wall_time,
            _scalar: PhantomData,
        })
    }
}

impl<T: Real> Monitor<T> for ArtifactMonitor<T> {
    fn on_row(&mut self, row: &TraceRow) -> Result<()> {
        self.trace
            .serialize(TraceRecord::new(row, self.wall_time))
            .map_err(|e| output::csv_error(&self.trace_path, e))?;
        self.trace.flush().map_err(|e| Error::io(&self.trace_path, e))
    }

    fn on_checkpoint(&mut self, snapshot: &Snapshot<'_, T>) -> Result<()> {
        for (name, net) in &snapshot.nets {
            let file = format!("{name}_{:07}.ckpt", snapshot.iteration);
            checkpoint::write(&self.dir.join("checkpoints").join(file), *net)?;
            checkpoint::write(&self.dir.join(format!("{name}.ckpt")), *net)?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    method: &'static str,
    problem: &'a str,
    seed: u64,
    precision: &'static str,
    iterations: usize,
    wall_seconds: f64,
    terminations: &'a [String],
    optimality_gaps: &'a [f64],
}

fn summary<T>(report: &SolveReport<T>) -> String {
    let s = Summary {
        method: report.method.key(),
        problem: &report.problem,
        seed: report.seed,
        precision: report.precision,
        iterations: report.iterations,
        wall_seconds: report.wall_seconds,
        terminations: &report.terminations,
        optimality_gaps: &report.optimality_gaps,
    };
    toml::to_string(&s).expect("summary serializes")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct HeatmapRange {
    file: &'static str,
    min: f64,
    max: f64,
}

/// Writes `u.ppm`, `y.ppm` and, with an exact solution, `u_error.ppm`.
pub fn write_heatmaps<T: Real>(problem: &ProblemSpec, report: &SolveReport<T>, dir: &Path, grid: usize) -> Result<()> {
    let (index, points) = heatmap::grid_points(&problem.domain, grid);
    let blocks = PointBlocks::<T>::new(&points);
    let bounds = problem.bounds.map(|b| (b.lower, b.upper));
    let u = control_values(&blocks, report.control(), problem.lambda, bounds);
    let y = net_values(&blocks, &report.y_net);
    let mut ranges = Vec::new();
    for (file, values) in [("u.ppm", &u), ("y.ppm", &y)] {
        let (min, max) = heatmap::write_heatmap(&dir.join(file), grid, &index, values)?;
        ranges.push(HeatmapRange { file, min, max });
    }
    if let Some(exact) = &problem.exact {
        let err: Vec<f64> = points
            .iter()
            .zip(&u)
            .map(|(x, v)| (v - (exact.u)(x)).abs())
            .collect();
        let (min, max) = heatmap::write_heatmap(&dir.join("u_error.ppm"), grid, &index, &err)?;
        ranges.push(HeatmapRange {
            file: "u_error.ppm",
            min,
            max,
        });
    }
    output::write_rows(&dir.join("heatmaps.csv"), &ranges)
}

#[derive(Clone, Debug)]
pub struct ComparisonOutcome {
    pub dir: PathBuf,
    pub rows: Vec<ComparisonRow>,
    /// Methods that failed, with the error message.
    pub failures: Vec<(Method, String)>,
}

/// Runs every listed method on the same problem and seed, each in `<dir>/<method>/`, and
/// writes `<dir>/comparison.csv`. A failing method gets a row of `NaN`s.
pub fn run_comparison(config_path: &Path, opts: &RunOptions) -> Result<ComparisonOutcome> {
    let cfg = opts.load(config_path)?;
    compare_config(&cfg, &opts.output_dir(&cfg))
}

pub fn compare_config(cfg: &ExperimentConfig, dir: &Path) -> Result<ComparisonOutcome> {
    if cfg.compare.methods.is_empty() {
        return Err(Error::Config("compare.methods is empty".into()));
    }
    cfg.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &method in &cfg.compare.methods {
        let mut sub = cfg.clone();
        sub.solver.method = method;
        let sub_dir = dir.join(method.key());
        match run_config(&sub, &sub_dir) {
            Ok(outcome) => rows.push(ComparisonRow::new(method.label(), &outcome.metrics)),
            Err(e) => {
                log::error!("{} failed: {e}", method.label());
                let _ = write_text(&sub_dir.join("error.txt"), &format!("{e}\n"));
                rows.push(ComparisonRow::new(method.label(), &output::failed_metrics()));
                failures.push((method, e.to_string()));
            }
        }
    }
    output::write_rows(&dir.join("comparison.csv"), &rows)?;
    Ok(ComparisonOutcome {
        dir: dir.to_path_buf(),
        rows,
        failures,
    })
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub csv: PathBuf,
    pub rows: Vec<SweepRow>,
}

/// Runs the config once per value of the dotted `key`, each in `<dir>/<key>=<value>/`, and
/// writes `<dir>/sweep_<key>.csv`.
pub fn run_sweep(config_path: &Path, key: &str, values: &[String], opts: &RunOptions) -> Result<SweepOutcome> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let text = config::read_config(config_path)?;
    let doc: toml::Table = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let base = opts.load(config_path)?;
    let dir = opts.output_dir(&base);
    let mut runs = Vec::new();
    for v in values {
        let mut d = doc.clone();
        set_key(&mut d, key, v)?;
        let mut cfg = ExperimentConfig::from_value(d)?;
        opts.apply(&mut cfg);
        cfg.validate()?;
        runs.push((v, cfg));
    }
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut rows = Vec::new();
    for (v, cfg) in runs {
        let sub = dir.join(sanitize(&format!("{key}={v}")));
        let metrics = match run_config(&cfg, &sub) {
            Ok(o) => o.metrics,
            Err(e) => {
                log::error!("{key} = {v} failed: {e}");
                output::failed_metrics()
            }
        };
        rows.push(SweepRow {
            key: key.to_string(),
            value: v.clone(),
            e2_y: metrics.e2_y,
            einf_y: metrics.einf_y,
            e2_u: metrics.e2_u,
            einf_u: metrics.einf_u,
            objective: metrics.objective,
            time_s: metrics.time_s,
        });
    }
    let csv = dir.join(sanitize(&format!("sweep_{key}.csv")));
    output::write_rows(&csv, &rows)?;
    Ok(SweepOutcome { csv, rows })
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._=-+".contains(c) { c } else { '_' })
        .collect()
}

#[derive(Clone, Debug)]
pub struct SelftestReport {
    pub derivatives: DerivativeReport,
    pub bounds: BoundReport,
    pub consistency: Vec<(String, ConsistencyReport)>,
}

impl SelftestReport {
    pub fn pass(&self) -> bool {
        self.derivatives.pass(1e-6, 1e-5)
            && self.bounds.violations == 0
            && self.consistency.iter().all(|(_, c)| c.pass)
    }
}

/// Reduced derivative and bound suites plus the manufactured-solution check of every
/// benchmark.
pub fn selftest(seed: u64) -> Result<SelftestReport> {
    let consistency = BENCHMARKS
        .iter()
        .map(|name| {
            let p = crate::problems::load_problem(name)?;
            Ok((name.to_string(), verify_manufactured(&p, 2000)?))
        })
        .collect::<Result<_>>()?;
    Ok(SelftestReport {
        derivatives: derivative_suite(20, 5, seed),
        bounds: bound_suite(200, 3, seed),
        consistency,
    })
}
