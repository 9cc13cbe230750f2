use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{load_problem, CustomProblem, ProblemSpec};
use crate::solvers::{Method, SolverConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Precision {
    Single,
    #[default]
    Double,
}

impl TryFrom<u8> for Precision {
    type Error = String;

    fn try_from(bits: u8) -> std::result::Result<Self, String> {
        match bits {
            32 => Ok(Precision::Single),
            64 => Ok(Precision::Double),
            other => Err(format!("precision must be 32 or 64, got {other}")),
        }
    }
}

impl From<Precision> for u8 {
    fn from(p: Precision) -> u8 {
        match p {
            Precision::Single => 32,
            Precision::Double => 64,
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

/// A benchmark name or an inline manufactured problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemRef {
    Named(String),
    Custom(CustomProblem),
}

impl ProblemRef {
    pub fn resolve(&self) -> Result<ProblemSpec> {
        match self {
            ProblemRef::Named(name) => load_problem(name),
            ProblemRef::Custom(c) => c.build(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    /// Held-out interior points for the error metrics.
    pub points: usize,
    pub seed: u64,
    /// Iterations between trace rows that carry held-out errors.
    pub metrics_interval: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            points: 100_000,
            seed: 987_654_321,
            metrics_interval: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Relative paths are resolved against the output root.
    pub dir: PathBuf,
    pub trace_interval: usize,
    /// Zero keeps only the final checkpoint.
    pub checkpoint_interval: usize,
    pub heatmaps: bool,
    /// Heatmap resolution per axis.
    pub grid: usize,
    /// Dump the collocation points as plain text.
    pub point_cloud: bool,
    /// Record elapsed milliseconds in the trace; off gives byte-identical traces.
    pub wall_time: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("run"),
            trace_interval: 10,
            checkpoint_interval: 0,
            heatmaps: true,
            grid: 200,
            point_cloud: false,
            wall_time: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub methods: Vec<Method>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemRef,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub compare: CompareConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_value(value: toml::Table) -> Result<Self> {
        toml::Value::Table(value)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_config(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment configs serialize")
    }

    /// Solver settings with the evaluation and output sections applied.
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            trace_interval: self.output.trace_interval,
            metrics_interval: self.evaluation.metrics_interval,
            checkpoint_interval: self.output.checkpoint_interval,
            eval_points: self.evaluation.points,
            eval_seed: self.evaluation.seed,
            ..self.solver.clone()
        }
    }

    pub fn validate(&self) -> Result<ProblemSpec> {
        let problem = self.problem.resolve()?;
        self.solver_config().validate()?;
        if self.output.grid == 0 {
            return Err(Error::Config("output.grid must be positive".into()));
        }
        Ok(problem)
    }
}

pub(crate) fn read_config(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Sets the dotted `key` of a parsed config to `raw`, read as a TOML value when it parses
/// as one and as a string otherwise.
pub fn set_key(doc: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let value = parse_value(raw);
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad key `{key}`")));
    }
    let mut table = doc;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{part}` in `{key}` is not a section")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
