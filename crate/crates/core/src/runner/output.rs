//! CSV schemas of the run artifacts.
//!
//! | file             | columns                                                                                      |
//! |------------------|----------------------------------------------------------------------------------------------|
//! | `trace.csv`      | iter, loss_total, loss_state_res, loss_adj_res, loss_bdry_y, loss_bdry_p, J, e2_y, e2_u, wall_ms |
//! | `metrics.csv`    | e2_y, einf_y, e2_u, einf_u, J, time_s                                                        |
//! | `comparison.csv` | method, e2_y, einf_y, e2_u, einf_u, J, time_s                                                |
//! | `sweep_<key>.csv`| key, value, e2_y, einf_y, e2_u, einf_u, J, time_s                                            |
//!
//! Numbers use the shortest representation that parses back exactly; `NaN` marks values
//! that were not computed (held-out errors between metrics intervals, loss terms a method
//! does not have, metrics of a failed run).

use std::fs::File;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solvers::{Metrics, TraceRow};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub loss_total: f64,
    pub loss_state_res: f64,
    pub loss_adj_res: f64,
    pub loss_bdry_y: f64,
    pub loss_bdry_p: f64,
    #[serde(rename = "J")]
    pub objective: f64,
    pub e2_y: f64,
    pub e2_u: f64,
    pub wall_ms: f64,
}

impl TraceRecord {
    pub fn new(row: &TraceRow, wall_time: bool) -> Self {
        Self {
            iter: row.iter,
            loss_total: row.loss_total,
            loss_state_res: row.loss_state_res,
            loss_adj_res: row.loss_adj_res,
            loss_bdry_y: row.loss_bdry_y,
            loss_bdry_p: row.loss_bdry_p,
            objective: row.objective,
            e2_y: row.e2_y,
            e2_u: row.e2_u,
            wall_ms: if wall_time { row.wall_ms } else { 0.0 },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub e2_y: f64,
    pub einf_y: f64,
    pub e2_u: f64,
    pub einf_u: f64,
    #[serde(rename = "J")]
    pub objective: f64,
    pub time_s: f64,
}

impl ComparisonRow {
    pub fn new(method: &str, m: &Metrics) -> Self {
        Self {
            method: method.to_string(),
            e2_y: m.e2_y,
            einf_y: m.einf_y,
            e2_u: m.e2_u,
            einf_u: m.einf_u,
            objective: m.objective,
            time_s: m.time_s,
        }
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            e2_y: self.e2_y,
            einf_y: self.einf_y,
            e2_u: self.e2_u,
            einf_u: self.einf_u,
            objective: self.objective,
            time_s: self.time_s,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub key: String,
    pub value: String,
    pub e2_y: f64,
    pub einf_y: f64,
    pub e2_u: f64,
    pub einf_u: f64,
    #[serde(rename = "J")]
    pub objective: f64,
    pub time_s: f64,
}

pub fn failed_metrics() -> Metrics {
    Metrics {
        e2_y: f64::NAN,
        einf_y: f64::NAN,
        e2_u: f64::NAN,
        einf_u: f64::NAN,
        objective: f64::NAN,
        time_s: f64::NAN,
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, e.into())
}

pub(crate) fn create_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

pub fn write_rows<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = create_writer(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rows<R: DeserializeOwned>(path: &Path) -> Result<Vec<R>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<R>, _>>()
        .map_err(|e| csv_error(path, e))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    read_rows(path)
}

pub fn read_metrics(path: &Path) -> Result<Metrics> {
    let rows: Vec<Metrics> = read_rows(path)?;
    rows.into_iter()
        .next()
        .ok_or_else(|| Error::Config(format!("{} has no rows", path.display())))
}

pub fn read_comparison(path: &Path) -> Result<Vec<ComparisonRow>> {
    read_rows(path)
}
