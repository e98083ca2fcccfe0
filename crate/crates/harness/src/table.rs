//! Long-format result tables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, HarnessResult};

/// One measured or derived value. `x` is the sweep coordinate (Δx, dark
/// time, ...); `x2` is an optional second coordinate such as a bin edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub panel: String,
    pub series: String,
    pub x: f64,
    pub x2: Option<f64>,
    pub value: f64,
    pub stderr: Option<f64>,
    pub n: Option<u64>,
}

pub const RESULT_TABLE_HEADER: &str = "experiment,panel,series,x,x2,value,stderr,n";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

/// Binomial standard error of a population estimated from `n` samples.
pub fn population_stderr(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

impl ResultTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row with no uncertainty.
    pub fn value(&mut self, experiment: &str, panel: &str, series: &str, x: f64, value: f64) {
        self.rows.push(ResultRow {
            experiment: experiment.into(),
            panel: panel.into(),
            series: series.into(),
            x,
            x2: None,
            value,
            stderr: None,
            n: None,
        });
    }

    /// Population measured as `k` excitations out of `n` shots.
    pub fn population(&mut self, experiment: &str, panel: &str, series: &str, x: f64, k: u64, n: u64) {
        let p = k as f64 / n as f64;
        self.rows.push(ResultRow {
            experiment: experiment.into(),
            panel: panel.into(),
            series: series.into(),
            x,
            x2: None,
            value: p,
            stderr: Some(population_stderr(p, n)),
            n: Some(n),
        });
    }

    pub fn push(&mut self, row: ResultRow) {
        self.rows.push(row);
    }

    pub fn panel<'a>(&'a self, panel: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.panel == panel)
    }

    pub fn series<'a>(&'a self, panel: &'a str, series: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.panel(panel).filter(move |r| r.series == series)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).expect("rows serialize");
        }
        if self.rows.is_empty() {
            return format!("{RESULT_TABLE_HEADER}\n");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
    }

    pub fn from_csv(text: &str, origin: &Path) -> HarnessResult<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| parse_error(origin, e))?.iter().collect::<Vec<_>>().join(",");
        if header != RESULT_TABLE_HEADER {
            return Err(HarnessError::Parse {
                path: origin.to_path_buf(),
                message: format!("expected header `{RESULT_TABLE_HEADER}`, found `{header}`"),
            });
        }
        let rows = rdr.deserialize().collect::<Result<Vec<ResultRow>, _>>().map_err(|e| parse_error(origin, e))?;
        Ok(Self { rows })
    }

    pub fn load(path: &Path) -> HarnessResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_csv(&text, path)
    }
}

fn parse_error(origin: &Path, e: csv::Error) -> HarnessError {
    HarnessError::Parse { path: origin.to_path_buf(), message: e.to_string() }
}
