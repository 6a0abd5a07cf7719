//! Machine-readable experiment reports and their CSV tables.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::walk::csv_err;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub total: u64,
    pub completed: u64,
    pub censored: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }
}

/// Outcome of one experiment. Everything in it is a deterministic function
/// of the configuration; no timings or host details.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatReport {
    pub experiment: String,
    pub seed: u64,
    pub replicas: Counts,
    /// Largest forward horizon used, in steps.
    pub horizon: u64,
    pub estimates: Vec<Estimate>,
    pub statistics: Vec<Estimate>,
    pub checks: Vec<Check>,
    /// Conditions worth attention that are not failures (censoring, truncation).
    pub flags: Vec<String>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl StatReport {
    pub fn new(experiment: &str, seed: u64) -> Self {
        StatReport {
            experiment: experiment.into(),
            seed,
            replicas: Counts::default(),
            horizon: 0,
            estimates: Vec::new(),
            statistics: Vec::new(),
            checks: Vec::new(),
            flags: Vec::new(),
            notes: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn estimate(&mut self, name: impl Into<String>, value: f64, se: Option<f64>) {
        self.estimates.push(Estimate { name: name.into(), value, se });
    }

    pub fn statistic(&mut self, name: impl Into<String>, value: f64) {
        self.statistics.push(Estimate { name: name.into(), value, se: None });
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    pub fn flag(&mut self, flag: impl Into<String>) {
        self.flags.push(flag.into());
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }

    pub fn get_estimate(&self, name: &str) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.name == name)
    }

    pub fn get_statistic(&self, name: &str) -> Option<f64> {
        self.statistics.iter().find(|e| e.name == name).map(|e| e.value)
    }

    pub fn get_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes `report.json` and `tables/<name>.csv` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("tables"))?;
        fs::write(dir.join("report.json"), self.to_json())?;
        for t in &self.tables {
            write_table(t, &dir.join("tables").join(format!("{}.csv", t.name)))?;
        }
        Ok(())
    }
}

pub fn write_table(t: &Table, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(&t.header).map_err(csv_err)?;
    for row in &t.rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed formatting for floats in tables.
pub fn fmt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.10e}")
    } else {
        x.to_string()
    }
}
