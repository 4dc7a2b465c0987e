//! Machine-readable reports: a JSON document and a flat CSV table.
//!
//! Reports hold no timings or host details, so a fixed configuration and
//! seed always serialize to the same bytes. Non-finite numbers become `null`
//! in JSON and empty cells in CSV.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use modrecip_core::ModulusResult;
use serde::Serialize;

use crate::config::{Config, Experiment};
use crate::error::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

/// Solver outcome for one family, enough to audit the certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    /// `connecting` or `separating`.
    pub family: &'static str,
    pub p: f64,
    pub status: &'static str,
    pub value: Option<f64>,
    pub lower_bound: Option<f64>,
    pub relative_gap: Option<f64>,
    /// Largest constraint shortfall `1 - min integral`; negative is over-admissible.
    pub violation: Option<f64>,
    pub outer_iterations: usize,
    pub active_constraints: usize,
}

impl Certificate {
    pub fn new(family: &'static str, res: &ModulusResult) -> Self {
        Certificate {
            family,
            p: res.p,
            status: res.status.name(),
            value: finite(res.value),
            lower_bound: finite(res.lower_bound),
            relative_gap: finite(res.relative_gap()),
            violation: finite(res.violation),
            outer_iterations: res.outer_iterations,
            active_constraints: res.active.len(),
        }
    }
}

/// One checked number: an experiment instance at `(n, p, norm)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub index: usize,
    pub n: usize,
    pub p: f64,
    pub norm: &'static str,
    pub quantity: &'static str,
    pub value: Option<f64>,
    pub reference: Option<f64>,
    pub relative_error: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub certificates: Vec<Certificate>,
    /// Side quantities that are reported but not checked.
    pub extras: BTreeMap<&'static str, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub seed: u64,
    /// Effective configuration, defaults included.
    pub config: Config,
    pub passed: bool,
    pub rows: Vec<Row>,
    /// Whether the relative error shrinks along the `n` sweep; `convergence` only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub errors_monotone: Option<bool>,
}

pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// `|value - reference| / |reference|`, or the absolute error for a zero reference.
pub fn relative_error(value: Option<f64>, reference: Option<f64>) -> Option<f64> {
    let (v, r) = (value?, reference?);
    finite(if r == 0.0 { v.abs() } else { (v - r).abs() / r.abs() })
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn write_json(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_json()).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn write_csv_to<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "experiment",
            "index",
            "n",
            "p",
            "norm",
            "quantity",
            "value",
            "reference",
            "relative_error",
            "tolerance",
            "pass",
        ])?;
        let cell = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for row in &self.rows {
            w.write_record([
                self.experiment.name().to_string(),
                row.index.to_string(),
                row.n.to_string(),
                row.p.to_string(),
                row.norm.to_string(),
                row.quantity.to_string(),
                cell(row.value),
                cell(row.reference),
                cell(row.relative_error),
                row.tolerance.to_string(),
                row.pass.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let file = std::fs::File::create(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv_to(file).map_err(|source| HarnessError::Csv {
            path: path.to_path_buf(),
            source,
        })
    }
}
