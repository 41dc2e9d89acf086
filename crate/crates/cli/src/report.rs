//! Check records and the JSON report.

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Reported but not asserted.
    Info,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct Record {
    pub name: String,
    /// The statement being checked.
    pub anchor: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_zero: Option<bool>,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub detail: String,
    pub runtime_ms: u64,
}

impl Record {
    pub fn exact(name: impl Into<String>, anchor: &str, zero: bool) -> Self {
        Record {
            name: name.into(),
            anchor: anchor.into(),
            status: if zero { Status::Pass } else { Status::Fail },
            residual_norm: None,
            exact_zero: Some(zero),
            detail: String::new(),
            runtime_ms: 0,
        }
    }

    /// Pass iff `residual <= tol`.
    pub fn numeric(name: impl Into<String>, anchor: &str, residual: f64, tol: f64) -> Self {
        Record {
            name: name.into(),
            anchor: anchor.into(),
            status: if residual <= tol { Status::Pass } else { Status::Fail },
            residual_norm: Some(residual),
            exact_zero: None,
            detail: format!("tolerance {tol:e}"),
            runtime_ms: 0,
        }
    }

    pub fn info(name: impl Into<String>, anchor: &str, detail: String) -> Self {
        Record {
            name: name.into(),
            anchor: anchor.into(),
            status: Status::Info,
            residual_norm: None,
            exact_zero: None,
            detail,
            runtime_ms: 0,
        }
    }

    pub fn failed(name: impl Into<String>, anchor: &str, detail: String) -> Self {
        Record { status: Status::Fail, ..Self::info(name, anchor, detail) }
    }

    pub fn with_detail(mut self, detail: String) -> Self {
        self.detail = if self.detail.is_empty() { detail } else { format!("{}; {detail}", self.detail) };
        self
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub status: Status,
    pub records: Vec<Record>,
}

impl Report {
    pub fn new(command: &str, seed: u64, records: Vec<Record>) -> Self {
        let status = if records.iter().any(|r| r.status == Status::Fail) { Status::Fail } else { Status::Pass };
        Report { schema_version: SCHEMA_VERSION, command: command.into(), seed, status, records }
    }

    pub fn first_failure(&self) -> Option<&Record> {
        self.records.iter().find(|r| r.status == Status::Fail)
    }
}
