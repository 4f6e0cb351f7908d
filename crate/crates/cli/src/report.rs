//! Versioned JSON reports. Field order is fixed by the struct definitions
//! and every map is a BTreeMap, so identical runs serialize to identical
//! bytes; nothing time- or path-dependent goes into a report.

use std::fs;
use std::path::Path;

use fgromov_core::config;
use fgromov_core::{Error, Result};
use serde::Serialize;

pub const TOOL: &str = "fgromov";
pub const SCHEMA: u32 = 1;

#[derive(Serialize)]
pub struct GroupStamp {
    pub name: String,
    pub fingerprint: String,
}

/// The configuration constants that influenced the run.
#[derive(Serialize)]
pub struct ConfigStamp {
    pub element_cap: usize,
    pub step_budget: u32,
    pub degree_drop_min: f64,
    pub drop_factor: f64,
    pub identity_tol: f64,
    pub exponential_ratio_flag: f64,
}

impl ConfigStamp {
    pub fn current(element_cap: usize, step_budget: u32) -> ConfigStamp {
        ConfigStamp {
            element_cap,
            step_budget,
            degree_drop_min: config::DEGREE_DROP_MIN,
            drop_factor: config::DEFAULT_DROP_FACTOR,
            identity_tol: config::IDENTITY_TOL,
            exponential_ratio_flag: config::EXPONENTIAL_RATIO_FLAG,
        }
    }
}

#[derive(Serialize)]
pub struct Report<T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema: u32,
    pub command: String,
    pub group: Option<GroupStamp>,
    pub seed: Option<u64>,
    pub config: ConfigStamp,
    pub payload: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(command: &str, group: Option<GroupStamp>, seed: Option<u64>, config: ConfigStamp, payload: T) -> Self {
        Report {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            schema: SCHEMA,
            command: command.to_string(),
            group,
            seed,
            config,
            payload,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Spec(format!("report serialization failed: {e}")))?;
        s.push('\n');
        Ok(s)
    }
}

/// Write a report file; the payload decides the document shape.
pub fn emit_report<T: Serialize>(report: &Report<T>, path: &Path) -> Result<()> {
    fs::write(path, report.to_json()?)?;
    Ok(())
}
