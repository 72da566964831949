//! Ensemble study reports and their JSON/CSV serialization.

use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A point estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub standard_error: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        Estimate {
            value: crate::stats::mean(xs),
            standard_error: crate::stats::standard_error(xs),
        }
    }

    /// Absolute deviation from `target` in standard-error units.
    pub fn sigmas_from(&self, target: f64) -> f64 {
        if self.standard_error == 0.0 {
            if self.value == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.value - target).abs() / self.standard_error
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub count: usize,
    /// Indices of failed replicas (capped at 64 entries).
    pub indices: Vec<u64>,
}

impl FailureRecord {
    pub fn record(&mut self, replica: u64) {
        self.count += 1;
        if self.indices.len() < 64 {
            self.indices.push(replica);
        }
    }
}

/// Output of any ensemble study: named estimates plus provenance.
///
/// `wall_time_secs` is measured per run and intentionally not serialized, so
/// emitted artifacts are byte-identical across runs and thread counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub study: String,
    pub estimates: BTreeMap<String, Estimate>,
    /// Scalar diagnostics (fitted slopes, stability ratios, sigma deviations).
    pub diagnostics: BTreeMap<String, f64>,
    pub n_replicas: usize,
    pub seed: u64,
    pub config_hash: String,
    pub failures: FailureRecord,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl MonteCarloReport {
    pub fn new(study: impl Into<String>, n_replicas: usize, seed: u64) -> Self {
        MonteCarloReport {
            study: study.into(),
            estimates: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
            n_replicas,
            seed,
            config_hash: String::new(),
            failures: FailureRecord::default(),
            wall_time_secs: 0.0,
        }
    }

    pub fn insert_samples(&mut self, name: impl Into<String>, xs: &[f64]) {
        self.estimates.insert(name.into(), Estimate::from_samples(xs));
    }

    pub fn estimate(&self, name: &str) -> Option<&Estimate> {
        self.estimates.get(name)
    }

    /// Pretty JSON with sorted keys (BTreeMap ordering).
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| crate::error::Error::Io(e.to_string()))
    }

    /// CSV table `name,value,standard_error`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "name,value,standard_error")?;
        for (k, e) in &self.estimates {
            writeln!(w, "{k},{},{}", e.value, e.standard_error)?;
        }
        for (k, v) in &self.diagnostics {
            writeln!(w, "diag:{k},{v},0")?;
        }
        Ok(())
    }
}
