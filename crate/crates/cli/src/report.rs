//! The JSON report of an experiment and its verification against an
//! expectations file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use shockform_core::similarity::{PowerLawFit, SimilarityPrediction};
use shockform_core::singularity::{ResolvedRange, SingularityEstimate};
use shockform_core::solver::StopReason;
use thiserror::Error;

use crate::config::ExperimentConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    ShockDetected,
    NoShockDetected,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub stop_reason: StopReason,
    pub final_time: f64,
    pub steps: usize,
    pub rejected_steps: usize,
    pub initial_points: usize,
    pub final_points: usize,
    pub initial_max_slope: f64,
    /// Absent when the initial data have no slope to grow from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blowup_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentSlopes {
    pub component: usize,
    pub name: String,
    pub first: PowerLawFit,
    pub second: PowerLawFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstDerivativeSummary {
    pub component: usize,
    pub name: String,
    /// `|e_i/c|`.
    pub prefactor: f64,
    pub median_ratio: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseComponentSummary {
    pub component: usize,
    pub relative_rms: f64,
    pub offset: f64,
    pub offset_std_error: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseSnapshotSummary {
    pub t: f64,
    pub tau: f64,
    pub num_points: usize,
    pub error: f64,
    pub components: Vec<CollapseComponentSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseSummary {
    pub xi_max: f64,
    pub profile_scale: f64,
    /// Largest error over all snapshots.
    pub collapse_error: f64,
    /// Error of the snapshot closest to `t*`.
    pub latest_error: f64,
    pub decreasing: bool,
    pub snapshots: Vec<CollapseSnapshotSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShockReport {
    pub index: usize,
    pub estimate: SingularityEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction: Option<SimilarityPrediction>,
    pub slopes: Vec<ComponentSlopes>,
    pub first_derivative: Vec<FirstDerivativeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collapse: Option<CollapseSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub description: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub metric: String,
    pub expected: f64,
    pub tolerance: f64,
    pub measured: f64,
    /// `measured − expected`.
    pub deviation: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    /// Output file holding the data the value was computed from.
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub companion: Option<RunSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolved: Option<ResolvedRange>,
    pub shocks: Vec<ShockReport>,
    pub metrics: BTreeMap<String, Metric>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub stage_errors: Vec<StageError>,
    pub files: Vec<FileEntry>,
}

/// Exit status for a numerical failure.
pub const EXIT_NUMERICAL: i32 = 2;
/// Exit status for a failed verification.
pub const EXIT_VERIFICATION: i32 = 3;

impl Report {
    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).map(|m| m.value)
    }

    pub fn exit_code(&self) -> i32 {
        if !self.stage_errors.is_empty() {
            EXIT_NUMERICAL
        } else if self.checks.iter().any(|c| !c.passed) {
            EXIT_VERIFICATION
        } else {
            0
        }
    }

    /// Reads the metrics of a stored report, ignoring everything else.
    pub fn metrics_from_json(text: &str) -> Result<BTreeMap<String, Metric>, VerifyError> {
        #[derive(Deserialize)]
        struct Stored {
            metrics: BTreeMap<String, Metric>,
        }
        Ok(serde_json::from_str::<Stored>(text)?.metrics)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
    #[error("cannot parse expectations: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot parse report: {0}")]
    Report(#[from] serde_json::Error),
    #[error("the report has no metric `{0}`")]
    MissingMetric(String),
    #[error("invalid expectation for `{0}`: tolerance must be non-negative")]
    BadTolerance(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub metric: String,
    pub value: f64,
    pub tolerance: f64,
    #[serde(default)]
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    #[serde(rename = "check")]
    pub checks: Vec<Expectation>,
}

impl Expectations {
    pub fn from_toml(text: &str) -> Result<Self, VerifyError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, VerifyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| VerifyError::Io(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }
}

/// Compares report metrics with expected values; every expected metric must
/// exist in the report.
pub fn verify_figures(
    metrics: &BTreeMap<String, Metric>,
    expectations: &Expectations,
) -> Result<Vec<Check>, VerifyError> {
    expectations
        .checks
        .iter()
        .map(|e| {
            if !(e.tolerance >= 0.0) {
                return Err(VerifyError::BadTolerance(e.metric.clone()));
            }
            let measured = metrics
                .get(&e.metric)
                .map(|m| m.value)
                .ok_or_else(|| VerifyError::MissingMetric(e.metric.clone()))?;
            let deviation = measured - e.value;
            Ok(Check {
                metric: e.metric.clone(),
                expected: e.value,
                tolerance: e.tolerance,
                measured,
                deviation,
                passed: deviation.abs() <= e.tolerance,
                note: e.note.clone(),
            })
        })
        .collect()
}

/// One line per check, aligned for the terminal.
pub fn format_checks(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.metric.len()).max().unwrap_or(6);
    let mut out = String::new();
    for c in checks {
        out.push_str(&format!(
            "{} {:width$}  measured {:<14.8} expected {:<12.6} ± {:<10.3e} deviation {:+.3e}\n",
            if c.passed { "PASS" } else { "FAIL" },
            c.metric,
            c.measured,
            c.expected,
            c.tolerance,
            c.deviation,
        ));
    }
    out
}
