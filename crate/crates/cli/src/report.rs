//! The structured run report written as `report.yaml`.

use std::path::Path;

use linfel_core::diagnostics::{CollarError, CrossCheck};
use linfel_core::solver::SigmaCheck;
use linfel_core::{CertificateReport, ContinuationState, KernelBranch, KernelResult, LevelRecord, ModeTag, Oracle1DSolution};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, RunMode};
use crate::error::CliError;

pub const REPORT_FILE: &str = "report.yaml";
pub const HISTORY_FILE: &str = "history.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub started: u64,
    pub finished: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Status {
    pub exit_code: i32,
    pub converged: bool,
    /// Levels whose inner solve did not converge.
    pub untrusted_levels: Vec<f64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub extent: Vec<f64>,
    pub nodes: Vec<usize>,
    pub spacing: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSummary {
    pub branch: KernelBranch,
    pub condition: f64,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub l1_mass: f64,
}

impl KernelSummary {
    pub fn new(k: &KernelResult) -> Self {
        let g = k.f.grid();
        let l1_mass = g.measured_nodes().iter().map(|&n| g.weight(n) * k.f.values()[n].abs()).sum();
        Self {
            branch: k.branch,
            condition: k.condition,
            residual: k.residual,
            converged: k.converged,
            iterations: k.iterations,
            l1_mass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSummary {
    pub mode: ModeTag,
    pub sigma: f64,
    pub p0: f64,
    pub schedule: Vec<f64>,
    pub last_p: f64,
    pub early_stop: bool,
    pub e_infty_estimate: f64,
    pub monotonicity_defect: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_decreasing: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_check: Option<SigmaCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSummary>,
    pub history: Vec<LevelRecord>,
}

impl ContinuationSummary {
    pub fn new(state: &ContinuationState) -> Self {
        Self {
            mode: state.mode,
            sigma: state.sigma,
            p0: state.p0,
            schedule: state.schedule.clone(),
            last_p: state.schedule[state.index],
            early_stop: state.early_stop,
            e_infty_estimate: state.e_infty_estimate(),
            monotonicity_defect: state.monotonicity_defect(),
            a_decreasing: state.a_decreasing,
            sigma_check: state.sigma_check,
            kernel: state.kernel.as_ref().map(KernelSummary::new),
            history: state.history.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSection {
    pub a: f64,
    pub b: f64,
    pub e_infty: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch: Option<f64>,
    pub curvature: f64,
    /// Largest violation of the closed-form conditions at sample points.
    pub self_check: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brute_force: Option<CrossCheck>,
}

impl OracleSection {
    pub fn new(sol: &Oracle1DSolution, brute_force: Option<CrossCheck>) -> Self {
        Self {
            a: sol.a,
            b: sol.b,
            e_infty: sol.e_infty,
            switch: sol.switch,
            curvature: sol.curvature,
            self_check: sol.self_check(1001),
            brute_force,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectorSummary {
    pub target: f64,
    pub floor_nodes: usize,
    pub collars: Vec<CollarError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub mode: RunMode,
    pub status: Status,
    pub e_infty_estimate: f64,
    /// Certificate verdict; `false` when no certificate was produced.
    pub verdict: bool,
    pub grid: GridSummary,
    /// Construct stage that produced the candidate in certify mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_stage: Option<ContinuationSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuation: Option<ContinuationSummary>,
    /// Certify mode: `max |u_p - u*|` at the last level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrector: Option<CorrectorSummary>,
    pub tables: Vec<String>,
    pub config: RunConfig,
    pub provenance: Provenance,
}

impl Report {
    pub fn history(&self) -> &[LevelRecord] {
        self.continuation.as_ref().map_or(&[], |c| &c.history)
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("report serialises")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_yaml::from_str(&text).map_err(|e| CliError::Artifact {
            path: path.into(),
            message: e.to_string(),
        })
    }
}
