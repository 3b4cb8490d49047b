//! Strict TOML run configuration.

use std::path::{Path, PathBuf};

use linfel_core::problem::{BoundaryPreset, CoefficientModel, Reaction};
use linfel_core::{CertificateOptions, ContinuationOptions, InnerOptions};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Largest seed a TOML integer can hold.
pub const MAX_SEED: u64 = i64::MAX as u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    Solve,
    Certify,
    Diagnose,
    Oracle1d,
}

impl RunMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Solve => "solve",
            Self::Certify => "certify",
            Self::Diagnose => "diagnose",
            Self::Oracle1d => "oracle1d",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub extent: Vec<f64>,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub coefficient: CoefficientModel,
    #[serde(default)]
    pub reaction: Reaction,
    /// Named extension of the boundary data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryPreset>,
    /// Nodal table `x[,y],value` with the extension `u0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_table: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub p_start: f64,
    pub p_max: f64,
    pub settle_tol: f64,
    pub settle_count: usize,
    pub kernel_threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    pub sigma_check: bool,
    /// Penalty weight in certify mode; the default is data-driven.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Candidate for certify mode as a nodal table; absent means a construct run first.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor_table: Option<PathBuf>,
    pub inner: InnerOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let c = ContinuationOptions::default();
        Self {
            p_start: c.p_start,
            p_max: c.p_max,
            settle_tol: c.settle_tol,
            settle_count: c.settle_count,
            kernel_threshold: c.kernel_threshold,
            p0: c.p0,
            sigma_check: c.sigma_check,
            sigma: None,
            anchor_table: None,
            inner: c.inner,
        }
    }
}

impl SolverConfig {
    pub fn continuation(&self) -> ContinuationOptions {
        ContinuationOptions {
            p_start: self.p_start,
            p_max: self.p_max,
            settle_tol: self.settle_tol,
            settle_count: self.settle_count,
            kernel_threshold: self.kernel_threshold,
            p0: self.p0,
            sigma_check: self.sigma_check,
            inner: self.inner,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub a: f64,
    pub b: f64,
    /// Run the brute-force minimax search as a cross-check.
    #[serde(default)]
    pub brute_force: bool,
    #[serde(default = "brute_nodes")]
    pub brute_nodes: usize,
    #[serde(default = "brute_starts")]
    pub brute_starts: usize,
}

fn brute_nodes() -> usize {
    401
}

fn brute_starts() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnoseConfig {
    /// Field to diagnose as a nodal table; absent means the boundary extension.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<PathBuf>,
    /// Constant target for the boundary corrector.
    pub corrector_target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<RunMode>,
    /// Master seed for every random choice in the run.
    pub seed: u64,
    pub grid: GridConfig,
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub certificate: CertificateOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
    #[serde(default)]
    pub diagnose: DiagnoseConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| {
            let location = e
                .span()
                .map(|s| {
                    let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
                    format!("line {line}")
                })
                .unwrap_or_else(|| "document".into());
            CliError::Config {
                field: location,
                message: e.message().trim().to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid("--config", format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    /// Makes table paths relative to the configuration file absolute.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.problem.boundary_table);
        fix(&mut self.solver.anchor_table);
        fix(&mut self.diagnose.field);
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seed > MAX_SEED {
            return Err(invalid("seed", format!("must not exceed {MAX_SEED}")));
        }
        let g = &self.grid;
        if g.extent.is_empty() || g.extent.len() > 2 || g.extent.len() != g.nodes.len() {
            return Err(invalid("grid", "extent and nodes need one or two matching entries"));
        }
        if g.extent.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(invalid("grid.extent", "entries must be positive and finite"));
        }
        if g.nodes.iter().any(|&n| !(7..=100_000).contains(&n)) {
            return Err(invalid("grid.nodes", "entries must lie in 7..=100000"));
        }
        match (&self.problem.boundary, &self.problem.boundary_table) {
            (Some(_), Some(_)) => {
                return Err(invalid("problem", "give either boundary or boundary_table, not both"));
            }
            (None, None) if self.mode != Some(RunMode::Oracle1d) => {
                return Err(invalid("problem.boundary", "missing boundary data"));
            }
            _ => {}
        }
        let s = &self.solver;
        if !(s.p_start >= 2.0 && s.p_max >= s.p_start && s.p_max <= 1e6) {
            return Err(invalid("solver.p_max", "need 2 <= p_start <= p_max <= 1e6"));
        }
        if !(s.settle_tol > 0.0) || s.settle_count == 0 || !(s.kernel_threshold >= 0.0) {
            return Err(invalid("solver", "settle_tol and settle_count must be positive, kernel_threshold nonnegative"));
        }
        if s.p0.is_some_and(|p| !(p > 1.0 && p.is_finite())) {
            return Err(invalid("solver.p0", "must exceed 1"));
        }
        if s.sigma.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
            return Err(invalid("solver.sigma", "must be positive"));
        }
        let inner = &s.inner;
        if inner.max_iterations == 0 || !(inner.gradient_tol > 0.0) || !(inner.decrement_tol > 0.0) {
            return Err(invalid("solver.inner", "iteration cap and tolerances must be positive"));
        }
        self.certificate
            .monte_carlo
            .validate()
            .map_err(|e| invalid("certificate.monte_carlo", e.to_string()))?;
        if let Some(o) = &self.oracle {
            if !(o.a.is_finite() && o.b.is_finite()) || (o.a == 0.0 && o.b == 0.0) {
                return Err(invalid("oracle", "a and b must be finite and not both zero"));
            }
            if o.brute_nodes < 7 || o.brute_starts == 0 {
                return Err(invalid("oracle", "brute_nodes >= 7 and brute_starts >= 1"));
            }
        }
        if self.mode == Some(RunMode::Oracle1d) {
            self.check_oracle()?;
        }
        Ok(())
    }

    /// Extra requirements of the oracle mode.
    pub fn check_oracle(&self) -> Result<(), CliError> {
        if self.oracle.is_none() {
            return Err(invalid("oracle", "oracle1d needs an [oracle] section with a and b"));
        }
        if self.grid.extent != [1.0] {
            return Err(invalid("grid.extent", "oracle1d runs on the unit interval"));
        }
        let p = &self.problem;
        if p.coefficient != CoefficientModel::Identity || p.reaction != Reaction::Zero {
            return Err(invalid("problem", "oracle1d solves u'' with the identity coefficient and zero reaction"));
        }
        let o = self.oracle.as_ref().expect("checked above");
        let matching = match p.boundary {
            None => true,
            Some(BoundaryPreset::Hermite { a, b } | BoundaryPreset::Oracle { a, b }) => a == o.a && b == o.b,
            Some(_) => false,
        };
        if !matching || p.boundary_table.is_some() {
            return Err(invalid("problem.boundary", "oracle1d boundary data must match [oracle]"));
        }
        Ok(())
    }
}
