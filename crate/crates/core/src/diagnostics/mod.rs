//! Certification of candidate extremals and reference solutions.

pub mod almost_min;
pub mod aronsson;
pub mod bumps;
pub mod certificate;
pub mod corrector;
pub mod energy;
pub mod oracle;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use almost_min::{almost_minimiser_mc, AlmostMinStats, AmplitudeStats, McOptions, THREADS_ENV};
pub use aronsson::{aronsson_residual, AronssonResidual, AronssonSummary};
pub use bumps::{radial_family, tensor_family, w1_inf_norm, wendland, Bump, BumpShape};
pub use certificate::{
    boundary_layer_mass, check_el_system, check_el_system_with, limit_duality_residual, ElCheck, SUPPORT_FLOOR,
    TEST_BASIS_SEED, TEST_BASIS_SIZE,
};
pub use corrector::{boundary_corrector, smoothed_distance, CollarError, CorrectorReport};
pub use energy::{energy_identities, EnergyIdentities, IdentityResidual};
pub use oracle::{brute_force_minimax, oracle_1d, CrossCheck, Oracle1DSolution};

use crate::error::Result;
use crate::grid::ScalarField;
use crate::problem::{CoefficientModel, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub el1: f64,
    pub flatness: f64,
    pub el2: f64,
    pub normalization: f64,
    pub duality: f64,
    /// `None` keeps the energy identities informational.
    pub energy_identity: Option<f64>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            el1: 0.05,
            flatness: 0.05,
            el2: 1e-6,
            normalization: 1e-8,
            duality: 1e-10,
            energy_identity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertificateOptions {
    pub thresholds: Thresholds,
    /// `false` skips the Monte-Carlo section.
    pub run_monte_carlo: bool,
    pub monte_carlo: McOptions,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            run_monte_carlo: true,
            monte_carlo: McOptions::default(),
        }
    }
}

/// Residuals recorded by the continuation at the level that produced `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelResiduals {
    pub p: f64,
    pub normalization: f64,
    pub duality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub e_infty_estimate: f64,
    pub el1_residual: f64,
    pub flatness: f64,
    pub sign_violations: usize,
    pub support_nodes: usize,
    pub el2_residual: f64,
    /// Only defined for multipliers from a finite `p` level.
    pub normalization_residual: Option<f64>,
    pub duality_residual: f64,
    pub aronsson_residual: f64,
    pub boundary_layer_mass: f64,
    pub degenerate: bool,
    pub almost_min: Option<AlmostMinStats>,
    pub energy_identity_residuals: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

fn check(name: &str, value: f64, threshold: f64) -> Check {
    Check {
        name: name.into(),
        value,
        threshold,
        pass: value.is_finite() && value <= threshold,
    }
}

/// Runs every diagnostic on the triple `(u, f, e)` and applies the thresholds.
pub fn build_certificate(
    spec: &ProblemSpec,
    u: &ScalarField,
    f: &ScalarField,
    e: f64,
    level: Option<LevelResiduals>,
    options: &CertificateOptions,
    seed: u64,
) -> Result<CertificateReport> {
    let t = &options.thresholds;
    let el = check_el_system(spec, u, f, e)?;
    let duality = match level {
        Some(l) => l.duality,
        None => limit_duality_residual(spec, u, f, e)?,
    };
    let normalization = level.map(|l| l.normalization);
    let aronsson = aronsson_residual(spec, u)?.value;
    let almost_min = if options.run_monte_carlo {
        Some(almost_minimiser_mc(spec, u, &options.monte_carlo, seed)?)
    } else {
        None
    };
    let mut energy = BTreeMap::new();
    if spec.reaction().scalar().is_some() && *spec.coefficient().model() == CoefficientModel::Identity {
        let ids = energy_identities(spec, u)?;
        energy.insert("energy1".to_string(), ids.energy1.relative);
        energy.insert("energy2".to_string(), ids.energy2.relative);
    }

    let mut checks = vec![
        check("el1", el.el1, t.el1),
        check("flatness", el.flatness, t.flatness),
        check("el2", el.el2, t.el2),
        check("sign_violations", el.sign_violations as f64, 0.0),
        check("duality", duality, t.duality),
    ];
    if let Some(n) = normalization {
        checks.push(check("normalization", n, t.normalization));
    }
    if let Some(mc) = &almost_min {
        checks.push(check("almost_min_violations", mc.violations as f64, 0.0));
    }
    if let Some(limit) = t.energy_identity {
        for (name, v) in &energy {
            checks.push(check(name, *v, limit));
        }
    }
    let pass = !el.degenerate && checks.iter().all(|c| c.pass);
    Ok(CertificateReport {
        e_infty_estimate: e,
        el1_residual: el.el1,
        flatness: el.flatness,
        sign_violations: el.sign_violations,
        support_nodes: el.support_nodes,
        el2_residual: el.el2,
        normalization_residual: normalization,
        duality_residual: duality,
        aronsson_residual: aronsson,
        boundary_layer_mass: boundary_layer_mass(f),
        degenerate: el.degenerate,
        almost_min,
        energy_identity_residuals: energy,
        checks,
        pass,
    })
}
