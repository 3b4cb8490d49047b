//! `E_p`, its penalised form, gradients over free nodes and the multiplier fields.
//!
//! All averages run over the measured (non-boundary) nodes with their
//! trapezoid weights; `|Omega|` below means their total weight.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{weighted_power_mean, Grid, ScalarField};
use crate::linalg::CsrMatrix;
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyParams {
    pub p: f64,
    pub sigma: f64,
    /// Penalty centre.
    pub anchor: Option<ScalarField>,
    /// Penalty exponent.
    pub p0: f64,
}

impl EnergyParams {
    /// Unpenalised `E_p` with the default penalty exponent `dim + 1`.
    pub fn plain(p: f64, dim: usize) -> Self {
        Self {
            p,
            sigma: 0.0,
            anchor: None,
            p0: dim as f64 + 1.0,
        }
    }

    pub fn penalised(p: f64, sigma: f64, anchor: ScalarField) -> Self {
        let dim = anchor.grid().dim();
        Self {
            p,
            sigma,
            anchor: Some(anchor),
            p0: dim as f64 + 1.0,
        }
    }

    pub fn with_p(&self, p: f64) -> Self {
        Self { p, ..self.clone() }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.p >= 2.0) || !self.p.is_finite() {
            return Err(Error::InvalidParameter(format!("p must be finite and >= 2, got {}", self.p)));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        if self.sigma > 0.0 && self.anchor.is_none() {
            return Err(Error::InvalidParameter("sigma > 0 needs an anchor".into()));
        }
        if !(self.p0 > dim as f64) || !self.p0.is_finite() {
            return Err(Error::InvalidParameter(format!("p0 must exceed the dimension, got {}", self.p0)));
        }
        Ok(())
    }

    fn penalised_now(&self) -> bool {
        self.sigma > 0.0 && self.anchor.is_some()
    }
}

/// Pieces of `E_p^sigma(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParts {
    pub e_p: f64,
    /// `||A : D^2 (u - anchor)||_{L^p0}` (unnormalised), 0 without an anchor.
    pub a_p: f64,
    pub total: f64,
}

/// Mean `L^p` norm over measured nodes.
pub fn measured_mean(grid: &Grid, values: &[f64], p: f64) -> f64 {
    let nodes = grid.measured_nodes();
    weighted_power_mean(nodes.iter().map(|&k| (grid.weight(k), values[k])), grid.measured_volume(), p)
}

/// Unnormalised `L^p` norm over measured nodes.
pub fn measured_norm(grid: &Grid, values: &[f64], p: f64) -> f64 {
    let nodes = grid.measured_nodes();
    weighted_power_mean(nodes.iter().map(|&k| (grid.weight(k), values[k])), 1.0, p)
}

fn anchor_defect(spec: &ProblemSpec, u: &ScalarField, anchor: &ScalarField) -> Result<Vec<f64>> {
    let d: Vec<f64> = u.values().iter().zip(anchor.values()).map(|(a, b)| a - b).collect();
    Ok(spec.principal(&u.with_values(d)?).into_values())
}

pub fn energy_parts(spec: &ProblemSpec, u: &ScalarField, params: &EnergyParams) -> Result<EnergyParts> {
    let s = spec.eval_s(u)?;
    parts_from_s(spec, u, &s, params)
}

fn parts_from_s(
    spec: &ProblemSpec,
    u: &ScalarField,
    s: &ScalarField,
    params: &EnergyParams,
) -> Result<EnergyParts> {
    let g = spec.grid();
    let e_p = measured_mean(g, s.values(), params.p);
    let a_p = match &params.anchor {
        Some(anchor) => measured_norm(g, &anchor_defect(spec, u, anchor)?, params.p0),
        None => 0.0,
    };
    let total = e_p + params.sigma * a_p * a_p;
    if !total.is_finite() {
        return Err(Error::NonFiniteEnergy {
            node: s.values().iter().position(|v| !v.is_finite()).unwrap_or(0),
        });
    }
    Ok(EnergyParts { e_p, a_p, total })
}

/// `E_p(u)`, or `E_p^sigma(u)` when a penalty is active.
pub fn energy_p(spec: &ProblemSpec, u: &ScalarField, params: &EnergyParams) -> Result<f64> {
    Ok(energy_parts(spec, u, params)?.total)
}

/// `e^(1-p) |v|^(p-2) v` on measured nodes, zero elsewhere, in the log domain.
pub fn power_density(grid: &Grid, values: &[f64], e: f64, p: f64) -> Vec<f64> {
    let mut out = vec![0.0; grid.node_count()];
    if e == 0.0 {
        return out;
    }
    let log_e = e.ln();
    for &k in grid.measured_nodes() {
        let v = values[k];
        if v != 0.0 {
            out[k] = v.signum() * ((p - 1.0) * (v.abs().ln() - log_e)).exp();
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSet {
    pub f_p: ScalarField,
    pub e_p: f64,
    pub a_p: f64,
    pub phi_p: ScalarField,
    /// `e_p = 0`: `f_p` is identically zero.
    pub degenerate: bool,
}

pub fn extract_multipliers(spec: &ProblemSpec, u: &ScalarField, params: &EnergyParams) -> Result<MultiplierSet> {
    let s = spec.eval_s(u)?;
    multipliers_from_s(spec, u, &s, params)
}

fn multipliers_from_s(spec: &ProblemSpec, u: &ScalarField, s: &ScalarField, params: &EnergyParams) -> Result<MultiplierSet> {
    let g = spec.grid();
    let e_p = measured_mean(g, s.values(), params.p);
    let f_p = ScalarField::new(g.clone(), power_density(g, s.values(), e_p, params.p))?;
    let (a_p, phi) = match &params.anchor {
        Some(anchor) => {
            let q = anchor_defect(spec, u, anchor)?;
            let a = measured_norm(g, &q, params.p0);
            // phi = a^(2 - p0) |q|^(p0 - 2) q = a * (q/a)|q/a|^(p0-2)
            (a, power_density(g, &q, a, params.p0).into_iter().map(|v| a * v).collect())
        }
        None => (0.0, vec![0.0; g.node_count()]),
    };
    Ok(MultiplierSet {
        f_p,
        e_p,
        a_p,
        phi_p: ScalarField::new(g.clone(), phi)?,
        degenerate: e_p == 0.0,
    })
}

/// Gradient of the discrete energy with respect to the free nodal values,
/// together with the pieces it is made of.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientParts {
    pub gradient: Vec<f64>,
    /// The `E_p` part of `gradient`.
    pub gradient_ep: Vec<f64>,
    pub multipliers: MultiplierSet,
    pub parts: EnergyParts,
    pub linearization: CsrMatrix,
}

pub fn gradient_parts(spec: &ProblemSpec, u: &ScalarField, params: &EnergyParams) -> Result<GradientParts> {
    let g = spec.grid();
    let s = spec.eval_s(u)?;
    let parts = parts_from_s(spec, u, &s, params)?;
    let multipliers = multipliers_from_s(spec, u, &s, params)?;
    let l = spec.assemble_linearization(u)?;
    let vol = g.measured_volume();
    let measured = g.measured_nodes();
    let wf: Vec<f64> = measured
        .iter()
        .map(|&k| g.weight(k) * multipliers.f_p.values()[k] / vol)
        .collect();
    let gradient_ep = l.tr_mul_vec(&wf);
    let mut gradient = gradient_ep.clone();
    if params.penalised_now() {
        let k = spec.assemble_principal();
        let wphi: Vec<f64> = measured
            .iter()
            .map(|&n| 2.0 * params.sigma * g.weight(n) * multipliers.phi_p.values()[n])
            .collect();
        for (a, b) in gradient.iter_mut().zip(k.tr_mul_vec(&wphi)) {
            *a += b;
        }
    }
    Ok(GradientParts {
        gradient,
        gradient_ep,
        multipliers,
        parts,
        linearization: l,
    })
}

/// `dE/du_j` over free nodes, in free-node order.
pub fn gradient_energy(spec: &ProblemSpec, u: &ScalarField, params: &EnergyParams) -> Result<Vec<f64>> {
    Ok(gradient_parts(spec, u, params)?.gradient)
}

/// Gradient divided by the nodal weights (the `L^2` representative).
pub fn scaled_gradient(grid: &Grid, gradient: &[f64]) -> Vec<f64> {
    grid.free_nodes().iter().zip(gradient).map(|(&k, g)| g / grid.weight(k)).collect()
}

/// `| mean |f_p|^(p/(p-1)) - 1 |`; 0 when `e_p = 0`.
pub fn normalization_residual(grid: &Grid, m: &MultiplierSet, p: f64) -> f64 {
    if m.degenerate {
        return 0.0;
    }
    let q = p / (p - 1.0);
    let mean = measured_mean(grid, m.f_p.values(), q).powf(q);
    (mean - 1.0).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityResidual {
    /// `|sum w f S - |Omega| e| / (|Omega| e)`.
    pub relative: f64,
    /// `max |S'_u u - g - S(u)| / (1 + |S(u)|)` with `g = -b + u b_y + Du . b_z`.
    pub nodewise_identity: f64,
}

pub fn duality_identity_residual(spec: &ProblemSpec, u: &ScalarField, m: &MultiplierSet) -> Result<DualityResidual> {
    let g = spec.grid();
    let s = spec.eval_s(u)?;
    let vol = g.measured_volume();
    let relative = if m.degenerate {
        0.0
    } else {
        let pairing: f64 = g
            .measured_nodes()
            .iter()
            .map(|&k| g.weight(k) * m.f_p.values()[k] * s.values()[k])
            .sum();
        (pairing - vol * m.e_p).abs() / (vol * m.e_p)
    };
    let lin = spec.linearized_apply(u, u)?;
    let partials = spec.partials(u)?;
    let du = crate::grid::gradient(u);
    let mut nodewise: f64 = 0.0;
    for &k in g.measured_nodes() {
        let p = &partials[k];
        let gp = -p.b + u.values()[k] * p.by + du[k][0] * p.bz[0] + du[k][1] * p.bz[1];
        let d = (lin.values()[k] - gp - s.values()[k]).abs();
        let scale = 1.0 + s.values()[k].abs() + gp.abs() + lin.values()[k].abs();
        nodewise = nodewise.max(d / scale);
    }
    Ok(DualityResidual {
        relative,
        nodewise_identity: nodewise,
    })
}
