//! Nodewise and weak checks of `|f| S(u) = e f`, `S_u^* f = 0`.

use serde::{Deserialize, Serialize};

use super::bumps::radial_family;
use crate::error::Result;
use crate::grid::ScalarField;
use crate::problem::ProblemSpec;

/// Nodes with `|f| > SUPPORT_FLOOR * ||f||_inf` form the effective support of `f`.
pub const SUPPORT_FLOOR: f64 = 1e-3;
pub const TEST_BASIS_SIZE: usize = 50;
pub const TEST_BASIS_SEED: u64 = 0x0b5e_55ed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElCheck {
    pub e: f64,
    /// `max | |f| S - e f | / (e ||f||_inf)`.
    pub el1: f64,
    /// `max | |S| - e | / e` on the effective support of `f`.
    pub flatness: f64,
    /// Largest normalised pairing of `f` with `S_u' phi_j` over the test basis.
    pub el2: f64,
    /// Nodes with `f S < 0`.
    pub sign_violations: usize,
    pub support_nodes: usize,
    /// `f` vanishes identically.
    pub degenerate: bool,
}

pub fn check_el_system(spec: &ProblemSpec, u: &ScalarField, f: &ScalarField, e: f64) -> Result<ElCheck> {
    let g = spec.grid();
    let basis: Vec<ScalarField> = radial_family(g, TEST_BASIS_SIZE, TEST_BASIS_SEED)?
        .iter()
        .map(|b| b.sample(g))
        .collect();
    check_el_system_with(spec, u, f, e, &basis)
}

/// As [`check_el_system`] with a caller-supplied set of clamped test fields.
pub fn check_el_system_with(
    spec: &ProblemSpec,
    u: &ScalarField,
    f: &ScalarField,
    e: f64,
    basis: &[ScalarField],
) -> Result<ElCheck> {
    let g = spec.grid();
    let s = spec.eval_s(u)?;
    let measured = g.measured_nodes();
    let fmax = measured.iter().map(|&k| f.values()[k].abs()).fold(0.0, f64::max);
    if fmax == 0.0 {
        return Ok(ElCheck {
            e,
            el1: 0.0,
            flatness: 0.0,
            el2: 0.0,
            sign_violations: 0,
            support_nodes: 0,
            degenerate: true,
        });
    }
    let e_scale = if e > 0.0 { e } else { 1.0 };
    let (mut el1, mut flatness) = (0.0_f64, 0.0_f64);
    let (mut violations, mut support) = (0usize, 0usize);
    for &k in measured {
        let (fk, sk) = (f.values()[k], s.values()[k]);
        el1 = el1.max((fk.abs() * sk - e * fk).abs() / (e_scale * fmax));
        if fk * sk < 0.0 {
            violations += 1;
        }
        if fk.abs() > SUPPORT_FLOOR * fmax {
            support += 1;
            flatness = flatness.max((sk.abs() - e).abs() / e_scale);
        }
    }
    let mass: f64 = measured.iter().map(|&k| g.weight(k) * f.values()[k].abs()).sum();
    let mut el2 = 0.0_f64;
    for phi in basis {
        let lphi = spec.linearized_apply(u, phi)?;
        let size = measured.iter().map(|&k| lphi.values()[k].abs()).fold(0.0, f64::max);
        if size == 0.0 {
            continue;
        }
        let pairing: f64 = measured
            .iter()
            .map(|&k| g.weight(k) * f.values()[k] * lphi.values()[k])
            .sum();
        el2 = el2.max(pairing.abs() / (mass * size));
    }
    Ok(ElCheck {
        e,
        el1,
        flatness,
        el2,
        sign_violations: violations,
        support_nodes: support,
        degenerate: false,
    })
}

/// `|sum w f S - e sum w |f|| / (e sum w |f|)`, the pairing identity implied
/// by `|f| S = e f`.
pub fn limit_duality_residual(spec: &ProblemSpec, u: &ScalarField, f: &ScalarField, e: f64) -> Result<f64> {
    let g = spec.grid();
    let s = spec.eval_s(u)?;
    let (mut pairing, mut mass) = (0.0, 0.0);
    for &k in g.measured_nodes() {
        pairing += g.weight(k) * f.values()[k] * s.values()[k];
        mass += g.weight(k) * f.values()[k].abs();
    }
    if mass == 0.0 || e == 0.0 {
        return Ok(0.0);
    }
    Ok((pairing - e * mass).abs() / (e * mass))
}

/// Share of the `L^1` mass of `f` carried by the clamped layer next to the boundary.
pub fn boundary_layer_mass(f: &ScalarField) -> f64 {
    use crate::grid::NodeClass;
    let g = f.grid();
    let (mut layer, mut total) = (0.0, 0.0);
    for &k in g.measured_nodes() {
        let m = g.weight(k) * f.values()[k].abs();
        total += m;
        if g.class(k) == NodeClass::BoundaryAdjacent {
            layer += m;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        layer / total
    }
}
