//! Integration-by-parts identities for `S(u) = Laplace u + g(u)`, evaluated by
//! nodal quadrature with one-sided derivative traces on the boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{gradient, Grid, ScalarField};
use crate::problem::{CoefficientModel, ProblemSpec, ScalarReaction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs|` over the sum of the magnitudes of the terms involved.
    pub relative: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyIdentities {
    /// `int |Du|^2 - u g(u) = int_bdry u0 nu . Du0 - int u S(u)`.
    pub energy1: IdentityResidual,
    /// `int (n-2)/2 |Du|^2 - n G(u) = int (x . Du) S(u) - int_bdry (...)`.
    pub energy2: IdentityResidual,
    pub dimension: usize,
    /// The growth-based admissibility argument needs `n >= 3`.
    pub admissibility_applicable: bool,
}

/// `(node, outward normal, arc-length weight)` for the boundary of the box.
fn boundary_quadrature(grid: &Grid) -> Vec<(usize, [f64; 2], f64)> {
    let n = grid.nodes_per_axis();
    if grid.dim() == 1 {
        return vec![(0, [-1.0, 0.0], 1.0), (n[0] - 1, [1.0, 0.0], 1.0)];
    }
    let (hx, hy) = (grid.spacing()[0], grid.spacing()[1]);
    let trap = |i: usize, m: usize, h: f64| if i == 0 || i + 1 == m { 0.5 * h } else { h };
    let mut out = Vec::with_capacity(2 * (n[0] + n[1]));
    for i in 0..n[0] {
        let w = trap(i, n[0], hx);
        out.push((grid.index(i, 0), [0.0, -1.0], w));
        out.push((grid.index(i, n[1] - 1), [0.0, 1.0], w));
    }
    for j in 0..n[1] {
        let w = trap(j, n[1], hy);
        out.push((grid.index(0, j), [-1.0, 0.0], w));
        out.push((grid.index(n[0] - 1, j), [1.0, 0.0], w));
    }
    out
}

fn residual(lhs: f64, rhs: f64, terms: &[f64]) -> IdentityResidual {
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
    IdentityResidual {
        lhs,
        rhs,
        relative: if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale },
    }
}

pub fn energy_identities(spec: &ProblemSpec, u: &ScalarField) -> Result<EnergyIdentities> {
    let g_fn: &ScalarReaction = spec
        .reaction()
        .scalar()
        .ok_or_else(|| Error::InvalidParameter("energy identities need a reaction of the form g(u)".into()))?;
    if *spec.coefficient().model() != CoefficientModel::Identity {
        return Err(Error::InvalidParameter("energy identities need A = I".into()));
    }
    let grid = spec.grid();
    let n = grid.dim() as f64;
    let s = spec.eval_s(u)?;
    let du = gradient(u);
    let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];

    let (mut grad2, mut ug, mut us, mut big_g, mut xs) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 0..grid.node_count() {
        let w = grid.weight(k);
        let (y, d, sk) = (u.values()[k], du[k], s.values()[k]);
        grad2 += w * dot(d, d);
        ug += w * y * g_fn.g(y);
        us += w * y * sk;
        big_g += w * g_fn.antiderivative(y);
        xs += w * dot(grid.coords(k), d) * sk;
    }
    let (mut flux1, mut flux2) = (0.0, 0.0);
    for (k, nu, w) in boundary_quadrature(grid) {
        let (y, d, x) = (u.values()[k], du[k], grid.coords(k));
        flux1 += w * y * dot(nu, d);
        flux2 += w * (dot(x, d) * dot(nu, d) - (0.5 * dot(d, d) - g_fn.antiderivative(y)) * dot(x, nu));
    }
    let energy1 = residual(grad2 - ug, flux1 - us, &[grad2, ug, flux1, us]);
    let lhs2 = 0.5 * (n - 2.0) * grad2 - n * big_g;
    let energy2 = residual(
        lhs2,
        xs - flux2,
        &[0.5 * (n - 2.0) * grad2, n * big_g, xs, flux2],
    );
    Ok(EnergyIdentities {
        energy1,
        energy2,
        dimension: grid.dim(),
        admissibility_applicable: grid.dim() >= 3,
    })
}
