//! Boundary-layer corrector `v = u0 + rho^2 h / lambda` that matches a target
//! for the linearised operator near the boundary.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::ScalarField;
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollarError {
    pub radius: f64,
    /// `max |S_u' v - g|` over nodes within `radius` of the boundary.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorReport {
    pub v: ScalarField,
    /// Nodes where `2 A : D rho (x) D rho` fell below the ellipticity floor.
    pub floor_nodes: usize,
    pub collars: Vec<CollarError>,
}

/// Cubic smooth minimum, exact once `|a - b| >= k`; returns the value and
/// the weights of `a` and `b` in its gradient.
fn smooth_min(a: f64, b: f64, k: f64) -> (f64, f64, f64) {
    let t = (k - (a - b).abs()).max(0.0) / k;
    let (m, wa) = if a <= b {
        (a, 1.0 - 0.5 * t * t)
    } else {
        (b, 0.5 * t * t)
    };
    (m - k * t * t * t / 6.0, wa, 1.0 - wa)
}

/// Smoothed distance to the box boundary and its gradient, blended over
/// width `k` where faces meet.
pub fn smoothed_distance(extent: &[f64], x: [f64; 2], k: f64) -> (f64, [f64; 2]) {
    let mut rho = x[0];
    let mut grad = [1.0, 0.0];
    let faces = (0..extent.len()).flat_map(|d| {
        let mut lo = [0.0; 2];
        lo[d] = 1.0;
        let mut hi = [0.0; 2];
        hi[d] = -1.0;
        [(x[d], lo), (extent[d] - x[d], hi)]
    });
    for (i, (dist, n)) in faces.enumerate() {
        if i == 0 {
            continue;
        }
        let (m, wa, wb) = smooth_min(rho, dist, k);
        rho = m;
        grad = [wa * grad[0] + wb * n[0], wa * grad[1] + wb * n[1]];
    }
    (rho, grad)
}

pub fn boundary_corrector(spec: &ProblemSpec, g_target: &ScalarField, u: &ScalarField) -> Result<CorrectorReport> {
    let g = spec.grid();
    let u0 = spec.boundary().u0();
    let width = 3.0 * g.h_min();
    let floor = spec.coefficient().lambda();
    let s0 = spec.linearized_apply(u, u0)?;
    let mut floor_nodes = 0;
    let values: Vec<f64> = (0..g.node_count())
        .map(|k| {
            let (rho, dr) = smoothed_distance(g.extent(), g.coords(k), width);
            let lambda = 2.0 * spec.coefficient().at(k).quad(dr);
            let lambda = if lambda < floor {
                floor_nodes += 1;
                floor
            } else {
                lambda
            };
            let h = g_target.values()[k] - s0.values()[k];
            u0.values()[k] + rho * rho * h / lambda
        })
        .collect();
    let v = ScalarField::new(g.clone(), values)?;
    let lv = spec.linearized_apply(u, &v)?;
    let h = g.h_min();
    let collars = [2.0, 4.0, 8.0]
        .iter()
        .map(|&m| {
            let radius = m * h;
            let error = (0..g.node_count())
                .filter(|&k| g.boundary_distance(k) <= radius * (1.0 + 1e-12))
                .map(|k| (lv.values()[k] - g_target.values()[k]).abs())
                .fold(0.0, f64::max);
            CollarError { radius, error }
        })
        .collect();
    Ok(CorrectorReport { v, floor_nodes, collars })
}
