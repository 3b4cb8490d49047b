use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::oracle::oracle_1d;
use crate::error::{Error, Result};
use crate::grid::{apply_stencil, Deriv, Grid, NodeClass, ScalarField};

/// Named extensions `u0` of the clamped boundary data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundaryPreset {
    Zero,
    /// `u0 = c0 + cx x + cy y`.
    Affine {
        #[serde(default)]
        c0: f64,
        #[serde(default)]
        cx: f64,
        #[serde(default)]
        cy: f64,
    },
    /// Full quadratic polynomial in `(x, y)`.
    Quadratic {
        #[serde(default)]
        c0: f64,
        #[serde(default)]
        cx: f64,
        #[serde(default)]
        cy: f64,
        #[serde(default)]
        cxx: f64,
        #[serde(default)]
        cxy: f64,
        #[serde(default)]
        cyy: f64,
    },
    /// One dimension: cubic Hermite extension of `u(0) = u'(0) = 0`,
    /// `u(L) = a`, `u'(L) = b`.
    Hermite { a: f64, b: f64 },
    /// One dimension on `(0, 1)`: the closed-form bang-bang extremal for the
    /// same data as `Hermite`.
    Oracle { a: f64, b: f64 },
    /// `amplitude * prod_d sin(pi x_d / L_d)`: zero trace, nonzero normal derivative.
    Sine { amplitude: f64 },
}

impl BoundaryPreset {
    /// Value and gradient of the extension at `x`.
    fn eval(&self, grid: &Grid, x: [f64; 2]) -> Result<(f64, [f64; 2])> {
        let dim = grid.dim();
        let ext = grid.extent();
        Ok(match *self {
            Self::Zero => (0.0, [0.0; 2]),
            Self::Affine { c0, cx, cy } => {
                let cy = if dim == 1 { 0.0 } else { cy };
                (c0 + cx * x[0] + cy * x[1], [cx, cy])
            }
            Self::Quadratic { c0, cx, cy, cxx, cxy, cyy } => {
                let (cy, cxy, cyy) = if dim == 1 { (0.0, 0.0, 0.0) } else { (cy, cxy, cyy) };
                (
                    c0 + cx * x[0] + cy * x[1] + cxx * x[0] * x[0] + cxy * x[0] * x[1] + cyy * x[1] * x[1],
                    [cx + 2.0 * cxx * x[0] + cxy * x[1], cy + cxy * x[0] + 2.0 * cyy * x[1]],
                )
            }
            Self::Hermite { a, b } => {
                if dim != 1 {
                    return Err(Error::InvalidParameter("hermite boundary data is one-dimensional".into()));
                }
                let l = ext[0];
                let t = x[0] / l;
                let h01 = 3.0 * t * t - 2.0 * t * t * t;
                let h11 = t * t * t - t * t;
                let dh01 = (6.0 * t - 6.0 * t * t) / l;
                let dh11 = (3.0 * t * t - 2.0 * t) / l;
                (a * h01 + b * l * h11, [a * dh01 + b * l * dh11, 0.0])
            }
            Self::Oracle { a, b } => {
                if dim != 1 || (ext[0] - 1.0).abs() > 1e-15 {
                    return Err(Error::InvalidParameter("oracle boundary data lives on (0, 1)".into()));
                }
                let o = oracle_1d(a, b)?;
                (o.u(x[0]), [o.du(x[0]), 0.0])
            }
            Self::Sine { amplitude } => {
                use std::f64::consts::PI;
                let (sx, cx) = (PI * x[0] / ext[0]).sin_cos();
                if dim == 1 {
                    (amplitude * sx, [amplitude * PI / ext[0] * cx, 0.0])
                } else {
                    let (sy, cy) = (PI * x[1] / ext[1]).sin_cos();
                    (
                        amplitude * sx * sy,
                        [amplitude * PI / ext[0] * cx * sy, amplitude * PI / ext[1] * sx * cy],
                    )
                }
            }
        })
    }
}

/// Clamped boundary data: the extension `u0`, its trace and its outward
/// normal derivative on the boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    u0: ScalarField,
    boundary_nodes: Vec<usize>,
    trace: Vec<f64>,
    normal: Vec<f64>,
}

impl BoundaryData {
    pub fn from_preset(grid: Arc<Grid>, preset: &BoundaryPreset) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.node_count());
        let mut grads = Vec::with_capacity(grid.node_count());
        for k in 0..grid.node_count() {
            let (v, d) = preset.eval(&grid, grid.coords(k))?;
            values.push(v);
            grads.push(d);
        }
        let u0 = ScalarField::new(grid.clone(), values)?;
        let boundary_nodes: Vec<usize> =
            (0..grid.node_count()).filter(|&k| grid.class(k) == NodeClass::Boundary).collect();
        let trace = boundary_nodes.iter().map(|&k| u0.values()[k]).collect();
        let normal = boundary_nodes
            .iter()
            .map(|&k| {
                let nu = grid.outward_normal(k);
                grads[k][0] * nu[0] + grads[k][1] * nu[1]
            })
            .collect();
        Ok(Self {
            u0,
            boundary_nodes,
            trace,
            normal,
        })
    }

    /// Data read off a full nodal table; the normal derivative comes from the
    /// one-sided stencils of the table itself.
    pub fn from_field(u0: ScalarField) -> Self {
        let grid = u0.grid().clone();
        let boundary_nodes: Vec<usize> =
            (0..grid.node_count()).filter(|&k| grid.class(k) == NodeClass::Boundary).collect();
        let trace = boundary_nodes.iter().map(|&k| u0.values()[k]).collect();
        let normal = boundary_nodes.iter().map(|&k| one_sided_normal(&u0, k)).collect();
        Self {
            u0,
            boundary_nodes,
            trace,
            normal,
        }
    }

    pub fn u0(&self) -> &ScalarField {
        &self.u0
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.u0.grid()
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn normal_derivative(&self) -> &[f64] {
        &self.normal
    }

    /// Largest mismatch between the stored normal derivative and the one-sided
    /// derivative of `u0` itself, relative to `1 + |d_nu u0|`.
    pub fn consistency_defect(&self) -> f64 {
        self.boundary_nodes
            .iter()
            .zip(&self.normal)
            .map(|(&k, &n)| (one_sided_normal(&self.u0, k) - n).abs() / (1.0 + n.abs()))
            .fold(0.0, f64::max)
    }

    /// Overwrites both clamped layers of `values` with `u0`.
    pub fn clamp(&self, values: &mut [f64]) {
        let g = self.grid();
        for (k, v) in values.iter_mut().enumerate() {
            if g.class(k) != NodeClass::Interior {
                *v = self.u0.values()[k];
            }
        }
    }

    pub fn clamped(&self, field: &ScalarField) -> Result<ScalarField> {
        let mut v = field.values().to_vec();
        self.clamp(&mut v);
        field.with_values(v)
    }

    pub fn is_clamped(&self, field: &ScalarField) -> bool {
        let g = self.grid();
        (0..g.node_count())
            .filter(|&k| g.class(k) != NodeClass::Interior)
            .all(|k| field.values()[k] == self.u0.values()[k])
    }

    /// Full field from free-node values.
    pub fn assemble(&self, free: &[f64]) -> Result<ScalarField> {
        let g = self.grid();
        let mut v = self.u0.values().to_vec();
        for (slot, &k) in g.free_nodes().iter().enumerate() {
            v[k] = free[slot];
        }
        self.u0.with_values(v)
    }
}

fn one_sided_normal(u: &ScalarField, k: usize) -> f64 {
    let g = u.grid();
    let nu = g.outward_normal(k);
    let dx = apply_stencil(&g.stencil(k, Deriv::X), u.values());
    let dy = apply_stencil(&g.stencil(k, Deriv::Y), u.values());
    dx * nu[0] + dy * nu[1]
}
