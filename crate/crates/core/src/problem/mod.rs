//! Problem data and the nodal operator `S(u) = A : D^2 u + b(x, u, Du)`.

mod admissibility;
mod boundary;
mod coefficient;
mod reaction;

use std::sync::Arc;

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};

pub use admissibility::{adaptive_simpson, admissibility_probe, antiderivative_numeric, AdmissibilityReport, AlphaSample};
pub use boundary::{BoundaryData, BoundaryPreset};
pub use coefficient::{CoefficientField, CoefficientModel};
pub use reaction::{Partials, Reaction, ReactionTag, ScalarReaction};

use crate::error::{Error, Result};
use crate::grid::{gradient, hessian, Deriv, Grid, ScalarField};
use crate::linalg::CsrMatrix;

type Row = ArrayVec<(usize, f64), 32>;

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    grid: Arc<Grid>,
    coefficient: CoefficientField,
    reaction: Reaction,
    boundary: BoundaryData,
}

/// Sampled bound on the second-order Taylor remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorBound {
    pub c2: f64,
    pub radius: f64,
    pub points_per_axis: usize,
}

impl ProblemSpec {
    pub fn new(coefficient: CoefficientModel, reaction: Reaction, boundary: BoundaryData) -> Result<Self> {
        reaction.validate()?;
        let grid = boundary.grid().clone();
        let coefficient = CoefficientField::new(&grid, coefficient)?;
        Ok(Self {
            grid,
            coefficient,
            reaction,
            boundary,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn coefficient(&self) -> &CoefficientField {
        &self.coefficient
    }

    pub fn reaction(&self) -> &Reaction {
        &self.reaction
    }

    pub fn boundary(&self) -> &BoundaryData {
        &self.boundary
    }

    fn check(&self, u: &ScalarField) -> Result<()> {
        if !Arc::ptr_eq(u.grid(), &self.grid) && **u.grid() != *self.grid {
            return Err(Error::InvalidGrid("field lives on a different grid".into()));
        }
        Ok(())
    }

    /// `b` and its partials at every node, evaluated at `(x, u, Du)`.
    pub fn partials(&self, u: &ScalarField) -> Result<Vec<Partials>> {
        self.check(u)?;
        let du = gradient(u);
        (0..self.grid.node_count())
            .map(|k| {
                let x = self.grid.coords(k);
                let p = self.reaction.partials(x, u.values()[k], du[k]);
                if p.is_finite() {
                    Ok(p)
                } else {
                    Err(Error::Domain { node: k, x })
                }
            })
            .collect()
    }

    /// `A : D^2 u` at every node.
    pub fn principal(&self, u: &ScalarField) -> ScalarField {
        let hess = hessian(u);
        let values = hess
            .iter()
            .enumerate()
            .map(|(k, h)| self.coefficient.at(k).contract(h))
            .collect();
        ScalarField::new(u.grid().clone(), values).expect("finite principal part")
    }

    /// Nodal `S(u)`; boundary nodes use the one-sided stencils.
    pub fn eval_s(&self, u: &ScalarField) -> Result<ScalarField> {
        self.check(u)?;
        let du = gradient(u);
        let principal = self.principal(u);
        let mut values = principal.into_values();
        for (k, v) in values.iter_mut().enumerate() {
            let x = self.grid.coords(k);
            let b = self.reaction.eval(x, u.values()[k], du[k]);
            *v += b;
            if !v.is_finite() {
                return Err(Error::Domain { node: k, x });
            }
        }
        ScalarField::new(self.grid.clone(), values)
    }

    /// `(k, c)` pairs of the linearised operator at node `k`; `partials = None`
    /// gives the principal part alone.
    fn row(&self, k: usize, partials: Option<&Partials>) -> Row {
        let g = &self.grid;
        let a = self.coefficient.at(k);
        let mut row = Row::new();
        let mut push = |stencil: &[(usize, f64)], c: f64| {
            if c != 0.0 {
                for &(j, s) in stencil {
                    row.push((j, c * s));
                }
            }
        };
        push(&g.stencil(k, Deriv::XX), a.xx);
        push(&g.stencil(k, Deriv::XY), 2.0 * a.xy);
        push(&g.stencil(k, Deriv::YY), a.yy);
        if let Some(p) = partials {
            push(&g.stencil(k, Deriv::X), p.bz[0]);
            push(&g.stencil(k, Deriv::Y), p.bz[1]);
            push(&[(k, 1.0)], p.by);
        }
        row
    }

    fn assemble(&self, partials: Option<&[Partials]>) -> CsrMatrix {
        let g = &self.grid;
        let rows = g
            .measured_nodes()
            .iter()
            .map(|&k| {
                self.row(k, partials.map(|p| &p[k]))
                    .into_iter()
                    .filter_map(|(j, c)| g.free_slot(j).map(|s| (s, c)))
                    .collect()
            })
            .collect();
        CsrMatrix::from_rows(g.free_nodes().len(), rows)
    }

    /// Linearisation of `S` at `u`: rows are measured nodes, columns free nodes.
    pub fn assemble_linearization(&self, u: &ScalarField) -> Result<CsrMatrix> {
        let p = self.partials(u)?;
        Ok(self.assemble(Some(&p)))
    }

    /// `A : D^2` with the same row and column sets.
    pub fn assemble_principal(&self) -> CsrMatrix {
        self.assemble(None)
    }

    /// `L_u phi = A : D^2 phi + b_z . D phi + b_y phi` at every node with the
    /// full stencils (clamped values of `phi` included).
    pub fn linearized_apply(&self, u: &ScalarField, phi: &ScalarField) -> Result<ScalarField> {
        self.check(phi)?;
        let p = self.partials(u)?;
        let values = (0..self.grid.node_count())
            .map(|k| self.row(k, Some(&p[k])).iter().map(|&(j, c)| c * phi.values()[j]).sum())
            .collect();
        ScalarField::new(self.grid.clone(), values)
    }

    /// `W^{-1} L_u^T W f` on free nodes and zero elsewhere, so that
    /// `sum_free w (adjoint f) phi = sum_measured w f (L_u phi)` for every `phi`
    /// supported on free nodes.
    pub fn apply_adjoint(&self, u: &ScalarField, f: &ScalarField) -> Result<ScalarField> {
        let l = self.assemble_linearization(u)?;
        Ok(self.adjoint_with(&l, f))
    }

    pub(crate) fn adjoint_with(&self, l: &CsrMatrix, f: &ScalarField) -> ScalarField {
        let g = &self.grid;
        let wf: Vec<f64> = g.measured_nodes().iter().map(|&k| g.weight(k) * f.values()[k]).collect();
        let t = l.tr_mul_vec(&wf);
        let mut out = vec![0.0; g.node_count()];
        for (slot, &k) in g.free_nodes().iter().enumerate() {
            out[k] = t[slot] / g.weight(k);
        }
        ScalarField::new(g.clone(), out).expect("finite adjoint")
    }

    /// `1/2 max (|b_yy| + 2|b_yz| + |b_zz|)` over measured nodes and the box
    /// `|y - u| <= r`, `|z - Du|_inf <= r`, sampled on `points_per_axis^(1+dim)` lattice points.
    pub fn taylor_remainder_bound(&self, u: &ScalarField, radius: f64, points_per_axis: usize) -> Result<TaylorBound> {
        self.check(u)?;
        let m = points_per_axis.max(2);
        let offsets: Vec<f64> = (0..m).map(|i| radius * (2.0 * i as f64 / (m - 1) as f64 - 1.0)).collect();
        let du = gradient(u);
        let dim = self.grid.dim();
        let z_offsets: Vec<[f64; 2]> = if dim == 1 {
            offsets.iter().map(|&a| [a, 0.0]).collect()
        } else {
            offsets.iter().flat_map(|&a| offsets.iter().map(move |&b| [a, b])).collect()
        };
        let mut worst = 0.0_f64;
        for &k in self.grid.measured_nodes() {
            let x = self.grid.coords(k);
            for &dy in &offsets {
                for dz in &z_offsets {
                    let p = self
                        .reaction
                        .partials(x, u.values()[k] + dy, [du[k][0] + dz[0], du[k][1] + dz[1]]);
                    if !p.is_finite() {
                        return Err(Error::Domain { node: k, x });
                    }
                    worst = worst.max(p.second_order_size());
                }
            }
        }
        Ok(TaylorBound {
            c2: 0.5 * worst,
            radius,
            points_per_axis: m,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn spec_2d(n: usize, reaction: Reaction, coef: CoefficientModel, preset: BoundaryPreset) -> ProblemSpec {
        let g = Arc::new(Grid::rectangle([1.0, 1.0], [n, n]).unwrap());
        ProblemSpec::new(coef, reaction, BoundaryData::from_preset(g, &preset).unwrap()).unwrap()
    }

    #[test]
    fn laplacian_of_half_square_is_one() {
        let s = spec_2d(9, Reaction::Zero, CoefficientModel::Identity, BoundaryPreset::Zero);
        let u = ScalarField::from_fn(s.grid().clone(), |x| 0.5 * x[0] * x[0]).unwrap();
        let v = s.eval_s(&u).unwrap();
        assert!(v.values().iter().all(|&y| (y - 1.0).abs() < 1e-10));
    }

    #[test]
    fn neg_cube_of_constant_two() {
        let s = spec_2d(
            7,
            Reaction::GOfU { g: ScalarReaction::NegCube },
            CoefficientModel::Identity,
            BoundaryPreset::Affine { c0: 2.0, cx: 0.0, cy: 0.0 },
        );
        let v = s.eval_s(s.boundary().u0()).unwrap();
        assert!(v.values().iter().all(|&y| y == -8.0));
        let l = s.linearized_apply(s.boundary().u0(), &ScalarField::constant(s.grid().clone(), 1.0)).unwrap();
        assert!(l.values().iter().all(|&y| (y + 12.0).abs() < 1e-9));
    }

    #[test]
    fn anisotropic_drift_expansion() {
        let s = spec_2d(
            17,
            Reaction::Linear { c0: 0.0, cy: 0.0, cz: [1.0, 0.0] },
            CoefficientModel::Constant { xx: 2.0, xy: 0.0, yy: 1.0 },
            BoundaryPreset::Zero,
        );
        let u = ScalarField::from_fn(s.grid().clone(), |x| x[0] * x[0] + x[1]).unwrap();
        let v = s.eval_s(&u).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let k = rng.random_range(0..s.grid().node_count());
            let x = s.grid().coords(k);
            assert!((v.values()[k] - (4.0 + 2.0 * x[0])).abs() < 1e-10);
        }
    }

    #[test]
    fn matrix_rows_match_full_stencil_on_clamped_free_fields() {
        let s = spec_2d(
            8,
            Reaction::SineGradient { scale: 0.7 },
            CoefficientModel::Radial { amplitude: 0.3 },
            BoundaryPreset::Sine { amplitude: 0.5 },
        );
        let g = s.grid().clone();
        let u = s.boundary().u0().clone();
        let free: Vec<f64> = (0..g.free_nodes().len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut phi = vec![0.0; g.node_count()];
        for (slot, &k) in g.free_nodes().iter().enumerate() {
            phi[k] = free[slot];
        }
        let l = s.assemble_linearization(&u).unwrap();
        let lm = l.mul_vec(&free);
        let full = s.linearized_apply(&u, &ScalarField::new(g.clone(), phi).unwrap()).unwrap();
        for (r, &k) in g.measured_nodes().iter().enumerate() {
            assert!((lm[r] - full.values()[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn taylor_bound_cases() {
        let s = spec_2d(6, Reaction::Zero, CoefficientModel::Identity, BoundaryPreset::Zero);
        let z = ScalarField::zeros(s.grid().clone());
        assert_eq!(s.taylor_remainder_bound(&z, 1.0, 3).unwrap().c2, 0.0);
        let c = spec_2d(6, Reaction::GOfU { g: ScalarReaction::NegCube }, CoefficientModel::Identity, BoundaryPreset::Zero);
        assert_eq!(c.taylor_remainder_bound(&z, 1.0, 3).unwrap().c2, 3.0);
    }
}
