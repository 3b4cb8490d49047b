//! Multiplier for the zero-minimum case: the adjoint boundary-value problem
//! with `f = 1` on the clamped layers, or a kernel vector when it is singular.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{NodeClass, ScalarField};
use crate::linalg::{condition_estimate, BandMatrix, CsrMatrix};
use crate::problem::ProblemSpec;

pub const SINGULAR_CONDITION: f64 = 1e14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelBranch {
    BoundaryValue,
    SingularVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelResult {
    /// Normalised to unit `L^1` mass.
    pub f: ScalarField,
    pub branch: KernelBranch,
    pub condition: f64,
    /// `||adjoint f||_inf` on free nodes relative to `||f||_inf` times the
    /// operator's absolute row scale.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// `L_F^T` restricted to free rows and columns, as a band matrix.
fn free_transpose(spec: &ProblemSpec, l: &CsrMatrix) -> BandMatrix {
    let g = spec.grid();
    let measured = g.measured_nodes();
    let mut entries = Vec::new();
    let (mut kl, mut ku) = (0usize, 0usize);
    for (r, &k) in measured.iter().enumerate() {
        let Some(i) = g.free_slot(k) else { continue };
        for (j, v) in l.row(r) {
            // transpose: entry (j, i)
            entries.push((j, i, v));
            if j > i {
                kl = kl.max(j - i);
            } else {
                ku = ku.max(i - j);
            }
        }
    }
    let mut m = BandMatrix::zeros(l.cols(), kl, ku);
    for (a, b, v) in entries {
        m.add(a, b, v);
    }
    m
}

fn relative_residual(spec: &ProblemSpec, l: &CsrMatrix, f: &ScalarField) -> f64 {
    let g = spec.grid();
    let adj = spec.adjoint_with(l, f);
    let w: Vec<f64> = g.measured_nodes().iter().map(|&k| g.weight(k)).collect();
    let abs_scale = l.tr_abs_mul_vec(&w);
    let row_scale = g
        .free_nodes()
        .iter()
        .zip(&abs_scale)
        .map(|(&k, s)| s / g.weight(k))
        .fold(0.0_f64, f64::max);
    let res = g.free_nodes().iter().map(|&k| adj.values()[k].abs()).fold(0.0_f64, f64::max);
    let fmax = f.max_abs();
    if fmax == 0.0 || row_scale == 0.0 {
        return 0.0;
    }
    res / (fmax * row_scale)
}

fn l1_normalised(spec: &ProblemSpec, mut values: Vec<f64>) -> Result<ScalarField> {
    let g = spec.grid();
    for (k, v) in values.iter_mut().enumerate() {
        if g.class(k) == NodeClass::Boundary {
            *v = 0.0;
        }
    }
    let sum: f64 = g.measured_nodes().iter().map(|&k| values[k] * g.weight(k)).sum();
    if sum < 0.0 {
        values.iter_mut().for_each(|v| *v = -*v);
    }
    let mass: f64 = g.measured_nodes().iter().map(|&k| values[k].abs() * g.weight(k)).sum();
    if mass > 0.0 {
        values.iter_mut().for_each(|v| *v /= mass);
    }
    ScalarField::new(g.clone(), values)
}

pub fn solve_adjoint_kernel(spec: &ProblemSpec, u: &ScalarField) -> Result<KernelResult> {
    let g = spec.grid();
    let l = spec.assemble_linearization(u)?;
    let m = free_transpose(spec, &l);
    let free = g.free_nodes();

    let (lu, condition) = match m.clone().factor() {
        Ok(lu) => {
            let c = condition_estimate(&m, &lu);
            (Some(lu), c)
        }
        Err(_) => (None, f64::INFINITY),
    };
    if let Some(lu) = lu.filter(|_| condition <= SINGULAR_CONDITION) {
        // sum_{measured i} L_ij w_i f_i = 0 for free j; clamped layers carry f = 1
        let mut rhs = vec![0.0; free.len()];
        for (r, &k) in g.measured_nodes().iter().enumerate() {
            if g.class(k) == NodeClass::BoundaryAdjacent {
                for (j, v) in l.row(r) {
                    rhs[j] -= v * g.weight(k);
                }
            }
        }
        let z = lu.solve(&rhs);
        let mut values = vec![1.0; g.node_count()];
        for (slot, &k) in free.iter().enumerate() {
            values[k] = z[slot] / g.weight(k);
        }
        let f = l1_normalised(spec, values)?;
        let residual = relative_residual(spec, &l, &f);
        return Ok(KernelResult {
            f,
            branch: KernelBranch::BoundaryValue,
            condition,
            residual,
            converged: true,
            iterations: 0,
        });
    }

    // smallest singular vector of L_F^T W_F by inverse iteration on M^T M
    let norm = m.norm1().max(f64::MIN_POSITIVE);
    let mut shifted = m.clone();
    for i in 0..shifted.size() {
        shifted.add(i, i, 1e-12 * norm);
    }
    let lu = shifted.factor()?;
    let n = free.len();
    let mut z: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.618).sin()).collect();
    let normalise = |z: &mut Vec<f64>| {
        let s = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        z.iter_mut().for_each(|v| *v /= s);
    };
    normalise(&mut z);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=200 {
        iterations = it;
        let mut next = lu.solve(&lu.solve_transpose(&z));
        normalise(&mut next);
        let dot: f64 = next.iter().zip(&z).map(|(a, b)| a * b).sum();
        if dot < 0.0 {
            next.iter_mut().for_each(|v| *v = -*v);
        }
        let change = next.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0_f64, f64::max);
        z = next;
        if change <= 1e-13 {
            converged = true;
            break;
        }
    }
    let mut values = vec![0.0; g.node_count()];
    for (slot, &k) in free.iter().enumerate() {
        values[k] = z[slot] / g.weight(k);
    }
    let f = l1_normalised(spec, values)?;
    let residual = relative_residual(spec, &l, &f);
    Ok(KernelResult {
        f,
        branch: KernelBranch::SingularVector,
        condition,
        residual,
        converged,
        iterations,
    })
}
