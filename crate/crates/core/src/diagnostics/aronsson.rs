//! `S(u) D(S(u))`, which vanishes for extremals with `|S(u)|` locally constant.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Deriv, ScalarField};
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct AronssonResidual {
    /// `max |S| |D S| / (e^2 / h_min)` over free nodes, `e = max |S|`.
    pub value: f64,
    /// Node where the maximum is attained.
    pub node: Option<usize>,
    /// Normalised nodal density, zero off the free nodes.
    pub density: ScalarField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AronssonSummary {
    pub value: f64,
    pub node: Option<usize>,
}

impl AronssonResidual {
    pub fn summary(&self) -> AronssonSummary {
        AronssonSummary {
            value: self.value,
            node: self.node,
        }
    }
}

pub fn aronsson_residual(spec: &ProblemSpec, u: &ScalarField) -> Result<AronssonResidual> {
    let g = spec.grid();
    let s = spec.eval_s(u)?;
    let sv = s.values();
    let e = g.measured_nodes().iter().map(|&k| sv[k].abs()).fold(0.0, f64::max);
    let mut density = vec![0.0; g.node_count()];
    let (mut value, mut node) = (0.0_f64, None);
    if e > 0.0 {
        let norm = e * e / g.h_min();
        let derivs = if g.dim() == 1 { &[Deriv::X][..] } else { &[Deriv::X, Deriv::Y][..] };
        for &k in g.free_nodes() {
            let slope: f64 = derivs
                .iter()
                .map(|&d| {
                    let st = g.stencil(k, d);
                    st.iter().map(|&(j, c)| c * sv[j]).sum::<f64>().powi(2)
                })
                .sum::<f64>()
                .sqrt();
            let r = sv[k].abs() * slope / norm;
            density[k] = r;
            if r > value {
                value = r;
                node = Some(k);
            }
        }
    }
    Ok(AronssonResidual {
        value,
        node,
        density: ScalarField::new(g.clone(), density)?,
    })
}
